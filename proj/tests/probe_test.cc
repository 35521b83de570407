#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "oracles.h"
#include "relboot/markup.h"
#include "relboot/probe.h"
#include "test_util.h"

using namespace relboot;

namespace {

TokenEmbeddings random_rows(Rng& rng, std::size_t n, std::size_t d) {
  TokenEmbeddings h(n, EmbeddingVector(d));
  for (auto& row : h)
    for (auto& x : row) x = rng.normal();
  return h;
}

std::vector<Example> blob_examples(std::uint64_t seed, std::size_t dim, std::size_t classes,
                                   std::size_t per_class, double spread, double sd) {
  Rng rng(seed);
  std::vector<Example> out;
  for (auto& b : testing::gaussian_blobs(rng, dim, classes, per_class, spread, sd)) {
    Example ex;
    ex.x.summary = b.x;
    ex.relation = b.label;
    out.push_back(std::move(ex));
  }
  return out;
}

// Random examples for all three modes, labels and types drawn uniformly.
std::vector<Example> random_examples(Rng& rng, std::size_t n, std::size_t s_dim, std::size_t e_dim,
                                     std::size_t relations) {
  std::vector<Example> out;
  for (std::size_t i = 0; i < n; ++i) {
    Example ex;
    for (std::size_t d = 0; d < s_dim; ++d) ex.x.summary.push_back(rng.normal());
    for (std::size_t d = 0; d < e_dim; ++d) ex.x.e1.push_back(rng.normal());
    for (std::size_t d = 0; d < e_dim; ++d) ex.x.e2.push_back(rng.normal());
    ex.relation = rng.below(relations);
    ex.type1 = rng.below(kNumEntityTypes);
    ex.type2 = rng.below(kNumEntityTypes);
    out.push_back(std::move(ex));
  }
  return out;
}

std::vector<std::string> labels(std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back("R" + std::to_string(i));
  return out;
}

}  // namespace

TEST_CASE("pooled dimensions") {
  CHECK(pooled_dimension(PoolScheme::kCls, 7) == 7);
  CHECK(pooled_dimension(PoolScheme::kEs, 7) == 14);
  CHECK(pooled_dimension(PoolScheme::kEn, 7) == 14);
  CHECK(pooled_dimension(PoolScheme::kClsEs, 7) == 21);
  CHECK(pooled_dimension(PoolScheme::kClsEn, 7) == 21);
  Rng rng(3);
  auto h = random_rows(rng, 10, 7);
  MarkerPositions m{0, 2, 4, 6, 8};
  for (auto s : {PoolScheme::kCls, PoolScheme::kEs, PoolScheme::kEn, PoolScheme::kClsEs,
                 PoolScheme::kClsEn}) {
    CHECK(pool(h, m, s).size() == pooled_dimension(s, 7));
    CHECK(parse_pool_scheme(to_string(s)) == s);
  }
  CHECK_THROWS_AS(parse_pool_scheme("mean"), std::invalid_argument);
}

TEST_CASE("pooling picks marker rows and span means") {
  TokenEmbeddings h = {{9, 9}, {2, 2}, {4, 4}, {0, 1}, {1, 0}, {5, 7}};
  MarkerPositions m{0, 1, 2, 4, 5};
  CHECK(pool(h, m, PoolScheme::kCls) == EmbeddingVector{9, 9});
  CHECK(pool(h, m, PoolScheme::kEs) == EmbeddingVector{2, 2, 1, 0});
  CHECK(pool(h, m, PoolScheme::kEn) == EmbeddingVector{3, 3, 3, 3.5});
  CHECK(pool(h, m, PoolScheme::kClsEs) == EmbeddingVector{9, 9, 2, 2, 1, 0});
  CHECK(pool(h, m, PoolScheme::kClsEn) == EmbeddingVector{9, 9, 3, 3, 3, 3.5});
  auto [a, b] = entity_vectors(h, m, PoolScheme::kEs);
  CHECK(a == EmbeddingVector{2, 2});
  CHECK(b == EmbeddingVector{1, 0});
  MarkerPositions bad{0, 1, 2, 4, 6};
  CHECK_THROWS_AS(pool(h, bad, PoolScheme::kEn), std::invalid_argument);
}

TEST_CASE("span mean ignores rows outside the entity spans") {
  Rng rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    std::size_t n = 8 + rng.below(10);
    auto h = random_rows(rng, n, 5);
    MarkerPositions m;
    m.cls = 0;
    m.e1_open = 1 + rng.below(2);
    m.e1_close = m.e1_open + 1 + rng.below(2);
    m.e2_open = m.e1_close + 1 + rng.below(2);
    m.e2_close = m.e2_open + 1 + rng.below(n - m.e2_open - 1);
    auto before = pool(h, m, PoolScheme::kEn);
    for (std::size_t i = 0; i < n; ++i) {
      bool inside = (i >= m.e1_open && i <= m.e1_close) || (i >= m.e2_open && i <= m.e2_close);
      if (!inside)
        for (auto& x : h[i]) x += 100.0 * rng.normal();
    }
    CHECK(pool(h, m, PoolScheme::kEn) == before);
  }
}

TEST_CASE("markers located in every markup scheme") {
  auto inst = testing::spouse_sample();
  for (auto kind : {MarkerKind::kES, MarkerKind::kET, MarkerKind::kEST}) {
    for (bool flag : {false, true}) {
      auto toks = split_whitespace(render_markup(inst, {kind, flag}));
      auto m = find_markers(toks);
      CHECK(toks[m.cls] == "[CLS]");
      if (kind == MarkerKind::kET) {
        CHECK(toks[m.e1_open] == "[ET1=PERSON]");
        CHECK(toks[m.e2_close] == "[/ET2=PERSON]");
      } else {
        CHECK(toks[m.e1_open] == "[E1]");
        CHECK(toks[m.e1_close] == "[/E1]");
        CHECK(toks[m.e2_open] == "[E2]");
        CHECK(toks[m.e2_close] == "[/E2]");
      }
      CHECK(m.e1_close - m.e1_open == (kind == MarkerKind::kEST ? 5u : 3u));
    }
  }
  CHECK_THROWS_AS(find_markers({"[CLS]", "a", "[E1]", "b", "[/E1]"}), std::invalid_argument);
  CHECK_THROWS_AS(find_markers({"[E1]", "b", "[/E1]", "[E2]", "c", "[/E2]"}), std::invalid_argument);
}

TEST_CASE("featurize with the stub embedder matches a direct recomputation") {
  StubEmbedder stub(16, 5);
  Rng rng(8);
  std::vector<Instance> insts;
  for (int i = 0; i < 20; ++i) insts.push_back(testing::random_instance(rng, "i" + std::to_string(i)));
  for (auto scheme : {PoolScheme::kCls, PoolScheme::kEn, PoolScheme::kClsEs}) {
    MarkupScheme ms{MarkerKind::kEST, true};
    auto feats = featurize(insts, ms, scheme, stub);
    REQUIRE(feats.size() == insts.size());
    for (std::size_t i = 0; i < insts.size(); ++i) {
      auto text = render_markup(insts[i], ms);
      auto h = stub.embed_tokens({text})[0];
      auto toks = split_whitespace(text);
      REQUIRE(h.size() == toks.size());
      auto m = find_markers(toks);
      CHECK(feats[i].summary.size() == pooled_dimension(scheme, 16));
      if (scheme == PoolScheme::kEn) {
        // Recompute the span mean row by row.
        for (std::size_t d = 0; d < 16; ++d) {
          double s = 0;
          for (std::size_t r = m.e1_open; r <= m.e1_close; ++r) s += h[r][d];
          CHECK(std::abs(feats[i].summary[d] - s / double(m.e1_close - m.e1_open + 1)) < 1e-12);
        }
      } else {
        CHECK(feats[i].summary == pool(h, m, scheme));
      }
    }
  }
}

TEST_CASE("softmax and argmax") {
  std::vector<double> z{1.0, -2.0, 3.5, 0.0};
  auto p = softmax(z);
  double sum = 0;
  for (double v : p) sum += v;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-15));
  auto shifted = z;
  for (auto& v : shifted) v += 1000.0;
  auto q = softmax(shifted);
  for (std::size_t i = 0; i < p.size(); ++i) CHECK(std::abs(p[i] - q[i]) < 1e-15);
  CHECK(argmax({0.2, 0.5, 0.5}) == 1);
  CHECK(argmax({0.25, 0.25, 0.25, 0.25}) == 0);
}

TEST_CASE("analytic gradients agree with central differences") {
  Rng rng(99);
  const std::size_t S = 6, E = 4, R = 3;
  auto data = random_examples(rng, 12, S, E, R);
  for (auto mode : {ProbeMode::kRE, ProbeMode::kMTNoShare, ProbeMode::kMTShare}) {
    CAPTURE(to_string(mode));
    TrainConfig cfg;
    cfg.head_init = 0.3;
    cfg.share_init = 0.5;
    cfg.l2 = 0.01;
    cfg.seed = 4;
    ProbeModel model(mode, PoolScheme::kCls, S, E, labels(R), cfg);
    std::vector<std::vector<double>> grad;
    model.loss_and_gradient(data, grad);
    auto blocks = model.blocks();
    REQUIRE(grad.size() == blocks.size());
    CHECK(blocks.size() == (mode == ProbeMode::kRE ? 2u : mode == ProbeMode::kMTNoShare ? 4u : 8u));
    const double eps = 1e-5;
    double worst = 0;
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      auto& v = *blocks[b].values;
      REQUIRE(grad[b].size() == v.size());
      for (std::size_t i = 0; i < v.size(); ++i) {
        double keep = v[i];
        v[i] = keep + eps;
        double up = model.loss(data);
        v[i] = keep - eps;
        double down = model.loss(data);
        v[i] = keep;
        double numeric = (up - down) / (2 * eps);
        double denom = std::max({std::abs(numeric), std::abs(grad[b][i]), 1e-6});
        worst = std::max(worst, std::abs(numeric - grad[b][i]) / denom);
      }
    }
    CHECK(worst <= 1e-4);
  }
}

TEST_CASE("blob training decreases the loss and separates the classes") {
  auto data = blob_examples(21, 8, 3, 40, 3.0, 0.5);
  auto res = train_probe(data, ProbeMode::kRE, PoolScheme::kCls, labels(3), {});
  REQUIRE(res.loss_trace.size() == 501);
  for (std::size_t e = 1; e <= 50; ++e) CHECK(res.loss_trace[e] < res.loss_trace[e - 1]);
  CHECK(res.loss_trace.back() < res.loss_trace.front());
  std::vector<std::string> pred, gold;
  auto test = blob_examples(22, 8, 3, 40, 3.0, 0.5);
  for (const auto& ex : test) {
    pred.push_back("R" + std::to_string(predict(res.model, ex.x).relation));
    gold.push_back("R" + std::to_string(ex.relation));
  }
  CHECK(oracle::macro_f1(pred, gold) >= 0.99);
}

TEST_CASE("multi-task modes train on blobs with type labels") {
  Rng rng(5);
  auto blobs = testing::gaussian_blobs(rng, 6, 3, 30, 3.0, 0.4);
  std::vector<Example> data;
  for (const auto& b : blobs) {
    Example ex;
    ex.x.summary = b.x;
    ex.x.e1 = {b.x[0], b.x[1], b.x[2]};
    ex.x.e2 = {b.x[3], b.x[4], b.x[5]};
    ex.relation = b.label;
    ex.type1 = b.label;
    ex.type2 = (b.label + 1) % 3;
    data.push_back(ex);
  }
  for (auto mode : {ProbeMode::kMTNoShare, ProbeMode::kMTShare}) {
    auto res = train_probe(data, mode, PoolScheme::kCls, labels(3), {});
    CHECK(res.loss_trace.back() < 0.5 * res.loss_trace.front());
    std::size_t right = 0;
    for (const auto& ex : data) right += predict(res.model, ex.x).relation == ex.relation;
    CHECK(right >= data.size() - 2);
    auto tp = res.model.type_probabilities(data[0].x.e1, 1);
    CHECK(tp.size() == kNumEntityTypes);
  }
}

TEST_CASE("training is bitwise deterministic") {
  auto data = blob_examples(1, 5, 4, 10, 2.0, 1.0);
  TrainConfig cfg;
  cfg.epochs = 80;
  cfg.head_init = 0.2;
  cfg.seed = 77;
  auto a = train_probe(data, ProbeMode::kRE, PoolScheme::kCls, labels(4), cfg);
  auto b = train_probe(data, ProbeMode::kRE, PoolScheme::kCls, labels(4), cfg);
  CHECK(a.model == b.model);
  CHECK(a.loss_trace == b.loss_trace);
}

TEST_CASE("an untrained zero model is uniform and predicts the first label") {
  ProbeModel m(ProbeMode::kRE, PoolScheme::kCls, 3, 0, labels(4), {});
  auto p = predict(m, Features{{1.0, -2.0, 0.5}, {}, {}});
  CHECK(p.relation == 0);
  for (double v : p.probabilities) CHECK(v == 0.25);
  CHECK_THROWS_AS(m.relation_probabilities(Features{{1.0}, {}, {}}), std::invalid_argument);
}

TEST_CASE("non-finite loss names the epoch") {
  auto data = blob_examples(2, 3, 2, 5, 1.0, 1.0);
  data[3].x.summary[1] = std::nan("");
  try {
    train_probe(data, ProbeMode::kRE, PoolScheme::kCls, labels(2), {});
    FAIL("expected an error");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("epoch 0") != std::string::npos);
  }
  auto bad = blob_examples(2, 3, 2, 5, 1.0, 1.0);
  bad[0].relation = 7;
  CHECK_THROWS_AS(train_probe(bad, ProbeMode::kRE, PoolScheme::kCls, labels(2), {}),
                  std::invalid_argument);
}

TEST_CASE("relation-only objective is convex: initialisations agree") {
  auto data = blob_examples(12, 4, 3, 20, 1.0, 0.6);
  TrainConfig cfg;
  cfg.l2 = 0.05;
  cfg.epochs = 4000;
  cfg.learning_rate = 0.5;
  auto a = train_probe(data, ProbeMode::kRE, PoolScheme::kCls, labels(3), cfg);
  cfg.head_init = 1.0;
  cfg.seed = 31;
  auto b = train_probe(data, ProbeMode::kRE, PoolScheme::kCls, labels(3), cfg);
  auto wa = a.model.to_json()["weights"]["w_rel"].get<std::vector<double>>();
  auto wb = b.model.to_json()["weights"]["w_rel"].get<std::vector<double>>();
  REQUIRE(wa.size() == wb.size());
  for (std::size_t i = 0; i < wa.size(); ++i) CHECK(std::abs(wa[i] - wb[i]) < 1e-6);
  CHECK(std::abs(a.loss_trace.back() - b.loss_trace.back()) < 1e-9);
}

TEST_CASE("model file round trip") {
  Rng rng(6);
  auto data = random_examples(rng, 10, 5, 3, 2);
  TrainConfig cfg;
  cfg.epochs = 20;
  auto res = train_probe(data, ProbeMode::kMTShare, PoolScheme::kClsEn, labels(2), cfg);
  auto path = std::filesystem::temp_directory_path() / "relboot_probe_model.json";
  save_model(res.model, path);
  auto back = load_model(path);
  CHECK(back == res.model);
  for (const auto& ex : data) {
    CHECK(predict(back, ex.x).probabilities == predict(res.model, ex.x).probabilities);
  }
  std::filesystem::remove(path);
  CHECK(parse_probe_mode("mt_s") == ProbeMode::kMTShare);
  CHECK_THROWS_AS(parse_probe_mode("joint"), std::invalid_argument);
}

TEST_CASE("standardizer centres and scales training features") {
  Rng rng(14);
  auto data = random_examples(rng, 30, 4, 3, 2);
  for (auto& ex : data) {
    ex.x.summary[0] = 5.0 + 3.0 * ex.x.summary[0];
    ex.x.summary[3] = 2.0;  // constant column
  }
  std::vector<Features> xs;
  for (const auto& ex : data) xs.push_back(ex.x);
  auto st = Standardizer::fit(xs);
  CHECK(st.summary_scale[3] == 1.0);
  for (std::size_t d = 0; d < 4; ++d) {
    double mean = 0, var = 0;
    for (const auto& x : xs) mean += st.apply(x).summary[d];
    mean /= xs.size();
    for (const auto& x : xs) var += std::pow(st.apply(x).summary[d] - mean, 2);
    var /= xs.size();
    CHECK(std::abs(mean) < 1e-12);
    if (d != 3) CHECK(std::abs(var - 1.0) < 1e-9);
  }
  double emean = 0;
  for (const auto& x : xs) emean += st.apply(x).e1[0] + st.apply(x).e2[0];
  CHECK(std::abs(emean) < 1e-9);
}

TEST_CASE("standardized training equals training on pre-standardized inputs") {
  Rng rng(15);
  auto data = random_examples(rng, 25, 5, 3, 3);
  for (auto& ex : data) ex.x.summary[1] *= 40.0;
  TrainConfig cfg;
  cfg.epochs = 60;
  cfg.standardize = true;
  for (auto mode : {ProbeMode::kRE, ProbeMode::kMTShare}) {
    auto a = train_probe(data, mode, PoolScheme::kClsEn, labels(3), cfg);
    REQUIRE_FALSE(a.model.standardizer().empty());
    auto pre = data;
    for (auto& ex : pre) ex.x = a.model.standardizer().apply(ex.x);
    TrainConfig plain = cfg;
    plain.standardize = false;
    auto b = train_probe(pre, mode, PoolScheme::kClsEn, labels(3), plain);
    CHECK(a.loss_trace == b.loss_trace);
    for (std::size_t i = 0; i < data.size(); ++i) {
      CHECK(a.model.relation_probabilities(data[i].x) == b.model.relation_probabilities(pre[i].x));
    }
    if (mode != ProbeMode::kRE) {
      CHECK(a.model.type_probabilities(data[0].x.e1, 1) == b.model.type_probabilities(pre[0].x.e1, 1));
    }
    auto path = std::filesystem::temp_directory_path() / "relboot_probe_std.json";
    save_model(a.model, path);
    CHECK(load_model(path) == a.model);
    std::filesystem::remove(path);
  }
}

TEST_CASE("examples map relations and require types for multi-task modes") {
  Rng rng(2);
  std::vector<Instance> insts;
  for (int i = 0; i < 6; ++i) insts.push_back(testing::random_instance(rng, std::to_string(i)));
  auto vocab = relation_vocabulary(insts);
  CHECK(std::is_sorted(vocab.begin(), vocab.end()));
  std::vector<Features> feats(insts.size(), Features{{0.0}, {0.0}, {0.0}});
  auto ex = make_examples(insts, feats, vocab, ProbeMode::kMTShare);
  for (std::size_t i = 0; i < insts.size(); ++i) {
    CHECK(vocab[ex[i].relation] == insts[i].relation);
    CHECK(ex[i].type1 == static_cast<std::size_t>(*insts[i].e1.etype));
  }
  insts[0].e1.etype.reset();
  CHECK_THROWS_AS(make_examples(insts, feats, vocab, ProbeMode::kMTNoShare), std::invalid_argument);
  CHECK_NOTHROW(make_examples(insts, feats, vocab, ProbeMode::kRE));
  CHECK_THROWS_AS(make_examples(insts, feats, {"nope"}, ProbeMode::kRE), std::invalid_argument);
}
