#include "relboot/probe.h"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "relboot/records.h"
#include "relboot/rng.h"
#include "relboot/unicode.h"

namespace relboot {

MarkerPositions find_markers(const std::vector<std::string>& tokens) {
  std::optional<std::size_t> cls, o1, c1, o2, c2;
  auto opens = [](const std::string& t, char k) {
    return t == std::string("[E") + k + "]" || t.rfind(std::string("[ET") + k + "=", 0) == 0;
  };
  auto closes = [](const std::string& t, char k) {
    return t == std::string("[/E") + k + "]" || t.rfind(std::string("[/ET") + k + "=", 0) == 0;
  };
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const auto& t = tokens[i];
    if (t == "[CLS]" && !cls) cls = i;
    if (opens(t, '1') && !o1) o1 = i;
    if (opens(t, '2') && !o2) o2 = i;
    if (closes(t, '1')) c1 = i;
    if (closes(t, '2')) c2 = i;
  }
  if (!cls) throw std::invalid_argument("marker [CLS] missing");
  if (!o1 || !c1) throw std::invalid_argument("entity 1 markers missing");
  if (!o2 || !c2) throw std::invalid_argument("entity 2 markers missing");
  if (*o1 >= *c1 || *o2 >= *c2) throw std::invalid_argument("entity markers out of order");
  return {*cls, *o1, *c1, *o2, *c2};
}

std::string_view to_string(PoolScheme s) {
  switch (s) {
    case PoolScheme::kCls: return "cls";
    case PoolScheme::kEs: return "es";
    case PoolScheme::kEn: return "en";
    case PoolScheme::kClsEs: return "cls_es";
    case PoolScheme::kClsEn: return "cls_en";
  }
  return "?";
}

PoolScheme parse_pool_scheme(std::string_view s) {
  for (auto p : {PoolScheme::kCls, PoolScheme::kEs, PoolScheme::kEn, PoolScheme::kClsEs,
                 PoolScheme::kClsEn}) {
    if (to_string(p) == s) return p;
  }
  throw std::invalid_argument("unknown pooling scheme: " + std::string(s));
}

std::size_t pooled_dimension(PoolScheme s, std::size_t d) {
  switch (s) {
    case PoolScheme::kCls: return d;
    case PoolScheme::kEs:
    case PoolScheme::kEn: return 2 * d;
    case PoolScheme::kClsEs:
    case PoolScheme::kClsEn: return 3 * d;
  }
  return 0;
}

namespace {

void check_positions(const TokenEmbeddings& h, const MarkerPositions& m) {
  std::size_t last = std::max({m.cls, m.e1_close, m.e2_close});
  if (h.empty() || last >= h.size()) throw std::invalid_argument("marker position beyond sequence");
  if (m.e1_open > m.e1_close || m.e2_open > m.e2_close) {
    throw std::invalid_argument("entity markers out of order");
  }
  for (const auto& row : h) {
    if (row.size() != h[0].size()) throw std::invalid_argument("ragged token embeddings");
  }
}

EmbeddingVector span_mean(const TokenEmbeddings& h, std::size_t a, std::size_t b) {
  EmbeddingVector m(h[0].size(), 0.0);
  for (std::size_t i = a; i <= b; ++i) {
    for (std::size_t d = 0; d < m.size(); ++d) m[d] += h[i][d];
  }
  for (auto& x : m) x /= static_cast<double>(b - a + 1);
  return m;
}

void append(EmbeddingVector& to, const EmbeddingVector& v) { to.insert(to.end(), v.begin(), v.end()); }

bool uses_span_means(PoolScheme s) { return s == PoolScheme::kEn || s == PoolScheme::kClsEn; }

}  // namespace

EmbeddingVector pool(const TokenEmbeddings& h, const MarkerPositions& m, PoolScheme scheme) {
  check_positions(h, m);
  EmbeddingVector out;
  if (scheme == PoolScheme::kCls || scheme == PoolScheme::kClsEs || scheme == PoolScheme::kClsEn) {
    append(out, h[m.cls]);
  }
  if (scheme == PoolScheme::kEs || scheme == PoolScheme::kClsEs) {
    append(out, h[m.e1_open]);
    append(out, h[m.e2_open]);
  }
  if (uses_span_means(scheme)) {
    append(out, span_mean(h, m.e1_open, m.e1_close));
    append(out, span_mean(h, m.e2_open, m.e2_close));
  }
  return out;
}

std::pair<EmbeddingVector, EmbeddingVector> entity_vectors(const TokenEmbeddings& h,
                                                           const MarkerPositions& m,
                                                           PoolScheme scheme) {
  check_positions(h, m);
  if (uses_span_means(scheme)) {
    return {span_mean(h, m.e1_open, m.e1_close), span_mean(h, m.e2_open, m.e2_close)};
  }
  return {h[m.e1_open], h[m.e2_open]};
}

std::vector<Features> featurize(const std::vector<Instance>& instances, MarkupScheme markup,
                                PoolScheme scheme, EmbeddingProvider& provider) {
  std::vector<std::string> texts;
  texts.reserve(instances.size());
  for (const auto& inst : instances) texts.push_back(render_markup(inst, markup));
  auto embedded = provider.embed_tokens(texts);
  if (embedded.size() != texts.size()) throw std::runtime_error("provider returned wrong number of sequences");
  std::vector<Features> out;
  out.reserve(texts.size());
  for (std::size_t i = 0; i < texts.size(); ++i) {
    auto m = find_markers(split_whitespace(texts[i]));
    auto [e1, e2] = entity_vectors(embedded[i], m, scheme);
    out.push_back({pool(embedded[i], m, scheme), std::move(e1), std::move(e2)});
  }
  return out;
}

std::string_view to_string(ProbeMode m) {
  switch (m) {
    case ProbeMode::kRE: return "re";
    case ProbeMode::kMTNoShare: return "mt_ns";
    case ProbeMode::kMTShare: return "mt_s";
  }
  return "?";
}

ProbeMode parse_probe_mode(std::string_view s) {
  if (s == "re") return ProbeMode::kRE;
  if (s == "mt_ns") return ProbeMode::kMTNoShare;
  if (s == "mt_s") return ProbeMode::kMTShare;
  throw std::invalid_argument("unknown probe mode: " + std::string(s));
}

std::size_t argmax(const std::vector<double>& v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

std::vector<double> softmax(const std::vector<double>& logits) {
  double mx = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double z = 0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - mx);
    z += p[i];
  }
  for (auto& x : p) x /= z;
  return p;
}

namespace {

constexpr std::size_t kTypes = kNumEntityTypes;

// y = W x + b, W is rows x cols row-major.
std::vector<double> affine(const std::vector<double>& w, const std::vector<double>& b,
                           const std::vector<double>& x, std::size_t rows, std::size_t cols) {
  std::vector<double> y(b);
  for (std::size_t r = 0; r < rows; ++r) {
    double acc = 0;
    const double* row = &w[r * cols];
    for (std::size_t c = 0; c < cols; ++c) acc += row[c] * x[c];
    y[r] += acc;
  }
  return y;
}

// -log softmax(z)[y], numerically stable.
double cross_entropy(const std::vector<double>& z, std::size_t y) {
  double mx = *std::max_element(z.begin(), z.end());
  double s = 0;
  for (double v : z) s += std::exp(v - mx);
  return mx + std::log(s) - z[y];
}

double sq_norm(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x * x;
  return s;
}

void fill_uniform(std::vector<double>& v, std::uint64_t seed, const char* label, double scale) {
  if (scale == 0.0) return;
  Rng rng(derive_seed(seed, label));
  for (auto& x : v) x = rng.uniform(-scale, scale);
}

}  // namespace

struct ProbeModel::Forward {
  std::vector<double> g1, g2;      // shared type embeddings (MT_S)
  std::vector<double> rel_input;   // [s] or [s; g1; g2]
  std::vector<double> rel_logits;
  std::vector<double> t1_logits, t2_logits;
};

ProbeModel::ProbeModel(ProbeMode mode, PoolScheme scheme, std::size_t summary_dim,
                       std::size_t entity_dim, std::vector<std::string> relations,
                       const TrainConfig& cfg)
    : mode_(mode),
      scheme_(scheme),
      s_dim_(summary_dim),
      e_dim_(entity_dim),
      relations_(std::move(relations)),
      cfg_(cfg) {
  if (relations_.empty()) throw std::invalid_argument("no relations to learn");
  if (s_dim_ == 0) throw std::invalid_argument("summary dimension must be positive");
  if (mode_ != ProbeMode::kRE && e_dim_ == 0) throw std::invalid_argument("entity dimension must be positive");
  const std::size_t R = relations_.size();
  w_rel_.assign(R * rel_input_dim(), 0.0);
  b_rel_.assign(R, 0.0);
  fill_uniform(w_rel_, cfg.seed, "w_rel", cfg.head_init);
  if (mode_ != ProbeMode::kRE) {
    w_type_.assign(kTypes * e_dim_, 0.0);
    b_type_.assign(kTypes, 0.0);
    fill_uniform(w_type_, cfg.seed, "w_type", cfg.head_init);
  }
  if (mode_ == ProbeMode::kMTShare) {
    a1_.assign(e_dim_ * e_dim_, 0.0);
    a2_.assign(e_dim_ * e_dim_, 0.0);
    c1_.assign(e_dim_, 0.0);
    c2_.assign(e_dim_, 0.0);
    fill_uniform(a1_, cfg.seed, "a1", cfg.share_init);
    fill_uniform(a2_, cfg.seed, "a2", cfg.share_init);
  }
}

std::size_t ProbeModel::rel_input_dim() const {
  return mode_ == ProbeMode::kMTShare ? s_dim_ + 2 * e_dim_ : s_dim_;
}

std::vector<ParamBlock> ProbeModel::blocks() {
  std::vector<ParamBlock> b{{"w_rel", &w_rel_}, {"b_rel", &b_rel_}};
  if (mode_ != ProbeMode::kRE) {
    b.push_back({"w_type", &w_type_});
    b.push_back({"b_type", &b_type_});
  }
  if (mode_ == ProbeMode::kMTShare) {
    b.push_back({"a1", &a1_});
    b.push_back({"c1", &c1_});
    b.push_back({"a2", &a2_});
    b.push_back({"c2", &c2_});
  }
  return b;
}

void ProbeModel::check(const Features& x) const {
  if (x.summary.size() != s_dim_) {
    throw std::invalid_argument("summary has dimension " + std::to_string(x.summary.size()) +
                                ", model expects " + std::to_string(s_dim_));
  }
  if (mode_ != ProbeMode::kRE && (x.e1.size() != e_dim_ || x.e2.size() != e_dim_)) {
    throw std::invalid_argument("entity vector dimension mismatch");
  }
}

void ProbeModel::forward(const Features& x, Forward& f) const {
  const std::size_t R = relations_.size();
  f.rel_input = x.summary;
  if (mode_ == ProbeMode::kMTShare) {
    f.g1 = affine(a1_, c1_, x.e1, e_dim_, e_dim_);
    f.g2 = affine(a2_, c2_, x.e2, e_dim_, e_dim_);
    for (auto& v : f.g1) v = std::tanh(v);
    for (auto& v : f.g2) v = std::tanh(v);
    append(f.rel_input, f.g1);
    append(f.rel_input, f.g2);
  }
  f.rel_logits = affine(w_rel_, b_rel_, f.rel_input, R, rel_input_dim());
  if (mode_ == ProbeMode::kMTNoShare) {
    f.t1_logits = affine(w_type_, b_type_, x.e1, kTypes, e_dim_);
    f.t2_logits = affine(w_type_, b_type_, x.e2, kTypes, e_dim_);
  } else if (mode_ == ProbeMode::kMTShare) {
    f.t1_logits = affine(w_type_, b_type_, f.g1, kTypes, e_dim_);
    f.t2_logits = affine(w_type_, b_type_, f.g2, kTypes, e_dim_);
  }
}

double ProbeModel::loss(const std::vector<Example>& data) const {
  std::vector<std::vector<double>> unused;
  return loss_and_gradient(data, unused);
}

double ProbeModel::loss_and_gradient(const std::vector<Example>& data,
                                     std::vector<std::vector<double>>& grad) const {
  if (data.empty()) throw std::invalid_argument("no training examples");
  const std::size_t R = relations_.size();
  const std::size_t I = rel_input_dim();
  const std::size_t E = e_dim_;
  std::vector<double> gw_rel(w_rel_.size(), 0.0), gb_rel(R, 0.0);
  std::vector<double> gw_type(w_type_.size(), 0.0), gb_type(b_type_.size(), 0.0);
  std::vector<double> ga1(a1_.size(), 0.0), gc1(c1_.size(), 0.0);
  std::vector<double> ga2(a2_.size(), 0.0), gc2(c2_.size(), 0.0);

  double total = 0;
  Forward f;
  for (const auto& ex : data) {
    check(ex.x);
    if (ex.relation >= R) throw std::invalid_argument("relation label out of range");
    forward(ex.x, f);
    total += cross_entropy(f.rel_logits, ex.relation);
    auto dz = softmax(f.rel_logits);
    dz[ex.relation] -= 1.0;
    for (std::size_t r = 0; r < R; ++r) {
      gb_rel[r] += dz[r];
      double* row = &gw_rel[r * I];
      for (std::size_t c = 0; c < I; ++c) row[c] += dz[r] * f.rel_input[c];
    }
    if (mode_ == ProbeMode::kRE) continue;

    if (ex.type1 >= kTypes || ex.type2 >= kTypes) throw std::invalid_argument("type label out of range");
    total += cross_entropy(f.t1_logits, ex.type1) + cross_entropy(f.t2_logits, ex.type2);
    const std::vector<double>* inputs[2] = {&ex.x.e1, &ex.x.e2};
    if (mode_ == ProbeMode::kMTShare) {
      inputs[0] = &f.g1;
      inputs[1] = &f.g2;
    }
    const std::vector<double>* logits[2] = {&f.t1_logits, &f.t2_logits};
    const std::size_t labels[2] = {ex.type1, ex.type2};
    std::vector<double> dg[2];
    for (int k = 0; k < 2; ++k) {
      auto du = softmax(*logits[k]);
      du[labels[k]] -= 1.0;
      for (std::size_t t = 0; t < kTypes; ++t) {
        gb_type[t] += du[t];
        double* row = &gw_type[t * E];
        for (std::size_t c = 0; c < E; ++c) row[c] += du[t] * (*inputs[k])[c];
      }
      if (mode_ != ProbeMode::kMTShare) continue;
      // Gradient into the shared type embedding from both heads.
      dg[k].assign(E, 0.0);
      for (std::size_t t = 0; t < kTypes; ++t) {
        const double* row = &w_type_[t * E];
        for (std::size_t c = 0; c < E; ++c) dg[k][c] += du[t] * row[c];
      }
      const std::size_t off = s_dim_ + static_cast<std::size_t>(k) * E;
      for (std::size_t r = 0; r < R; ++r) {
        const double* row = &w_rel_[r * I + off];
        for (std::size_t c = 0; c < E; ++c) dg[k][c] += dz[r] * row[c];
      }
    }
    if (mode_ == ProbeMode::kMTShare) {
      std::vector<double>* ga[2] = {&ga1, &ga2};
      std::vector<double>* gc[2] = {&gc1, &gc2};
      const std::vector<double>* g[2] = {&f.g1, &f.g2};
      const std::vector<double>* e[2] = {&ex.x.e1, &ex.x.e2};
      for (int k = 0; k < 2; ++k) {
        for (std::size_t i = 0; i < E; ++i) {
          double dpre = dg[k][i] * (1.0 - (*g[k])[i] * (*g[k])[i]);
          (*gc[k])[i] += dpre;
          double* row = &(*ga[k])[i * E];
          for (std::size_t c = 0; c < E; ++c) row[c] += dpre * (*e[k])[c];
        }
      }
    }
  }

  const double n = static_cast<double>(data.size());
  const double lam = cfg_.l2;
  double reg = sq_norm(w_rel_) + sq_norm(w_type_) + sq_norm(a1_) + sq_norm(a2_);
  double value = total / n + 0.5 * lam * reg;

  auto finish = [&](std::vector<double>& g, const std::vector<double>* w) {
    for (std::size_t i = 0; i < g.size(); ++i) {
      g[i] /= n;
      if (w) g[i] += lam * (*w)[i];
    }
  };
  finish(gw_rel, &w_rel_);
  finish(gb_rel, nullptr);
  grad.clear();
  grad.push_back(std::move(gw_rel));
  grad.push_back(std::move(gb_rel));
  if (mode_ != ProbeMode::kRE) {
    finish(gw_type, &w_type_);
    finish(gb_type, nullptr);
    grad.push_back(std::move(gw_type));
    grad.push_back(std::move(gb_type));
  }
  if (mode_ == ProbeMode::kMTShare) {
    finish(ga1, &a1_);
    finish(gc1, nullptr);
    finish(ga2, &a2_);
    finish(gc2, nullptr);
    grad.push_back(std::move(ga1));
    grad.push_back(std::move(gc1));
    grad.push_back(std::move(ga2));
    grad.push_back(std::move(gc2));
  }
  return value;
}

Standardizer Standardizer::fit(const std::vector<Features>& xs) {
  if (xs.empty()) throw std::invalid_argument("cannot fit a standardizer on no data");
  auto moments = [](const std::vector<const EmbeddingVector*>& vs, EmbeddingVector& mean,
                    EmbeddingVector& scale) {
    if (vs.empty() || vs[0]->empty()) return;
    const std::size_t d = vs[0]->size();
    mean.assign(d, 0.0);
    scale.assign(d, 0.0);
    for (const auto* v : vs) {
      if (v->size() != d) throw std::invalid_argument("feature dimension mismatch");
      for (std::size_t i = 0; i < d; ++i) mean[i] += (*v)[i];
    }
    for (auto& m : mean) m /= static_cast<double>(vs.size());
    for (const auto* v : vs) {
      for (std::size_t i = 0; i < d; ++i) scale[i] += ((*v)[i] - mean[i]) * ((*v)[i] - mean[i]);
    }
    for (auto& s : scale) {
      s = std::sqrt(s / static_cast<double>(vs.size()));
      if (!(s > 1e-12)) s = 1.0;
    }
  };
  std::vector<const EmbeddingVector*> summaries, entities;
  for (const auto& x : xs) {
    summaries.push_back(&x.summary);
    if (!x.e1.empty()) {
      entities.push_back(&x.e1);
      entities.push_back(&x.e2);
    }
  }
  Standardizer st;
  moments(summaries, st.summary_mean, st.summary_scale);
  moments(entities, st.entity_mean, st.entity_scale);
  return st;
}

namespace {

EmbeddingVector zscore(const EmbeddingVector& v, const EmbeddingVector& mean, const EmbeddingVector& scale) {
  if (mean.empty() || v.empty()) return v;
  if (v.size() != mean.size()) throw std::invalid_argument("standardizer dimension mismatch");
  EmbeddingVector out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = (v[i] - mean[i]) / scale[i];
  return out;
}

}  // namespace

EmbeddingVector Standardizer::apply_entity(const EmbeddingVector& e) const {
  return zscore(e, entity_mean, entity_scale);
}

Features Standardizer::apply(const Features& x) const {
  return {zscore(x.summary, summary_mean, summary_scale), apply_entity(x.e1), apply_entity(x.e2)};
}

std::vector<double> ProbeModel::relation_probabilities(const Features& raw) const {
  check(raw);
  const Features x = input_.apply(raw);
  Forward f;
  forward(x, f);
  return softmax(f.rel_logits);
}

std::vector<double> ProbeModel::type_probabilities(const EmbeddingVector& raw, int which) const {
  if (mode_ == ProbeMode::kRE) throw std::logic_error("model has no type head");
  if (raw.size() != e_dim_) throw std::invalid_argument("entity vector dimension mismatch");
  const EmbeddingVector entity = input_.apply_entity(raw);
  std::vector<double> in = entity;
  if (mode_ == ProbeMode::kMTShare) {
    in = which == 1 ? affine(a1_, c1_, entity, e_dim_, e_dim_) : affine(a2_, c2_, entity, e_dim_, e_dim_);
    for (auto& v : in) v = std::tanh(v);
  }
  return softmax(affine(w_type_, b_type_, in, kTypes, e_dim_));
}

nlohmann::ordered_json ProbeModel::to_json() const {
  nlohmann::ordered_json j;
  j["scheme"] = to_string(scheme_);
  j["mode"] = to_string(mode_);
  j["dims"] = {{"summary", s_dim_}, {"entity", e_dim_}, {"relations", relations_.size()},
               {"types", kTypes}};
  j["relations"] = relations_;
  nlohmann::ordered_json w;
  w["w_rel"] = w_rel_;
  w["b_rel"] = b_rel_;
  w["w_type"] = w_type_;
  w["b_type"] = b_type_;
  w["a1"] = a1_;
  w["c1"] = c1_;
  w["a2"] = a2_;
  w["c2"] = c2_;
  j["weights"] = w;
  j["config"] = {{"learning_rate", cfg_.learning_rate}, {"epochs", cfg_.epochs},
                 {"l2", cfg_.l2}, {"head_init", cfg_.head_init}, {"share_init", cfg_.share_init},
                 {"standardize", cfg_.standardize}};
  j["seed"] = cfg_.seed;
  if (!input_.empty()) {
    j["standardizer"] = {{"summary_mean", input_.summary_mean},
                         {"summary_scale", input_.summary_scale},
                         {"entity_mean", input_.entity_mean},
                         {"entity_scale", input_.entity_scale}};
  }
  return j;
}

ProbeModel ProbeModel::from_json(const nlohmann::json& j) {
  TrainConfig cfg;
  const auto& c = j.at("config");
  cfg.learning_rate = c.at("learning_rate").get<double>();
  cfg.epochs = c.at("epochs").get<std::size_t>();
  cfg.l2 = c.at("l2").get<double>();
  cfg.head_init = c.value("head_init", 0.0);
  cfg.share_init = c.value("share_init", 0.1);
  cfg.standardize = c.value("standardize", false);
  cfg.seed = j.at("seed").get<std::uint64_t>();
  ProbeModel m(parse_probe_mode(j.at("mode").get<std::string>()),
               parse_pool_scheme(j.at("scheme").get<std::string>()),
               j.at("dims").at("summary").get<std::size_t>(),
               j.at("dims").at("entity").get<std::size_t>(),
               j.at("relations").get<std::vector<std::string>>(), cfg);
  const auto& w = j.at("weights");
  auto load = [&](const char* key, std::vector<double>& into) {
    auto v = w.at(key).get<std::vector<double>>();
    if (v.size() != into.size()) throw std::invalid_argument(std::string("weight block ") + key + " has wrong size");
    into = std::move(v);
  };
  load("w_rel", m.w_rel_);
  load("b_rel", m.b_rel_);
  load("w_type", m.w_type_);
  load("b_type", m.b_type_);
  load("a1", m.a1_);
  load("c1", m.c1_);
  load("a2", m.a2_);
  load("c2", m.c2_);
  if (j.contains("standardizer")) {
    const auto& st = j["standardizer"];
    Standardizer in;
    in.summary_mean = st.at("summary_mean").get<EmbeddingVector>();
    in.summary_scale = st.at("summary_scale").get<EmbeddingVector>();
    in.entity_mean = st.at("entity_mean").get<EmbeddingVector>();
    in.entity_scale = st.at("entity_scale").get<EmbeddingVector>();
    if (in.summary_mean.size() != m.s_dim_ || in.summary_scale.size() != m.s_dim_ ||
        in.entity_mean.size() != in.entity_scale.size() ||
        (!in.entity_mean.empty() && in.entity_mean.size() != m.e_dim_)) {
      throw std::invalid_argument("standardizer has wrong size");
    }
    m.input_ = std::move(in);
  }
  return m;
}

TrainResult train_probe(const std::vector<Example>& raw, ProbeMode mode, PoolScheme scheme,
                        std::vector<std::string> relations, const TrainConfig& cfg) {
  if (raw.empty()) throw std::invalid_argument("no training examples");
  Standardizer input;
  std::vector<Example> scaled;
  if (cfg.standardize) {
    std::vector<Features> xs;
    for (const auto& ex : raw) xs.push_back(ex.x);
    input = Standardizer::fit(xs);
    scaled = raw;
    for (auto& ex : scaled) ex.x = input.apply(ex.x);
  }
  const std::vector<Example>& data = cfg.standardize ? scaled : raw;
  const std::size_t s_dim = data[0].x.summary.size();
  const std::size_t e_dim = data[0].x.e1.size();
  TrainResult res{ProbeModel(mode, scheme, s_dim, e_dim, std::move(relations), cfg), {}};
  auto blocks = res.model.blocks();
  std::vector<std::vector<double>> grad;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    double l = res.model.loss_and_gradient(data, grad);
    if (!std::isfinite(l)) throw std::runtime_error("non-finite loss at epoch " + std::to_string(epoch));
    res.loss_trace.push_back(l);
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      auto& v = *blocks[b].values;
      for (std::size_t i = 0; i < v.size(); ++i) v[i] -= cfg.learning_rate * grad[b][i];
    }
  }
  double final_loss = res.model.loss(data);
  if (!std::isfinite(final_loss)) {
    throw std::runtime_error("non-finite loss at epoch " + std::to_string(cfg.epochs));
  }
  res.loss_trace.push_back(final_loss);
  res.model.set_standardizer(std::move(input));
  return res;
}

Prediction predict(const ProbeModel& model, const Features& x) {
  Prediction p;
  p.probabilities = model.relation_probabilities(x);
  p.relation = argmax(p.probabilities);
  return p;
}

std::vector<std::string> relation_vocabulary(const std::vector<Instance>& instances) {
  std::set<std::string> s;
  for (const auto& i : instances) s.insert(i.relation);
  return {s.begin(), s.end()};
}

std::vector<Example> make_examples(const std::vector<Instance>& instances,
                                   const std::vector<Features>& features,
                                   const std::vector<std::string>& relations, ProbeMode mode) {
  if (instances.size() != features.size()) throw std::invalid_argument("one feature set per instance required");
  std::vector<Example> out;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    Example ex;
    ex.x = features[i];
    auto it = std::lower_bound(relations.begin(), relations.end(), instances[i].relation);
    if (it == relations.end() || *it != instances[i].relation) {
      throw std::invalid_argument("relation " + instances[i].relation + " not in vocabulary");
    }
    ex.relation = static_cast<std::size_t>(it - relations.begin());
    if (mode != ProbeMode::kRE) {
      if (!instances[i].e1.etype || !instances[i].e2.etype) {
        throw std::invalid_argument("instance " + instances[i].id + " lacks entity types");
      }
      ex.type1 = static_cast<std::size_t>(*instances[i].e1.etype);
      ex.type2 = static_cast<std::size_t>(*instances[i].e2.etype);
    }
    out.push_back(std::move(ex));
  }
  return out;
}

void save_model(const ProbeModel& model, const std::filesystem::path& path) {
  write_file(path, model.to_json().dump() + "\n");
}

ProbeModel load_model(const std::filesystem::path& path) {
  return ProbeModel::from_json(nlohmann::json::parse(read_file(path)));
}

}  // namespace relboot
