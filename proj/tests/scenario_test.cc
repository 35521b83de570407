#include <doctest.h>

#include <map>
#include <set>
#include <sstream>

#include "relboot/records.h"
#include "relboot/scenario.h"
#include "test_util.h"

using namespace relboot;

namespace {

std::set<std::string> pair_keys(const std::vector<Instance>& v) {
  std::set<std::string> out;
  for (const auto& inst : v) out.insert(inst.relation + "|" + entity_pair_key(inst));
  return out;
}

bool disjoint(const std::set<std::string>& a, const std::set<std::string>& b) {
  for (const auto& x : a) {
    if (b.count(x)) return false;
  }
  return true;
}

std::string serialize(const std::vector<Instance>& v) {
  std::ostringstream os;
  write_records(v, os);
  return os.str();
}

std::map<std::string, std::size_t> per_relation(const std::vector<Instance>& v,
                                                const std::string& lang, Grade grade) {
  std::map<std::string, std::size_t> out;
  for (const auto& inst : v) {
    if (inst.lang == lang && inst.grade == grade) ++out[inst.relation];
  }
  return out;
}

GoldByLanguage four_languages(std::uint64_t seed) {
  Rng rng(seed);
  GoldByLanguage g;
  for (const char* lang : {"en", "bn", "hi", "te"}) g[lang] = testing::synthetic_gold(rng, lang, 6, 6, 1, 4);
  return g;
}

}  // namespace

TEST_CASE("entity pairs never straddle train and test") {
  std::vector<Instance> data;
  auto add = [&](const std::string& a, const std::string& b, int n) {
    for (int i = 0; i < n; ++i) {
      auto inst = testing::instance_with(a + " met " + b + " " + std::to_string(i), a, b, "en");
      inst.id = a + std::to_string(i);
      inst.grade = Grade::kGold;
      data.push_back(inst);
    }
  };
  add("a", "b", 4);
  add("c", "d", 1);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto split = split_gold(data, {0.8, 3, seed});
    REQUIRE(split.folds.size() == 3);
    for (const auto& f : split.folds) {
      CHECK(disjoint(pair_keys(f.train), pair_keys(f.test)));
      CHECK(f.train.size() + f.test.size() == 5);
      CHECK(f.test.size() == 1);
    }
  }
}

TEST_CASE("pair order does not matter for the pair key") {
  std::vector<Instance> data;
  for (int i = 0; i < 3; ++i) {
    auto inst = testing::instance_with("x and y " + std::to_string(i), i == 1 ? "y" : "x", i == 1 ? "x" : "y", "en");
    inst.id = std::to_string(i);
    inst.grade = Grade::kGold;
    data.push_back(inst);
  }
  auto other = testing::instance_with("p and q", "p", "q", "en");
  other.id = "o";
  other.grade = Grade::kGold;
  data.push_back(other);
  auto split = split_gold(data, {0.8, 3, 1});
  for (const auto& f : split.folds) CHECK(disjoint(pair_keys(f.train), pair_keys(f.test)));
}

TEST_CASE("three folds are distinct and leak-free") {
  Rng rng(3);
  auto data = testing::synthetic_gold(rng, "hi", 5, 10, 1, 3);
  auto split = split_gold(data, {0.8, 3, 42});
  REQUIRE(split.folds.size() == 3);
  std::set<std::string> tests;
  for (const auto& f : split.folds) {
    CHECK(disjoint(pair_keys(f.train), pair_keys(f.test)));
    CHECK(f.train.size() + f.test.size() == data.size());
    tests.insert(serialize(f.test));
  }
  CHECK(tests.size() == 3);
  auto again = split_gold(data, {0.8, 3, 42});
  CHECK(serialize(again.folds[1].test) == serialize(split.folds[1].test));
}

TEST_CASE("train share over seeds") {
  Rng rng(8);
  auto uniform = testing::synthetic_gold(rng, "bn", 100, 10, 2, 2);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto split = split_gold(uniform, {0.8, 3, seed});
    for (const auto& f : split.folds) {
      auto tr = per_relation(f.train, "bn", Grade::kGold);
      auto te = per_relation(f.test, "bn", Grade::kGold);
      for (const auto& [rel, n] : tr) CHECK((n == 16 && te[rel] == 4));
    }
  }

  auto uneven = testing::synthetic_gold(rng, "te", 40, 8, 1, 5);
  std::size_t train = 0, total = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    for (const auto& f : split_gold(uneven, {0.8, 3, seed}).folds) {
      CHECK(disjoint(pair_keys(f.train), pair_keys(f.test)));
      train += f.train.size();
      total += f.train.size() + f.test.size();
    }
  }
  double share = static_cast<double>(train) / static_cast<double>(total);
  MESSAGE("train share " << share);
  CHECK(share >= 0.76);
  CHECK(share <= 0.84);
}

TEST_CASE("single-pair relations are flagged and excluded") {
  Rng rng(1);
  auto data = testing::synthetic_gold(rng, "en", 2, 3, 1, 2);
  auto lonely = testing::instance_with("solo1 with solo2", "solo1", "solo2", "en");
  lonely.id = "lonely";
  lonely.relation = "R_single";
  lonely.grade = Grade::kGold;
  data.push_back(lonely);
  auto split = split_gold(data, {});
  CHECK(split.unsplittable == std::vector<std::string>{"R_single"});
  for (const auto& f : split.folds) {
    CHECK(f.train.size() + f.test.size() == data.size() - 1);
  }
}

TEST_CASE("split input checks") {
  Rng rng(1);
  auto data = testing::synthetic_gold(rng, "en", 2, 3, 1, 2);
  data[0].grade = Grade::kSilver;
  CHECK_THROWS(split_gold(data, {}));
  data[0].grade = Grade::kGold;
  data[1].lang = "hi";
  CHECK_THROWS(split_gold(data, {}));
  CHECK_THROWS(split_gold({}, {1.0, 3, 0}));
  CHECK_THROWS(split_gold({}, {0.8, 1, 0}));
}

TEST_CASE("few-shot sampling") {
  Rng rng(2);
  auto pool = testing::synthetic_gold(rng, "hi", 4, 7, 1, 1);  // 7 per relation
  CHECK(few_shot_sample(pool, 0, 1).empty());
  auto ten = few_shot_sample(pool, 10, 1);
  CHECK(ten.size() == pool.size());
  for (std::size_t k : {1, 5}) {
    auto got = few_shot_sample(pool, k, 9);
    for (const auto& [rel, n] : per_relation(got, "hi", Grade::kGold)) CHECK(n == k);
    CHECK(serialize(got) == serialize(few_shot_sample(pool, k, 9)));
  }
  auto one = few_shot_sample(pool, 1, 9);
  auto five = few_shot_sample(pool, 5, 9);
  std::set<std::string> five_ids;
  for (const auto& i : five) five_ids.insert(i.id);
  for (const auto& i : one) CHECK(five_ids.count(i.id) == 1);
}

TEST_CASE("scenario semantics") {
  auto gold = four_languages(11);
  IdentityTranslator tr;
  const std::uint64_t seed = 5;

  auto elfi = assemble_scenario({ScenarioKind::kElfi, {}, "bn", 0, 1, seed}, gold, nullptr);
  auto lmx0 = assemble_scenario({ScenarioKind::kLMx, {"ALL"}, "bn", 0, 1, seed}, gold, nullptr);
  auto lmx5 = assemble_scenario({ScenarioKind::kLMx, {"ALL"}, "bn", 5, 1, seed}, gold, nullptr);
  auto mtx10 = assemble_scenario({ScenarioKind::kMTx, {"en"}, "bn", 10, 1, seed}, gold, &tr);
  auto ix10 = assemble_scenario({ScenarioKind::kIx, {"en"}, "bn", 10, 1, seed}, gold, &tr);
  auto ix0 = assemble_scenario({ScenarioKind::kIx, {"en"}, "bn", 0, 1, seed}, gold, &tr);

  CHECK(lmx0.sources == std::vector<std::string>{"en", "hi", "te"});
  CHECK(per_relation(lmx0.train, "bn", Grade::kGold).empty());
  CHECK(lmx0.train.size() == gold["en"].size() + gold["hi"].size() + gold["te"].size());

  // Test fold identical across ELFI/LMx/MTx.
  const auto test = serialize(elfi.test);
  CHECK(serialize(lmx0.test) == test);
  CHECK(serialize(lmx5.test) == test);
  CHECK(serialize(mtx10.test) == test);
  CHECK(serialize(ix10.target_test) == test);

  // k shots: exactly min(k, available) target gold per relation.
  auto avail = per_relation(elfi.train, "bn", Grade::kGold);
  auto shots5 = per_relation(lmx5.train, "bn", Grade::kGold);
  for (const auto& [rel, n] : avail) CHECK(shots5[rel] == std::min<std::size_t>(5, n));
  auto shots10 = per_relation(mtx10.train, "bn", Grade::kGold);
  for (const auto& [rel, n] : avail) CHECK(shots10[rel] == std::min<std::size_t>(10, n));

  // MTx silver: every English gold instance translated into bn.
  std::size_t silver = 0;
  for (const auto& inst : mtx10.train) {
    if (inst.grade == Grade::kSilver) {
      CHECK(inst.lang == "bn");
      CHECK(inst.provenance->source_id.rfind("en-", 0) == 0);
      ++silver;
    }
  }
  CHECK(silver == gold["en"].size());
  CHECK(mtx10.skipped.empty());

  // Ix: pivot gold plus translated shots; test is the translated test fold.
  auto ix_shots = per_relation(ix10.train, "en", Grade::kSilver);
  for (const auto& [rel, n] : avail) CHECK(ix_shots[rel] == std::min<std::size_t>(10, n));
  CHECK(per_relation(ix0.train, "en", Grade::kSilver).empty());
  REQUIRE(ix10.test.size() == elfi.test.size());
  std::set<std::string> linked;
  for (std::size_t i = 0; i < ix10.test.size(); ++i) {
    CHECK(ix10.test[i].lang == "en");
    CHECK(ix10.test[i].provenance->source_id == elfi.test[i].id);
    linked.insert(ix10.test[i].provenance->source_id);
  }
  CHECK(linked.size() == elfi.test.size());
  CHECK(serialize(ix0.test) == serialize(ix10.test));

  for (const auto* sc : {&elfi, &lmx0, &lmx5, &mtx10}) {
    std::vector<Instance> target_gold;
    for (const auto& inst : sc->train) {
      if (inst.lang == "bn" && inst.grade == Grade::kGold) target_gold.push_back(inst);
    }
    CHECK(disjoint(pair_keys(target_gold), pair_keys(sc->test)));
  }
}

TEST_CASE("scenario errors") {
  auto gold = four_languages(2);
  IdentityTranslator tr;
  CHECK_THROWS(assemble_scenario({ScenarioKind::kMTx, {"en"}, "bn", 0, 0, 1}, gold, nullptr));
  CHECK_THROWS(assemble_scenario({ScenarioKind::kIx, {"en", "hi"}, "bn", 0, 0, 1}, gold, &tr));
  CHECK_THROWS(assemble_scenario({ScenarioKind::kElfi, {"en"}, "bn", 0, 0, 1}, gold, nullptr));
  CHECK_THROWS(assemble_scenario({ScenarioKind::kLMx, {"en"}, "ta", 0, 0, 1}, gold, nullptr));
  CHECK_THROWS(assemble_scenario({ScenarioKind::kLMx, {"ur"}, "bn", 0, 0, 1}, gold, nullptr));
  CHECK_THROWS(assemble_scenario({ScenarioKind::kLMx, {"en"}, "bn", 3, 0, 1}, gold, nullptr));
  CHECK_THROWS(assemble_scenario({ScenarioKind::kLMx, {"en"}, "bn", 0, 3, 1}, gold, nullptr));
  CHECK_THROWS(assemble_scenario({ScenarioKind::kLMx, {"bn"}, "bn", 0, 0, 1}, gold, nullptr));
}

TEST_CASE("scenario file round trip") {
  ScenarioSpec s{ScenarioKind::kMTx, {"ALL"}, "te", 5, 2, 99};
  auto back = scenario_from_json(nlohmann::json::parse(to_json(s).dump()));
  CHECK(back.kind == s.kind);
  CHECK(back.sources == s.sources);
  CHECK(back.target == "te");
  CHECK(back.k == 5);
  CHECK(back.fold == 2);
  CHECK(back.seed == 99);
  CHECK(back.name() == "MTx5");
  CHECK(scenario_from_json({{"kind", "LMx"}, {"sources", "ALL"}, {"target", "hi"}}).sources ==
        std::vector<std::string>{"ALL"});
  CHECK_THROWS(scenario_from_json({{"kind", "XX"}, {"target", "hi"}}));
}
