#include "relboot/scenario.h"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "relboot/rng.h"
#include "relboot/silver.h"

namespace relboot {

void SplitSpec::validate() const {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw std::invalid_argument("train fraction must lie in (0,1)");
  }
  if (n_folds < 2) throw std::invalid_argument("at least two folds required");
}

GoldSplit split_gold(const std::vector<Instance>& dataset, const SplitSpec& spec) {
  spec.validate();
  std::set<std::string> langs;
  for (const auto& inst : dataset) {
    if (inst.grade != Grade::kGold) throw std::invalid_argument("split_gold: " + inst.id + " is not gold");
    langs.insert(inst.lang);
  }
  if (langs.size() > 1) throw std::invalid_argument("split_gold: dataset mixes languages");

  // relation -> pair key -> instance indices (pair keys in first-seen order).
  std::map<std::string, std::vector<std::pair<std::string, std::vector<std::size_t>>>> groups;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    auto& pairs = groups[dataset[i].relation];
    auto key = entity_pair_key(dataset[i]);
    auto it = std::find_if(pairs.begin(), pairs.end(), [&](const auto& p) { return p.first == key; });
    if (it == pairs.end()) {
      pairs.push_back({key, {i}});
    } else {
      it->second.push_back(i);
    }
  }

  GoldSplit out;
  // in_test[f][i]: instance i is in fold f's test side; excluded[i]: dropped.
  std::vector<std::vector<bool>> in_test(spec.n_folds, std::vector<bool>(dataset.size(), false));
  std::vector<bool> excluded(dataset.size(), false);
  const double test_fraction = 1.0 - spec.train_fraction;
  for (auto& [relation, pairs] : groups) {
    if (pairs.size() < 2) {
      out.unsplittable.push_back(relation);
      for (auto i : pairs[0].second) excluded[i] = true;
      continue;
    }
    Rng rng(derive_seed(spec.seed, "split:" + relation));
    rng.shuffle(pairs);
    std::size_t total = 0;
    for (const auto& p : pairs) total += p.second.size();
    const double target = test_fraction * static_cast<double>(total);
    for (std::size_t f = 0; f < spec.n_folds; ++f) {
      const std::size_t offset = f * pairs.size() / spec.n_folds;
      std::size_t test_count = 0;
      std::vector<std::size_t> chosen;
      for (std::size_t s = 0; s < pairs.size(); ++s) {
        const auto& p = pairs[(offset + s) % pairs.size()];
        const double now = std::abs(static_cast<double>(test_count) - target);
        const double next = std::abs(static_cast<double>(test_count + p.second.size()) - target);
        // Never take the last remaining pair so train is never empty.
        if (next < now && chosen.size() + 1 < pairs.size()) {
          chosen.push_back((offset + s) % pairs.size());
          test_count += p.second.size();
        }
      }
      if (chosen.empty()) {
        // Target below half an instance: the smallest pair keeps test nonempty.
        std::size_t best = offset % pairs.size();
        for (std::size_t s = 0; s < pairs.size(); ++s) {
          std::size_t c = (offset + s) % pairs.size();
          if (pairs[c].second.size() < pairs[best].second.size()) best = c;
        }
        chosen.push_back(best);
      }
      for (auto c : chosen) {
        for (auto i : pairs[c].second) in_test[f][i] = true;
      }
    }
  }
  for (std::size_t f = 0; f < spec.n_folds; ++f) {
    Fold fold;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
      if (excluded[i]) continue;
      (in_test[f][i] ? fold.test : fold.train).push_back(dataset[i]);
    }
    out.folds.push_back(std::move(fold));
  }
  return out;
}

std::vector<Instance> few_shot_sample(const std::vector<Instance>& pool, std::size_t k,
                                      std::uint64_t seed) {
  if (k == 0) return {};
  std::map<std::string, std::vector<std::size_t>> by_rel;
  for (std::size_t i = 0; i < pool.size(); ++i) by_rel[pool[i].relation].push_back(i);
  std::vector<bool> take(pool.size(), false);
  for (auto& [rel, idx] : by_rel) {
    Rng rng(derive_seed(seed, "shots:" + rel));
    rng.shuffle(idx);
    for (std::size_t j = 0; j < std::min(k, idx.size()); ++j) take[idx[j]] = true;
  }
  std::vector<Instance> out;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (take[i]) out.push_back(pool[i]);
  }
  return out;
}

std::string_view to_string(ScenarioKind k) {
  switch (k) {
    case ScenarioKind::kElfi: return "ELFI";
    case ScenarioKind::kLMx: return "LMx";
    case ScenarioKind::kMTx: return "MTx";
    case ScenarioKind::kIx: return "Ix";
  }
  return "?";
}

ScenarioKind parse_scenario_kind(std::string_view s) {
  if (s == "ELFI") return ScenarioKind::kElfi;
  if (s == "LMx") return ScenarioKind::kLMx;
  if (s == "MTx") return ScenarioKind::kMTx;
  if (s == "Ix") return ScenarioKind::kIx;
  throw std::invalid_argument("unknown scenario kind: " + std::string(s));
}

std::string ScenarioSpec::name() const {
  if (kind == ScenarioKind::kElfi) return "ELFI";
  return std::string(to_string(kind)) + std::to_string(k);
}

nlohmann::ordered_json to_json(const ScenarioSpec& spec) {
  nlohmann::ordered_json j;
  j["kind"] = to_string(spec.kind);
  j["sources"] = spec.sources;
  j["target"] = spec.target;
  j["k"] = spec.k;
  j["fold"] = spec.fold;
  j["seed"] = spec.seed;
  return j;
}

ScenarioSpec scenario_from_json(const nlohmann::json& j) {
  ScenarioSpec s;
  s.kind = parse_scenario_kind(j.at("kind").get<std::string>());
  if (j.contains("sources")) {
    if (j["sources"].is_string()) {
      s.sources = {j["sources"].get<std::string>()};
    } else {
      s.sources = j["sources"].get<std::vector<std::string>>();
    }
  }
  s.target = j.at("target").get<std::string>();
  s.k = j.value("k", std::size_t{0});
  s.fold = j.value("fold", std::size_t{0});
  s.seed = j.value("seed", std::uint64_t{0});
  return s;
}

namespace {

void append(std::vector<Instance>& to, const std::vector<Instance>& from) {
  to.insert(to.end(), from.begin(), from.end());
}

std::vector<Instance> translate_all(const std::vector<Instance>& gold, TranslationProvider& tr,
                                    const std::string& to_lang, std::vector<std::string>& skipped) {
  auto batch = batch_silver(gold, tr, to_lang);
  for (const auto& s : batch.skipped) skipped.push_back(s.id);
  return batch.silver;
}

}  // namespace

Scenario assemble_scenario(const ScenarioSpec& spec, const GoldByLanguage& gold,
                           TranslationProvider* translator, const SplitSpec& split) {
  if (spec.k != 0 && spec.k != 1 && spec.k != 5 && spec.k != 10) {
    throw std::invalid_argument("shots must be one of 0, 1, 5, 10");
  }
  if (spec.kind == ScenarioKind::kElfi && spec.k != 0) {
    throw std::invalid_argument("ELFI takes no shots");
  }
  if (!gold.count(spec.target)) throw std::invalid_argument("no gold data for target " + spec.target);

  Scenario sc;
  sc.spec = spec;
  if (spec.sources.size() == 1 && spec.sources[0] == "ALL") {
    for (const auto& [lang, v] : gold) {
      if (lang != spec.target) sc.sources.push_back(lang);
    }
  } else {
    sc.sources = spec.sources;
  }
  std::sort(sc.sources.begin(), sc.sources.end());
  sc.sources.erase(std::unique(sc.sources.begin(), sc.sources.end()), sc.sources.end());

  switch (spec.kind) {
    case ScenarioKind::kElfi:
      if (!sc.sources.empty() && sc.sources != std::vector<std::string>{spec.target}) {
        throw std::invalid_argument("ELFI sources must be the target language");
      }
      sc.sources = {spec.target};
      break;
    case ScenarioKind::kIx:
      if (sc.sources.size() != 1) throw std::invalid_argument("Ix needs exactly one pivot language");
      [[fallthrough]];
    case ScenarioKind::kLMx:
    case ScenarioKind::kMTx:
      if (sc.sources.empty()) throw std::invalid_argument(sc.spec.name() + " needs source languages");
      for (const auto& s : sc.sources) {
        if (s == spec.target) throw std::invalid_argument("source equals target " + s);
        if (!gold.count(s)) throw std::invalid_argument("no gold data for source " + s);
      }
      break;
  }
  if ((spec.kind == ScenarioKind::kMTx || spec.kind == ScenarioKind::kIx) && !translator) {
    throw std::invalid_argument(sc.spec.name() + " requires a translator");
  }

  SplitSpec ss = split;
  ss.seed = spec.seed;
  auto gs = split_gold(gold.at(spec.target), ss);
  if (spec.fold >= gs.folds.size()) throw std::invalid_argument("fold index out of range");
  sc.unsplittable = gs.unsplittable;
  const Fold& fold = gs.folds[spec.fold];
  sc.target_test = fold.test;
  auto shots = few_shot_sample(fold.train, spec.k, derive_seed(spec.seed, "fold" + std::to_string(spec.fold)));

  switch (spec.kind) {
    case ScenarioKind::kElfi:
      sc.train = fold.train;
      sc.test = fold.test;
      break;
    case ScenarioKind::kLMx:
      for (const auto& s : sc.sources) append(sc.train, gold.at(s));
      append(sc.train, shots);
      sc.test = fold.test;
      break;
    case ScenarioKind::kMTx:
      for (const auto& s : sc.sources) {
        append(sc.train, translate_all(gold.at(s), *translator, spec.target, sc.skipped));
      }
      append(sc.train, shots);
      sc.test = fold.test;
      break;
    case ScenarioKind::kIx: {
      const auto& pivot = sc.sources[0];
      append(sc.train, gold.at(pivot));
      append(sc.train, translate_all(shots, *translator, pivot, sc.skipped));
      sc.test = translate_all(fold.test, *translator, pivot, sc.skipped);
      break;
    }
  }
  return sc;
}

}  // namespace relboot
