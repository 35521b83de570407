#pragma once

// Train/test assembly for the transfer experiments:
//   ELFI  train and test on target-language gold
//   LMx   source gold (+ k target shots), test on target
//   MTx   source gold translated into the target (+ k target shots)
//   Ix    pivot gold (+ k target shots translated to the pivot), test
//         instances translated to the pivot

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "relboot/core.h"
#include "relboot/translation.h"

namespace relboot {

struct SplitSpec {
  double train_fraction = 0.8;
  std::size_t n_folds = 3;
  std::uint64_t seed = 0;

  void validate() const;
};

struct Fold {
  std::vector<Instance> train;
  std::vector<Instance> test;
};

struct GoldSplit {
  std::vector<Fold> folds;
  std::vector<std::string> unsplittable;  // relations with a single entity pair
};

// Per relation, whole entity pairs are assigned to test by a seeded greedy
// fill toward (1 - train_fraction) of the relation's instances; each fold
// starts the fill at a different offset of the shuffled pair order. Train and
// test keep dataset order. Requires one language, gold grade throughout.
GoldSplit split_gold(const std::vector<Instance>& dataset, const SplitSpec& spec);

// Per relation, min(k, available) instances chosen uniformly; smaller k gives
// a prefix of the same draw, so shots are nested. Output keeps pool order.
std::vector<Instance> few_shot_sample(const std::vector<Instance>& pool, std::size_t k,
                                      std::uint64_t seed);

enum class ScenarioKind { kElfi, kLMx, kMTx, kIx };

std::string_view to_string(ScenarioKind k);
ScenarioKind parse_scenario_kind(std::string_view s);

struct ScenarioSpec {
  ScenarioKind kind = ScenarioKind::kElfi;
  std::vector<std::string> sources;  // {"ALL"} = every language but the target
  std::string target;
  std::size_t k = 0;
  std::size_t fold = 0;
  std::uint64_t seed = 0;

  // "ELFI", "LMx5", "MTx0", "Ix10".
  std::string name() const;
};

nlohmann::ordered_json to_json(const ScenarioSpec& spec);
ScenarioSpec scenario_from_json(const nlohmann::json& j);

struct Scenario {
  ScenarioSpec spec;
  std::vector<std::string> sources;  // resolved
  std::vector<Instance> train;
  std::vector<Instance> test;
  // Target-language test fold the test set was derived from (equal to test
  // except under Ix).
  std::vector<Instance> target_test;
  std::vector<std::string> skipped;  // ids lost to projection failures
  std::vector<std::string> unsplittable;
};

using GoldByLanguage = std::map<std::string, std::vector<Instance>>;

// Throws std::invalid_argument on inconsistent specs, missing languages or a
// missing translator for MTx/Ix.
Scenario assemble_scenario(const ScenarioSpec& spec, const GoldByLanguage& gold,
                           TranslationProvider* translator, const SplitSpec& split = {});

}  // namespace relboot
