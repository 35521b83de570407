#pragma once

// Evaluation reports, metric-level ensembling, lexical-distance profiles,
// transfer-matrix rendering and annotator agreement.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "relboot/core.h"

namespace relboot {

struct RelationScore {
  double precision = 0;
  double recall = 0;
  double f1 = 0;
  std::size_t support = 0;    // gold count
  std::size_t predicted = 0;  // prediction count
  std::string origin;         // constituent name in an ensemble, else empty

  friend bool operator==(const RelationScore&, const RelationScore&) = default;
};

struct EvalReport {
  std::string fingerprint;          // identifies the test set
  std::vector<std::string> labels;  // sorted union of gold and predicted labels
  std::size_t n = 0;
  double macro_f1 = 0;              // mean F1 over gold-present labels
  double micro_accuracy = 0;
  std::map<std::string, RelationScore> per_relation;
  // confusion[i][j]: gold labels[i] predicted as labels[j]. Empty for ensembles.
  std::vector<std::vector<std::size_t>> confusion;

  friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

// Throws std::invalid_argument on a length mismatch.
EvalReport evaluate(const std::vector<std::string>& predictions,
                    const std::vector<std::string>& golds, std::string fingerprint = "");

// Order-sensitive hash of test-instance ids.
std::string fingerprint_ids(const std::vector<std::string>& ids);

// Per gold-present relation, keeps the constituent with the higher F1 (ties
// to `a`). Macro F1 is recomputed over the picks; micro accuracy is taken
// from the constituent with the higher macro F1. Both reports must share the
// fingerprint and the gold-present relation set.
EvalReport metric_ensemble(const EvalReport& a, const std::string& a_name, const EvalReport& b,
                           const std::string& b_name);

nlohmann::ordered_json to_json(const EvalReport& r);
EvalReport eval_report_from_json(const nlohmann::json& j);
std::string render_eval_markdown(const EvalReport& r);

// Mean lexical distance per (relation, language).
struct LexicalCell {
  std::string relation;
  std::string lang;
  std::size_t count = 0;
  double mean = 0;
};
std::vector<LexicalCell> lexical_profile(const std::vector<Instance>& dataset);
// Relations as rows, languages as columns.
std::string render_lexical_markdown(const std::vector<LexicalCell>& cells);
std::string render_lexical_csv(const std::vector<LexicalCell>& cells);

// One macro-F1 value of the transfer grid.
struct MatrixCell {
  std::string source;   // language code or "ALL"
  std::string task;     // e.g. "RE", "ME"
  std::string setting;  // e.g. "LMx0"
  std::string target;
  double macro_f1 = 0;
};

struct MatrixLayout {
  std::vector<std::string> sources;   // row groups, in order
  std::vector<std::string> tasks;     // rows per group
  std::vector<std::string> settings;  // columns per target
  std::vector<std::string> targets;
  std::string baseline_label = "ELFI (best)";
};

struct MatrixDocument {
  std::string markdown;
  std::string csv;
};

// Baseline values are per target (best over whatever was run). The first row
// holds the baseline; each (target, setting) column bolds its best cell and
// appends the gap to the baseline in parentheses. Self-transfer and missing
// cells render as "–". Values are percentages with two decimals.
MatrixDocument render_transfer_matrix(const std::vector<MatrixCell>& cells,
                                      const std::map<std::string, double>& baseline,
                                      const MatrixLayout& layout);

// "bn" -> "Bn"; "ALL" stays.
std::string display_language(const std::string& code);

// Fraction of shared ids with the same keep/discard decision. Throws
// std::invalid_argument unless both maps cover the same nonempty id set.
double pairwise_agreement(const std::map<std::string, bool>& a, const std::map<std::string, bool>& b);

}  // namespace relboot
