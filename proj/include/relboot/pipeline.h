#pragma once

// Stage-by-stage orchestration over a work directory. Every stage writes its
// outputs plus a manifest.json (input and output hashes, seed, provider names,
// version) into <work>/<stage>/ and refuses to run before its prerequisites.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "relboot/core.h"
#include "relboot/harvester.h"
#include "relboot/markup.h"
#include "relboot/metrics.h"
#include "relboot/noise_filter.h"
#include "relboot/probe.h"
#include "relboot/review.h"
#include "relboot/scenario.h"

namespace relboot {

inline constexpr const char* kVersion = "relboot 0.1.0";

struct ScenarioGroup {
  ScenarioKind kind = ScenarioKind::kElfi;
  std::vector<std::size_t> shots = {0};
};

struct PipelineConfig {
  std::filesystem::path base_dir;  // relative paths resolve against this
  std::uint64_t seed = 0;

  std::filesystem::path catalog, pairs, corpus, web_corpus, decisions, work;
  std::string embedder = "stub:64:0";
  std::string translator = "identity";

  HarvestConfig harvest;
  FilterConfig filter;
  MarkupScheme markup;
  ReviewMode review_mode = ReviewMode::kProduction;
  SplitSpec split;
  PoolScheme pool = PoolScheme::kClsEs;
  TrainConfig train;
  std::vector<ProbeMode> modes = {ProbeMode::kRE, ProbeMode::kMTNoShare, ProbeMode::kMTShare};

  std::vector<std::string> languages = {"en", "bn", "hi", "te"};
  std::vector<std::string> targets = {"bn", "hi", "te"};
  std::vector<ScenarioGroup> scenarios;
  std::size_t threads = 0;  // 0 = hardware concurrency

  // Effective settings without machine-specific paths; hashed into manifests.
  nlohmann::ordered_json fingerprint() const;
};

// Reads a JSON pipeline config. `seed` and `work` override the file; the
// RELBOOT_EMBEDDER and RELBOOT_TRANSLATOR environment variables override the
// provider specs. Throws std::invalid_argument on unknown keys or bad values.
PipelineConfig load_pipeline_config(const std::filesystem::path& path,
                                    std::optional<std::uint64_t> seed = std::nullopt,
                                    std::optional<std::filesystem::path> work = std::nullopt);

enum class Stage { kHarvest, kFilter, kMarkup, kSilver, kAssemble, kTrain, kPredict, kEval, kReport };

std::string_view to_string(Stage s);
Stage parse_stage(std::string_view s);
const std::vector<Stage>& all_stages();

// A stage was asked to run before the stage it depends on.
class PrerequisiteError : public std::runtime_error {
 public:
  PrerequisiteError(Stage stage, Stage missing);
  Stage missing() const { return missing_; }

 private:
  Stage missing_;
};

std::filesystem::path stage_dir(const PipelineConfig& cfg, Stage s);

// 16 hex digits of FNV-1a over the file bytes.
std::string file_hash(const std::filesystem::path& path);

// Runs one stage and returns its manifest.
nlohmann::ordered_json run_stage(Stage s, const PipelineConfig& cfg);

// Every stage in order.
void run_all(const PipelineConfig& cfg);

// Review decisions from a JSONL file of decision objects or from a review
// service event log (lease events are skipped).
std::vector<Decision> read_decisions(const std::filesystem::path& path);

// Predictions ({id, pred} per line) against gold records, aligned by id.
EvalReport evaluate_files(const std::filesystem::path& predictions,
                          const std::filesystem::path& gold);

// One averaged macro-F1 value per (setting, source, target, task).
struct SummaryRow {
  std::string setting;  // "ELFI", "LMx0", ...
  std::string source;   // language, "ALL", or the target for ELFI
  std::string target;
  std::string task;     // RE, MT-NS, MT-S, ME
  std::size_t folds = 0;
  double macro_f1 = 0;
};

nlohmann::ordered_json to_json(const SummaryRow& r);
SummaryRow summary_row_from_json(const nlohmann::json& j);

struct ReportDocument {
  std::string markdown;
  std::map<std::string, std::string> csv;  // file name -> contents
};

// One transfer matrix per scenario family (LMx, MTx, Ix) with the best ELFI
// task per target as the baseline row, plus an ELFI table. Languages and
// targets give the row and column order.
ReportDocument render_report(const std::vector<SummaryRow>& rows,
                             const std::vector<std::string>& languages,
                             const std::vector<std::string>& targets);

}  // namespace relboot
