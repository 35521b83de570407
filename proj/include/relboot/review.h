#pragma once

// Human cleanup queue for harvested candidates. Leases and decisions are
// appended to a JSONL event log; replaying the log rebuilds the queue state.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "relboot/core.h"

namespace httplib {
class Server;
}

namespace relboot {

enum class Action { kAccept, kDiscard, kCorrect };

std::string_view to_string(Action a);
std::optional<Action> parse_action(std::string_view s);

struct Decision {
  std::string instance_id;
  std::string annotator;
  Action action = Action::kAccept;
  std::optional<Span> e1_span, e2_span;
  std::optional<EntityType> e1_type, e2_type;
  std::int64_t timestamp = 0;  // ms, assigned by the queue

  bool keeps() const { return action != Action::kDiscard; }
  bool has_corrections() const { return e1_span || e2_span || e1_type || e2_type; }
  friend bool operator==(const Decision&, const Decision&) = default;
};

nlohmann::ordered_json to_json(const Decision& d);
// Throws std::invalid_argument on malformed input.
Decision decision_from_json(const nlohmann::json& j);

// The instance with the decision's corrections applied (surfaces re-sliced).
Instance apply_corrections(const Instance& inst, const Decision& d);

enum class ReviewMode { kPilot, kProduction };

std::string_view to_string(ReviewMode m);
ReviewMode parse_review_mode(std::string_view s);

using Clock = std::function<std::int64_t()>;  // milliseconds
Clock system_clock_ms();

struct ReviewConfig {
  ReviewMode mode = ReviewMode::kProduction;
  std::size_t pilot_per_language = 100;
  std::int64_t lease_ms = 30 * 60 * 1000;
  std::filesystem::path log_path;       // empty = in memory only
  std::filesystem::path snapshot_path;  // empty = no snapshots
  std::size_t snapshot_every = 200;     // events between snapshots

  std::size_t annotators_per_instance() const { return mode == ReviewMode::kPilot ? 2 : 1; }
};

struct InstanceState {
  std::map<std::string, std::int64_t> leases;  // annotator -> latest deadline
  std::map<std::string, Decision> decisions;   // effective decision per annotator

  friend bool operator==(const InstanceState&, const InstanceState&) = default;
};

struct QueueState {
  std::uint64_t seq = 0;  // events applied
  std::map<std::string, InstanceState> items;

  friend bool operator==(const QueueState&, const QueueState&) = default;
};

nlohmann::ordered_json to_json(const QueueState& s);
QueueState queue_state_from_json(const nlohmann::json& j);

// Rejected operation; `status` is the HTTP status to report.
class ReviewError : public std::runtime_error {
 public:
  ReviewError(int status, const std::string& what) : std::runtime_error(what), status_(status) {}
  int status() const { return status_; }

 private:
  int status_;
};

struct Task {
  Instance instance;
  RelationLabel relation;
  std::int64_t lease_deadline = 0;
};

nlohmann::ordered_json to_json(const Task& t);

struct LanguageStats {
  std::size_t sentences = 0;
  std::size_t distinct_pairs = 0;
};

// Per-language sentence and distinct entity-pair counts.
std::map<std::string, LanguageStats> dataset_stats(const std::vector<Instance>& data);
// Language | #Sentence | #Distinct entity pair, with a Total row.
std::string render_stats_markdown(const std::map<std::string, LanguageStats>& stats);

struct ExportResult {
  std::vector<Instance> gold;
  std::vector<std::string> undecided;
  std::vector<std::string> discarded;
  std::vector<std::string> unmatched;  // decision ids with no candidate (offline export)
  std::map<std::string, LanguageStats> stats;
};

// Offline export without leases. Decisions apply in order, a later decision by
// the same annotator replacing the earlier one; an instance is decided once
// `annotators` distinct annotators have decided it. Throws
// std::invalid_argument on malformed decisions or invalid corrected output.
ExportResult export_with_decisions(const std::vector<Instance>& candidates,
                                   const std::vector<Decision>& decisions,
                                   std::size_t annotators = 1);

struct AgreementResult {
  std::size_t instances = 0;             // decided by two annotators
  std::optional<double> agreement;       // keep/discard; none when no pairs
};

class ReviewQueue {
 public:
  // Instances must be candidates with distinct ids. An existing snapshot and
  // log are loaded, so a restarted queue resumes where it stopped.
  ReviewQueue(std::vector<Instance> instances, std::vector<RelationLabel> catalog,
              ReviewConfig config, Clock clock = system_clock_ms());

  // Leases the next eligible instance in queue order, or none.
  std::optional<Task> next_task(const std::string& annotator);

  // Returns true when an earlier decision by the same annotator was replaced.
  bool submit(Decision d);

  ExportResult export_gold(const std::string& lang) const;
  AgreementResult agreement(const std::string& lang) const;
  nlohmann::ordered_json stats() const;

  QueueState state() const;
  void write_snapshot() const;
  const ReviewConfig& config() const { return config_; }

  // Rebuilds state from an event log (and optional snapshot) without a clock.
  static QueueState replay(const std::filesystem::path& log_path,
                           const std::filesystem::path& snapshot_path = {});

 private:
  bool in_scope(const std::string& id) const;
  std::size_t occupied(const InstanceState& st, std::int64_t now, const std::string& except) const;
  void append(nlohmann::ordered_json event);
  bool is_decided(const InstanceState& st) const;
  void write_snapshot_locked() const;

  ReviewConfig config_;
  Clock clock_;
  std::vector<Instance> instances_;
  std::map<std::string, std::size_t> index_;
  std::map<std::string, RelationLabel> catalog_;
  std::set<std::string> scope_;  // pilot subset
  QueueState state_;
  std::ofstream log_;
  mutable std::mutex mu_;
};

// Applies one logged event to a state. Throws std::invalid_argument on an
// unknown event type or a sequence gap.
void apply_event(QueueState& state, const nlohmann::json& event);

// Routes under /api plus static assets at / from `asset_dir` when it exists.
void mount_review_routes(httplib::Server& server, ReviewQueue& queue,
                         const std::filesystem::path& asset_dir = {});

}  // namespace relboot
