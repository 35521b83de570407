#include "relboot/review.h"

#include <httplib.h>

#include <chrono>
#include <sstream>

#include "relboot/metrics.h"
#include "relboot/records.h"
#include "relboot/unicode.h"

namespace relboot {

std::string_view to_string(Action a) {
  switch (a) {
    case Action::kAccept: return "accept";
    case Action::kDiscard: return "discard";
    case Action::kCorrect: return "correct";
  }
  return "?";
}

std::optional<Action> parse_action(std::string_view s) {
  if (s == "accept") return Action::kAccept;
  if (s == "discard") return Action::kDiscard;
  if (s == "correct") return Action::kCorrect;
  return std::nullopt;
}

std::string_view to_string(ReviewMode m) { return m == ReviewMode::kPilot ? "pilot" : "production"; }

ReviewMode parse_review_mode(std::string_view s) {
  if (s == "pilot") return ReviewMode::kPilot;
  if (s == "production") return ReviewMode::kProduction;
  throw std::invalid_argument("mode must be pilot or production");
}

Clock system_clock_ms() {
  return [] {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::system_clock::now().time_since_epoch())
        .count();
  };
}

namespace {

nlohmann::ordered_json span_json(const Span& s) { return {{"start", s.start}, {"end", s.end}}; }

std::optional<Span> span_from(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  const auto& s = j[key];
  if (!s.is_object() || !s.contains("start") || !s.contains("end") || !s["start"].is_number_unsigned() ||
      !s["end"].is_number_unsigned()) {
    throw std::invalid_argument(std::string(key) + " must be {start, end} with non-negative integers");
  }
  return Span{s["start"].get<std::size_t>(), s["end"].get<std::size_t>()};
}

std::optional<EntityType> type_from(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  if (!j[key].is_string()) throw std::invalid_argument(std::string(key) + " must be a string");
  auto t = parse_entity_type(j[key].get<std::string>());
  if (!t) throw std::invalid_argument("unknown entity type " + j[key].get<std::string>());
  return t;
}

std::string required_string(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_string() || j[key].get<std::string>().empty()) {
    throw std::invalid_argument(std::string(key) + " is required");
  }
  return j[key].get<std::string>();
}

}  // namespace

nlohmann::ordered_json to_json(const Decision& d) {
  nlohmann::ordered_json j;
  j["instance"] = d.instance_id;
  j["annotator"] = d.annotator;
  j["action"] = to_string(d.action);
  if (d.e1_span) j["e1"] = span_json(*d.e1_span);
  if (d.e2_span) j["e2"] = span_json(*d.e2_span);
  if (d.e1_type) j["e1_type"] = to_string(*d.e1_type);
  if (d.e2_type) j["e2_type"] = to_string(*d.e2_type);
  j["timestamp"] = d.timestamp;
  return j;
}

Decision decision_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("decision must be an object");
  Decision d;
  d.instance_id = required_string(j, "instance");
  d.annotator = required_string(j, "annotator");
  auto a = parse_action(required_string(j, "action"));
  if (!a) throw std::invalid_argument("action must be accept, discard or correct");
  d.action = *a;
  d.e1_span = span_from(j, "e1");
  d.e2_span = span_from(j, "e2");
  d.e1_type = type_from(j, "e1_type");
  d.e2_type = type_from(j, "e2_type");
  d.timestamp = j.value("timestamp", std::int64_t{0});
  if (d.action == Action::kCorrect && !d.has_corrections()) {
    throw std::invalid_argument("correct requires at least one span or type correction");
  }
  if (d.action != Action::kCorrect && d.has_corrections()) {
    throw std::invalid_argument("corrections are only allowed with action correct");
  }
  return d;
}

Instance apply_corrections(const Instance& inst, const Decision& d) {
  Instance out = inst;
  const std::size_t len = utf8_length(inst.text);
  auto respan = [&](EntityMention& m, const std::optional<Span>& s, const char* which) {
    if (!s) return;
    if (s->start >= s->end || s->end > len) {
      throw std::invalid_argument(std::string(which) + " span [" + std::to_string(s->start) + ", " +
                                  std::to_string(s->end) + ") is outside the text of length " +
                                  std::to_string(len));
    }
    m = make_mention(inst.text, s->start, s->end, m.etype);
  };
  respan(out.e1, d.e1_span, "e1");
  respan(out.e2, d.e2_span, "e2");
  if (d.e1_type) out.e1.etype = d.e1_type;
  if (d.e2_type) out.e2.etype = d.e2_type;
  return out;
}

nlohmann::ordered_json to_json(const QueueState& s) {
  nlohmann::ordered_json j;
  j["seq"] = s.seq;
  nlohmann::ordered_json items = nlohmann::ordered_json::object();
  for (const auto& [id, st] : s.items) {
    nlohmann::ordered_json e;
    e["leases"] = st.leases;
    nlohmann::ordered_json ds = nlohmann::ordered_json::array();
    for (const auto& [a, d] : st.decisions) ds.push_back(to_json(d));
    e["decisions"] = ds;
    items[id] = e;
  }
  j["items"] = items;
  return j;
}

QueueState queue_state_from_json(const nlohmann::json& j) {
  QueueState s;
  s.seq = j.at("seq").get<std::uint64_t>();
  for (const auto& [id, e] : j.at("items").items()) {
    auto& st = s.items[id];
    st.leases = e.at("leases").get<std::map<std::string, std::int64_t>>();
    for (const auto& d : e.at("decisions")) {
      auto dec = decision_from_json(d);
      st.decisions[dec.annotator] = dec;
    }
  }
  return s;
}

void apply_event(QueueState& state, const nlohmann::json& event) {
  auto seq = event.at("seq").get<std::uint64_t>();
  if (seq != state.seq + 1) {
    throw std::invalid_argument("event log gap: expected seq " + std::to_string(state.seq + 1) +
                                ", found " + std::to_string(seq));
  }
  auto type = event.at("type").get<std::string>();
  if (type == "lease") {
    state.items[event.at("instance").get<std::string>()]
        .leases[event.at("annotator").get<std::string>()] = event.at("deadline").get<std::int64_t>();
  } else if (type == "decision") {
    auto d = decision_from_json(event.at("decision"));
    state.items[d.instance_id].decisions[d.annotator] = d;
  } else {
    throw std::invalid_argument("unknown event type " + type);
  }
  state.seq = seq;
}

nlohmann::ordered_json to_json(const Task& t) {
  nlohmann::ordered_json j;
  j["instance"] = to_json(t.instance);
  j["relation"] = {{"id", t.relation.id},
                   {"name", t.relation.name},
                   {"description", t.relation.description},
                   {"link", "https://www.wikidata.org/wiki/Property:" + t.relation.id}};
  std::vector<std::string> types;
  for (auto e : entity_type_inventory()) types.emplace_back(to_string(e));
  j["entity_types"] = types;
  j["lease_deadline"] = t.lease_deadline;
  return j;
}

std::map<std::string, LanguageStats> dataset_stats(const std::vector<Instance>& data) {
  std::map<std::string, std::set<std::string>> pairs;
  std::map<std::string, LanguageStats> out;
  for (const auto& inst : data) {
    ++out[inst.lang].sentences;
    pairs[inst.lang].insert(entity_pair_key(inst));
  }
  for (auto& [lang, s] : out) s.distinct_pairs = pairs[lang].size();
  return out;
}

std::string render_stats_markdown(const std::map<std::string, LanguageStats>& stats) {
  std::ostringstream o;
  o << "| Language | #Sentence | #Distinct entity pair |\n|---|---|---|\n";
  LanguageStats total;
  for (const auto& [lang, s] : stats) {
    o << "| " << display_language(lang) << " | " << s.sentences << " | " << s.distinct_pairs << " |\n";
    total.sentences += s.sentences;
    total.distinct_pairs += s.distinct_pairs;
  }
  o << "| Total | " << total.sentences << " | " << total.distinct_pairs << " |\n";
  return o.str();
}

namespace {

QueueState load_state(const std::filesystem::path& log_path, const std::filesystem::path& snapshot_path) {
  QueueState s;
  if (!snapshot_path.empty() && std::filesystem::exists(snapshot_path)) {
    s = queue_state_from_json(nlohmann::json::parse(read_file(snapshot_path)));
  }
  if (!log_path.empty() && std::filesystem::exists(log_path)) {
    for (const auto& e : read_jsonl(log_path)) {
      if (e.at("seq").get<std::uint64_t>() <= s.seq) continue;
      apply_event(s, e);
    }
  }
  return s;
}

}  // namespace

ReviewQueue::ReviewQueue(std::vector<Instance> instances, std::vector<RelationLabel> catalog,
                         ReviewConfig config, Clock clock)
    : config_(std::move(config)), clock_(std::move(clock)), instances_(std::move(instances)) {
  if (config_.lease_ms <= 0) throw std::invalid_argument("lease must be positive");
  std::map<std::string, std::size_t> per_lang;
  for (std::size_t i = 0; i < instances_.size(); ++i) {
    const auto& inst = instances_[i];
    if (inst.grade != Grade::kCandidate) {
      throw std::invalid_argument("queue instance " + inst.id + " is not a candidate");
    }
    if (!index_.emplace(inst.id, i).second) throw std::invalid_argument("duplicate instance id " + inst.id);
    if (config_.mode == ReviewMode::kProduction || per_lang[inst.lang]++ < config_.pilot_per_language) {
      scope_.insert(inst.id);
    }
  }
  for (auto& r : catalog) catalog_[r.id] = std::move(r);
  state_ = load_state(config_.log_path, config_.snapshot_path);
  if (!config_.log_path.empty()) {
    if (config_.log_path.has_parent_path()) std::filesystem::create_directories(config_.log_path.parent_path());
    log_.open(config_.log_path, std::ios::app | std::ios::binary);
    if (!log_) throw std::runtime_error("cannot open decision log " + config_.log_path.string());
  }
}

bool ReviewQueue::in_scope(const std::string& id) const { return scope_.count(id) > 0; }

bool ReviewQueue::is_decided(const InstanceState& st) const {
  return st.decisions.size() >= config_.annotators_per_instance();
}

std::size_t ReviewQueue::occupied(const InstanceState& st, std::int64_t now,
                                  const std::string& except) const {
  std::size_t n = 0;
  for (const auto& [a, d] : st.decisions) n += a != except;
  for (const auto& [a, deadline] : st.leases) {
    if (a != except && !st.decisions.count(a) && deadline > now) ++n;
  }
  return n;
}

void ReviewQueue::append(nlohmann::ordered_json event) {
  nlohmann::ordered_json e;
  e["seq"] = state_.seq + 1;
  for (auto& [k, v] : event.items()) e[k] = v;
  apply_event(state_, e);
  if (log_.is_open()) {
    log_ << e.dump() << '\n';
    log_.flush();
    if (!log_) throw std::runtime_error("decision log write failed");
  }
  if (!config_.snapshot_path.empty() && config_.snapshot_every > 0 &&
      state_.seq % config_.snapshot_every == 0) {
    write_snapshot_locked();
  }
}

std::optional<Task> ReviewQueue::next_task(const std::string& annotator) {
  if (annotator.empty()) throw ReviewError(400, "annotator is required");
  std::lock_guard lock(mu_);
  const auto now = clock_();
  for (const auto& inst : instances_) {
    if (!in_scope(inst.id)) continue;
    auto it = state_.items.find(inst.id);
    if (it != state_.items.end()) {
      const auto& st = it->second;
      if (st.leases.count(annotator) || st.decisions.count(annotator)) continue;
      if (occupied(st, now, annotator) >= config_.annotators_per_instance()) continue;
    }
    const auto deadline = now + config_.lease_ms;
    append({{"type", "lease"}, {"instance", inst.id}, {"annotator", annotator}, {"time", now},
            {"deadline", deadline}});
    auto rel = catalog_.find(inst.relation);
    RelationLabel label = rel != catalog_.end() ? rel->second : RelationLabel{inst.relation, inst.relation, "", {}, 0};
    return Task{inst, label, deadline};
  }
  return std::nullopt;
}

bool ReviewQueue::submit(Decision d) {
  std::lock_guard lock(mu_);
  auto idx = index_.find(d.instance_id);
  if (idx == index_.end()) throw ReviewError(404, "unknown instance " + d.instance_id);
  if (d.annotator.empty()) throw ReviewError(400, "annotator is required");
  if (d.action == Action::kCorrect && !d.has_corrections()) {
    throw ReviewError(400, "correct requires at least one span or type correction");
  }
  if (d.action != Action::kCorrect && d.has_corrections()) {
    throw ReviewError(400, "corrections are only allowed with action correct");
  }
  try {
    auto problems = validate_instance(apply_corrections(instances_[idx->second], d));
    if (!problems.empty()) {
      std::string msg = "corrected instance is invalid:";
      for (const auto& p : problems) msg += " " + p + ";";
      throw ReviewError(400, msg);
    }
  } catch (const std::invalid_argument& e) {
    throw ReviewError(400, e.what());
  }

  const auto now = clock_();
  auto it = state_.items.find(d.instance_id);
  const InstanceState empty;
  const InstanceState& st = it == state_.items.end() ? empty : it->second;
  const bool replaced = st.decisions.count(d.annotator) > 0;
  if (!replaced) {
    auto lease = st.leases.find(d.annotator);
    if (lease == st.leases.end()) throw ReviewError(409, "instance is not leased to " + d.annotator);
    // An expired lease still counts if nobody else has taken the slot.
    if (lease->second <= now && occupied(st, now, d.annotator) >= config_.annotators_per_instance()) {
      throw ReviewError(409, "lease expired and the instance was reassigned");
    }
  }
  d.timestamp = now;
  append({{"type", "decision"}, {"time", now}, {"decision", to_json(d)}});
  return replaced;
}

namespace {

// Adds one instance to the export according to its decisions (null = none).
void export_instance(const Instance& inst, const InstanceState* st, std::size_t required,
                     ExportResult& out) {
  if (!st || st->decisions.size() < required) {
    out.undecided.push_back(inst.id);
    return;
  }
  const Decision* latest = nullptr;
  bool keep = true;
  for (const auto& [a, d] : st->decisions) {
    keep = keep && d.keeps();
    if (!latest || d.timestamp >= latest->timestamp) latest = &d;
  }
  if (!keep) {
    out.discarded.push_back(inst.id);
    return;
  }
  Instance g = apply_corrections(inst, *latest);
  g.grade = Grade::kGold;
  auto problems = validate_instance(g);
  if (!problems.empty()) throw std::invalid_argument("exported instance " + g.id + " is invalid: " + problems[0]);
  out.gold.push_back(std::move(g));
}

}  // namespace

ExportResult ReviewQueue::export_gold(const std::string& lang) const {
  std::lock_guard lock(mu_);
  ExportResult out;
  for (const auto& inst : instances_) {
    if (inst.lang != lang || !in_scope(inst.id)) continue;
    auto it = state_.items.find(inst.id);
    export_instance(inst, it == state_.items.end() ? nullptr : &it->second,
                    config_.annotators_per_instance(), out);
  }
  out.stats = dataset_stats(out.gold);
  return out;
}

ExportResult export_with_decisions(const std::vector<Instance>& candidates,
                                   const std::vector<Decision>& decisions,
                                   std::size_t annotators) {
  std::map<std::string, const Instance*> by_id;
  for (const auto& c : candidates) by_id.emplace(c.id, &c);
  std::map<std::string, InstanceState> states;
  ExportResult out;
  std::int64_t order = 0;
  for (auto d : decisions) {
    auto it = by_id.find(d.instance_id);
    if (it == by_id.end()) {
      out.unmatched.push_back(d.instance_id);
      continue;
    }
    if (d.annotator.empty()) throw std::invalid_argument("decision for " + d.instance_id + " has no annotator");
    if ((d.action == Action::kCorrect) != d.has_corrections()) {
      throw std::invalid_argument("decision for " + d.instance_id +
                                  ": corrections go with action correct, and only with it");
    }
    d.timestamp = std::max(d.timestamp, order++);
    states[d.instance_id].decisions[d.annotator] = d;
  }
  for (const auto& c : candidates) {
    auto it = states.find(c.id);
    export_instance(c, it == states.end() ? nullptr : &it->second, annotators, out);
  }
  out.stats = dataset_stats(out.gold);
  return out;
}

AgreementResult ReviewQueue::agreement(const std::string& lang) const {
  std::lock_guard lock(mu_);
  std::map<std::string, bool> first, second;
  for (const auto& inst : instances_) {
    if (inst.lang != lang) continue;
    auto it = state_.items.find(inst.id);
    if (it == state_.items.end() || it->second.decisions.size() < 2) continue;
    auto d = it->second.decisions.begin();
    first[inst.id] = d->second.keeps();
    second[inst.id] = std::next(d)->second.keeps();
  }
  AgreementResult r;
  r.instances = first.size();
  if (!first.empty()) r.agreement = pairwise_agreement(first, second);
  return r;
}

nlohmann::ordered_json ReviewQueue::stats() const {
  std::lock_guard lock(mu_);
  const auto now = clock_();
  struct Counts {
    std::size_t total = 0, unassigned = 0, leased = 0, decided = 0;
  };
  std::map<std::string, Counts> per;
  Counts all;
  std::size_t decisions = 0;
  for (const auto& inst : instances_) {
    if (!in_scope(inst.id)) continue;
    auto& c = per[inst.lang];
    ++c.total;
    ++all.total;
    auto it = state_.items.find(inst.id);
    if (it == state_.items.end()) {
      ++c.unassigned;
      ++all.unassigned;
      continue;
    }
    decisions += it->second.decisions.size();
    if (is_decided(it->second)) {
      ++c.decided;
      ++all.decided;
    } else if (occupied(it->second, now, "") > it->second.decisions.size()) {
      ++c.leased;
      ++all.leased;
    } else {
      ++c.unassigned;
      ++all.unassigned;
    }
  }
  auto counts = [](const Counts& c) {
    return nlohmann::ordered_json{{"total", c.total}, {"unassigned", c.unassigned}, {"leased", c.leased},
                                  {"decided", c.decided}};
  };
  nlohmann::ordered_json j;
  j["mode"] = to_string(config_.mode);
  j["annotators_per_instance"] = config_.annotators_per_instance();
  j["events"] = state_.seq;
  j["decisions"] = decisions;
  j["all"] = counts(all);
  nlohmann::ordered_json langs = nlohmann::ordered_json::object();
  for (const auto& [l, c] : per) langs[l] = counts(c);
  j["languages"] = langs;
  return j;
}

QueueState ReviewQueue::state() const {
  std::lock_guard lock(mu_);
  return state_;
}

void ReviewQueue::write_snapshot_locked() const {
  if (config_.snapshot_path.empty()) throw std::logic_error("no snapshot path configured");
  auto tmp = config_.snapshot_path;
  tmp += ".tmp";
  write_file(tmp, to_json(state_).dump() + "\n");
  std::filesystem::rename(tmp, config_.snapshot_path);
}

void ReviewQueue::write_snapshot() const {
  std::lock_guard lock(mu_);
  write_snapshot_locked();
}

QueueState ReviewQueue::replay(const std::filesystem::path& log_path,
                               const std::filesystem::path& snapshot_path) {
  return load_state(log_path, snapshot_path);
}

namespace {

void reply(httplib::Response& res, int status, const nlohmann::ordered_json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void fail(httplib::Response& res, int status, const std::string& msg) {
  reply(res, status, {{"error", msg}});
}

const char* kPlaceholderPage =
    "<!doctype html><html><head><meta charset=\"utf-8\"><title>Relation review</title></head>"
    "<body><p>Review API is running. Endpoints live under /api.</p></body></html>";

}  // namespace

void mount_review_routes(httplib::Server& server, ReviewQueue& queue,
                         const std::filesystem::path& asset_dir) {
  server.Get("/api/tasks/next", [&](const httplib::Request& req, httplib::Response& res) {
    auto annotator = req.get_param_value("annotator");
    if (annotator.empty()) return fail(res, 400, "annotator query parameter is required");
    auto task = queue.next_task(annotator);
    reply(res, 200, {{"task", task ? to_json(*task) : nlohmann::ordered_json(nullptr)}});
  });
  server.Post("/api/decisions", [&](const httplib::Request& req, httplib::Response& res) {
    Decision d;
    try {
      d = decision_from_json(nlohmann::json::parse(req.body));
    } catch (const std::exception& e) {
      return fail(res, 400, e.what());
    }
    try {
      bool replaced = queue.submit(d);
      reply(res, 200, {{"status", "ok"}, {"replaced", replaced}});
    } catch (const ReviewError& e) {
      fail(res, e.status(), e.what());
    }
  });
  server.Get("/api/agreement", [&](const httplib::Request& req, httplib::Response& res) {
    auto lang = req.get_param_value("lang");
    if (lang.empty()) return fail(res, 400, "lang query parameter is required");
    auto a = queue.agreement(lang);
    nlohmann::ordered_json j{{"lang", lang}, {"instances", a.instances}};
    j["agreement"] = a.agreement ? nlohmann::ordered_json(*a.agreement) : nlohmann::ordered_json(nullptr);
    reply(res, 200, j);
  });
  server.Get("/api/export", [&](const httplib::Request& req, httplib::Response& res) {
    auto lang = req.get_param_value("lang");
    if (lang.empty()) return fail(res, 400, "lang query parameter is required");
    auto ex = queue.export_gold(lang);
    nlohmann::ordered_json inst = nlohmann::ordered_json::array();
    for (const auto& g : ex.gold) inst.push_back(to_json(g));
    auto s = ex.stats.count(lang) ? ex.stats.at(lang) : LanguageStats{};
    reply(res, 200,
          {{"lang", lang},
           {"instances", inst},
           {"undecided", ex.undecided},
           {"discarded", ex.discarded},
           {"stats", {{"#Sentence", s.sentences}, {"#Distinct entity pair", s.distinct_pairs}}}});
  });
  server.Get("/api/stats", [&](const httplib::Request&, httplib::Response& res) {
    reply(res, 200, queue.stats());
  });
  if (!asset_dir.empty() && std::filesystem::is_directory(asset_dir)) {
    server.set_mount_point("/", asset_dir.string());
  } else {
    server.Get("/", [](const httplib::Request&, httplib::Response& res) {
      res.set_content(kPlaceholderPage, "text/html; charset=utf-8");
    });
  }
}

}  // namespace relboot
