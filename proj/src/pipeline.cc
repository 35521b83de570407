#include "relboot/pipeline.h"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <regex>
#include <set>
#include <thread>
#include <tuple>

#include "relboot/embedding.h"
#include "relboot/errors.h"
#include "relboot/metrics.h"
#include "relboot/records.h"
#include "relboot/rng.h"
#include "relboot/silver.h"
#include "relboot/translation.h"

namespace relboot {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw std::invalid_argument(where + " must be an object");
  for (const auto& [k, v] : j.items()) {
    if (!allowed.count(k)) throw std::invalid_argument("unknown key '" + k + "' in " + where);
  }
}

std::string hex64(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// Resolves the path inside "stub:<path>" translator specs.
std::string resolve_translator(const std::string& spec, const fs::path& base) {
  if (spec.rfind("stub:", 0) != 0) return spec;
  fs::path p = spec.substr(5);
  if (p.is_relative()) p = base / p;
  return "stub:" + p.lexically_normal().string();
}

// A path relative to `root` when it lies below it.
std::optional<fs::path> below(const fs::path& p, const fs::path& root) {
  if (root.empty()) return std::nullopt;
  auto rel = p.lexically_normal().lexically_relative(root.lexically_normal());
  if (rel.empty() || *rel.begin() == "..") return std::nullopt;
  return rel;
}

std::string task_name(ProbeMode m) {
  switch (m) {
    case ProbeMode::kRE: return "RE";
    case ProbeMode::kMTNoShare: return "MT-NS";
    case ProbeMode::kMTShare: return "MT-S";
  }
  return "?";
}

}  // namespace

ordered_json PipelineConfig::fingerprint() const {
  ordered_json j;
  j["version"] = kVersion;
  j["seed"] = seed;
  std::string tr = translator;
  if (tr.rfind("stub:", 0) == 0) {
    if (auto rel = below(tr.substr(5), base_dir)) tr = "stub:" + rel->string();
  }
  j["providers"] = {{"embedder", embedder}, {"translator", tr}};
  j["harvest"] = {{"relation_budget", harvest.relation_budget},
                  {"pairs_per_relation", harvest.pairs_per_relation},
                  {"k", harvest.k},
                  {"web_docs", harvest.web_docs}};
  j["filter"] = to_json(filter);
  j["markup"] = {{"scheme", to_string(markup.kind)}, {"language_flag", markup.language_flag}};
  j["review"] = {{"mode", to_string(review_mode)}};
  j["split"] = {{"train_fraction", split.train_fraction}, {"folds", split.n_folds}};
  ordered_json modes_j = ordered_json::array();
  for (auto m : modes) modes_j.push_back(to_string(m));
  j["probe"] = {{"pool", to_string(pool)},
                {"modes", modes_j},
                {"epochs", train.epochs},
                {"learning_rate", train.learning_rate},
                {"l2", train.l2},
                {"head_init", train.head_init},
                {"share_init", train.share_init},
                {"standardize", train.standardize}};
  j["languages"] = languages;
  j["targets"] = targets;
  ordered_json sc = ordered_json::array();
  for (const auto& g : scenarios) sc.push_back({{"kind", to_string(g.kind)}, {"shots", g.shots}});
  j["scenarios"] = sc;
  return j;
}

PipelineConfig load_pipeline_config(const fs::path& path, std::optional<std::uint64_t> seed,
                                    std::optional<fs::path> work) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw std::invalid_argument("config " + path.string() + ": " + e.what());
  }
  check_keys(j, {"seed", "paths", "providers", "harvest", "filter", "markup", "review", "split",
                 "probe", "languages", "targets", "scenarios", "threads"},
             "config");
  PipelineConfig c;
  c.base_dir = fs::absolute(path).parent_path().lexically_normal();
  auto resolve = [&](const std::string& p) { return (c.base_dir / p).lexically_normal(); };
  try {
    c.seed = j.value("seed", std::uint64_t{0});
    const json paths = j.value("paths", json::object());
    check_keys(paths, {"catalog", "pairs", "corpus", "web_corpus", "decisions", "work"}, "paths");
    c.catalog = resolve(paths.value("catalog", "catalog.jsonl"));
    c.pairs = resolve(paths.value("pairs", "pairs.jsonl"));
    c.corpus = resolve(paths.value("corpus", "corpus"));
    if (paths.contains("web_corpus")) c.web_corpus = resolve(paths["web_corpus"]);
    if (paths.contains("decisions")) c.decisions = resolve(paths["decisions"]);
    c.work = resolve(paths.value("work", "work"));

    const json prov = j.value("providers", json::object());
    check_keys(prov, {"embedder", "translator"}, "providers");
    c.embedder = prov.value("embedder", c.embedder);
    c.translator = resolve_translator(prov.value("translator", c.translator), c.base_dir);

    const json h = j.value("harvest", json::object());
    check_keys(h, {"relation_budget", "pairs_per_relation", "k", "web_docs"}, "harvest");
    c.harvest.relation_budget = h.value("relation_budget", c.harvest.relation_budget);
    c.harvest.pairs_per_relation = h.value("pairs_per_relation", c.harvest.pairs_per_relation);
    c.harvest.k = h.value("k", c.harvest.k);
    c.harvest.web_docs = h.value("web_docs", c.harvest.web_docs);

    const json f = j.value("filter", json::object());
    check_keys(f, {"tau", "tau_by_lang", "tau_grid"}, "filter");
    c.filter = filter_config_from_json(f);

    const json m = j.value("markup", json::object());
    check_keys(m, {"scheme", "language_flag"}, "markup");
    auto kind = parse_marker_kind(m.value("scheme", "es"));
    if (!kind) throw std::invalid_argument("markup.scheme must be es, et or est");
    c.markup.kind = *kind;
    c.markup.language_flag = m.value("language_flag", false);

    const json r = j.value("review", json::object());
    check_keys(r, {"mode"}, "review");
    c.review_mode = parse_review_mode(r.value("mode", "production"));

    const json s = j.value("split", json::object());
    check_keys(s, {"train_fraction", "folds"}, "split");
    c.split.train_fraction = s.value("train_fraction", c.split.train_fraction);
    c.split.n_folds = s.value("folds", c.split.n_folds);

    const json p = j.value("probe", json::object());
    check_keys(p, {"pool", "modes", "epochs", "learning_rate", "l2", "head_init", "share_init",
                   "standardize"},
               "probe");
    c.pool = parse_pool_scheme(p.value("pool", "cls_es"));
    if (p.contains("modes")) {
      c.modes.clear();
      for (const auto& x : p["modes"]) c.modes.push_back(parse_probe_mode(x.get<std::string>()));
      if (c.modes.empty()) throw std::invalid_argument("probe.modes is empty");
    }
    c.train.epochs = p.value("epochs", c.train.epochs);
    c.train.learning_rate = p.value("learning_rate", c.train.learning_rate);
    c.train.l2 = p.value("l2", c.train.l2);
    c.train.head_init = p.value("head_init", c.train.head_init);
    c.train.share_init = p.value("share_init", c.train.share_init);
    c.train.standardize = p.value("standardize", true);

    c.languages = j.value("languages", c.languages);
    c.targets = j.value("targets", c.targets);
    if (j.contains("scenarios")) {
      for (const auto& g : j["scenarios"]) {
        check_keys(g, {"kind", "shots"}, "scenarios[]");
        ScenarioGroup sg;
        sg.kind = parse_scenario_kind(g.at("kind").get<std::string>());
        sg.shots = g.value("shots", sg.shots);
        c.scenarios.push_back(sg);
      }
    } else {
      c.scenarios = {{ScenarioKind::kElfi, {0}}, {ScenarioKind::kLMx, {0}}};
    }
    c.threads = j.value("threads", std::size_t{0});
  } catch (const json::exception& e) {
    throw std::invalid_argument("config " + path.string() + ": " + e.what());
  }

  if (seed) c.seed = *seed;
  if (work) c.work = fs::absolute(*work).lexically_normal();
  if (const char* e = std::getenv("RELBOOT_EMBEDDER"); e && *e) c.embedder = e;
  if (const char* t = std::getenv("RELBOOT_TRANSLATOR"); t && *t) {
    c.translator = resolve_translator(t, fs::current_path());
  }

  for (const auto& l : c.languages) {
    if (!is_known_language(l)) throw std::invalid_argument("unknown language " + l);
  }
  for (const auto& t : c.targets) {
    if (std::find(c.languages.begin(), c.languages.end(), t) == c.languages.end()) {
      throw std::invalid_argument("target " + t + " is not among the languages");
    }
  }
  c.harvest.seed = c.seed;
  c.split.seed = c.seed;
  c.train.seed = c.seed;
  c.split.validate();
  return c;
}

std::string_view to_string(Stage s) {
  switch (s) {
    case Stage::kHarvest: return "harvest";
    case Stage::kFilter: return "filter";
    case Stage::kMarkup: return "markup";
    case Stage::kSilver: return "silver";
    case Stage::kAssemble: return "assemble";
    case Stage::kTrain: return "train";
    case Stage::kPredict: return "predict";
    case Stage::kEval: return "eval";
    case Stage::kReport: return "report";
  }
  return "?";
}

const std::vector<Stage>& all_stages() {
  static const std::vector<Stage> v = {Stage::kHarvest,  Stage::kFilter, Stage::kMarkup,
                                       Stage::kSilver,   Stage::kAssemble, Stage::kTrain,
                                       Stage::kPredict,  Stage::kEval,   Stage::kReport};
  return v;
}

Stage parse_stage(std::string_view s) {
  for (auto st : all_stages()) {
    if (to_string(st) == s) return st;
  }
  throw std::invalid_argument("unknown stage " + std::string(s));
}

PrerequisiteError::PrerequisiteError(Stage stage, Stage missing)
    : std::runtime_error("cannot run " + std::string(to_string(stage)) + ": missing output of " +
                         std::string(to_string(missing)) + "; run `relbootstrap " +
                         std::string(to_string(missing)) + "` first"),
      missing_(missing) {}

fs::path stage_dir(const PipelineConfig& cfg, Stage s) { return cfg.work / std::string(to_string(s)); }

std::string file_hash(const fs::path& path) { return hex64(fnv1a64(read_file(path))); }

namespace {

std::vector<Stage> prerequisites(Stage s) {
  switch (s) {
    case Stage::kHarvest: return {};
    case Stage::kFilter: return {Stage::kHarvest};
    case Stage::kMarkup: return {Stage::kFilter};
    case Stage::kSilver: return {Stage::kMarkup};
    case Stage::kAssemble: return {Stage::kMarkup};
    case Stage::kTrain: return {Stage::kAssemble};
    case Stage::kPredict: return {Stage::kTrain};
    case Stage::kEval: return {Stage::kPredict};
    case Stage::kReport: return {Stage::kEval};
  }
  return {};
}

fs::path manifest_path(const PipelineConfig& cfg, Stage s) { return stage_dir(cfg, s) / "manifest.json"; }

// Earliest stage along the dependency chain whose outputs are missing.
std::optional<Stage> earliest_missing(const PipelineConfig& cfg, Stage s) {
  for (auto p : prerequisites(s)) {
    if (!fs::exists(manifest_path(cfg, p))) {
      auto deeper = earliest_missing(cfg, p);
      return deeper ? deeper : p;
    }
  }
  return std::nullopt;
}

class Manifest {
 public:
  Manifest(const PipelineConfig& cfg, Stage stage) : cfg_(cfg), stage_(stage) {
    for (auto p : prerequisites(stage)) input(manifest_path(cfg, p));
  }

  void input(const fs::path& p) { add(inputs_, p); }
  void output(const fs::path& p) { add(outputs_, p); }
  void count(const std::string& k, ordered_json v) { counts_[k] = std::move(v); }
  void provider(const std::string& k, const std::string& v) { providers_[k] = v; }

  ordered_json write() {
    auto fp = cfg_.fingerprint();
    ordered_json m;
    m["stage"] = to_string(stage_);
    m["version"] = kVersion;
    m["seed"] = cfg_.seed;
    m["config_hash"] = hex64(fnv1a64(fp.dump()));
    m["providers"] = providers_;
    m["inputs"] = inputs_;
    m["outputs"] = outputs_;
    m["counts"] = counts_;
    write_file(manifest_path(cfg_, stage_), m.dump(2) + "\n");
    return m;
  }

 private:
  std::string label(const fs::path& p) const {
    if (auto rel = below(p, cfg_.work)) return "work/" + rel->generic_string();
    if (auto rel = below(p, cfg_.base_dir)) return rel->generic_string();
    return p.filename().generic_string();
  }

  void add(ordered_json& table, const fs::path& p) {
    if (fs::is_directory(p)) {
      std::vector<fs::path> files;
      for (const auto& e : fs::recursive_directory_iterator(p)) {
        if (e.is_regular_file()) files.push_back(e.path());
      }
      std::sort(files.begin(), files.end());
      for (const auto& f : files) table[label(f)] = file_hash(f);
    } else {
      table[label(p)] = file_hash(p);
    }
  }

  const PipelineConfig& cfg_;
  Stage stage_;
  ordered_json inputs_ = ordered_json::object();
  ordered_json outputs_ = ordered_json::object();
  ordered_json counts_ = ordered_json::object();
  ordered_json providers_ = ordered_json::object();
};

std::size_t thread_count(const PipelineConfig& cfg, std::size_t jobs) {
  std::size_t n = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
  return std::max<std::size_t>(1, std::min(n, jobs));
}

// Runs fn(i) for i in [0, n) on a small pool; rethrows the first failure.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn fn) {
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex mu;
  auto worker = [&] {
    for (std::size_t i; (i = next++) < n;) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!error) error = std::current_exception();
        next = n;
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

std::unique_ptr<TranslationProvider> translator_for(const PipelineConfig& cfg) {
  return make_translator(cfg.translator);
}

// Features keyed by rendered markup, so repeated instances embed once.
class FeatureCache {
 public:
  FeatureCache(const PipelineConfig& cfg, EmbeddingProvider& provider)
      : cfg_(cfg), provider_(provider) {}

  std::vector<Features> get(const std::vector<Instance>& data) {
    std::vector<std::string> keys;
    std::vector<Instance> missing;
    std::set<std::string> queued;
    for (const auto& inst : data) {
      keys.push_back(render_markup(inst, cfg_.markup));
      if (!cache_.count(keys.back()) && queued.insert(keys.back()).second) missing.push_back(inst);
    }
    if (!missing.empty()) {
      auto feats = featurize(missing, cfg_.markup, cfg_.pool, provider_);
      for (std::size_t i = 0; i < missing.size(); ++i) {
        cache_[render_markup(missing[i], cfg_.markup)] = std::move(feats[i]);
      }
    }
    std::vector<Features> out;
    out.reserve(data.size());
    for (const auto& k : keys) out.push_back(cache_.at(k));
    return out;
  }

 private:
  const PipelineConfig& cfg_;
  EmbeddingProvider& provider_;
  std::map<std::string, Features> cache_;
};

std::vector<std::string> scenario_index(const PipelineConfig& cfg) {
  auto j = json::parse(read_file(stage_dir(cfg, Stage::kAssemble) / "index.json"));
  return j.get<std::vector<std::string>>();
}

std::string source_label(const ScenarioSpec& s) {
  if (s.kind == ScenarioKind::kElfi) return s.target;
  std::string out;
  for (const auto& x : s.sources) out += (out.empty() ? "" : "+") + x;
  return out;
}

std::string scenario_id(const ScenarioSpec& s) {
  return s.name() + "." + source_label(s) + "." + s.target + ".f" + std::to_string(s.fold);
}

std::map<std::string, std::size_t> count_by_lang(const std::vector<Instance>& v) {
  std::map<std::string, std::size_t> m;
  for (const auto& i : v) ++m[i.lang];
  return m;
}

// ---- stages ---------------------------------------------------------------

ordered_json run_harvest(const PipelineConfig& cfg) {
  Manifest man(cfg, Stage::kHarvest);
  auto catalog = read_catalog(cfg.catalog);
  auto pairs = PairFrequencyTable::read(cfg.pairs);
  auto docs = read_corpus_dir(cfg.corpus);
  man.input(cfg.catalog);
  man.input(cfg.pairs);
  man.input(cfg.corpus);
  auto index = ingest_corpus(docs);

  std::unique_ptr<StaticFetcher> fetcher;
  if (!cfg.web_corpus.empty()) {
    auto web = read_corpus_dir(cfg.web_corpus);
    for (auto& d : web) d.source = Source::kWeb;
    fetcher = std::make_unique<StaticFetcher>(std::move(web));
    man.input(cfg.web_corpus);
  }
  auto result = harvest(catalog, pairs, index, cfg.harvest, fetcher.get());

  const auto dir = stage_dir(cfg, Stage::kHarvest);
  std::vector<ordered_json> rels;
  for (const auto& r : result.relations) rels.push_back(to_json(r));
  write_jsonl(rels, dir / "relations.jsonl");
  write_records(result.candidates, dir / "candidates.jsonl");
  man.output(dir / "relations.jsonl");
  man.output(dir / "candidates.jsonl");
  man.count("documents", docs.size());
  man.count("sentences", index.size());
  man.count("relations", result.relations.size());
  man.count("candidates", count_by_lang(result.candidates));
  return man.write();
}

ordered_json run_filter(const PipelineConfig& cfg) {
  Manifest man(cfg, Stage::kFilter);
  const auto in = stage_dir(cfg, Stage::kHarvest);
  auto rels = read_catalog(in / "relations.jsonl");
  auto cands = read_records(in / "candidates.jsonl");
  man.input(in / "relations.jsonl");
  man.input(in / "candidates.jsonl");

  auto embedder = make_embedder(cfg.embedder);
  man.provider("embedder", embedder->name());
  auto rel_vecs = embed_relations(rels, *embedder);
  auto scores = score_candidates(cands, rel_vecs, *embedder);
  auto result = apply_threshold(cands, scores, cfg.filter);

  const auto dir = stage_dir(cfg, Stage::kFilter);
  std::vector<Instance> kept, dropped;
  for (const auto& s : result.retained) kept.push_back(s.inst);
  for (const auto& s : result.discarded) dropped.push_back(s.inst);
  write_records(kept, dir / "retained.jsonl");
  write_records(dropped, dir / "discarded.jsonl");
  std::vector<ordered_json> rows;
  for (std::size_t i = 0; i < cands.size(); ++i) {
    ordered_json r{{"id", cands[i].id}, {"lang", cands[i].lang}, {"relation", cands[i].relation}};
    r["score"] = scores[i] ? json(*scores[i]) : json(nullptr);
    r["tau"] = cfg.filter.tau_for(cands[i].lang);
    r["kept"] = scores[i] && *scores[i] >= cfg.filter.tau_for(cands[i].lang);
    rows.push_back(std::move(r));
  }
  write_jsonl(rows, dir / "scores.jsonl");
  for (const char* f : {"retained.jsonl", "discarded.jsonl", "scores.jsonl"}) man.output(dir / f);
  man.count("retained", count_by_lang(kept));
  man.count("discarded", count_by_lang(dropped));
  return man.write();
}

ordered_json run_markup(const PipelineConfig& cfg) {
  Manifest man(cfg, Stage::kMarkup);
  const auto in = stage_dir(cfg, Stage::kFilter) / "retained.jsonl";
  auto retained = read_records(in);
  man.input(in);
  if (cfg.decisions.empty()) {
    throw std::runtime_error(
        "no review decisions configured (paths.decisions); collect them with `relbootstrap "
        "serve-review` and point paths.decisions at its event log");
  }
  auto decisions = read_decisions(cfg.decisions);
  man.input(cfg.decisions);
  ReviewConfig rc;
  rc.mode = cfg.review_mode;
  auto ex = export_with_decisions(retained, decisions, rc.annotators_per_instance());

  const auto dir = stage_dir(cfg, Stage::kMarkup);
  fs::create_directories(dir / "gold");
  std::vector<ordered_json> marked;
  for (const auto& lang : cfg.languages) {
    std::vector<Instance> g;
    for (const auto& inst : ex.gold) {
      if (inst.lang == lang) g.push_back(inst);
    }
    write_records(g, dir / "gold" / (lang + ".jsonl"));
    man.output(dir / "gold" / (lang + ".jsonl"));
    for (const auto& inst : g) {
      marked.push_back({{"id", inst.id},
                        {"lang", inst.lang},
                        {"relation", inst.relation},
                        {"markup", render_markup(inst, cfg.markup)},
                        {"lexical_distance", lexical_distance(inst)}});
    }
  }
  write_jsonl(marked, dir / "marked.jsonl");
  write_file(dir / "stats.md", render_stats_markdown(ex.stats));
  auto profile = lexical_profile(ex.gold);
  write_file(dir / "lexical.md", render_lexical_markdown(profile));
  write_file(dir / "lexical.csv", render_lexical_csv(profile));
  ordered_json review{{"undecided", ex.undecided},
                      {"discarded", ex.discarded},
                      {"unmatched", ex.unmatched}};
  write_file(dir / "review.json", review.dump(2) + "\n");
  for (const char* f : {"marked.jsonl", "stats.md", "lexical.md", "lexical.csv", "review.json"}) {
    man.output(dir / f);
  }
  man.count("gold", count_by_lang(ex.gold));
  man.count("undecided", ex.undecided.size());
  man.count("discarded", ex.discarded.size());
  man.count("unmatched_decisions", ex.unmatched.size());
  return man.write();
}

GoldByLanguage read_gold(const PipelineConfig& cfg, Manifest& man) {
  GoldByLanguage gold;
  for (const auto& lang : cfg.languages) {
    auto p = stage_dir(cfg, Stage::kMarkup) / "gold" / (lang + ".jsonl");
    if (!fs::exists(p)) continue;
    man.input(p);
    auto g = read_records(p);
    if (!g.empty()) gold[lang] = std::move(g);
  }
  return gold;
}

ordered_json run_silver(const PipelineConfig& cfg) {
  Manifest man(cfg, Stage::kSilver);
  auto gold = read_gold(cfg, man);
  auto tr = translator_for(cfg);
  man.provider("translator", tr->name());
  const auto dir = stage_dir(cfg, Stage::kSilver);
  std::vector<ordered_json> skipped;
  ordered_json counts = ordered_json::object();
  for (const auto& src : cfg.languages) {
    if (!gold.count(src)) continue;
    for (const auto& tgt : cfg.targets) {
      if (src == tgt) continue;
      if (!tr->supports(src, tgt)) {
        throw std::runtime_error(tr->name() + " cannot translate " + src + " -> " + tgt);
      }
      auto batch = batch_silver(gold.at(src), *tr, tgt);
      auto name = src + "-" + tgt + ".jsonl";
      write_records(batch.silver, dir / name);
      man.output(dir / name);
      counts[src + "-" + tgt] = batch.silver.size();
      for (const auto& s : batch.skipped) {
        skipped.push_back({{"source", src}, {"target", tgt}, {"id", s.id}, {"reason", s.reason}});
      }
    }
  }
  write_jsonl(skipped, dir / "skipped.jsonl");
  man.output(dir / "skipped.jsonl");
  man.count("silver", counts);
  man.count("skipped", skipped.size());
  return man.write();
}

std::vector<ScenarioSpec> expand_scenarios(const PipelineConfig& cfg) {
  std::vector<ScenarioSpec> out;
  for (const auto& g : cfg.scenarios) {
    for (auto k : g.shots) {
      for (const auto& target : cfg.targets) {
        std::vector<std::vector<std::string>> source_sets;
        if (g.kind == ScenarioKind::kElfi) {
          source_sets.push_back({target});
        } else {
          for (const auto& l : cfg.languages) {
            if (l != target) source_sets.push_back({l});
          }
          if (g.kind != ScenarioKind::kIx) source_sets.push_back({"ALL"});
        }
        for (const auto& sources : source_sets) {
          for (std::size_t fold = 0; fold < cfg.split.n_folds; ++fold) {
            ScenarioSpec s;
            s.kind = g.kind;
            s.sources = sources;
            s.target = target;
            s.k = k;
            s.fold = fold;
            s.seed = cfg.seed;
            out.push_back(s);
          }
        }
      }
    }
  }
  return out;
}

ordered_json run_assemble(const PipelineConfig& cfg) {
  Manifest man(cfg, Stage::kAssemble);
  auto gold = read_gold(cfg, man);
  std::unique_ptr<TranslationProvider> tr;
  bool needs_tr = std::any_of(cfg.scenarios.begin(), cfg.scenarios.end(), [](const auto& g) {
    return g.kind == ScenarioKind::kMTx || g.kind == ScenarioKind::kIx;
  });
  if (needs_tr) {
    tr = translator_for(cfg);
    man.provider("translator", tr->name());
  }
  const auto dir = stage_dir(cfg, Stage::kAssemble);
  std::vector<std::string> ids;
  std::size_t skipped = 0, unsplittable = 0;
  for (const auto& spec : expand_scenarios(cfg)) {
    auto sc = assemble_scenario(spec, gold, tr.get(), cfg.split);
    auto id = scenario_id(spec);
    ids.push_back(id);
    const auto sd = dir / id;
    write_records(sc.train, sd / "train.jsonl");
    write_records(sc.test, sd / "test.jsonl");
    write_records(sc.target_test, sd / "target_test.jsonl");
    ordered_json meta;
    meta["id"] = id;
    meta["spec"] = to_json(spec);
    meta["setting"] = spec.name();
    meta["source"] = source_label(spec);
    meta["resolved_sources"] = sc.sources;
    meta["train"] = sc.train.size();
    meta["test"] = sc.test.size();
    meta["skipped"] = sc.skipped;
    meta["unsplittable"] = sc.unsplittable;
    write_file(sd / "scenario.json", meta.dump(2) + "\n");
    for (const char* f : {"train.jsonl", "test.jsonl", "target_test.jsonl", "scenario.json"}) {
      man.output(sd / f);
    }
    skipped += sc.skipped.size();
    unsplittable += sc.unsplittable.size();
  }
  write_file(dir / "index.json", json(ids).dump(1) + "\n");
  man.output(dir / "index.json");
  man.count("scenarios", ids.size());
  man.count("skipped", skipped);
  man.count("unsplittable_relations", unsplittable);
  return man.write();
}

ordered_json run_train(const PipelineConfig& cfg) {
  Manifest man(cfg, Stage::kTrain);
  auto ids = scenario_index(cfg);
  auto embedder = make_embedder(cfg.embedder);
  man.provider("embedder", embedder->name());
  FeatureCache cache(cfg, *embedder);

  struct Job {
    std::size_t scenario;
    ProbeMode mode;
  };
  std::vector<std::vector<Instance>> train(ids.size());
  std::vector<std::vector<Features>> feats(ids.size());
  std::vector<Job> jobs;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    auto p = stage_dir(cfg, Stage::kAssemble) / ids[i] / "train.jsonl";
    man.input(p);
    train[i] = read_records(p);
    if (train[i].empty()) throw std::runtime_error("scenario " + ids[i] + " has no training data");
    feats[i] = cache.get(train[i]);
    for (auto m : cfg.modes) jobs.push_back({i, m});
  }

  std::vector<TrainResult> results(jobs.size());
  parallel_for(jobs.size(), thread_count(cfg, jobs.size()), [&](std::size_t j) {
    const auto& job = jobs[j];
    auto rels = relation_vocabulary(train[job.scenario]);
    auto ex = make_examples(train[job.scenario], feats[job.scenario], rels, job.mode);
    results[j] = train_probe(ex, job.mode, cfg.pool, rels, cfg.train);
  });

  const auto dir = stage_dir(cfg, Stage::kTrain);
  std::vector<ordered_json> losses;
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    const auto& id = ids[jobs[j].scenario];
    auto p = dir / id / (std::string(to_string(jobs[j].mode)) + ".json");
    save_model(results[j].model, p);
    man.output(p);
    const auto& tr = results[j].loss_trace;
    losses.push_back({{"scenario", id},
                      {"mode", to_string(jobs[j].mode)},
                      {"epochs", tr.size() - 1},
                      {"initial_loss", tr.front()},
                      {"final_loss", tr.back()}});
  }
  write_jsonl(losses, dir / "losses.jsonl");
  man.output(dir / "losses.jsonl");
  man.count("models", jobs.size());
  return man.write();
}

ordered_json run_predict(const PipelineConfig& cfg) {
  Manifest man(cfg, Stage::kPredict);
  auto ids = scenario_index(cfg);
  auto embedder = make_embedder(cfg.embedder);
  man.provider("embedder", embedder->name());
  FeatureCache cache(cfg, *embedder);
  const auto dir = stage_dir(cfg, Stage::kPredict);
  std::size_t n = 0;
  for (const auto& id : ids) {
    auto tp = stage_dir(cfg, Stage::kAssemble) / id / "test.jsonl";
    man.input(tp);
    auto test = read_records(tp);
    auto feats = cache.get(test);
    for (auto m : cfg.modes) {
      auto mp = stage_dir(cfg, Stage::kTrain) / id / (std::string(to_string(m)) + ".json");
      man.input(mp);
      auto model = load_model(mp);
      std::vector<ordered_json> rows;
      for (std::size_t i = 0; i < test.size(); ++i) {
        auto pr = predict(model, feats[i]);
        rows.push_back({{"id", test[i].id},
                        {"gold", test[i].relation},
                        {"pred", model.relations()[pr.relation]},
                        {"confidence", pr.probabilities[pr.relation]}});
      }
      auto out = dir / id / (std::string(to_string(m)) + ".jsonl");
      write_jsonl(rows, out);
      man.output(out);
      n += rows.size();
    }
  }
  man.count("predictions", n);
  return man.write();
}

EvalReport evaluate_rows(const std::vector<json>& rows) {
  std::vector<std::string> preds, golds, ids;
  for (const auto& r : rows) {
    ids.push_back(r.at("id").get<std::string>());
    golds.push_back(r.at("gold").get<std::string>());
    preds.push_back(r.at("pred").get<std::string>());
  }
  return evaluate(preds, golds, fingerprint_ids(ids));
}

ordered_json run_eval(const PipelineConfig& cfg) {
  Manifest man(cfg, Stage::kEval);
  auto ids = scenario_index(cfg);
  const auto dir = stage_dir(cfg, Stage::kEval);
  std::vector<ordered_json> per_fold;
  // (setting, source, target, task) -> per-fold macro F1
  std::map<std::tuple<std::string, std::string, std::string, std::string>, std::vector<double>> agg;
  std::vector<std::tuple<std::string, std::string, std::string, std::string>> order;
  auto record = [&](const json& meta, const std::string& task, const EvalReport& r) {
    auto key = std::make_tuple(meta["setting"].get<std::string>(), meta["source"].get<std::string>(),
                               meta["spec"]["target"].get<std::string>(), task);
    if (!agg.count(key)) order.push_back(key);
    agg[key].push_back(r.macro_f1);
    per_fold.push_back({{"scenario", meta["id"]},
                        {"setting", std::get<0>(key)},
                        {"source", std::get<1>(key)},
                        {"target", std::get<2>(key)},
                        {"fold", meta["spec"]["fold"]},
                        {"task", task},
                        {"n", r.n},
                        {"macro_f1", r.macro_f1},
                        {"micro_accuracy", r.micro_accuracy}});
  };
  for (const auto& id : ids) {
    auto meta = json::parse(read_file(stage_dir(cfg, Stage::kAssemble) / id / "scenario.json"));
    std::map<ProbeMode, EvalReport> reports;
    for (auto m : cfg.modes) {
      auto pp = stage_dir(cfg, Stage::kPredict) / id / (std::string(to_string(m)) + ".jsonl");
      man.input(pp);
      auto r = evaluate_rows(read_jsonl(pp));
      auto out = dir / id / (std::string(to_string(m)) + ".json");
      write_file(out, to_json(r).dump(2) + "\n");
      man.output(out);
      record(meta, task_name(m), r);
      reports[m] = std::move(r);
    }
    if (reports.count(ProbeMode::kMTNoShare) && reports.count(ProbeMode::kMTShare)) {
      auto me = metric_ensemble(reports[ProbeMode::kMTNoShare], "MT-NS",
                                reports[ProbeMode::kMTShare], "MT-S");
      auto out = dir / id / "me.json";
      write_file(out, to_json(me).dump(2) + "\n");
      man.output(out);
      record(meta, "ME", me);
    }
  }
  std::vector<ordered_json> summary;
  for (const auto& key : order) {
    const auto& v = agg[key];
    double mean = 0;
    for (double x : v) mean += x;
    SummaryRow row{std::get<0>(key), std::get<1>(key), std::get<2>(key), std::get<3>(key), v.size(),
                   mean / static_cast<double>(v.size())};
    summary.push_back(to_json(row));
  }
  write_jsonl(per_fold, dir / "results.jsonl");
  write_jsonl(summary, dir / "summary.jsonl");
  man.output(dir / "results.jsonl");
  man.output(dir / "summary.jsonl");
  man.count("reports", per_fold.size());
  man.count("cells", summary.size());
  return man.write();
}

ordered_json run_report(const PipelineConfig& cfg) {
  Manifest man(cfg, Stage::kReport);
  auto sp = stage_dir(cfg, Stage::kEval) / "summary.jsonl";
  man.input(sp);
  std::vector<SummaryRow> rows;
  for (const auto& j : read_jsonl(sp)) rows.push_back(summary_row_from_json(j));
  auto doc = render_report(rows, cfg.languages, cfg.targets);
  std::string md = doc.markdown;
  auto stats = stage_dir(cfg, Stage::kMarkup) / "stats.md";
  if (fs::exists(stats)) {
    man.input(stats);
    md += "\n## Gold data\n\n" + read_file(stats);
  }
  const auto dir = stage_dir(cfg, Stage::kReport);
  write_file(dir / "report.md", md);
  man.output(dir / "report.md");
  for (const auto& [name, csv] : doc.csv) {
    write_file(dir / name, csv);
    man.output(dir / name);
  }
  man.count("cells", rows.size());
  return man.write();
}

}  // namespace

std::vector<Decision> read_decisions(const fs::path& path) {
  std::vector<Decision> out;
  std::size_t line = 0;
  for (const auto& j : read_jsonl(path)) {
    ++line;
    try {
      if (j.contains("type")) {
        // Review-service event log: only decision events matter here.
        if (j["type"] == "decision") out.push_back(decision_from_json(j.at("decision")));
      } else {
        out.push_back(decision_from_json(j));
      }
    } catch (const std::exception& e) {
      throw ParseError(path.string() + ": " + e.what(), line);
    }
  }
  return out;
}

EvalReport evaluate_files(const fs::path& predictions, const fs::path& gold) {
  std::map<std::string, std::string> pred;
  for (const auto& j : read_jsonl(predictions)) {
    auto id = j.at("id").get<std::string>();
    auto label = j.contains("pred") ? j["pred"] : j.at("relation");
    if (!pred.emplace(id, label.get<std::string>()).second) {
      throw std::invalid_argument("duplicate prediction for " + id);
    }
  }
  std::vector<std::string> preds, golds, ids;
  for (const auto& g : read_records(gold)) {
    auto it = pred.find(g.id);
    if (it == pred.end()) throw std::invalid_argument("no prediction for " + g.id);
    ids.push_back(g.id);
    golds.push_back(g.relation);
    preds.push_back(it->second);
    pred.erase(it);
  }
  if (!pred.empty()) throw std::invalid_argument("prediction for unknown instance " + pred.begin()->first);
  return evaluate(preds, golds, fingerprint_ids(ids));
}

ordered_json run_stage(Stage s, const PipelineConfig& cfg) {
  if (auto missing = earliest_missing(cfg, s)) throw PrerequisiteError(s, *missing);
  const auto dir = stage_dir(cfg, s);
  fs::remove_all(dir);
  fs::create_directories(dir);
  switch (s) {
    case Stage::kHarvest: return run_harvest(cfg);
    case Stage::kFilter: return run_filter(cfg);
    case Stage::kMarkup: return run_markup(cfg);
    case Stage::kSilver: return run_silver(cfg);
    case Stage::kAssemble: return run_assemble(cfg);
    case Stage::kTrain: return run_train(cfg);
    case Stage::kPredict: return run_predict(cfg);
    case Stage::kEval: return run_eval(cfg);
    case Stage::kReport: return run_report(cfg);
  }
  return {};
}

void run_all(const PipelineConfig& cfg) {
  for (auto s : all_stages()) run_stage(s, cfg);
}

ordered_json to_json(const SummaryRow& r) {
  return {{"setting", r.setting}, {"source", r.source}, {"target", r.target},
          {"task", r.task},       {"folds", r.folds},   {"macro_f1", r.macro_f1}};
}

SummaryRow summary_row_from_json(const json& j) {
  return {j.at("setting").get<std::string>(), j.at("source").get<std::string>(),
          j.at("target").get<std::string>(),  j.at("task").get<std::string>(),
          j.value("folds", std::size_t{1}),   j.at("macro_f1").get<double>()};
}

ReportDocument render_report(const std::vector<SummaryRow>& rows,
                             const std::vector<std::string>& languages,
                             const std::vector<std::string>& targets) {
  ReportDocument doc;
  std::string md = "# Transfer results\n\nMacro F1 (%), averaged over folds.\n";

  const std::vector<std::string> task_order = {"RE", "MT-NS", "MT-S", "ME"};
  std::map<std::string, double> baseline;
  std::map<std::pair<std::string, std::string>, double> elfi;
  for (const auto& r : rows) {
    if (r.setting != "ELFI") continue;
    elfi[{r.task, r.target}] = r.macro_f1;
    auto it = baseline.find(r.target);
    if (it == baseline.end() || r.macro_f1 > it->second) baseline[r.target] = r.macro_f1;
  }
  if (!elfi.empty()) {
    std::string t = "| Task |", sep = "|---|", csv = "task,target,macro_f1\n";
    for (const auto& tg : targets) {
      t += " " + display_language(tg) + " |";
      sep += "---|";
    }
    t += "\n" + sep + "\n";
    for (const auto& task : task_order) {
      bool any = false;
      std::string line = "| " + task + " |";
      for (const auto& tg : targets) {
        auto it = elfi.find({task, tg});
        if (it == elfi.end()) {
          line += " – |";
          continue;
        }
        any = true;
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.2f", 100.0 * it->second);
        line += std::string(" ") + buf + " |";
        std::snprintf(buf, sizeof buf, "%.6f", it->second);
        csv += task + "," + tg + "," + buf + "\n";
      }
      if (any) t += line + "\n";
    }
    md += "\n## ELFI\n\n" + t;
    doc.csv["elfi.csv"] = csv;
  }

  static const std::regex setting_re("^(LMx|MTx|Ix)([0-9]+)$");
  for (const std::string family : {"LMx", "MTx", "Ix"}) {
    std::vector<MatrixCell> cells;
    std::set<std::size_t> shots;
    std::set<std::string> sources, tasks;
    for (const auto& r : rows) {
      std::smatch m;
      if (!std::regex_match(r.setting, m, setting_re) || m[1] != family) continue;
      if (r.task != "RE" && r.task != "ME") continue;
      shots.insert(std::stoul(m[2]));
      sources.insert(r.source);
      tasks.insert(r.task);
      cells.push_back({r.source, r.task, r.setting, r.target, r.macro_f1});
    }
    if (cells.empty()) continue;
    MatrixLayout layout;
    for (const auto& l : languages) {
      if (sources.count(l)) layout.sources.push_back(l);
    }
    if (sources.count("ALL")) layout.sources.push_back("ALL");
    for (const auto& s : sources) {
      if (std::find(layout.sources.begin(), layout.sources.end(), s) == layout.sources.end()) {
        layout.sources.push_back(s);
      }
    }
    for (const char* t : {"RE", "ME"}) {
      if (tasks.count(t)) layout.tasks.push_back(t);
    }
    for (auto k : shots) layout.settings.push_back(family + std::to_string(k));
    layout.targets = targets;
    auto m = render_transfer_matrix(cells, baseline, layout);
    md += "\n## " + family + "\n\n" + m.markdown;
    std::string lower = family;
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    doc.csv[lower + ".csv"] = m.csv;
  }
  doc.markdown = md;
  return doc;
}

}  // namespace relboot
