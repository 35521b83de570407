// relbootstrap: command-line driver for the dataset and transfer pipeline.

#include <chrono>
#include <csignal>
#include <cstdio>
#include <iostream>
#include <mutex>

#include <CLI11.hpp>
#include <httplib.h>

#include "relboot/embedding.h"
#include "relboot/pipeline.h"
#include "relboot/provider_server.h"
#include "relboot/records.h"
#include "relboot/review.h"
#include "relboot/translation.h"

namespace fs = std::filesystem;
using namespace relboot;

namespace {

struct PipelineOpts {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string work;

  PipelineConfig load() const {
    if (config.empty()) throw std::invalid_argument("--config is required");
    return load_pipeline_config(config, seed,
                                work.empty() ? std::nullopt : std::optional<fs::path>(work));
  }
};

void add_pipeline_opts(CLI::App* sub, PipelineOpts& o, bool required = true) {
  auto* c = sub->add_option("-c,--config", o.config, "pipeline config (JSON)");
  if (required) c->required();
  sub->add_option("--seed", o.seed, "override the config seed");
  sub->add_option("--work", o.work, "override the work directory");
}

void print_stage(Stage s, const nlohmann::ordered_json& manifest, double seconds) {
  std::printf("%-9s %6.2fs  outputs=%zu  %s\n", std::string(to_string(s)).c_str(), seconds,
              manifest["outputs"].size(), manifest["counts"].dump().c_str());
}

void run_one(Stage s, const PipelineConfig& cfg) {
  auto t0 = std::chrono::steady_clock::now();
  auto m = run_stage(s, cfg);
  print_stage(s, m, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
}

httplib::Server* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

int serve(httplib::Server& server, const std::string& host, int port, const std::string& what) {
  g_server = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  int bound = port;
  if (port == 0) {
    bound = server.bind_to_any_port(host);
    if (bound < 0) throw std::runtime_error("cannot bind " + host);
  } else if (!server.bind_to_port(host, port)) {
    throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
  }
  std::printf("%s listening on http://%s:%d\n", what.c_str(), host.c_str(), bound);
  std::fflush(stdout);
  server.listen_after_bind();
  g_server = nullptr;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Relation-classification dataset bootstrapping and cross-lingual transfer"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  std::map<Stage, PipelineOpts> stage_opts;
  std::map<Stage, CLI::App*> stage_cmds;
  const std::map<Stage, std::string> help = {
      {Stage::kHarvest, "harvest candidate instances from the corpus"},
      {Stage::kFilter, "filter candidates by embedding similarity"},
      {Stage::kMarkup, "apply review decisions, export gold data and render markup"},
      {Stage::kSilver, "translate gold data into silver data"},
      {Stage::kAssemble, "assemble train/test sets for every configured scenario"},
      {Stage::kTrain, "train probes for every scenario and probe mode"},
      {Stage::kPredict, "predict the test set of every scenario"},
      {Stage::kEval, "score predictions and average over folds"},
  };
  for (const auto& [stage, text] : help) {
    auto* sub = app.add_subcommand(std::string(to_string(stage)), text);
    add_pipeline_opts(sub, stage_opts[stage], stage != Stage::kEval);
    stage_cmds[stage] = sub;
  }

  // eval also works on loose files.
  std::string pred_path, gold_path, report_path;
  auto* eval_cmd = stage_cmds[Stage::kEval];
  eval_cmd->add_option("--pred", pred_path, "predictions JSONL ({id, pred})");
  eval_cmd->add_option("--gold", gold_path, "gold records JSONL");
  eval_cmd->add_option("--report", report_path, "write the JSON report here");

  PipelineOpts report_opts;
  std::string results_dir, out_md;
  std::vector<std::string> langs = {"en", "bn", "hi", "te"}, targets = {"bn", "hi", "te"};
  auto* report_cmd = app.add_subcommand("report-matrix", "render transfer matrices");
  add_pipeline_opts(report_cmd, report_opts, false);
  report_cmd->add_option("--results", results_dir, "directory holding summary.jsonl");
  report_cmd->add_option("--out", out_md, "markdown output (CSV files go beside it)");
  report_cmd->add_option("--languages", langs, "row order")->delimiter(',');
  report_cmd->add_option("--targets", targets, "column order")->delimiter(',');

  PipelineOpts all_opts;
  auto* all_cmd = app.add_subcommand("all", "run every stage in order");
  add_pipeline_opts(all_cmd, all_opts);

  PipelineOpts review_opts;
  std::string queue_path, catalog_path, log_path, snapshot_path, assets, mode = "production";
  std::string host = "127.0.0.1";
  int port = 8080;
  double lease_minutes = 30;
  std::size_t pilot_per_language = 100;
  auto* review_cmd = app.add_subcommand("serve-review", "serve the review queue over HTTP");
  add_pipeline_opts(review_cmd, review_opts, false);
  review_cmd->add_option("--queue", queue_path, "candidate records to review");
  review_cmd->add_option("--catalog", catalog_path, "relation catalog JSONL");
  review_cmd->add_option("--decisions,--log", log_path, "append-only event log");
  review_cmd->add_option("--snapshot", snapshot_path, "snapshot file");
  review_cmd->add_option("--mode", mode, "pilot or production")->check(CLI::IsMember({"pilot", "production"}));
  review_cmd->add_option("--pilot-per-language", pilot_per_language);
  review_cmd->add_option("--lease-minutes", lease_minutes);
  review_cmd->add_option("--assets", assets, "static UI directory served at /");
  review_cmd->add_option("--host", host);
  review_cmd->add_option("--port", port, "0 picks a free port");

  std::size_t dim = 64;
  std::uint64_t emb_seed = 0;
  int emb_port = 8091;
  auto* emb_cmd = app.add_subcommand("stub-embedder", "serve the stub embedder over HTTP");
  emb_cmd->add_option("--dim", dim);
  emb_cmd->add_option("--seed", emb_seed);
  emb_cmd->add_option("--host", host);
  emb_cmd->add_option("--port", emb_port, "0 picks a free port");

  std::string dictionary;
  int tr_port = 8092;
  auto* tr_cmd = app.add_subcommand("stub-translator", "serve the dictionary translator over HTTP");
  tr_cmd->add_option("--dictionary", dictionary, "dictionary JSON")->required();
  tr_cmd->add_option("--host", host);
  tr_cmd->add_option("--port", tr_port, "0 picks a free port");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    for (const auto& [stage, sub] : stage_cmds) {
      if (!sub->parsed()) continue;
      if (stage == Stage::kEval && !pred_path.empty()) {
        if (gold_path.empty()) throw std::invalid_argument("--pred needs --gold");
        auto r = evaluate_files(pred_path, gold_path);
        if (!report_path.empty()) write_file(report_path, to_json(r).dump(2) + "\n");
        std::cout << render_eval_markdown(r);
        return 0;
      }
      run_one(stage, stage_opts[stage].load());
      return 0;
    }
    if (report_cmd->parsed()) {
      if (results_dir.empty()) {
        run_one(Stage::kReport, report_opts.load());
        return 0;
      }
      if (out_md.empty()) throw std::invalid_argument("--results needs --out");
      std::vector<SummaryRow> rows;
      for (const auto& j : read_jsonl(fs::path(results_dir) / "summary.jsonl")) {
        rows.push_back(summary_row_from_json(j));
      }
      auto doc = render_report(rows, langs, targets);
      fs::path out(out_md);
      write_file(out, doc.markdown);
      for (const auto& [name, csv] : doc.csv) {
        write_file(out.parent_path() / (out.stem().string() + "." + name), csv);
      }
      return 0;
    }
    if (all_cmd->parsed()) {
      auto cfg = all_opts.load();
      auto t0 = std::chrono::steady_clock::now();
      for (auto s : all_stages()) run_one(s, cfg);
      std::printf("done in %.2fs; report at %s\n",
                  std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(),
                  (stage_dir(cfg, Stage::kReport) / "report.md").c_str());
      return 0;
    }
    if (review_cmd->parsed()) {
      if (!review_opts.config.empty()) {
        auto cfg = review_opts.load();
        if (queue_path.empty()) queue_path = (stage_dir(cfg, Stage::kFilter) / "retained.jsonl").string();
        if (catalog_path.empty()) catalog_path = (stage_dir(cfg, Stage::kHarvest) / "relations.jsonl").string();
        if (log_path.empty()) log_path = (cfg.work / "review" / "events.jsonl").string();
      }
      if (queue_path.empty() || log_path.empty()) {
        throw std::invalid_argument("serve-review needs --queue and --decisions (or --config)");
      }
      ReviewConfig rc;
      rc.mode = parse_review_mode(mode);
      rc.pilot_per_language = pilot_per_language;
      rc.lease_ms = static_cast<std::int64_t>(lease_minutes * 60 * 1000);
      rc.log_path = log_path;
      rc.snapshot_path = snapshot_path.empty() ? fs::path(log_path + ".snapshot") : fs::path(snapshot_path);
      fs::create_directories(fs::absolute(rc.log_path).parent_path());
      std::vector<RelationLabel> catalog;
      if (!catalog_path.empty()) catalog = read_catalog(catalog_path);
      ReviewQueue queue(read_records(fs::path(queue_path)), std::move(catalog), rc);
      httplib::Server server;
      mount_review_routes(server, queue, assets);
      return serve(server, host, port, "review service");
    }
    if (emb_cmd->parsed()) {
      StubEmbedder embedder(dim, emb_seed);
      std::mutex mu;
      httplib::Server server;
      mount_embedding_routes(server, embedder, mu);
      return serve(server, host, emb_port, "stub embedder");
    }
    if (tr_cmd->parsed()) {
      auto tr = DictionaryTranslator::from_file(dictionary);
      std::mutex mu;
      httplib::Server server;
      mount_translation_routes(server, tr, mu);
      return serve(server, host, tr_port, "stub translator");
    }
  } catch (const PrerequisiteError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
