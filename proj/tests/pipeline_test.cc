#include <doctest.h>

#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>

#include <sys/wait.h>

#include "relboot/pipeline.h"
#include "relboot/records.h"
#include "test_util.h"

using namespace relboot;
namespace fs = std::filesystem;
using testing::TempDir;

namespace {

const fs::path kMini = fs::path(RELBOOT_DATA) / "mini";

// The bundled mini config with absolute data paths, a private work dir and
// `patch` merged on top.
fs::path write_config(const TempDir& dir, const nlohmann::json& patch = nlohmann::json::object()) {
  auto j = nlohmann::json::parse(read_file(kMini / "pipeline.json"));
  for (auto& [k, v] : j["paths"].items()) {
    if (k != "work") v = (kMini / v.get<std::string>()).string();
  }
  j["paths"]["work"] = (dir / "work").string();
  j["providers"]["translator"] = "stub:" + (kMini / "dictionary.json").string();
  j.merge_patch(patch);
  auto path = dir / "pipeline.json";
  write_file(path, j.dump(2));
  return path;
}

const nlohmann::json kSmall = {{"scenarios", {{{"kind", "ELFI"}}, {{"kind", "LMx"}, {"shots", {0}}}}},
                               {"targets", {"hi"}},
                               {"probe", {{"epochs", 40}}}};

struct Command {
  int status = 0;
  std::string output;
};

Command run_cli(const std::string& args) {
  std::string cmd = std::string(RELBOOT_CLI) + " " + args + " 2>&1";
  Command c;
  FILE* p = popen(cmd.c_str(), "r");
  REQUIRE(p);
  std::array<char, 512> buf;
  while (fgets(buf.data(), buf.size(), p)) c.output += buf.data();
  int st = pclose(p);
  c.status = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  return c;
}

}  // namespace

TEST_CASE("config loading resolves paths, applies overrides and rejects unknown keys") {
  TempDir dir("relboot_pipe");
  auto path = write_config(dir);
  auto cfg = load_pipeline_config(path);
  CHECK(cfg.seed == 7);
  CHECK(cfg.catalog == kMini / "catalog.jsonl");
  CHECK(cfg.work == dir / "work");
  CHECK(cfg.train.standardize);
  CHECK(cfg.scenarios.size() == 4);

  auto over = load_pipeline_config(path, 99, dir / "elsewhere");
  CHECK(over.seed == 99);
  CHECK(over.train.seed == 99);
  CHECK(over.split.seed == 99);
  CHECK(over.work == dir / "elsewhere");

  ::setenv("RELBOOT_EMBEDDER", "stub:8:3", 1);
  CHECK(load_pipeline_config(path).embedder == "stub:8:3");
  ::unsetenv("RELBOOT_EMBEDDER");

  write_config(dir, {{"probe", {{"epocs", 3}}}});
  CHECK_THROWS_AS(load_pipeline_config(path), std::invalid_argument);
  write_config(dir, {{"targets", {"xx"}}});
  CHECK_THROWS_AS(load_pipeline_config(path), std::invalid_argument);
}

TEST_CASE("stages refuse to run before their prerequisites") {
  TempDir dir("relboot_pipe");
  auto cfg = load_pipeline_config(write_config(dir, kSmall));
  try {
    run_stage(Stage::kEval, cfg);
    FAIL("expected a prerequisite error");
  } catch (const PrerequisiteError& e) {
    CHECK(e.missing() == Stage::kHarvest);
  }
  for (auto s : {Stage::kHarvest, Stage::kFilter, Stage::kMarkup, Stage::kAssemble}) run_stage(s, cfg);
  try {
    run_stage(Stage::kEval, cfg);
    FAIL("expected a prerequisite error");
  } catch (const PrerequisiteError& e) {
    CHECK(e.missing() == Stage::kTrain);
    CHECK(std::string(e.what()).find("relbootstrap train") != std::string::npos);
  }
}

TEST_CASE("manifests are stable across reruns and track the seed") {
  TempDir a("relboot_pipe"), b("relboot_pipe"), c("relboot_pipe");
  auto ca = load_pipeline_config(write_config(a, kSmall));
  auto cb = load_pipeline_config(write_config(b, kSmall));
  auto cc = load_pipeline_config(write_config(c, kSmall), 8);
  run_all(ca);
  run_all(cb);
  for (auto s : all_stages()) {
    CAPTURE(to_string(s));
    auto ma = read_file(stage_dir(ca, s) / "manifest.json");
    CHECK(ma == read_file(stage_dir(cb, s) / "manifest.json"));
    auto m = nlohmann::json::parse(ma);
    CHECK(m["seed"] == 7);
    CHECK(m["version"] == kVersion);
    CHECK_FALSE(m["outputs"].empty());
  }
  CHECK(read_file(stage_dir(ca, Stage::kReport) / "report.md") ==
        read_file(stage_dir(cb, Stage::kReport) / "report.md"));

  auto h = run_stage(Stage::kHarvest, cc);
  auto ha = nlohmann::json::parse(read_file(stage_dir(ca, Stage::kHarvest) / "manifest.json"));
  CHECK(h["seed"] == 8);
  CHECK(h["config_hash"] != ha["config_hash"]);
  CHECK(nlohmann::json::parse(h["inputs"].dump()) == ha["inputs"]);

  // A downstream manifest records the upstream manifest it consumed.
  auto fm = nlohmann::json::parse(read_file(stage_dir(ca, Stage::kFilter) / "manifest.json"));
  CHECK(fm["inputs"]["work/harvest/manifest.json"] ==
        file_hash(stage_dir(ca, Stage::kHarvest) / "manifest.json"));
}

TEST_CASE("markup stage exports reviewed gold and applies corrections") {
  TempDir dir("relboot_pipe");
  auto cfg = load_pipeline_config(write_config(dir, kSmall));
  for (auto s : {Stage::kHarvest, Stage::kFilter, Stage::kMarkup}) run_stage(s, cfg);
  auto retained = read_records(stage_dir(cfg, Stage::kFilter) / "retained.jsonl");
  std::size_t gold = 0;
  for (const auto& lang : cfg.languages) {
    for (const auto& g : read_records(stage_dir(cfg, Stage::kMarkup) / "gold" / (lang + ".jsonl"))) {
      ++gold;
      CHECK(g.grade == Grade::kGold);
      CHECK(g.lang == lang);
      CHECK(g.e2.etype != EntityType::kLoc);  // the mistyped pair row is corrected
    }
  }
  auto review = nlohmann::json::parse(read_file(stage_dir(cfg, Stage::kMarkup) / "review.json"));
  CHECK(gold + review["discarded"].size() + review["undecided"].size() == retained.size());
  CHECK(review["undecided"].empty());
  CHECK(read_file(stage_dir(cfg, Stage::kMarkup) / "stats.md").find("| Total |") != std::string::npos);
}

TEST_CASE("review event logs are accepted as decision sources") {
  TempDir dir("relboot_pipe");
  write_jsonl({{{"seq", 1}, {"type", "lease"}, {"instance", "x"}, {"annotator", "a"}, {"deadline", 5}},
               {{"seq", 2},
                {"type", "decision"},
                {"time", 3},
                {"decision", {{"instance", "x"}, {"annotator", "a"}, {"action", "discard"}, {"timestamp", 3}}}}},
              dir / "events.jsonl");
  auto ds = read_decisions(dir / "events.jsonl");
  REQUIRE(ds.size() == 1);
  CHECK(ds[0].action == Action::kDiscard);
  CHECK(ds[0].timestamp == 3);
  write_file(dir / "bad.jsonl", "{\"instance\":\"x\"}\n");
  CHECK_THROWS(read_decisions(dir / "bad.jsonl"));
}

TEST_CASE("report rendering groups families and picks the best ELFI task as baseline") {
  std::vector<SummaryRow> rows = {
      {"ELFI", "hi", "hi", "RE", 3, 0.8},   {"ELFI", "hi", "hi", "ME", 3, 0.9},
      {"LMx0", "en", "hi", "RE", 3, 0.5},   {"LMx0", "en", "hi", "ME", 3, 0.6},
      {"LMx0", "ALL", "hi", "RE", 3, 0.55}, {"LMx0", "ALL", "hi", "ME", 3, 0.65},
      {"LMx0", "en", "hi", "MT-S", 3, 0.7}, {"Ix0", "en", "hi", "RE", 3, 0.4},
  };
  auto doc = render_report(rows, {"en", "hi"}, {"hi"});
  CHECK(doc.markdown.find("| ELFI (best) |  | 90.00 |") != std::string::npos);
  CHECK(doc.markdown.find("| ALL | RE | 55.00 |") != std::string::npos);
  CHECK(doc.markdown.find("|  | ME | **65.00** (-25.00) |") != std::string::npos);
  CHECK(doc.markdown.find("## MTx") == std::string::npos);
  CHECK(doc.csv.count("lmx.csv"));
  CHECK(doc.csv.count("ix.csv"));
  CHECK(doc.csv.at("elfi.csv").find("ME,hi,0.900000") != std::string::npos);
}

TEST_CASE("command line: prerequisite errors, loose-file eval and stage output") {
  TempDir dir("relboot_pipe");
  auto cfg_path = write_config(dir, kSmall);
  auto r = run_cli("eval -c " + cfg_path.string());
  CHECK(r.status == 3);
  CHECK(r.output.find("run `relbootstrap harvest` first") != std::string::npos);

  r = run_cli("harvest -c " + cfg_path.string() + " --seed 7");
  CHECK(r.status == 0);
  CHECK(r.output.find("harvest") != std::string::npos);
  CHECK(fs::exists(dir / "work" / "harvest" / "manifest.json"));

  r = run_cli("filter -c " + (dir / "missing.json").string());
  CHECK(r.status == 1);

  Rng rng(3);
  auto gold = testing::synthetic_gold(rng, "hi", 3, 2, 2, 3);
  write_records(gold, dir / "gold.jsonl");
  std::vector<nlohmann::ordered_json> preds;
  for (const auto& g : gold) preds.push_back({{"id", g.id}, {"pred", g.relation}});
  write_jsonl(preds, dir / "pred.jsonl");
  r = run_cli("eval --pred " + (dir / "pred.jsonl").string() + " --gold " + (dir / "gold.jsonl").string() +
              " --report " + (dir / "report.json").string());
  CHECK(r.status == 0);
  auto rep = eval_report_from_json(nlohmann::json::parse(read_file(dir / "report.json")));
  CHECK(rep.macro_f1 == 1.0);
  CHECK(rep.n == gold.size());

  r = run_cli("frobnicate");
  CHECK(r.status == 2);
  CHECK(run_cli("--help").status == 0);
}
