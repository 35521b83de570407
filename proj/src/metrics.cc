#include "relboot/metrics.h"

#include <algorithm>
#include <cstdio>
#include <set>
#include <sstream>
#include <stdexcept>

#include "relboot/markup.h"
#include "relboot/rng.h"

namespace relboot {

namespace {

double ratio(double a, double b) { return b > 0 ? a / b : 0.0; }

double harmonic(double p, double r) { return p + r > 0 ? 2 * p * r / (p + r) : 0.0; }

std::string fixed2(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string signed2(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%+.2f", v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

const char* kDash = "–";

}  // namespace

EvalReport evaluate(const std::vector<std::string>& predictions,
                    const std::vector<std::string>& golds, std::string fingerprint) {
  if (predictions.size() != golds.size()) {
    throw std::invalid_argument("evaluate: " + std::to_string(predictions.size()) +
                                " predictions for " + std::to_string(golds.size()) + " golds");
  }
  EvalReport r;
  r.fingerprint = std::move(fingerprint);
  r.n = golds.size();
  std::set<std::string> labels(golds.begin(), golds.end());
  labels.insert(predictions.begin(), predictions.end());
  r.labels.assign(labels.begin(), labels.end());
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < r.labels.size(); ++i) index[r.labels[i]] = i;

  r.confusion.assign(r.labels.size(), std::vector<std::size_t>(r.labels.size(), 0));
  std::size_t correct = 0;
  for (std::size_t i = 0; i < golds.size(); ++i) {
    ++r.confusion[index[golds[i]]][index[predictions[i]]];
    correct += golds[i] == predictions[i];
  }
  r.micro_accuracy = ratio(static_cast<double>(correct), static_cast<double>(r.n));

  double sum = 0;
  std::size_t present = 0;
  for (std::size_t i = 0; i < r.labels.size(); ++i) {
    RelationScore s;
    double tp = static_cast<double>(r.confusion[i][i]);
    for (std::size_t j = 0; j < r.labels.size(); ++j) {
      s.support += r.confusion[i][j];
      s.predicted += r.confusion[j][i];
    }
    s.precision = ratio(tp, static_cast<double>(s.predicted));
    s.recall = ratio(tp, static_cast<double>(s.support));
    s.f1 = harmonic(s.precision, s.recall);
    if (s.support > 0) {
      sum += s.f1;
      ++present;
    }
    r.per_relation[r.labels[i]] = s;
  }
  r.macro_f1 = ratio(sum, static_cast<double>(present));
  return r;
}

std::string fingerprint_ids(const std::vector<std::string>& ids) {
  std::uint64_t h = fnv1a64("");
  for (const auto& id : ids) {
    h = fnv1a64(id, h);
    h = fnv1a64("\n", h);
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

std::set<std::string> gold_present(const EvalReport& r) {
  std::set<std::string> out;
  for (const auto& [l, s] : r.per_relation) {
    if (s.support > 0) out.insert(l);
  }
  return out;
}

}  // namespace

EvalReport metric_ensemble(const EvalReport& a, const std::string& a_name, const EvalReport& b,
                           const std::string& b_name) {
  if (a.fingerprint != b.fingerprint) {
    throw std::invalid_argument("ensemble: reports come from different test sets");
  }
  auto rels = gold_present(a);
  if (rels != gold_present(b)) throw std::invalid_argument("ensemble: gold relation sets differ");
  EvalReport r;
  r.fingerprint = a.fingerprint;
  r.n = a.n;
  r.labels.assign(rels.begin(), rels.end());
  double sum = 0;
  for (const auto& rel : rels) {
    const auto& sa = a.per_relation.at(rel);
    const auto& sb = b.per_relation.at(rel);
    RelationScore pick = sb.f1 > sa.f1 ? sb : sa;
    pick.origin = sb.f1 > sa.f1 ? b_name : a_name;
    sum += pick.f1;
    r.per_relation[rel] = pick;
  }
  r.macro_f1 = ratio(sum, static_cast<double>(rels.size()));
  r.micro_accuracy = b.macro_f1 > a.macro_f1 ? b.micro_accuracy : a.micro_accuracy;
  return r;
}

nlohmann::ordered_json to_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["fingerprint"] = r.fingerprint;
  j["n"] = r.n;
  j["macro_f1"] = r.macro_f1;
  j["micro_accuracy"] = r.micro_accuracy;
  j["labels"] = r.labels;
  nlohmann::ordered_json per = nlohmann::ordered_json::object();
  for (const auto& [l, s] : r.per_relation) {
    nlohmann::ordered_json e;
    e["precision"] = s.precision;
    e["recall"] = s.recall;
    e["f1"] = s.f1;
    e["support"] = s.support;
    e["predicted"] = s.predicted;
    if (!s.origin.empty()) e["origin"] = s.origin;
    per[l] = e;
  }
  j["per_relation"] = per;
  j["confusion"] = r.confusion;
  return j;
}

EvalReport eval_report_from_json(const nlohmann::json& j) {
  EvalReport r;
  r.fingerprint = j.value("fingerprint", "");
  r.n = j.at("n").get<std::size_t>();
  r.macro_f1 = j.at("macro_f1").get<double>();
  r.micro_accuracy = j.at("micro_accuracy").get<double>();
  r.labels = j.at("labels").get<std::vector<std::string>>();
  for (const auto& [l, e] : j.at("per_relation").items()) {
    RelationScore s;
    s.precision = e.at("precision").get<double>();
    s.recall = e.at("recall").get<double>();
    s.f1 = e.at("f1").get<double>();
    s.support = e.at("support").get<std::size_t>();
    s.predicted = e.value("predicted", std::size_t{0});
    s.origin = e.value("origin", "");
    r.per_relation[l] = s;
  }
  r.confusion = j.value("confusion", std::vector<std::vector<std::size_t>>{});
  return r;
}

std::string render_eval_markdown(const EvalReport& r) {
  std::ostringstream o;
  o << "Macro F1: " << fixed2(100 * r.macro_f1) << "  \n";
  o << "Accuracy: " << fixed2(100 * r.micro_accuracy) << "  \n";
  o << "Instances: " << r.n << "\n\n";
  o << "| Relation | Precision | Recall | F1 | Support |";
  bool origin = false;
  for (const auto& [l, s] : r.per_relation) origin = origin || !s.origin.empty();
  if (origin) o << " From |";
  o << "\n|---|---|---|---|---|" << (origin ? "---|" : "") << "\n";
  for (const auto& [l, s] : r.per_relation) {
    o << "| " << l << " | " << fixed2(100 * s.precision) << " | " << fixed2(100 * s.recall) << " | "
      << fixed2(100 * s.f1) << " | " << s.support << " |";
    if (origin) o << " " << s.origin << " |";
    o << "\n";
  }
  if (!r.confusion.empty()) {
    o << "\nConfusion (rows gold, columns predicted)\n\n|  |";
    for (const auto& l : r.labels) o << " " << l << " |";
    o << "\n|---|";
    for (std::size_t i = 0; i < r.labels.size(); ++i) o << "---|";
    o << "\n";
    for (std::size_t i = 0; i < r.labels.size(); ++i) {
      o << "| " << r.labels[i] << " |";
      for (auto c : r.confusion[i]) o << " " << c << " |";
      o << "\n";
    }
  }
  return o.str();
}

std::vector<LexicalCell> lexical_profile(const std::vector<Instance>& dataset) {
  std::map<std::pair<std::string, std::string>, std::pair<std::size_t, double>> acc;
  for (const auto& inst : dataset) {
    auto& [count, sum] = acc[{inst.relation, inst.lang}];
    ++count;
    sum += static_cast<double>(lexical_distance(inst));
  }
  std::vector<LexicalCell> out;
  for (const auto& [key, v] : acc) {
    out.push_back({key.first, key.second, v.first, v.second / static_cast<double>(v.first)});
  }
  return out;
}

std::string render_lexical_markdown(const std::vector<LexicalCell>& cells) {
  std::set<std::string> langs;
  std::map<std::string, std::map<std::string, double>> grid;
  for (const auto& c : cells) {
    langs.insert(c.lang);
    grid[c.relation][c.lang] = c.mean;
  }
  std::ostringstream o;
  o << "| Relation |";
  for (const auto& l : langs) o << " " << display_language(l) << " |";
  o << "\n|---|";
  for (std::size_t i = 0; i < langs.size(); ++i) o << "---|";
  o << "\n";
  for (const auto& [rel, row] : grid) {
    o << "| " << rel << " |";
    for (const auto& l : langs) {
      auto it = row.find(l);
      o << " " << (it == row.end() ? std::string(kDash) : fixed2(it->second)) << " |";
    }
    o << "\n";
  }
  return o.str();
}

std::string render_lexical_csv(const std::vector<LexicalCell>& cells) {
  std::ostringstream o;
  o << "relation,lang,count,mean_distance\n";
  for (const auto& c : cells) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", c.mean);
    o << csv_field(c.relation) << "," << c.lang << "," << c.count << "," << buf << "\n";
  }
  return o.str();
}

std::string display_language(const std::string& code) {
  if (code.empty() || code == "ALL") return code;
  std::string out = code;
  if (out[0] >= 'a' && out[0] <= 'z') out[0] = static_cast<char>(out[0] - 'a' + 'A');
  return out;
}

MatrixDocument render_transfer_matrix(const std::vector<MatrixCell>& cells,
                                      const std::map<std::string, double>& baseline,
                                      const MatrixLayout& layout) {
  using Key = std::tuple<std::string, std::string, std::string, std::string>;
  std::map<Key, double> value;
  for (const auto& c : cells) {
    Key k{c.source, c.task, c.setting, c.target};
    if (value.count(k)) {
      throw std::invalid_argument("duplicate result for " + c.source + "/" + c.task + "/" + c.setting +
                                  "/" + c.target);
    }
    value[k] = c.macro_f1;
  }
  auto lookup = [&](const std::string& s, const std::string& t, const std::string& set,
                    const std::string& tgt) -> std::optional<double> {
    if (s == tgt) return std::nullopt;
    auto it = value.find({s, t, set, tgt});
    if (it == value.end()) return std::nullopt;
    return it->second;
  };

  // Best value per (target, setting) column, compared at display precision so
  // equal-looking cells are flagged together.
  std::map<std::pair<std::string, std::string>, std::string> best;
  for (const auto& tgt : layout.targets) {
    for (const auto& set : layout.settings) {
      std::optional<double> top;
      for (const auto& s : layout.sources)
        for (const auto& t : layout.tasks)
          if (auto v = lookup(s, t, set, tgt); v && (!top || *v > *top)) top = v;
      if (top) best[{tgt, set}] = fixed2(100 * *top);
    }
  }

  const bool multi = layout.settings.size() > 1;
  std::ostringstream md, csv;
  md << "| Source | Tasks |";
  for (const auto& tgt : layout.targets)
    for (const auto& set : layout.settings)
      md << " " << display_language(tgt) << (multi ? " " + set : "") << " |";
  md << "\n|---|---|";
  for (std::size_t i = 0; i < layout.targets.size() * layout.settings.size(); ++i) md << "---|";
  md << "\n";
  csv << "source,task,setting,target,macro_f1,best,gap\n";

  md << "| " << layout.baseline_label << " |  |";
  for (const auto& tgt : layout.targets) {
    auto it = baseline.find(tgt);
    for (std::size_t i = 0; i < layout.settings.size(); ++i) {
      md << " " << (it == baseline.end() ? std::string(kDash) : fixed2(100 * it->second)) << " |";
    }
    if (it != baseline.end()) {
      csv << csv_field(layout.baseline_label) << ",,," << tgt << "," << fixed2(100 * it->second)
          << ",,\n";
    }
  }
  md << "\n";

  for (const auto& s : layout.sources) {
    for (std::size_t ti = 0; ti < layout.tasks.size(); ++ti) {
      const auto& t = layout.tasks[ti];
      md << "| " << (ti == 0 ? display_language(s) : "") << " | " << t << " |";
      for (const auto& tgt : layout.targets) {
        for (const auto& set : layout.settings) {
          auto v = lookup(s, t, set, tgt);
          if (!v) {
            md << " " << kDash << " |";
            continue;
          }
          std::string shown = fixed2(100 * *v);
          bool top = best[{tgt, set}] == shown;
          std::string gap;
          auto base = baseline.find(tgt);
          if (top && base != baseline.end()) gap = signed2(100 * *v - 100 * base->second);
          md << " " << (top ? "**" + shown + "**" : shown) << (gap.empty() ? "" : " (" + gap + ")")
             << " |";
          csv << csv_field(s) << "," << csv_field(t) << "," << csv_field(set) << "," << tgt << ","
              << shown << "," << (top ? "1" : "0") << "," << gap << "\n";
        }
      }
      md << "\n";
    }
  }
  return {md.str(), csv.str()};
}

double pairwise_agreement(const std::map<std::string, bool>& a, const std::map<std::string, bool>& b) {
  if (a.empty()) throw std::invalid_argument("agreement: no decisions");
  if (a.size() != b.size()) throw std::invalid_argument("agreement: decision sets cover different ids");
  std::size_t same = 0;
  for (const auto& [id, keep] : a) {
    auto it = b.find(id);
    if (it == b.end()) throw std::invalid_argument("agreement: id " + id + " decided by one annotator only");
    same += keep == it->second;
  }
  return static_cast<double>(same) / static_cast<double>(a.size());
}

}  // namespace relboot
