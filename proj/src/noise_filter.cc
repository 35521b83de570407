#include "relboot/noise_filter.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "relboot/errors.h"
#include "relboot/unicode.h"

namespace relboot {

std::vector<double> default_tau_grid() {
  std::vector<double> g;
  for (int i = 0; i <= 16; ++i) g.push_back((10 + 5 * i) / 100.0);
  return g;
}

double FilterConfig::tau_for(const std::string& lang) const {
  auto it = tau_by_lang.find(lang);
  return it == tau_by_lang.end() ? tau : it->second;
}

void FilterConfig::validate() const {
  auto check = [](double t, const std::string& what) {
    if (!(t >= 0.0 && t <= 1.0)) throw std::invalid_argument(what + " must lie in [0,1]");
  };
  check(tau, "tau");
  for (const auto& [lang, t] : tau_by_lang) check(t, "tau for " + lang);
  if (tau_grid.empty()) throw std::invalid_argument("tau grid is empty");
  for (std::size_t i = 0; i < tau_grid.size(); ++i) {
    check(tau_grid[i], "tau grid point");
    if (i > 0 && tau_grid[i] < tau_grid[i - 1]) {
      throw std::invalid_argument("tau grid must be sorted ascending");
    }
  }
}

nlohmann::ordered_json to_json(const FilterConfig& cfg) {
  nlohmann::ordered_json j;
  j["tau"] = cfg.tau;
  j["tau_by_lang"] = nlohmann::ordered_json::object();
  for (const auto& [lang, t] : cfg.tau_by_lang) j["tau_by_lang"][lang] = t;
  j["tau_grid"] = cfg.tau_grid;
  return j;
}

FilterConfig filter_config_from_json(const nlohmann::json& j) {
  FilterConfig cfg;
  if (j.contains("tau")) cfg.tau = j["tau"].get<double>();
  if (j.contains("tau_by_lang")) {
    for (const auto& [lang, t] : j["tau_by_lang"].items()) cfg.tau_by_lang[lang] = t.get<double>();
  }
  if (j.contains("tau_grid")) cfg.tau_grid = j["tau_grid"].get<std::vector<double>>();
  cfg.validate();
  return cfg;
}

std::optional<double> cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.size() != b.size()) throw std::invalid_argument("cosine: length mismatch");
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return std::nullopt;
  double c = dot / std::sqrt(na * nb);
  return std::max(-1.0, std::min(1.0, c));
}

std::string context_text(const Instance& inst) {
  auto u = utf8_decode(inst.text);
  const Span* first = &inst.e1.span;
  const Span* second = &inst.e2.span;
  if (second->start < first->start) std::swap(first, second);
  std::u32string out = u.substr(0, first->start);
  out += U' ';
  out += u.substr(first->end, second->start - first->end);
  out += U' ';
  out += u.substr(second->end);
  return collapse_whitespace(utf8_encode(out));
}

namespace {

void check_dim(const EmbeddingVector& v, std::size_t dim) {
  if (v.size() != dim) {
    throw ProtocolError("embedding has " + std::to_string(v.size()) + " components, provider declared " +
                        std::to_string(dim));
  }
}

std::string relation_text(const RelationLabel& rel) {
  if (collapse_whitespace(rel.description).empty()) {
    throw std::invalid_argument("relation " + rel.id + " has an empty description");
  }
  std::string text = rel.description;
  for (const auto& a : rel.aliases) text += " " + a;
  return text;
}

}  // namespace

EmbeddingVector embed_sentence_context(const Instance& inst, EmbeddingProvider& provider) {
  auto problems = validate_instance(inst);
  if (!problems.empty()) throw std::invalid_argument("invalid instance " + inst.id + ": " + problems[0]);
  auto v = provider.embed_sentences({context_text(inst)});
  if (v.size() != 1) throw ProtocolError("embedding provider returned wrong number of vectors");
  check_dim(v[0], provider.dimension());
  return v[0];
}

EmbeddingVector embed_relation(const RelationLabel& rel, EmbeddingProvider& provider) {
  auto t = provider.embed_tokens({relation_text(rel)});
  if (t.size() != 1) throw ProtocolError("embedding provider returned wrong number of token lists");
  const std::size_t dim = provider.dimension();
  for (const auto& v : t[0]) check_dim(v, dim);
  return mean_of(t[0], dim);
}

std::map<std::string, EmbeddingVector> embed_relations(const std::vector<RelationLabel>& rels,
                                                       EmbeddingProvider& provider) {
  std::map<std::string, EmbeddingVector> out;
  for (const auto& r : rels) out[r.id] = embed_relation(r, provider);
  return out;
}

std::vector<std::optional<double>> score_candidates(
    const std::vector<Instance>& instances,
    const std::map<std::string, EmbeddingVector>& relation_embeddings,
    EmbeddingProvider& provider) {
  std::vector<std::string> texts;
  for (const auto& inst : instances) {
    if (!relation_embeddings.count(inst.relation)) {
      throw std::invalid_argument("no embedding for relation " + inst.relation);
    }
    auto problems = validate_instance(inst);
    if (!problems.empty()) {
      throw std::invalid_argument("invalid instance " + inst.id + ": " + problems[0]);
    }
    texts.push_back(context_text(inst));
  }
  auto vecs = provider.embed_sentences(texts);
  if (vecs.size() != texts.size()) throw ProtocolError("embedding provider returned wrong number of vectors");
  const std::size_t dim = provider.dimension();
  std::vector<std::optional<double>> scores;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    check_dim(vecs[i], dim);
    const auto& r = relation_embeddings.at(instances[i].relation);
    check_dim(r, dim);
    scores.push_back(cosine(vecs[i], r));
  }
  return scores;
}

FilterResult apply_threshold(const std::vector<Instance>& instances,
                             const std::vector<std::optional<double>>& scores,
                             const FilterConfig& cfg) {
  if (scores.size() != instances.size()) throw std::invalid_argument("one score per instance required");
  FilterResult res;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    ScoredInstance s{instances[i], scores[i]};
    if (scores[i] && *scores[i] >= cfg.tau_for(instances[i].lang)) {
      res.retained.push_back(std::move(s));
    } else {
      res.discarded.push_back(std::move(s));
    }
  }
  return res;
}

FilterResult filter_candidates(const std::vector<Instance>& instances,
                               const std::map<std::string, EmbeddingVector>& relation_embeddings,
                               const FilterConfig& cfg, EmbeddingProvider& provider) {
  cfg.validate();
  return apply_threshold(instances, score_candidates(instances, relation_embeddings, provider), cfg);
}

SweepResult sweep_tau(const std::vector<LabeledScore>& dev, const std::vector<double>& grid) {
  if (dev.empty()) throw std::invalid_argument("empty dev set");
  if (grid.empty()) throw std::invalid_argument("empty tau grid");
  SweepResult res;
  double best_f1 = -1;
  for (double tau : grid) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (const auto& d : dev) {
      bool kept = d.score && *d.score >= tau;
      if (kept && d.keep) ++tp;
      if (kept && !d.keep) ++fp;
      if (!kept && d.keep) ++fn;
    }
    SweepRow row{tau, 0, 0, 0};
    if (tp + fp) row.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    if (tp + fn) row.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
    if (row.precision + row.recall > 0) {
      row.f1 = 2 * row.precision * row.recall / (row.precision + row.recall);
    }
    res.rows.push_back(row);
    if (row.f1 > best_f1 || (row.f1 == best_f1 && tau < res.best_tau)) {
      best_f1 = row.f1;
      res.best_tau = tau;
    }
  }
  return res;
}

SweepResult sweep_tau(const std::vector<Instance>& dev, const std::vector<bool>& keep,
                      const std::map<std::string, EmbeddingVector>& relation_embeddings,
                      const std::vector<double>& grid, EmbeddingProvider& provider) {
  if (dev.size() != keep.size()) throw std::invalid_argument("one keep label per dev instance required");
  if (dev.empty()) throw std::invalid_argument("empty dev set");
  auto scores = score_candidates(dev, relation_embeddings, provider);
  std::vector<LabeledScore> labeled;
  for (std::size_t i = 0; i < dev.size(); ++i) labeled.push_back({scores[i], keep[i]});
  return sweep_tau(labeled, grid);
}

}  // namespace relboot
