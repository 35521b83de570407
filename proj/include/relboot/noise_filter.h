#pragma once

// Embedding-similarity filtering of distant-supervision candidates: keep a
// candidate when cos(sentence-without-entities, relation) >= tau.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "relboot/core.h"
#include "relboot/embedding.h"

namespace relboot {

// 0.10, 0.15, ..., 0.90.
std::vector<double> default_tau_grid();

struct FilterConfig {
  double tau = 0.3;
  std::map<std::string, double> tau_by_lang;
  std::vector<double> tau_grid = default_tau_grid();

  double tau_for(const std::string& lang) const;
  // Throws std::invalid_argument when a tau is outside [0,1] or the grid is
  // empty or not ascending.
  void validate() const;
};

nlohmann::ordered_json to_json(const FilterConfig& cfg);
// Missing fields keep their defaults.
FilterConfig filter_config_from_json(const nlohmann::json& j);

// nullopt when either vector has zero norm. Throws on length mismatch.
std::optional<double> cosine(const EmbeddingVector& a, const EmbeddingVector& b);

// Sentence with both entity spans deleted and whitespace collapsed.
std::string context_text(const Instance& inst);

EmbeddingVector embed_sentence_context(const Instance& inst, EmbeddingProvider& provider);

// Mean of the token vectors of description followed by every alias.
EmbeddingVector embed_relation(const RelationLabel& rel, EmbeddingProvider& provider);

std::map<std::string, EmbeddingVector> embed_relations(const std::vector<RelationLabel>& rels,
                                                       EmbeddingProvider& provider);

struct ScoredInstance {
  Instance inst;
  std::optional<double> score;  // nullopt: undefined (zero-norm vector)
};

struct FilterResult {
  std::vector<ScoredInstance> retained;
  std::vector<ScoredInstance> discarded;
};

// Throws std::invalid_argument when an instance's relation has no embedding,
// ProtocolError when provider vectors do not have the declared dimension.
std::vector<std::optional<double>> score_candidates(
    const std::vector<Instance>& instances,
    const std::map<std::string, EmbeddingVector>& relation_embeddings,
    EmbeddingProvider& provider);

// Retains score >= tau_for(lang); undefined scores are always discarded.
// Input order is preserved within each side.
FilterResult apply_threshold(const std::vector<Instance>& instances,
                             const std::vector<std::optional<double>>& scores,
                             const FilterConfig& cfg);

FilterResult filter_candidates(const std::vector<Instance>& instances,
                               const std::map<std::string, EmbeddingVector>& relation_embeddings,
                               const FilterConfig& cfg, EmbeddingProvider& provider);

struct LabeledScore {
  std::optional<double> score;
  bool keep = false;
};

struct SweepRow {
  double tau = 0;
  double precision = 0;
  double recall = 0;
  double f1 = 0;
};

struct SweepResult {
  double best_tau = 0;
  std::vector<SweepRow> rows;
};

// Maximizes F1 of the keep decision over the grid; ties go to the smaller
// tau. 0/0 ratios count as 0. Throws on an empty dev set.
SweepResult sweep_tau(const std::vector<LabeledScore>& dev, const std::vector<double>& grid);

SweepResult sweep_tau(const std::vector<Instance>& dev, const std::vector<bool>& keep,
                      const std::map<std::string, EmbeddingVector>& relation_embeddings,
                      const std::vector<double>& grid, EmbeddingProvider& provider);

}  // namespace relboot
