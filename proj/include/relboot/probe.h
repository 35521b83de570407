#pragma once

// Pooled-embedding probe: summaries of frozen contextual token embeddings at
// marker positions feed a softmax relation head, optionally trained jointly
// with entity-type heads (with or without a shared type transform).

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "relboot/core.h"
#include "relboot/embedding.h"
#include "relboot/markup.h"

namespace relboot {

// Token indices in a rendered marker string. For EST the outer [E1]/[/E1]
// pair is used; for ET the typed markers themselves.
struct MarkerPositions {
  std::size_t cls = 0;
  std::size_t e1_open = 0, e1_close = 0;
  std::size_t e2_open = 0, e2_close = 0;
};

// Throws std::invalid_argument when a marker is missing or misordered.
MarkerPositions find_markers(const std::vector<std::string>& tokens);

enum class PoolScheme { kCls, kEs, kEn, kClsEs, kClsEn };

std::string_view to_string(PoolScheme s);
PoolScheme parse_pool_scheme(std::string_view s);
std::size_t pooled_dimension(PoolScheme s, std::size_t d);

// CLS: h[CLS]. ES: [h[E1]; h[E2]]. EN: mean of rows e1_open..e1_close
// (markers included) then the same for E2. CLS_* prepend h[CLS].
EmbeddingVector pool(const TokenEmbeddings& h, const MarkerPositions& m, PoolScheme scheme);

// Per-entity vectors used by the type heads: span means for EN schemes,
// opening-marker vectors otherwise.
std::pair<EmbeddingVector, EmbeddingVector> entity_vectors(const TokenEmbeddings& h,
                                                           const MarkerPositions& m,
                                                           PoolScheme scheme);

struct Features {
  EmbeddingVector summary;
  EmbeddingVector e1;
  EmbeddingVector e2;
};

// Render, embed at token granularity and pool.
std::vector<Features> featurize(const std::vector<Instance>& instances, MarkupScheme markup,
                                PoolScheme scheme, EmbeddingProvider& provider);

enum class ProbeMode { kRE, kMTNoShare, kMTShare };

std::string_view to_string(ProbeMode m);
ProbeMode parse_probe_mode(std::string_view s);  // re | mt_ns | mt_s

struct TrainConfig {
  double learning_rate = 0.1;
  std::size_t epochs = 500;
  double l2 = 1e-4;
  std::uint64_t seed = 0;
  double head_init = 0.0;   // uniform(-x, x) for head weights; 0 = zeros
  double share_init = 0.1;  // uniform(-x, x) for shared transforms
  bool standardize = false;  // z-score inputs with training-set statistics

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct Example {
  Features x;
  std::size_t relation = 0;
  std::size_t type1 = 0;
  std::size_t type2 = 0;
};

// Per-dimension z-scoring fitted on training features. Entity statistics are
// pooled over both entity slots; constant dimensions keep scale 1.
struct Standardizer {
  EmbeddingVector summary_mean, summary_scale;
  EmbeddingVector entity_mean, entity_scale;

  bool empty() const { return summary_mean.empty(); }
  static Standardizer fit(const std::vector<Features>& xs);
  Features apply(const Features& x) const;
  EmbeddingVector apply_entity(const EmbeddingVector& e) const;

  friend bool operator==(const Standardizer&, const Standardizer&) = default;
};

struct ParamBlock {
  std::string name;
  std::vector<double>* values;
};

class ProbeModel {
 public:
  ProbeModel() = default;
  ProbeModel(ProbeMode mode, PoolScheme scheme, std::size_t summary_dim, std::size_t entity_dim,
             std::vector<std::string> relations, const TrainConfig& cfg);

  ProbeMode mode() const { return mode_; }
  PoolScheme scheme() const { return scheme_; }
  const std::vector<std::string>& relations() const { return relations_; }
  std::size_t summary_dim() const { return s_dim_; }
  std::size_t entity_dim() const { return e_dim_; }
  const TrainConfig& config() const { return cfg_; }

  // Inputs are standardized here when the model carries a standardizer.
  const Standardizer& standardizer() const { return input_; }
  void set_standardizer(Standardizer s) { input_ = std::move(s); }

  // Loss terms take examples already in the model's input space (after
  // standardization). Mean cross-entropy over examples (relation plus both type terms in MT
  // modes) plus l2/2 times the squared norm of all weight matrices.
  double loss(const std::vector<Example>& data) const;
  // Same loss; `grad` receives one vector per parameter block.
  double loss_and_gradient(const std::vector<Example>& data,
                           std::vector<std::vector<double>>& grad) const;

  std::vector<ParamBlock> blocks();

  std::vector<double> relation_probabilities(const Features& x) const;
  std::vector<double> type_probabilities(const EmbeddingVector& entity, int which) const;

  nlohmann::ordered_json to_json() const;
  static ProbeModel from_json(const nlohmann::json& j);

  friend bool operator==(const ProbeModel&, const ProbeModel&) = default;

 private:
  struct Forward;
  void check(const Features& x) const;
  void forward(const Features& x, Forward& f) const;
  std::size_t rel_input_dim() const;

  ProbeMode mode_ = ProbeMode::kRE;
  PoolScheme scheme_ = PoolScheme::kClsEs;
  std::size_t s_dim_ = 0;
  std::size_t e_dim_ = 0;
  std::vector<std::string> relations_;
  TrainConfig cfg_;
  // Row-major weights.
  std::vector<double> w_rel_, b_rel_;    // R x (S [+ 2E])
  std::vector<double> w_type_, b_type_;  // T x E
  std::vector<double> a1_, c1_, a2_, c2_;  // E x E, shared transforms
  Standardizer input_;
};

struct TrainResult {
  ProbeModel model;
  std::vector<double> loss_trace;  // loss before each update, then final
};

// Full-batch gradient descent. With cfg.standardize a standardizer is fitted
// on the examples, training runs on standardized inputs and the returned
// model carries it (the loss trace is in standardized space). Throws std::invalid_argument on dimension or
// label problems and std::runtime_error naming the epoch on a non-finite loss.
TrainResult train_probe(const std::vector<Example>& data, ProbeMode mode, PoolScheme scheme,
                        std::vector<std::string> relations, const TrainConfig& cfg);

struct Prediction {
  std::size_t relation = 0;
  std::vector<double> probabilities;
};

// Argmax with ties to the smaller index.
Prediction predict(const ProbeModel& model, const Features& x);

std::size_t argmax(const std::vector<double>& v);
std::vector<double> softmax(const std::vector<double>& logits);

// Builds labeled examples; relations are mapped through `relations` (throws
// on an unknown label). Missing entity types are an error in MT modes.
std::vector<Example> make_examples(const std::vector<Instance>& instances,
                                   const std::vector<Features>& features,
                                   const std::vector<std::string>& relations, ProbeMode mode);

// Sorted distinct relation ids.
std::vector<std::string> relation_vocabulary(const std::vector<Instance>& instances);

void save_model(const ProbeModel& model, const std::filesystem::path& path);
ProbeModel load_model(const std::filesystem::path& path);

}  // namespace relboot
