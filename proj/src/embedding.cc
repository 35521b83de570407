#include "relboot/embedding.h"

#include <cmath>
#include <stdexcept>

#include "relboot/errors.h"
#include "relboot/http_util.h"
#include "relboot/rng.h"
#include "relboot/unicode.h"

namespace relboot {

EmbeddingVector mean_of(const TokenEmbeddings& vectors, std::size_t dimension) {
  EmbeddingVector m(dimension, 0.0);
  if (vectors.empty()) return m;
  for (const auto& v : vectors) {
    for (std::size_t d = 0; d < dimension; ++d) m[d] += v[d];
  }
  for (auto& x : m) x /= static_cast<double>(vectors.size());
  return m;
}

StubEmbedder::StubEmbedder(std::size_t dimension, std::uint64_t seed, double mix)
    : dim_(dimension), seed_(seed), mix_(mix) {
  if (dim_ == 0) throw std::invalid_argument("embedding dimension must be positive");
}

std::string StubEmbedder::name() const {
  return "stub:" + std::to_string(dim_) + ":" + std::to_string(seed_);
}

EmbeddingVector StubEmbedder::type_vector(const std::string& token) const {
  Rng rng(derive_seed(seed_, token));
  EmbeddingVector v(dim_);
  double norm = 0;
  for (auto& x : v) {
    x = rng.normal();
    norm += x * x;
  }
  norm = std::sqrt(norm);
  for (auto& x : v) x /= norm;
  return v;
}

TokenEmbeddings StubEmbedder::embed_one(const std::string& text) const {
  TokenEmbeddings out;
  for (const auto& tok : split_whitespace(text)) out.push_back(type_vector(tok));
  auto ctx = mean_of(out, dim_);
  for (auto& v : out) {
    for (std::size_t d = 0; d < dim_; ++d) v[d] += mix_ * ctx[d];
  }
  return out;
}

std::vector<EmbeddingVector> StubEmbedder::embed_sentences(const std::vector<std::string>& texts) {
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(mean_of(embed_one(t), dim_));
  return out;
}

std::vector<TokenEmbeddings> StubEmbedder::embed_tokens(const std::vector<std::string>& texts) {
  std::vector<TokenEmbeddings> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(embed_one(t));
  return out;
}

HttpEmbedder::HttpEmbedder(std::string base_url, std::size_t batch_size)
    : base_url_(std::move(base_url)), batch_size_(batch_size == 0 ? 1 : batch_size) {}

std::size_t HttpEmbedder::dimension() {
  if (dim_ == 0) {
    auto j = http_get_json(base_url_, "/v1/info");
    if (!j.is_object() || !j.contains("dimension") || !j["dimension"].is_number_unsigned() ||
        j["dimension"].get<std::size_t>() == 0) {
      throw ProtocolError("embedding provider /v1/info: missing or invalid dimension");
    }
    dim_ = j["dimension"].get<std::size_t>();
  }
  return dim_;
}

namespace {

EmbeddingVector check_vector(const nlohmann::json& v, std::size_t dim) {
  if (!v.is_array()) throw ProtocolError("embedding provider: vector is not an array");
  if (v.size() != dim) {
    throw ProtocolError("embedding provider: dimension mismatch (got " +
                        std::to_string(v.size()) + ", declared " + std::to_string(dim) + ")");
  }
  EmbeddingVector out;
  out.reserve(dim);
  for (const auto& x : v) {
    if (!x.is_number()) throw ProtocolError("embedding provider: non-numeric component");
    double d = x.get<double>();
    if (!std::isfinite(d)) throw ProtocolError("embedding provider: non-finite component");
    out.push_back(d);
  }
  return out;
}

}  // namespace

std::vector<EmbeddingVector> HttpEmbedder::embed_sentences(const std::vector<std::string>& texts) {
  const std::size_t dim = dimension();
  std::vector<EmbeddingVector> out;
  for (std::size_t i = 0; i < texts.size(); i += batch_size_) {
    std::vector<std::string> chunk(texts.begin() + static_cast<long>(i),
                                   texts.begin() + static_cast<long>(std::min(texts.size(), i + batch_size_)));
    auto j = http_post_json(base_url_, "/v1/embed", {{"texts", chunk}, {"granularity", "sentence"}});
    if (!j.contains("vectors") || !j["vectors"].is_array() || j["vectors"].size() != chunk.size()) {
      throw ProtocolError("embedding provider: expected one vector per text");
    }
    for (const auto& v : j["vectors"]) out.push_back(check_vector(v, dim));
  }
  return out;
}

std::vector<TokenEmbeddings> HttpEmbedder::embed_tokens(const std::vector<std::string>& texts) {
  const std::size_t dim = dimension();
  std::vector<TokenEmbeddings> out;
  for (std::size_t i = 0; i < texts.size(); i += batch_size_) {
    std::vector<std::string> chunk(texts.begin() + static_cast<long>(i),
                                   texts.begin() + static_cast<long>(std::min(texts.size(), i + batch_size_)));
    auto j = http_post_json(base_url_, "/v1/embed", {{"texts", chunk}, {"granularity", "tokens"}});
    if (!j.contains("token_vectors") || !j["token_vectors"].is_array() ||
        j["token_vectors"].size() != chunk.size()) {
      throw ProtocolError("embedding provider: expected one token list per text");
    }
    for (std::size_t k = 0; k < chunk.size(); ++k) {
      const auto& tv = j["token_vectors"][k];
      if (!tv.is_array() || tv.size() != split_whitespace(chunk[k]).size()) {
        throw ProtocolError("embedding provider: token count mismatch");
      }
      TokenEmbeddings te;
      for (const auto& v : tv) te.push_back(check_vector(v, dim));
      out.push_back(std::move(te));
    }
  }
  return out;
}

std::unique_ptr<EmbeddingProvider> make_embedder(const std::string& spec) {
  if (spec.rfind("http://", 0) == 0 || spec.rfind("https://", 0) == 0) {
    return std::make_unique<HttpEmbedder>(spec);
  }
  if (spec == "stub") return std::make_unique<StubEmbedder>();
  if (spec.rfind("stub:", 0) == 0) {
    auto rest = spec.substr(5);
    auto colon = rest.find(':');
    std::size_t dim = std::stoul(rest.substr(0, colon));
    std::uint64_t seed = colon == std::string::npos ? 0 : std::stoull(rest.substr(colon + 1));
    return std::make_unique<StubEmbedder>(dim, seed);
  }
  throw std::invalid_argument("unknown embedder spec: " + spec);
}

}  // namespace relboot
