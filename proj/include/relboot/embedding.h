#pragma once

// Contextual embeddings behind a provider interface.
//
// Wire protocol for remote providers:
//   GET  /v1/info  -> {dimension: D}
//   POST /v1/embed {texts:[...], granularity:"sentence"|"tokens"}
//     -> {vectors:[[...]]}              (sentence)
//     -> {token_vectors:[[[...]]]}      (tokens, one per whitespace token)

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "relboot/core.h"

namespace relboot {

using TokenEmbeddings = std::vector<EmbeddingVector>;

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;

  virtual std::string name() const = 0;
  virtual std::size_t dimension() = 0;
  // One vector per text; the mean of that text's token vectors.
  virtual std::vector<EmbeddingVector> embed_sentences(const std::vector<std::string>& texts) = 0;
  // One vector per whitespace token of each text.
  virtual std::vector<TokenEmbeddings> embed_tokens(const std::vector<std::string>& texts) = 0;
};

// Deterministic offline provider. Each token type hashes to a seeded unit
// vector; a token's output is that vector plus `mix` times the mean of the
// text's unit vectors, so identical tokens differ across contexts. Sentence
// vectors are the mean of token outputs (zero for empty text).
class StubEmbedder : public EmbeddingProvider {
 public:
  explicit StubEmbedder(std::size_t dimension = 64, std::uint64_t seed = 0, double mix = 0.5);

  std::string name() const override;
  std::size_t dimension() override { return dim_; }
  std::vector<EmbeddingVector> embed_sentences(const std::vector<std::string>& texts) override;
  std::vector<TokenEmbeddings> embed_tokens(const std::vector<std::string>& texts) override;

  EmbeddingVector type_vector(const std::string& token) const;
  double mix() const { return mix_; }

 private:
  TokenEmbeddings embed_one(const std::string& text) const;

  std::size_t dim_;
  std::uint64_t seed_;
  double mix_;
};

// Client for the protocol above. Dimension is fetched once from /v1/info and
// every returned vector is checked against it. Throws TransportError on
// network failure and ProtocolError on malformed or mis-sized replies.
class HttpEmbedder : public EmbeddingProvider {
 public:
  explicit HttpEmbedder(std::string base_url, std::size_t batch_size = 64);

  std::string name() const override { return "http:" + base_url_; }
  std::size_t dimension() override;
  std::vector<EmbeddingVector> embed_sentences(const std::vector<std::string>& texts) override;
  std::vector<TokenEmbeddings> embed_tokens(const std::vector<std::string>& texts) override;

 private:
  std::string base_url_;
  std::size_t batch_size_;
  std::size_t dim_ = 0;
};

// "stub", "stub:<D>", "stub:<D>:<seed>" or an http(s) URL.
std::unique_ptr<EmbeddingProvider> make_embedder(const std::string& spec);

EmbeddingVector mean_of(const TokenEmbeddings& vectors, std::size_t dimension);

}  // namespace relboot
