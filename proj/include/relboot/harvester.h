#pragma once

// Distant-supervision harvesting: choose relations and entity pairs, index a
// sentence corpus and pull candidate instances that mention both entities.

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "relboot/core.h"

namespace relboot {

// Largest-remainder (Hamilton) apportionment of `seats` over `weights`.
// Remainder ties go to the lower index. Throws if all weights are zero.
std::vector<std::size_t> allocate_largest_remainder(const std::vector<std::int64_t>& weights,
                                                    std::size_t seats);

// Relations are grouped into strata by order of magnitude of triple_count;
// the budget is apportioned over strata in proportion to their total counts
// (capped at stratum size, overflow reassigned), the highest-count members of
// each stratum are taken, and the result is sorted by descending count, then
// id. Pure function.
std::vector<RelationLabel> select_relations(const std::vector<RelationLabel>& catalog,
                                            std::size_t budget);

struct PairEntry {
  std::string relation;
  std::string e1;
  std::string e2;
  std::int64_t count = 1;
  // Optional extras carried through to candidates.
  std::string lang;
  std::optional<EntityType> et1;
  std::optional<EntityType> et2;

  friend bool operator==(const PairEntry&, const PairEntry&) = default;
};

class PairFrequencyTable {
 public:
  void add(PairEntry e);
  bool has(const std::string& relation) const { return by_relation_.count(relation) > 0; }
  const std::vector<PairEntry>& pairs(const std::string& relation) const;
  std::size_t size() const;

  static PairFrequencyTable read(const std::filesystem::path& path);

 private:
  std::map<std::string, std::vector<PairEntry>> by_relation_;
};

// Weighted sampling without replacement (exponential-key method), weights =
// sentence counts. Returns min(budget, available) pairs in draw order.
std::vector<PairEntry> sample_entity_pairs(const std::string& relation,
                                           const PairFrequencyTable& table, std::size_t budget,
                                           std::uint64_t seed);

struct Document {
  std::string id;
  std::string lang;
  std::string text;
  Source source = Source::kWiki;
};

struct IndexedSentence {
  std::string id;  // "<doc id>#<ordinal>"
  std::string doc_id;
  std::string lang;
  std::string text;
  Source source = Source::kWiki;
};

// Splits after ., ?, !, danda, double danda and a few other script full
// stops when followed by whitespace or end of text.
std::vector<std::string> split_sentences(const std::string& text);

// Index key for a raw token: surrounding punctuation removed.
std::string index_key(const std::string& token);

class SentenceIndex {
 public:
  void add_document(const Document& doc);

  std::size_t size() const { return sentences_.size(); }
  const IndexedSentence& sentence(std::size_t i) const { return sentences_[i]; }
  const IndexedSentence* find(const std::string& id) const;

  // Ordinals of sentences containing the token (raw or key form).
  std::vector<std::size_t> lookup(const std::string& token) const;

  // Term-frequency score of a sentence for a multi-token query.
  std::size_t score(std::size_t ordinal, const std::vector<std::string>& query_keys) const;

 private:
  std::vector<IndexedSentence> sentences_;
  std::vector<std::unordered_map<std::string, std::size_t>> tf_;
  std::unordered_map<std::string, std::vector<std::size_t>> postings_;
  std::unordered_map<std::string, std::size_t> by_id_;
};

SentenceIndex ingest_corpus(const std::vector<Document>& documents);

// Documents are read from every *.jsonl file under `dir` (sorted by path),
// one {id, lang, text, source?} object per line.
std::vector<Document> read_corpus_dir(const std::filesystem::path& dir);

struct RetrievalOptions {
  std::size_t k = 1000;
  std::string lang;  // empty = any language
};

// Ranks sentences by term frequency of the query "<e1> <e2>", keeps the top k
// and turns those containing both surfaces into candidate instances.
std::vector<Instance> retrieve_evidence(const SentenceIndex& index, const std::string& e1,
                                        const std::string& e2, const std::string& relation,
                                        const RetrievalOptions& opts = {});

// Source of web documents for an entity pair (search plus fetch plus HTML
// stripping happen behind this interface).
class DocumentFetcher {
 public:
  virtual ~DocumentFetcher() = default;
  virtual std::vector<Document> fetch(const std::string& e1, const std::string& e2,
                                      const std::string& lang, std::size_t max_docs) = 0;
};

// Fixed in-memory documents keyed by nothing: every query returns the first
// max_docs documents of the requested language that mention both entities.
class StaticFetcher : public DocumentFetcher {
 public:
  explicit StaticFetcher(std::vector<Document> docs) : docs_(std::move(docs)) {}
  std::vector<Document> fetch(const std::string& e1, const std::string& e2,
                              const std::string& lang, std::size_t max_docs) override;

 private:
  std::vector<Document> docs_;
};

struct HarvestConfig {
  std::size_t relation_budget = 51;
  std::size_t pairs_per_relation = 100;
  std::size_t k = 1000;
  std::size_t web_docs = 5;
  std::uint64_t seed = 0;
};

struct HarvestResult {
  std::vector<RelationLabel> relations;
  std::vector<Instance> candidates;
};

// Full harvest; candidates are deduplicated by id. When `fetcher` is given,
// web sentences are harvested in addition to the index.
HarvestResult harvest(const std::vector<RelationLabel>& catalog, const PairFrequencyTable& pairs,
                      const SentenceIndex& index, const HarvestConfig& cfg,
                      DocumentFetcher* fetcher = nullptr);

}  // namespace relboot
