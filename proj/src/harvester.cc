#include "relboot/harvester.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <set>
#include <stdexcept>

#include "relboot/errors.h"
#include "relboot/records.h"
#include "relboot/rng.h"
#include "relboot/unicode.h"

namespace relboot {

std::vector<std::size_t> allocate_largest_remainder(const std::vector<std::int64_t>& weights,
                                                    std::size_t seats) {
  unsigned __int128 total = 0;
  for (auto w : weights) {
    if (w < 0) throw std::invalid_argument("negative weight");
    total += static_cast<unsigned __int128>(w);
  }
  if (total == 0) throw std::invalid_argument("all weights are zero");
  std::vector<std::size_t> out(weights.size());
  std::vector<unsigned __int128> rem(weights.size());
  std::size_t given = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    unsigned __int128 num = static_cast<unsigned __int128>(weights[i]) * seats;
    out[i] = static_cast<std::size_t>(num / total);
    rem[i] = num % total;
    given += out[i];
  }
  std::vector<std::size_t> order(weights.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return rem[a] > rem[b]; });
  for (std::size_t k = 0; given < seats; ++k, ++given) ++out[order[k]];
  return out;
}

namespace {

int magnitude(std::int64_t count) {
  if (count <= 0) return -1;
  int m = 0;
  while (count >= 10) {
    count /= 10;
    ++m;
  }
  return m;
}

bool by_count_then_id(const RelationLabel& a, const RelationLabel& b) {
  if (a.triple_count != b.triple_count) return a.triple_count > b.triple_count;
  return a.id < b.id;
}

}  // namespace

std::vector<RelationLabel> select_relations(const std::vector<RelationLabel>& catalog,
                                            std::size_t budget) {
  if (budget > catalog.size()) {
    throw std::invalid_argument("budget " + std::to_string(budget) + " exceeds catalog size " +
                                std::to_string(catalog.size()));
  }
  std::set<std::string> ids;
  std::int64_t total = 0;
  for (const auto& r : catalog) {
    if (r.triple_count < 0) throw std::invalid_argument("negative triple count for " + r.id);
    if (!ids.insert(r.id).second) throw std::invalid_argument("duplicate relation id " + r.id);
    total += r.triple_count;
  }
  if (total == 0) throw std::invalid_argument("all triple counts are zero");

  std::map<int, std::vector<RelationLabel>, std::greater<int>> strata;
  for (const auto& r : catalog) strata[magnitude(r.triple_count)].push_back(r);
  std::vector<std::vector<RelationLabel>> groups;
  for (auto& [m, members] : strata) {
    std::sort(members.begin(), members.end(), by_count_then_id);
    groups.push_back(std::move(members));
  }

  // Apportion, then cap at stratum size and reapportion the overflow among
  // strata that still have room.
  std::vector<std::size_t> quota(groups.size(), 0);
  std::size_t left = budget;
  while (left > 0) {
    std::vector<std::int64_t> w(groups.size(), 0);
    bool any = false;
    for (std::size_t g = 0; g < groups.size(); ++g) {
      if (quota[g] >= groups[g].size()) continue;
      for (std::size_t i = quota[g]; i < groups[g].size(); ++i) w[g] += groups[g][i].triple_count;
      any = any || w[g] > 0;
    }
    if (!any) break;
    auto extra = allocate_largest_remainder(w, left);
    std::size_t placed = 0;
    for (std::size_t g = 0; g < groups.size(); ++g) {
      std::size_t take = std::min(extra[g], groups[g].size() - quota[g]);
      quota[g] += take;
      placed += take;
    }
    left -= placed;
    if (placed == 0) break;
  }
  std::vector<RelationLabel> out;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    out.insert(out.end(), groups[g].begin(), groups[g].begin() + static_cast<long>(quota[g]));
  }
  // Zero-count relations only fill whatever budget remains.
  if (left > 0) {
    std::vector<RelationLabel> rest;
    std::set<std::string> taken;
    for (const auto& r : out) taken.insert(r.id);
    for (const auto& r : catalog) {
      if (!taken.count(r.id)) rest.push_back(r);
    }
    std::sort(rest.begin(), rest.end(), by_count_then_id);
    out.insert(out.end(), rest.begin(), rest.begin() + static_cast<long>(left));
  }
  std::sort(out.begin(), out.end(), by_count_then_id);
  return out;
}

void PairFrequencyTable::add(PairEntry e) {
  if (e.count < 1) throw std::invalid_argument("pair count must be at least 1");
  if (e.relation.empty() || e.e1.empty() || e.e2.empty()) {
    throw std::invalid_argument("pair entry needs relation, e1 and e2");
  }
  by_relation_[e.relation].push_back(std::move(e));
}

const std::vector<PairEntry>& PairFrequencyTable::pairs(const std::string& relation) const {
  auto it = by_relation_.find(relation);
  if (it == by_relation_.end()) throw std::invalid_argument("unknown relation " + relation);
  return it->second;
}

std::size_t PairFrequencyTable::size() const {
  std::size_t n = 0;
  for (const auto& [r, v] : by_relation_) n += v.size();
  return n;
}

PairFrequencyTable PairFrequencyTable::read(const std::filesystem::path& path) {
  PairFrequencyTable t;
  std::size_t line = 0;
  for (const auto& j : read_jsonl(path)) {
    ++line;
    try {
      PairEntry e;
      e.relation = j.at("relation").get<std::string>();
      e.e1 = j.at("e1").get<std::string>();
      e.e2 = j.at("e2").get<std::string>();
      e.count = j.at("count").get<std::int64_t>();
      e.lang = j.value("lang", "");
      auto type_of = [&](const char* key) -> std::optional<EntityType> {
        if (!j.contains(key) || j[key].is_null()) return std::nullopt;
        auto t = parse_entity_type(j[key].get<std::string>());
        if (!t) throw std::invalid_argument(std::string("unknown entity type in ") + key);
        return t;
      };
      e.et1 = type_of("et1");
      e.et2 = type_of("et2");
      t.add(std::move(e));
    } catch (const std::exception& ex) {
      throw ParseError(path.string() + ": " + ex.what(), line);
    }
  }
  return t;
}

std::vector<PairEntry> sample_entity_pairs(const std::string& relation,
                                           const PairFrequencyTable& table, std::size_t budget,
                                           std::uint64_t seed) {
  const auto& all = table.pairs(relation);
  Rng rng(derive_seed(seed, "pairs:" + relation));
  // Key log(u)/w; the largest keys form a weighted sample without replacement.
  std::vector<std::pair<double, std::size_t>> keyed;
  for (std::size_t i = 0; i < all.size(); ++i) {
    double u = rng.uniform();
    if (u <= 0.0) u = 0x1.0p-53;
    keyed.emplace_back(std::log(u) / static_cast<double>(all[i].count), i);
  }
  std::stable_sort(keyed.begin(), keyed.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  std::vector<PairEntry> out;
  for (std::size_t k = 0; k < std::min(budget, keyed.size()); ++k) {
    out.push_back(all[keyed[k].second]);
  }
  return out;
}

namespace {

bool is_terminator(char32_t c) {
  switch (c) {
    case U'.':
    case U'?':
    case U'!':
    case U'।':  // danda
    case U'॥':  // double danda
    case U'۔':  // arabic full stop
    case U'؟':  // arabic question mark
    case U'。':  // ideographic full stop
      return true;
    default:
      return false;
  }
}

bool is_edge_punct(char32_t c) {
  if (c < 0x80) {
    return (c >= U'!' && c <= U'/') || (c >= U':' && c <= U'@') || (c >= U'[' && c <= U'`') ||
           (c >= U'{' && c <= U'~');
  }
  switch (c) {
    case U'।':
    case U'॥':
    case U'۔':
    case U'؟':
    case U'،':
    case U'。':
    case U'‘':
    case U'’':
    case U'“':
    case U'”':
    case U'«':
    case U'»':
    case U'–':
    case U'—':
      return true;
    default:
      return false;
  }
}

}  // namespace

std::vector<std::string> split_sentences(const std::string& text) {
  auto u = utf8_decode(text);
  std::vector<std::string> out;
  std::size_t start = 0;
  auto flush = [&](std::size_t end) {
    auto s = collapse_whitespace(utf8_encode(std::u32string_view(u).substr(start, end - start)));
    if (!s.empty()) out.push_back(std::move(s));
    start = end;
  };
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (!is_terminator(u[i])) continue;
    // Absorb runs like "?!" or "।।".
    std::size_t j = i + 1;
    while (j < u.size() && is_terminator(u[j])) ++j;
    if (j == u.size() || is_unicode_space(u[j])) {
      flush(j);
      i = j - 1;
    }
  }
  flush(u.size());
  return out;
}

std::string index_key(const std::string& token) {
  auto u = utf8_decode(token);
  std::size_t a = 0, b = u.size();
  while (a < b && is_edge_punct(u[a])) ++a;
  while (b > a && is_edge_punct(u[b - 1])) --b;
  return utf8_encode(std::u32string_view(u).substr(a, b - a));
}

void SentenceIndex::add_document(const Document& doc) {
  std::size_t ordinal = 0;
  for (auto& text : split_sentences(doc.text)) {
    IndexedSentence s{doc.id + "#" + std::to_string(ordinal++), doc.id, doc.lang, text,
                      doc.source};
    if (by_id_.count(s.id)) throw std::invalid_argument("duplicate sentence id " + s.id);
    const std::size_t idx = sentences_.size();
    std::unordered_map<std::string, std::size_t> tf;
    std::set<std::string> seen;
    for (const auto& tok : split_whitespace(text)) {
      auto key = index_key(tok);
      if (!key.empty()) ++tf[key];
      for (const auto& form : {tok, key}) {
        if (!form.empty() && seen.insert(form).second) postings_[form].push_back(idx);
      }
    }
    by_id_[s.id] = idx;
    sentences_.push_back(std::move(s));
    tf_.push_back(std::move(tf));
  }
}

const IndexedSentence* SentenceIndex::find(const std::string& id) const {
  auto it = by_id_.find(id);
  return it == by_id_.end() ? nullptr : &sentences_[it->second];
}

std::vector<std::size_t> SentenceIndex::lookup(const std::string& token) const {
  auto it = postings_.find(token);
  if (it == postings_.end()) return {};
  return it->second;
}

std::size_t SentenceIndex::score(std::size_t ordinal,
                                 const std::vector<std::string>& query_keys) const {
  std::size_t s = 0;
  const auto& tf = tf_[ordinal];
  for (const auto& q : query_keys) {
    auto it = tf.find(q);
    if (it != tf.end()) s += it->second;
  }
  return s;
}

SentenceIndex ingest_corpus(const std::vector<Document>& documents) {
  SentenceIndex index;
  for (const auto& d : documents) index.add_document(d);
  return index;
}

std::vector<Document> read_corpus_dir(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw std::runtime_error("corpus directory not found: " + dir.string());
  }
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".jsonl") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<Document> docs;
  for (const auto& f : files) {
    std::size_t line = 0;
    for (const auto& j : read_jsonl(f)) {
      ++line;
      try {
        Document d{j.at("id").get<std::string>(), j.at("lang").get<std::string>(),
                   j.at("text").get<std::string>(), Source::kWiki};
        if (j.contains("source")) {
          auto s = parse_source(j["source"].get<std::string>());
          if (!s) throw std::invalid_argument("unknown source");
          d.source = *s;
        }
        docs.push_back(std::move(d));
      } catch (const std::exception& ex) {
        throw ParseError(f.string() + ": " + ex.what(), line);
      }
    }
  }
  return docs;
}

namespace {

// First occurrence of `needle` in `hay` at or after `from`, in scalar offsets.
std::optional<std::size_t> find_u32(const std::u32string& hay, const std::u32string& needle,
                                    std::size_t from = 0) {
  auto p = hay.find(needle, from);
  if (p == std::u32string::npos) return std::nullopt;
  return p;
}

std::string candidate_id(const std::string& relation, const std::string& e1,
                         const std::string& e2, const std::string& sentence_id) {
  std::uint64_t h = fnv1a64(relation + '\x1f' + e1 + '\x1f' + e2 + '\x1f' + sentence_id);
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return "c" + std::string(buf);
}

}  // namespace

std::vector<Instance> retrieve_evidence(const SentenceIndex& index, const std::string& e1,
                                        const std::string& e2, const std::string& relation,
                                        const RetrievalOptions& opts) {
  if (collapse_whitespace(e1).empty() || collapse_whitespace(e2).empty()) {
    throw std::invalid_argument("entity strings must be nonempty");
  }
  if (opts.k == 0) throw std::invalid_argument("k must be at least 1");

  std::vector<std::string> keys;
  for (const auto& tok : split_whitespace(e1 + " " + e2)) {
    auto k = index_key(tok);
    if (!k.empty()) keys.push_back(k);
  }
  std::set<std::size_t> hits;
  for (const auto& k : keys) {
    for (auto i : index.lookup(k)) {
      if (opts.lang.empty() || index.sentence(i).lang == opts.lang) hits.insert(i);
    }
  }
  std::vector<std::pair<std::size_t, std::size_t>> ranked;  // (score, ordinal)
  for (auto i : hits) ranked.emplace_back(index.score(i, keys), i);
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  if (ranked.size() > opts.k) ranked.resize(opts.k);
  std::sort(ranked.begin(), ranked.end(),
            [](const auto& a, const auto& b) { return a.second < b.second; });

  const auto u1 = utf8_decode(e1);
  const auto u2 = utf8_decode(e2);
  std::vector<Instance> out;
  for (const auto& [score, i] : ranked) {
    const auto& s = index.sentence(i);
    auto text = utf8_decode(s.text);
    auto p1 = find_u32(text, u1);
    if (!p1) continue;
    Span s1{*p1, *p1 + u1.size()};
    // First occurrence of e2 that does not overlap the e1 span.
    std::optional<Span> s2;
    for (auto p = find_u32(text, u2); p; p = find_u32(text, u2, *p + 1)) {
      Span c{*p, *p + u2.size()};
      if (!c.overlaps(s1)) {
        s2 = c;
        break;
      }
    }
    if (!s2) continue;
    Instance inst;
    inst.id = candidate_id(relation, e1, e2, s.id);
    inst.lang = s.lang;
    inst.text = s.text;
    inst.relation = relation;
    inst.e1 = make_mention(s.text, s1.start, s1.end);
    inst.e2 = make_mention(s.text, s2->start, s2->end);
    inst.grade = Grade::kCandidate;
    inst.source = s.source;
    out.push_back(std::move(inst));
  }
  return out;
}

std::vector<Document> StaticFetcher::fetch(const std::string& e1, const std::string& e2,
                                           const std::string& lang, std::size_t max_docs) {
  std::vector<Document> out;
  for (const auto& d : docs_) {
    if (out.size() >= max_docs) break;
    if (!lang.empty() && d.lang != lang) continue;
    if (d.text.find(e1) != std::string::npos && d.text.find(e2) != std::string::npos) {
      out.push_back(d);
      out.back().source = Source::kWeb;
    }
  }
  return out;
}

HarvestResult harvest(const std::vector<RelationLabel>& catalog, const PairFrequencyTable& pairs,
                      const SentenceIndex& index, const HarvestConfig& cfg,
                      DocumentFetcher* fetcher) {
  HarvestResult res;
  std::vector<RelationLabel> with_pairs;
  for (const auto& r : catalog) {
    if (pairs.has(r.id)) with_pairs.push_back(r);
  }
  res.relations = select_relations(with_pairs, std::min(cfg.relation_budget, with_pairs.size()));
  std::set<std::string> seen;
  auto take = [&](std::vector<Instance> found, const PairEntry& p) {
    for (auto& inst : found) {
      if (!seen.insert(inst.id).second) continue;
      inst.e1.etype = p.et1;
      inst.e2.etype = p.et2;
      res.candidates.push_back(std::move(inst));
    }
  };
  for (const auto& rel : res.relations) {
    for (const auto& p : sample_entity_pairs(rel.id, pairs, cfg.pairs_per_relation, cfg.seed)) {
      RetrievalOptions opts{cfg.k, p.lang};
      take(retrieve_evidence(index, p.e1, p.e2, rel.id, opts), p);
      if (fetcher) {
        auto docs = fetcher->fetch(p.e1, p.e2, p.lang, cfg.web_docs);
        for (auto& d : docs) d.source = Source::kWeb;
        auto web = ingest_corpus(docs);
        take(retrieve_evidence(web, p.e1, p.e2, rel.id, opts), p);
      }
    }
  }
  return res;
}

}  // namespace relboot
