#include "relboot/silver.h"

#include <algorithm>
#include <map>
#include <numeric>
#include <optional>

#include "relboot/errors.h"
#include "relboot/unicode.h"

namespace relboot {

std::size_t levenshtein(std::u32string_view a, std::u32string_view b) {
  if (a.size() < b.size()) std::swap(a, b);
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  std::iota(prev.begin(), prev.end(), std::size_t{0});
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

ProjectionResult project_spans(std::string_view sentence, std::string_view entity) {
  auto sent = utf8_decode(sentence);
  auto ent = utf8_decode(entity);
  auto words = whitespace_tokens(sent);
  auto ent_words = whitespace_tokens(ent);
  const std::size_t n = words.size();
  const std::size_t l = ent_words.size();
  if (l == 0) throw ProjectionError("empty entity");
  if (l > n) {
    throw ProjectionError("entity has " + std::to_string(l) + " words but sentence has " +
                          std::to_string(n));
  }
  std::u32string target;
  for (std::size_t k = 0; k < l; ++k) {
    if (k) target.push_back(U' ');
    target.append(ent, ent_words[k].start, ent_words[k].end - ent_words[k].start);
  }

  ProjectionResult best;
  best.windows_examined = n - l + 1;
  bool found = false;
  std::u32string window;
  for (std::size_t i = 0; i + l <= n; ++i) {
    window.clear();
    for (std::size_t k = i; k < i + l; ++k) {
      if (k > i) window.push_back(U' ');
      window.append(sent, words[k].start, words[k].end - words[k].start);
    }
    std::size_t d = levenshtein(window, target);
    if (!found || d < best.distance) {
      found = true;
      best.distance = d;
      best.window_begin = i;
      best.window_end = i + l;
      if (d == 0) break;  // nothing further left can be strictly better
    }
  }
  best.span = Span{words[best.window_begin].start, words[best.window_end - 1].end};
  return best;
}

std::string silver_id(const std::string& source_id, const std::string& target_lang) {
  return source_id + ">" + target_lang;
}

namespace {

Instance project_instance(const Instance& src, const std::string& sentence,
                          const std::string& e1, const std::string& e2,
                          const std::string& target_lang, const std::string& provider) {
  if (src.grade != Grade::kGold) throw ProjectionError("source instance is not gold");
  auto p1 = project_spans(sentence, e1);
  auto p2 = project_spans(sentence, e2);
  if (p1.span.overlaps(p2.span)) throw ProjectionError("projected entity spans overlap");
  Instance out;
  out.id = silver_id(src.id, target_lang);
  out.lang = target_lang;
  out.text = sentence;
  out.relation = src.relation;
  out.e1 = make_mention(sentence, p1.span.start, p1.span.end, src.e1.etype);
  out.e2 = make_mention(sentence, p2.span.start, p2.span.end, src.e2.etype);
  out.grade = Grade::kSilver;
  out.source = Source::kTranslated;
  out.provenance = Provenance{src.id, provider};
  return out;
}

}  // namespace

Instance make_silver(const Instance& src, TranslationProvider& translator,
                     const std::string& target_lang) {
  if (!translator.supports(src.lang, target_lang)) {
    throw std::invalid_argument("translator " + translator.name() + " does not support " +
                                src.lang + "->" + target_lang);
  }
  auto t = translator.translate({src.text, src.e1.surface, src.e2.surface}, src.lang, target_lang);
  if (t.size() != 3) throw ProtocolError("translator returned wrong number of outputs");
  return project_instance(src, t[0], t[1], t[2], target_lang, translator.name());
}

SilverBatch batch_silver(const std::vector<Instance>& gold, TranslationProvider& translator,
                         const std::string& target_lang, std::size_t chunk_size) {
  SilverBatch out;
  // Group by source language so each request has a single language pair,
  // then restore input order.
  std::vector<std::optional<Instance>> results(gold.size());
  std::vector<std::optional<SkipRecord>> skips(gold.size());
  std::map<std::string, std::vector<std::size_t>> by_lang;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (gold[i].grade != Grade::kGold) {
      skips[i] = SkipRecord{gold[i].id, "source instance is not gold"};
      continue;
    }
    by_lang[gold[i].lang].push_back(i);
  }
  chunk_size = std::max<std::size_t>(chunk_size, 1);
  for (const auto& [lang, idx] : by_lang) {
    if (!translator.supports(lang, target_lang)) {
      for (auto i : idx) skips[i] = SkipRecord{gold[i].id, "unsupported language pair"};
      continue;
    }
    for (std::size_t c = 0; c < idx.size(); c += chunk_size) {
      std::vector<std::string> texts;
      std::size_t end = std::min(idx.size(), c + chunk_size);
      for (std::size_t k = c; k < end; ++k) {
        const auto& g = gold[idx[k]];
        texts.push_back(g.text);
        texts.push_back(g.e1.surface);
        texts.push_back(g.e2.surface);
      }
      auto t = translator.translate(texts, lang, target_lang);
      if (t.size() != texts.size()) throw ProtocolError("translator returned wrong number of outputs");
      for (std::size_t k = c; k < end; ++k) {
        std::size_t base = 3 * (k - c);
        const auto& g = gold[idx[k]];
        try {
          results[idx[k]] = project_instance(g, t[base], t[base + 1], t[base + 2], target_lang,
                                             translator.name());
        } catch (const ProjectionError& e) {
          skips[idx[k]] = SkipRecord{g.id, e.what()};
        }
      }
    }
  }
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (results[i]) out.silver.push_back(std::move(*results[i]));
    if (skips[i]) out.skipped.push_back(std::move(*skips[i]));
  }
  return out;
}

}  // namespace relboot
