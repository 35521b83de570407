#pragma once

// Silver instance generation: translate a gold instance and its two entity
// surfaces independently, then locate each translated entity in the
// translated sentence by fuzzy window search.

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "relboot/core.h"
#include "relboot/translation.h"

namespace relboot {

// Character-level edit distance (unit costs) over Unicode scalar values.
std::size_t levenshtein(std::u32string_view a, std::u32string_view b);

struct ProjectionResult {
  std::size_t window_begin = 0;  // word index, inclusive
  std::size_t window_end = 0;    // word index, exclusive
  Span span;                     // scalar offsets in the original sentence
  std::size_t distance = 0;
  std::size_t windows_examined = 0;
};

// Scans all n - l + 1 windows of l consecutive words (l = word count of the
// entity), compares each window, joined by single spaces, to the entity and
// returns the leftmost window of minimum distance. Throws ProjectionError
// when the entity is empty or longer than the sentence.
ProjectionResult project_spans(std::string_view sentence, std::string_view entity);

struct SkipRecord {
  std::string id;
  std::string reason;
};

// Throws ProjectionError for unprojectable instances (the batch form skips
// them) and lets provider TransportError/ProtocolError through.
Instance make_silver(const Instance& src, TranslationProvider& translator,
                     const std::string& target_lang);

struct SilverBatch {
  std::vector<Instance> silver;
  std::vector<SkipRecord> skipped;
};

// Translates in one request per chunk and preserves input order.
SilverBatch batch_silver(const std::vector<Instance>& gold, TranslationProvider& translator,
                         const std::string& target_lang, std::size_t chunk_size = 256);

std::string silver_id(const std::string& source_id, const std::string& target_lang);

}  // namespace relboot
