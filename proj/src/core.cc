#include "relboot/core.h"

#include <algorithm>
#include <array>

#include "relboot/unicode.h"

namespace relboot {
namespace {

constexpr std::array<std::string_view, kNumEntityTypes> kTypeNames = {
    "PERSON",  "ORG",         "GPE",     "LOC",      "DATE",    "TIME",
    "NORP",    "FAC",         "PRODUCT", "EVENT",    "WORK_OF_ART",
    "LAW",     "LANGUAGE",    "PERCENT", "MONEY",    "QUANTITY",
    "ORDINAL", "CARDINAL",
};

void check_mention(const char* role, const EntityMention& m,
                   const std::u32string& text,
                   std::vector<std::string>& out) {
  const std::string prefix = std::string(role) + ": ";
  if (m.span.start >= m.span.end) {
    out.push_back(prefix + "empty span");
    return;
  }
  if (m.span.end > text.size()) {
    out.push_back(prefix + "span out of bounds");
    return;
  }
  auto slice = utf8_encode(
      std::u32string_view(text).substr(m.span.start, m.span.length()));
  if (slice != m.surface) out.push_back(prefix + "surface mismatch");
}

}  // namespace

std::string_view to_string(EntityType t) {
  return kTypeNames[static_cast<std::size_t>(t)];
}

std::optional<EntityType> parse_entity_type(std::string_view s) {
  for (std::size_t i = 0; i < kTypeNames.size(); ++i) {
    if (kTypeNames[i] == s) return static_cast<EntityType>(i);
  }
  return std::nullopt;
}

const std::vector<EntityType>& entity_type_inventory() {
  static const std::vector<EntityType> all = [] {
    std::vector<EntityType> v;
    for (std::size_t i = 0; i < kNumEntityTypes; ++i) {
      v.push_back(static_cast<EntityType>(i));
    }
    return v;
  }();
  return all;
}

std::string_view to_string(Grade g) {
  switch (g) {
    case Grade::kGold: return "gold";
    case Grade::kSilver: return "silver";
    case Grade::kCandidate: return "candidate";
  }
  return "?";
}

std::string_view to_string(Source s) {
  switch (s) {
    case Source::kWiki: return "wiki";
    case Source::kWeb: return "web";
    case Source::kTranslated: return "translated";
  }
  return "?";
}

std::optional<Grade> parse_grade(std::string_view s) {
  if (s == "gold") return Grade::kGold;
  if (s == "silver") return Grade::kSilver;
  if (s == "candidate") return Grade::kCandidate;
  return std::nullopt;
}

std::optional<Source> parse_source(std::string_view s) {
  if (s == "wiki") return Source::kWiki;
  if (s == "web") return Source::kWeb;
  if (s == "translated") return Source::kTranslated;
  return std::nullopt;
}

const std::vector<std::string>& known_languages() {
  // English plus the scheduled Indic languages and their neighbours.
  static const std::vector<std::string> langs = {
      "as", "bn", "en", "gu", "hi", "kn", "ml", "mr",
      "ne", "or", "pa", "sa", "ta", "te", "ur",
  };
  return langs;
}

bool is_known_language(std::string_view code) {
  const auto& l = known_languages();
  return std::find(l.begin(), l.end(), code) != l.end();
}

std::vector<std::string> validate_instance(const Instance& inst) {
  std::vector<std::string> out;
  if (inst.id.empty()) out.push_back("id: empty");
  if (!is_known_language(inst.lang)) out.push_back("lang: unknown code '" + inst.lang + "'");
  if (inst.relation.empty()) out.push_back("relation: empty");

  std::u32string text;
  try {
    text = utf8_decode(inst.text);
  } catch (const std::invalid_argument& e) {
    out.push_back(std::string("text: ") + e.what());
    return out;
  }
  check_mention("e1", inst.e1, text, out);
  check_mention("e2", inst.e2, text, out);
  if (inst.e1.span.overlaps(inst.e2.span)) out.push_back("spans overlap");

  if (inst.grade == Grade::kSilver &&
      (!inst.provenance || inst.provenance->source_id.empty())) {
    out.push_back("silver instance without provenance");
  }
  return out;
}

EntityMention make_mention(std::string_view text, std::size_t start,
                           std::size_t end, std::optional<EntityType> etype) {
  return EntityMention{utf8_slice(text, start, end), Span{start, end}, etype};
}

std::string entity_pair_key(const Instance& inst) {
  const auto& a = inst.e1.surface;
  const auto& b = inst.e2.surface;
  return a < b ? a + '\x1f' + b : b + '\x1f' + a;
}

}  // namespace relboot
