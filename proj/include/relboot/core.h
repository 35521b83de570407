#pragma once

// Shared domain types for relation-classification instances.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace relboot {

// Fixed 18-label NER inventory.
enum class EntityType {
  kPerson,
  kOrg,
  kGpe,
  kLoc,
  kDate,
  kTime,
  kNorp,
  kFac,
  kProduct,
  kEvent,
  kWorkOfArt,
  kLaw,
  kLanguage,
  kPercent,
  kMoney,
  kQuantity,
  kOrdinal,
  kCardinal,
};

inline constexpr std::size_t kNumEntityTypes = 18;

std::string_view to_string(EntityType t);
std::optional<EntityType> parse_entity_type(std::string_view s);
const std::vector<EntityType>& entity_type_inventory();

enum class Grade { kGold, kSilver, kCandidate };
enum class Source { kWiki, kWeb, kTranslated };

std::string_view to_string(Grade g);
std::string_view to_string(Source s);
std::optional<Grade> parse_grade(std::string_view s);
std::optional<Source> parse_source(std::string_view s);

// Language codes accepted in records.
bool is_known_language(std::string_view code);
const std::vector<std::string>& known_languages();

struct RelationLabel {
  std::string id;
  std::string name;
  std::string description;
  std::vector<std::string> aliases;
  std::int64_t triple_count = 0;

  friend bool operator==(const RelationLabel&, const RelationLabel&) = default;
};

// Half-open interval of Unicode scalar offsets.
struct Span {
  std::size_t start = 0;
  std::size_t end = 0;

  std::size_t length() const { return end - start; }
  bool overlaps(const Span& o) const { return start < o.end && o.start < end; }
  friend bool operator==(const Span&, const Span&) = default;
};

struct EntityMention {
  std::string surface;
  Span span;
  std::optional<EntityType> etype;

  friend bool operator==(const EntityMention&, const EntityMention&) = default;
};

struct Provenance {
  std::string source_id;
  std::string provider;

  friend bool operator==(const Provenance&, const Provenance&) = default;
};

struct Instance {
  std::string id;
  std::string lang;
  std::string text;
  std::string relation;
  EntityMention e1;
  EntityMention e2;
  Grade grade = Grade::kCandidate;
  Source source = Source::kWiki;
  std::optional<Provenance> provenance;

  friend bool operator==(const Instance&, const Instance&) = default;
};

using EmbeddingVector = std::vector<double>;

// Empty result means the instance is valid. Gold-grade decision records live
// in the review log and are not visible here.
std::vector<std::string> validate_instance(const Instance& inst);

inline bool is_valid(const Instance& inst) {
  return validate_instance(inst).empty();
}

// Builds a mention whose surface is the slice of text at [start, end).
EntityMention make_mention(std::string_view text, std::size_t start,
                           std::size_t end,
                           std::optional<EntityType> etype = std::nullopt);

// Entity pair key used for split discipline; unordered so (a,b) and (b,a)
// are the same pair.
std::string entity_pair_key(const Instance& inst);

}  // namespace relboot
