#pragma once

// Marker-annotated model input strings.
//
//   ES : [CLS] ... [E1] e1 [/E1] ... [E2] e2 [/E2] ... [SEP]
//   ET : [CLS] ... [ET1=PERSON] e1 [/ET1=PERSON] ... [SEP]
//   EST: [CLS] ... [E1] [ET1=PERSON] e1 [/ET1=PERSON] [/E1] ... [SEP]
//
// With the language flag a `[L=<lang>]` token follows [CLS]. Every marker is
// a whitespace-delimited token, so text is normalized to single spaces and a
// span boundary that falls inside a word splits that word.

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "relboot/core.h"

namespace relboot {

enum class MarkerKind { kES, kET, kEST };

struct MarkupScheme {
  MarkerKind kind = MarkerKind::kES;
  bool language_flag = false;
};

std::string_view to_string(MarkerKind k);
std::optional<MarkerKind> parse_marker_kind(std::string_view s);

// Position is the 0-based index of the offending whitespace token.
class MarkupError : public std::runtime_error {
 public:
  MarkupError(const std::string& what, std::size_t position)
      : std::runtime_error(what + " at token " + std::to_string(position)),
        position_(position) {}
  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

struct ParsedMarkup {
  std::string text;  // single-space normalized
  Span e1;
  Span e2;
  std::optional<EntityType> e1_type;
  std::optional<EntityType> e2_type;
  std::optional<std::string> lang;
  MarkerKind kind = MarkerKind::kES;
};

// Throws std::invalid_argument for invalid instances, missing types under
// ET/EST, or text tokens that collide with the marker syntax.
std::string render_markup(const Instance& inst, MarkupScheme scheme);

// Throws MarkupError on unbalanced, interleaved or nested markers.
ParsedMarkup parse_markup(std::string_view s);

bool is_marker_token(std::string_view token);

// Whitespace tokens lying entirely between the two spans. A token partly
// covered by a span does not count.
std::size_t lexical_distance(const Instance& inst);

}  // namespace relboot
