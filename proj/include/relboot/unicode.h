#pragma once

// UTF-8 helpers. All offsets exposed by the toolkit count Unicode scalar
// values, so text is decoded to UTF-32 whenever spans are involved.

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace relboot {

// Throws std::invalid_argument on malformed UTF-8.
std::u32string utf8_decode(std::string_view s);
std::string utf8_encode(std::u32string_view s);

// Number of scalar values in a UTF-8 string.
std::size_t utf8_length(std::string_view s);

// Substring by scalar-value offsets [start, end).
std::string utf8_slice(std::string_view s, std::size_t start, std::size_t end);

bool is_unicode_space(char32_t c);

struct TokenSpan {
  std::size_t start = 0;  // scalar offset, inclusive
  std::size_t end = 0;    // scalar offset, exclusive
};

// Maximal runs of non-whitespace characters.
std::vector<TokenSpan> whitespace_tokens(std::u32string_view text);
std::vector<std::string> split_whitespace(std::string_view text);

// Collapse every run of whitespace to a single space and trim both ends.
std::string collapse_whitespace(std::string_view text);

}  // namespace relboot
