#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace searchgym {

/// A retrieval token and its byte range in the source text.
struct Token {
  std::string term;
  std::size_t begin = 0;
  std::size_t end = 0;
};

/// Retrieval tokenization: ASCII letters are lowercased, runs of ASCII
/// alphanumerics and non-ASCII bytes form tokens, everything else splits.
std::vector<Token> tokenize_with_offsets(std::string_view text);
std::vector<std::string> tokenize(std::string_view text);

/// Sorted, de-duplicated query terms.
std::vector<std::string> query_terms(std::string_view query);

/// Number of Unicode code points (continuation bytes are not counted).
std::size_t utf8_length(std::string_view s);

/// Longest prefix of `s` holding at most `max_chars` code points.
std::string_view utf8_prefix(std::string_view s, std::size_t max_chars);

/// Restricted Damerau-Levenshtein (optimal string alignment) distance.
/// Returns `limit + 1` as soon as the distance is known to exceed `limit`.
std::size_t osa_distance(std::string_view a, std::string_view b, std::size_t limit);

/// Edit budget for a query term: 0 below 5 bytes, 1 below 9, else 2.
std::size_t typo_budget(std::string_view term);

/// Body text with heading tags removed and line breaks turned into spaces.
std::string plain_text(std::string_view body);

}  // namespace searchgym
