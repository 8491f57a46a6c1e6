#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "searchgym/corpus.hpp"

namespace searchgym {

inline constexpr double kBm25K1 = 1.2;
inline constexpr double kBm25B = 0.75;
inline constexpr double kTitleWeight = 2.0;
inline constexpr double kAbstractWeight = 1.5;
inline constexpr double kBodyWeight = 1.0;
inline constexpr std::size_t kSnippetChars = 240;
inline constexpr std::size_t kDefaultTopK = 5;

struct Posting {
  std::uint32_t doc = 0;
  std::array<std::uint32_t, 3> counts{};  // title, abstract, body

  /// 2.0 * title + 1.5 * abstract + 1.0 * body.
  double weighted_tf() const noexcept {
    return kTitleWeight * counts[0] + kAbstractWeight * counts[1] + kBodyWeight * counts[2];
  }
  /// Average field weight of the occurrences (2.0 when only in the title).
  double field_weight() const noexcept {
    const auto total = counts[0] + counts[1] + counts[2];
    return total == 0 ? 0.0 : weighted_tf() / total;
  }

  friend bool operator==(const Posting&, const Posting&) = default;
};

struct IndexedDocument {
  std::string url;
  std::string title;
  std::string abstract;
  std::string text;  // plain body, headings flattened

  friend bool operator==(const IndexedDocument&, const IndexedDocument&) = default;
};

struct SearchHit {
  std::string url;
  std::string title;
  std::string snippet;
  double score = 0.0;
  std::uint32_t doc = 0;

  friend bool operator==(const SearchHit&, const SearchHit&) = default;
};

/// Immutable BM25 index. Built once; any number of threads may search it.
class SearchIndex {
 public:
  SearchIndex() = default;

  std::size_t document_count() const noexcept { return docs_.size(); }
  double average_length() const noexcept { return avgdl_; }
  const std::vector<std::string>& vocabulary() const noexcept { return vocabulary_; }
  const std::vector<Posting>& postings(std::size_t term) const { return postings_[term]; }
  const std::vector<std::uint32_t>& doc_lengths() const noexcept { return doc_lengths_; }
  const IndexedDocument& document(std::size_t ordinal) const { return docs_[ordinal]; }

  /// Position of `term` in vocabulary(), or npos.
  std::size_t term_id(std::string_view term) const;
  double idf(std::size_t term) const { return idf_[term]; }

  /// Vocabulary terms within the typo budget of `term`, with distances,
  /// sorted by term.
  std::vector<std::pair<std::size_t, std::size_t>> expand(std::string_view term) const;

  /// FNV-1a over the snapshot bytes.
  std::uint64_t checksum() const;

  std::string serialize() const;
  /// Throws Error("BAD_SNAPSHOT") on a wrong magic or truncated input.
  static SearchIndex deserialize(std::string_view bytes);

  friend SearchIndex build_index(const Corpus& corpus);

  friend bool operator==(const SearchIndex& a, const SearchIndex& b) {
    return a.docs_ == b.docs_ && a.vocabulary_ == b.vocabulary_ && a.postings_ == b.postings_ &&
           a.doc_lengths_ == b.doc_lengths_;
  }

 private:
  void finalize();

  std::vector<IndexedDocument> docs_;
  std::vector<std::string> vocabulary_;
  std::vector<std::vector<Posting>> postings_;
  std::vector<std::uint32_t> doc_lengths_;
  double avgdl_ = 0.0;
  std::vector<double> idf_;
  std::vector<std::vector<std::uint32_t>> by_length_;  // term ids bucketed by byte length
};

/// Throws Error("EMPTY_CORPUS") when the corpus has no documents.
SearchIndex build_index(const Corpus& corpus);

/// BM25 term weight for one posting; shared by search and its tests.
double bm25_term(double idf, double tf, double doc_len, double avgdl);

/// Non-negative Lucene-style IDF.
double bm25_idf(std::size_t doc_count, std::size_t doc_freq);

struct RankedDoc {
  std::uint32_t doc = 0;
  double score = 0.0;
};

/// Ranking only (no snippets): documents with positive score ordered by
/// (score desc, ordinal asc), truncated to k.
std::vector<RankedDoc> rank(const SearchIndex& index, std::string_view query,
                            std::size_t k = kDefaultTopK);

/// Top-k documents with positive score. Throws Error("EMPTY_QUERY") when the
/// query has no tokens and Error("BAD_K") for k < 1.
std::vector<SearchHit> search(const SearchIndex& index, std::string_view query,
                              std::size_t k = kDefaultTopK);

/// nullptr stands for NOT_FOUND.
const Document* access(const Corpus& corpus, std::string_view url);

/// Best window of at most 240 code points, ellipsized at word boundaries.
std::string make_snippet(const Document& doc, std::string_view query);
std::string make_snippet(const SearchIndex& index, std::size_t ordinal, std::string_view query);

}  // namespace searchgym
