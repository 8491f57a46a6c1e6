#include "searchgym/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "searchgym/text.hpp"

namespace searchgym {

double bm25_idf(std::size_t doc_count, std::size_t doc_freq) {
  const double n = static_cast<double>(doc_count);
  const double df = static_cast<double>(doc_freq);
  return std::log(1.0 + (n - df + 0.5) / (df + 0.5));
}

double bm25_term(double idf, double tf, double doc_len, double avgdl) {
  const double norm = kBm25K1 * (1.0 - kBm25B + kBm25B * doc_len / avgdl);
  return idf * (tf * (kBm25K1 + 1.0)) / (tf + norm);
}

SearchIndex build_index(const Corpus& corpus) {
  if (corpus.empty()) throw Error("EMPTY_CORPUS", "cannot index an empty corpus");
  SearchIndex index;
  std::map<std::string, std::vector<Posting>> postings;
  for (std::size_t d = 0; d < corpus.size(); ++d) {
    const auto& doc = corpus.documents()[d];
    IndexedDocument idoc{doc.url, doc.title, doc.abstract, plain_text(doc.body)};
    const std::array<std::string_view, 3> fields = {idoc.title, idoc.abstract, idoc.text};
    std::uint32_t length = 0;
    for (std::size_t f = 0; f < fields.size(); ++f) {
      for (auto& term : tokenize(fields[f])) {
        ++length;
        auto& list = postings[term];
        if (list.empty() || list.back().doc != d) list.push_back({static_cast<std::uint32_t>(d), {}});
        ++list.back().counts[f];
      }
    }
    index.doc_lengths_.push_back(length);
    index.docs_.push_back(std::move(idoc));
  }
  for (auto& [term, list] : postings) {
    index.vocabulary_.push_back(term);
    index.postings_.push_back(std::move(list));
  }
  index.finalize();
  return index;
}

void SearchIndex::finalize() {
  std::uint64_t total = 0;
  for (auto l : doc_lengths_) total += l;
  avgdl_ = docs_.empty() ? 0.0 : static_cast<double>(total) / static_cast<double>(docs_.size());
  idf_.clear();
  by_length_.clear();
  for (std::size_t t = 0; t < vocabulary_.size(); ++t) {
    idf_.push_back(bm25_idf(docs_.size(), postings_[t].size()));
    const auto len = vocabulary_[t].size();
    if (by_length_.size() <= len) by_length_.resize(len + 1);
    by_length_[len].push_back(static_cast<std::uint32_t>(t));
  }
}

std::size_t SearchIndex::term_id(std::string_view term) const {
  auto it = std::lower_bound(vocabulary_.begin(), vocabulary_.end(), term);
  if (it == vocabulary_.end() || *it != term) return std::string::npos;
  return static_cast<std::size_t>(it - vocabulary_.begin());
}

std::vector<std::pair<std::size_t, std::size_t>> SearchIndex::expand(std::string_view term) const {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  const auto budget = typo_budget(term);
  if (budget == 0) {
    if (auto id = term_id(term); id != std::string::npos) out.emplace_back(id, 0);
    return out;
  }
  const auto lo = term.size() > budget ? term.size() - budget : 0;
  const auto hi = std::min(term.size() + budget, by_length_.empty() ? 0 : by_length_.size() - 1);
  for (auto len = lo; len <= hi && len < by_length_.size(); ++len) {
    for (auto t : by_length_[len]) {
      const auto d = osa_distance(term, vocabulary_[t], budget);
      if (d <= budget) out.emplace_back(t, d);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

// ---------------------------------------------------------------------------
// Search

std::vector<RankedDoc> rank(const SearchIndex& index, std::string_view query, std::size_t k) {
  if (k < 1) throw Error("BAD_K", "k must be at least 1");
  const auto terms = query_terms(query);
  if (terms.empty()) throw Error("EMPTY_QUERY", "query is empty after normalization");

  std::vector<double> scores(index.document_count(), 0.0);
  const double avgdl = index.average_length();
  for (const auto& q : terms) {
    for (const auto& [t, distance] : index.expand(q)) {
      const double weight = std::ldexp(1.0, -static_cast<int>(distance));
      const double idf = index.idf(t);
      for (const auto& p : index.postings(t)) {
        scores[p.doc] += weight * bm25_term(idf, p.weighted_tf(),
                                            static_cast<double>(index.doc_lengths()[p.doc]), avgdl);
      }
    }
  }

  std::vector<std::uint32_t> ranked;
  for (std::uint32_t d = 0; d < scores.size(); ++d) {
    if (scores[d] > 0.0) ranked.push_back(d);
  }
  const auto by_rank = [&scores](std::uint32_t a, std::uint32_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  };
  const auto n = std::min(k, ranked.size());
  std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(n), ranked.end(),
                    by_rank);
  std::vector<RankedDoc> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back({ranked[i], scores[ranked[i]]});
  return out;
}

std::vector<SearchHit> search(const SearchIndex& index, std::string_view query, std::size_t k) {
  std::vector<SearchHit> hits;
  for (const auto& [d, score] : rank(index, query, k)) {
    const auto& doc = index.document(d);
    hits.push_back({doc.url, doc.title, make_snippet(index, d, query), score, d});
  }
  return hits;
}

const Document* access(const Corpus& corpus, std::string_view url) { return corpus.find_url(url); }

// ---------------------------------------------------------------------------
// Snippets

namespace {

bool matches_query(const std::string& token, const std::vector<std::string>& terms) {
  for (const auto& q : terms) {
    const auto budget = typo_budget(q);
    if (budget == 0) {
      if (token == q) return true;
    } else if (osa_distance(q, token, budget) <= budget) {
      return true;
    }
  }
  return false;
}

std::string ellipsize(std::string_view text, std::size_t begin, std::size_t end) {
  std::string out;
  if (begin > 0) out += "...";
  out.append(text.substr(begin, end - begin));
  if (end < text.size()) out += "...";
  return out;
}

// Window with the most matched tokens; nullopt when no token matches.
std::optional<std::string> best_window(std::string_view text, const std::vector<std::string>& terms) {
  const auto tokens = tokenize_with_offsets(text);
  std::vector<char> matched(tokens.size());
  bool any = false;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    matched[i] = matches_query(tokens[i].term, terms) ? 1 : 0;
    any = any || matched[i] != 0;
  }
  if (!any) return std::nullopt;

  // Code points before each byte offset, so window widths are O(1).
  std::vector<std::size_t> cp(text.size() + 1, 0);
  for (std::size_t b = 0; b < text.size(); ++b) {
    cp[b + 1] = cp[b] + (((static_cast<unsigned char>(text[b]) & 0xC0) != 0x80) ? 1 : 0);
  }
  const auto width = [&cp](std::size_t begin, std::size_t end) { return cp[end] - cp[begin]; };

  const std::size_t budget = kSnippetChars - 6;  // room for both ellipses
  std::size_t best_start = 0;
  std::size_t best_end = 0;
  std::size_t best_count = 0;
  std::size_t j = 0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (j < i) {
      j = i;
      count = 0;
    }
    while (j < tokens.size() &&
           width(tokens[i].begin, tokens[j].end) <= budget) {
      count += matched[j];
      ++j;
    }
    if (count > best_count) {
      best_count = count;
      best_start = i;
      best_end = j;
    }
    if (j > i) count -= matched[i];
  }
  // Tokens longer than the whole budget never enter a window, so a text whose
  // only matches are such tokens falls through to the next source.
  if (best_count == 0) return std::nullopt;
  // Extend the window end over trailing punctuation of the last token.
  std::size_t end = tokens[best_end - 1].end;
  if (end < text.size() && (text[end] == '.' || text[end] == ',') &&
      width(tokens[best_start].begin, end + 1) <= budget) {
    ++end;
  }
  return ellipsize(text, tokens[best_start].begin, end);
}

std::string prefix_snippet(std::string_view text) {
  if (utf8_length(text) <= kSnippetChars) return std::string(text);
  auto cut = utf8_prefix(text, kSnippetChars - 3).size();
  // Back off to a word boundary.
  const auto space = text.substr(0, cut).rfind(' ');
  if (space != std::string_view::npos && space > 0) cut = space;
  return std::string(text.substr(0, cut)) + "...";
}

std::string snippet_for(std::string_view abstract, std::string_view text, std::string_view query) {
  const auto terms = query_terms(query);
  if (!terms.empty()) {
    if (auto w = best_window(text, terms)) return *w;
    if (auto w = best_window(abstract, terms)) return *w;
  }
  return prefix_snippet(abstract);
}

}  // namespace

std::string make_snippet(const Document& doc, std::string_view query) {
  return snippet_for(doc.abstract, plain_text(doc.body), query);
}

std::string make_snippet(const SearchIndex& index, std::size_t ordinal, std::string_view query) {
  const auto& doc = index.document(ordinal);
  return snippet_for(doc.abstract, doc.text, query);
}

// ---------------------------------------------------------------------------
// Snapshot

namespace {

constexpr std::string_view kMagic = "SGIX1";
constexpr std::uint32_t kSnapshotVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out += static_cast<char>((v >> (8 * i)) & 0xff);
}

void put_str(std::string& out, std::string_view s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out.append(s);
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += 4;
    return v;
  }

  std::string str() {
    const auto n = u32();
    need(n);
    std::string s(bytes_.substr(pos_, n));
    pos_ += n;
    return s;
  }

  std::string_view raw(std::size_t n) {
    need(n);
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw Error("BAD_SNAPSHOT", "index snapshot is truncated");
  }

  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string SearchIndex::serialize() const {
  std::string out(kMagic);
  put_u32(out, kSnapshotVersion);
  put_u32(out, static_cast<std::uint32_t>(docs_.size()));
  for (std::size_t d = 0; d < docs_.size(); ++d) {
    put_str(out, docs_[d].url);
    put_str(out, docs_[d].title);
    put_str(out, docs_[d].abstract);
    put_str(out, docs_[d].text);
    put_u32(out, doc_lengths_[d]);
  }
  put_u32(out, static_cast<std::uint32_t>(vocabulary_.size()));
  for (std::size_t t = 0; t < vocabulary_.size(); ++t) {
    put_str(out, vocabulary_[t]);
    put_u32(out, static_cast<std::uint32_t>(postings_[t].size()));
    for (const auto& p : postings_[t]) {
      put_u32(out, p.doc);
      for (auto c : p.counts) put_u32(out, c);
    }
  }
  return out;
}

SearchIndex SearchIndex::deserialize(std::string_view bytes) {
  Reader r(bytes);
  if (r.raw(kMagic.size()) != kMagic) throw Error("BAD_SNAPSHOT", "not an index snapshot");
  if (const auto v = r.u32(); v != kSnapshotVersion) {
    throw Error("BAD_SNAPSHOT", "unsupported snapshot version " + std::to_string(v));
  }
  SearchIndex index;
  const auto docs = r.u32();
  for (std::uint32_t d = 0; d < docs; ++d) {
    IndexedDocument doc;
    doc.url = r.str();
    doc.title = r.str();
    doc.abstract = r.str();
    doc.text = r.str();
    index.docs_.push_back(std::move(doc));
    index.doc_lengths_.push_back(r.u32());
  }
  const auto terms = r.u32();
  for (std::uint32_t t = 0; t < terms; ++t) {
    index.vocabulary_.push_back(r.str());
    const auto n = r.u32();
    std::vector<Posting> list;
    list.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) {
      Posting p;
      p.doc = r.u32();
      for (auto& c : p.counts) c = r.u32();
      if (p.doc >= docs) throw Error("BAD_SNAPSHOT", "posting references unknown document");
      list.push_back(p);
    }
    index.postings_.push_back(std::move(list));
  }
  if (!r.done()) throw Error("BAD_SNAPSHOT", "trailing bytes after index snapshot");
  index.finalize();
  return index;
}

std::uint64_t SearchIndex::checksum() const { return fnv1a(serialize()); }

}  // namespace searchgym
