#include "support/queries.hpp"
#include <cctype>

namespace sgtest {

std::string one_typo(const std::string& word, searchgym::Rng& rng) {
  std::string w = word;
  const auto pos = 1 + rng.below(w.size() - 1);
  const char letter = static_cast<char>('a' + rng.below(26));
  switch (rng.below(4)) {
    case 0: w.erase(pos, 1); break;
    case 1: w.insert(w.begin() + static_cast<std::ptrdiff_t>(pos), letter); break;
    case 2: w[pos] = letter; break;
    default:
      if (pos + 1 < w.size()) std::swap(w[pos], w[pos + 1]);
      else w.erase(pos, 1);
  }
  return w;
}

std::string random_query(const std::vector<std::string>& vocabulary, searchgym::Rng& rng) {
  std::string q;
  const auto words = 1 + rng.below(4);
  for (std::uint64_t i = 0; i < words; ++i) {
    std::string w = vocabulary[rng.below(vocabulary.size())];
    const auto roll = rng.unit();
    if (roll < 0.3 && w.size() >= 2) {
      w = one_typo(w, rng);
    } else if (roll < 0.4) {
      w.clear();
      const auto n = 3 + rng.below(8);
      for (std::uint64_t j = 0; j < n; ++j) w += static_cast<char>('a' + rng.below(26));
    }
    if (rng.chance(0.2) && !w.empty()) w[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(w[0])));
    if (!q.empty()) q += rng.chance(0.2) ? ", " : " ";
    q += w;
  }
  return q;
}

}  // namespace sgtest
