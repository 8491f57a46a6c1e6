#pragma once

#include <string>
#include <vector>

#include "searchgym/common.hpp"

namespace sgtest {

/// Applies one random edit (delete, insert, substitute or swap) at a
/// position past the first character.
std::string one_typo(const std::string& word, searchgym::Rng& rng);

/// 1 to 4 words drawn from `vocabulary`, some with a typo, some invented.
std::string random_query(const std::vector<std::string>& vocabulary, searchgym::Rng& rng);

}  // namespace sgtest
