#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace searchgym {

inline constexpr double kGrpoEpsilon = 0.4;
inline constexpr double kGrpoBeta = 0.0;
inline constexpr double kStdFloor = 1e-8;

/// Normalized answer tokens as a set (sorted, unique).
struct TokenBag {
  std::vector<std::string> tokens;

  bool empty() const noexcept { return tokens.empty(); }
  std::size_t size() const noexcept { return tokens.size(); }
  bool contains(std::string_view t) const;

  friend bool operator==(const TokenBag&, const TokenBag&) = default;
};

/// Lowercases, deletes Unicode punctuation, splits on Unicode whitespace and
/// emits every CJK character as its own token. Order is preserved.
std::vector<std::string> normalize_tokens(std::string_view text);
TokenBag normalize_answer(std::string_view text);

/// Unicode version of the bundled character tables.
std::string_view unicode_version();

/// Set-overlap F1 over normalized tokens; 0 when either side is empty.
double f1_reward(std::string_view prediction, std::string_view ground_truth);
bool exact_match(std::string_view prediction, std::string_view ground_truth);

/// (r - mean) / population std, or all zeros when std < 1e-8.
std::vector<double> group_advantages(const std::vector<double>& rewards);

struct TrajectoryGroup {
  std::vector<double> rewards;
  std::vector<double> ratios;    // importance ratios, > 0
  std::vector<double> kl_terms;  // empty means all zero
  double epsilon = kGrpoEpsilon;
  double beta = kGrpoBeta;
};

/// Clipped surrogate value averaged over the group. Throws
/// Error("BAD_RATIO") for a non-positive ratio and Error("SIZE_MISMATCH")
/// when the lists disagree in length.
double grpo_objective(const TrajectoryGroup& group);

/// 1.0 if any outcome is true. Throws Error("SIZE_MISMATCH") unless
/// outcomes.size() == k.
double pass_at_k(const std::vector<bool>& outcomes, std::size_t k);

/// Scores envsim trajectory logs. `judge_jsonl` may hold
/// {"episode_id", "correct"} records that override exact-match correctness.
/// Output: {"episodes","tasks","mean_reward","pass@1","pass@k","k",
/// "avg_search","avg_access","exhausted","per_task":[...]}.
nlohmann::ordered_json score_trajectories(std::string_view log_jsonl,
                                          std::optional<std::string_view> judge_jsonl = std::nullopt);

}  // namespace searchgym
