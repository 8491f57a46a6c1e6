#include "searchgym/rlmath.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>

#include <nlohmann/json.hpp>

#include "searchgym/common.hpp"

namespace searchgym {

namespace {

struct CodeRange {
  char32_t lo;
  char32_t hi;
};

struct LowerMapping {
  char32_t cp;
  const char* utf8;
};

#include "unicode_tables.inc"

template <std::size_t N>
bool in_ranges(const CodeRange (&table)[N], char32_t cp) {
  auto it = std::upper_bound(std::begin(table), std::end(table), cp,
                             [](char32_t c, const CodeRange& r) { return c < r.lo; });
  if (it == std::begin(table)) return false;
  --it;
  return cp <= it->hi;
}

const char* lower_of(char32_t cp) {
  auto it = std::lower_bound(std::begin(kLowercase), std::end(kLowercase), cp,
                             [](const LowerMapping& m, char32_t c) { return m.cp < c; });
  return it != std::end(kLowercase) && it->cp == cp ? it->utf8 : nullptr;
}

// Decodes one code point; malformed sequences yield U+FFFD and consume a byte.
char32_t decode(std::string_view s, std::size_t& i) {
  const auto b0 = static_cast<unsigned char>(s[i]);
  std::size_t len = 0;
  char32_t cp = 0;
  if (b0 < 0x80) {
    ++i;
    return b0;
  } else if ((b0 & 0xE0) == 0xC0) {
    len = 2;
    cp = b0 & 0x1F;
  } else if ((b0 & 0xF0) == 0xE0) {
    len = 3;
    cp = b0 & 0x0F;
  } else if ((b0 & 0xF8) == 0xF0) {
    len = 4;
    cp = b0 & 0x07;
  } else {
    ++i;
    return 0xFFFD;
  }
  if (i + len > s.size()) {
    ++i;
    return 0xFFFD;
  }
  for (std::size_t k = 1; k < len; ++k) {
    const auto b = static_cast<unsigned char>(s[i + k]);
    if ((b & 0xC0) != 0x80) {
      ++i;
      return 0xFFFD;
    }
    cp = (cp << 6) | (b & 0x3F);
  }
  i += len;
  return cp;
}

void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out += static_cast<char>(cp);
  } else if (cp < 0x800) {
    out += static_cast<char>(0xC0 | (cp >> 6));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else if (cp < 0x10000) {
    out += static_cast<char>(0xE0 | (cp >> 12));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else {
    out += static_cast<char>(0xF0 | (cp >> 18));
    out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  }
}

std::vector<char32_t> decode_all(std::string_view s) {
  std::vector<char32_t> out;
  for (std::size_t i = 0; i < s.size();) out.push_back(decode(s, i));
  return out;
}

}  // namespace

bool TokenBag::contains(std::string_view t) const {
  return std::binary_search(tokens.begin(), tokens.end(), t);
}

std::string_view unicode_version() { return kUnicodeVersion; }

std::vector<std::string> normalize_tokens(std::string_view text) {
  // Lowercase per code point first; a mapping may expand to several code
  // points (U+0130 becomes "i" plus a combining dot).
  std::vector<char32_t> lowered;
  for (std::size_t i = 0; i < text.size();) {
    const auto cp = decode(text, i);
    if (const char* l = lower_of(cp)) {
      for (auto c : decode_all(l)) lowered.push_back(c);
    } else {
      lowered.push_back(cp);
    }
  }

  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) tokens.push_back(std::move(current));
    current.clear();
  };
  for (auto cp : lowered) {
    if (in_ranges(kPunctuation, cp)) continue;
    if (in_ranges(kWhitespace, cp)) {
      flush();
    } else if (in_ranges(kCjk, cp)) {
      flush();
      append_utf8(current, cp);
      flush();
    } else {
      append_utf8(current, cp);
    }
  }
  flush();
  return tokens;
}

TokenBag normalize_answer(std::string_view text) {
  TokenBag bag{normalize_tokens(text)};
  std::sort(bag.tokens.begin(), bag.tokens.end());
  bag.tokens.erase(std::unique(bag.tokens.begin(), bag.tokens.end()), bag.tokens.end());
  return bag;
}

double f1_reward(std::string_view prediction, std::string_view ground_truth) {
  const auto pred = normalize_answer(prediction);
  const auto gt = normalize_answer(ground_truth);
  if (pred.empty() || gt.empty()) return 0.0;
  std::vector<std::string> common;
  std::set_intersection(pred.tokens.begin(), pred.tokens.end(), gt.tokens.begin(), gt.tokens.end(),
                        std::back_inserter(common));
  if (common.empty()) return 0.0;
  const double overlap = static_cast<double>(common.size());
  const double p = overlap / static_cast<double>(pred.size());
  const double r = overlap / static_cast<double>(gt.size());
  return 2.0 * p * r / (p + r);
}

bool exact_match(std::string_view prediction, std::string_view ground_truth) {
  return normalize_tokens(prediction) == normalize_tokens(ground_truth);
}

std::vector<double> group_advantages(const std::vector<double>& rewards) {
  std::vector<double> adv(rewards.size(), 0.0);
  if (rewards.empty()) return adv;
  const double n = static_cast<double>(rewards.size());
  const double mean = std::accumulate(rewards.begin(), rewards.end(), 0.0) / n;
  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  const double sd = std::sqrt(var / n);
  if (sd < kStdFloor) return adv;
  for (std::size_t i = 0; i < rewards.size(); ++i) adv[i] = (rewards[i] - mean) / sd;
  return adv;
}

double grpo_objective(const TrajectoryGroup& g) {
  const auto n = g.rewards.size();
  if (n == 0 || g.ratios.size() != n || (!g.kl_terms.empty() && g.kl_terms.size() != n))
    throw Error("SIZE_MISMATCH", "rewards, ratios and kl terms must have the same length");
  const auto adv = group_advantages(g.rewards);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double rho = g.ratios[i];
    if (!(rho > 0.0)) throw Error("BAD_RATIO", "importance ratio must be positive");
    const double clipped = std::clamp(rho, 1.0 - g.epsilon, 1.0 + g.epsilon);
    const double kl = g.kl_terms.empty() ? 0.0 : g.kl_terms[i];
    total += std::min(rho * adv[i], clipped * adv[i]) - g.beta * kl;
  }
  return total / static_cast<double>(n);
}

double pass_at_k(const std::vector<bool>& outcomes, std::size_t k) {
  if (outcomes.size() != k)
    throw Error("SIZE_MISMATCH", "expected " + std::to_string(k) + " outcomes, got " +
                                     std::to_string(outcomes.size()));
  return std::any_of(outcomes.begin(), outcomes.end(), [](bool b) { return b; }) ? 1.0 : 0.0;
}

nlohmann::ordered_json score_trajectories(std::string_view log_jsonl,
                                          std::optional<std::string_view> judge_jsonl) {
  std::map<std::string, bool> verdicts;
  if (judge_jsonl) {
    try {
      for (auto line : split_lines(*judge_jsonl)) {
        auto j = nlohmann::json::parse(line);
        verdicts[j.at("episode_id").get<std::string>()] = j.at("correct").get<bool>();
      }
    } catch (const nlohmann::json::exception& e) {
      throw Error("BAD_ARTIFACT", std::string("judge verdicts: ") + e.what());
    }
  }

  struct Outcome {
    double reward;
    bool correct;
  };
  std::map<std::string, std::vector<Outcome>> by_task;
  std::size_t episodes = 0;
  std::size_t exhausted = 0;
  double reward_sum = 0.0;
  double searches = 0.0;
  double accesses = 0.0;
  try {
    for (auto line : split_lines(log_jsonl)) {
      auto j = nlohmann::json::parse(line);
      const auto id = j.at("episode_id").get<std::string>();
      const double reward = j.value("reward", 0.0);
      bool correct = false;
      if (j.contains("prediction") && j["prediction"].is_string())
        correct = exact_match(j["prediction"].get<std::string>(), j.at("answer").get<std::string>());
      if (auto it = verdicts.find(id); it != verdicts.end()) correct = it->second;
      by_task[j.at("task_id").get<std::string>()].push_back({reward, correct});
      ++episodes;
      reward_sum += reward;
      searches += j.value("searches", 0.0);
      accesses += j.value("accesses", 0.0);
      if (j.value("status", std::string{}) == "Exhausted") ++exhausted;
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error("BAD_ARTIFACT", std::string("trajectory log: ") + e.what());
  }

  // pass@k uses the largest k every task has enough episodes for.
  std::size_t k = by_task.empty() ? 0 : SIZE_MAX;
  for (const auto& [task, outcomes] : by_task) k = std::min(k, outcomes.size());

  nlohmann::ordered_json out;
  auto per_task = nlohmann::ordered_json::array();
  double pass1 = 0.0;
  double passk = 0.0;
  for (const auto& [task, outcomes] : by_task) {
    std::vector<bool> first_k;
    for (std::size_t i = 0; i < k; ++i) first_k.push_back(outcomes[i].correct);
    const double p1 = pass_at_k({outcomes.front().correct}, 1);
    const double pk = pass_at_k(first_k, k);
    pass1 += p1;
    passk += pk;
    double mean = 0.0;
    for (const auto& o : outcomes) mean += o.reward;
    per_task.push_back({{"task_id", task},
                        {"episodes", outcomes.size()},
                        {"mean_reward", mean / static_cast<double>(outcomes.size())},
                        {"pass@1", p1},
                        {"pass@k", pk}});
  }
  const double tasks = static_cast<double>(by_task.size());
  const double eps = static_cast<double>(episodes);
  out["episodes"] = episodes;
  out["tasks"] = by_task.size();
  out["mean_reward"] = episodes ? reward_sum / eps : 0.0;
  out["pass@1"] = by_task.empty() ? 0.0 : pass1 / tasks;
  out["k"] = k;
  out["pass@k"] = by_task.empty() ? 0.0 : passk / tasks;
  out["avg_search"] = episodes ? searches / eps : 0.0;
  out["avg_access"] = episodes ? accesses / eps : 0.0;
  out["exhausted"] = exhausted;
  out["per_task"] = std::move(per_task);
  return out;
}

}  // namespace searchgym
