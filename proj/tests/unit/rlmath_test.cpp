#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include <nlohmann/json.hpp>

#include "searchgym/rlmath.hpp"
#include "support/desk_world.hpp"

using namespace searchgym;

namespace {

std::vector<std::string> bag(std::string_view text) { return normalize_answer(text).tokens; }

double single_term(double ratio, bool positive) {
  // Rewards {1, 0} give advantages {+1, -1}; the partner term has ratio 1,
  // so it contributes exactly -+1 and the requested term can be read back.
  TrajectoryGroup g;
  g.rewards = positive ? std::vector<double>{1.0, 0.0} : std::vector<double>{0.0, 1.0};
  g.ratios = {ratio, 1.0};
  const double partner = positive ? -1.0 : 1.0;
  return 2.0 * grpo_objective(g) - partner;
}

}  // namespace

TEST(Normalize, Examples) {
  EXPECT_EQ(bag("The  Answer!"), (std::vector<std::string>{"answer", "the"}));
  EXPECT_EQ(bag("北京"), (std::vector<std::string>{"京", "北"}));
  EXPECT_EQ(bag("GDP: 30000"), (std::vector<std::string>{"30000", "gdp"}));
  EXPECT_EQ(normalize_tokens("Tokyo東京 Bay"), (std::vector<std::string>{"tokyo", "東", "京", "bay"}));
  EXPECT_EQ(normalize_tokens("O'Brien  co-op"), (std::vector<std::string>{"obrien", "coop"}));
  EXPECT_EQ(normalize_tokens("ÖRN　İ"), (std::vector<std::string>{"örn", "i̇"}));
  EXPECT_TRUE(normalize_answer("").empty());
  EXPECT_TRUE(normalize_answer(" ,.!? ").empty());
  EXPECT_FALSE(unicode_version().empty());
}

TEST(F1, Examples) {
  EXPECT_DOUBLE_EQ(f1_reward("Silverwind City", "silverwind city"), 1.0);
  EXPECT_DOUBLE_EQ(f1_reward("alpha", "beta"), 0.0);
  EXPECT_NEAR(f1_reward("silverwind city", "silverwind"), 0.6667, 1e-4);
  EXPECT_NEAR(f1_reward("silverwind city", "silverwind"), 2.0 / 3.0, 1e-12);
  EXPECT_DOUBLE_EQ(f1_reward("", "x"), 0.0);
  EXPECT_DOUBLE_EQ(f1_reward("x", "!!"), 0.0);
  // Duplicate tokens count once.
  EXPECT_DOUBLE_EQ(f1_reward("city city city", "city"), 1.0);
}

TEST(F1, MatchesReferenceFixture) {
  std::ifstream in(sgtest::fixture("f1_pairs.json"));
  ASSERT_TRUE(in) << "missing fixture";
  const auto doc = nlohmann::json::parse(in);
  EXPECT_EQ(doc.at("unicode").get<std::string>(), std::string(unicode_version()));
  const auto& pairs = doc.at("pairs");
  ASSERT_EQ(pairs.size(), 1000u);
  std::size_t agree = 0;
  for (const auto& p : pairs) {
    const auto pred = p.at("prediction").get<std::string>();
    const auto gold = p.at("ground_truth").get<std::string>();
    const double got = f1_reward(pred, gold);
    if (got == p.at("f1").get<double>()) {
      ++agree;
    } else {
      ADD_FAILURE() << pred << " | " << gold << " : " << got << " vs " << p.at("f1");
    }
  }
  EXPECT_EQ(agree, 1000u);
}

TEST(F1Property, SymmetricBoundedAndExactOnEqualSets) {
  const auto& pairs = nlohmann::json::parse(std::ifstream(sgtest::fixture("f1_pairs.json"))).at("pairs");
  for (const auto& p : pairs) {
    const auto a = p.at("prediction").get<std::string>();
    const auto b = p.at("ground_truth").get<std::string>();
    const double ab = f1_reward(a, b);
    EXPECT_EQ(ab, f1_reward(b, a));
    EXPECT_GE(ab, 0.0);
    EXPECT_LE(ab, 1.0);
    const bool same = !normalize_answer(a).empty() && normalize_answer(a) == normalize_answer(b);
    EXPECT_EQ(ab == 1.0, same) << a << " | " << b;
  }
}

TEST(ExactMatch, Examples) {
  EXPECT_TRUE(exact_match("Silverwind City", "silverwind  city"));
  EXPECT_TRUE(exact_match("3946", "3,946"));
  EXPECT_FALSE(exact_match("Silverwind City", "City Silverwind"));
  EXPECT_FALSE(exact_match("Duskmere", "Orrenhall"));
}

TEST(GroupAdvantages, Examples) {
  EXPECT_EQ(group_advantages({1, 1, 1, 1}), (std::vector<double>{0, 0, 0, 0}));
  EXPECT_EQ(group_advantages({0, 1}), (std::vector<double>{-1, 1}));
  EXPECT_EQ(group_advantages({0, 0, 1, 1}), (std::vector<double>{-1, -1, 1, 1}));
  EXPECT_EQ(group_advantages({0.7}), (std::vector<double>{0}));
}

TEST(GroupAdvantagesProperty, StandardizedOnRandomGroups) {
  Rng rng(11);
  for (int g = 0; g < 1000; ++g) {
    const std::size_t n = 2 + rng.below(15);
    std::vector<double> r(n);
    for (auto& x : r) x = rng.chance(0.3) ? static_cast<double>(rng.below(2)) : rng.unit();
    const auto a = group_advantages(r);
    const double mean = std::accumulate(a.begin(), a.end(), 0.0) / static_cast<double>(n);
    EXPECT_LT(std::abs(mean), 1e-9);
    double var = 0.0;
    for (double x : a) var += (x - mean) * (x - mean);
    const double m = std::accumulate(r.begin(), r.end(), 0.0) / static_cast<double>(n);
    double rv = 0.0;
    for (double x : r) rv += (x - m) * (x - m);
    if (std::sqrt(rv / static_cast<double>(n)) >= kStdFloor) {
      EXPECT_NEAR(std::sqrt(var / static_cast<double>(n)), 1.0, 1e-6);
    } else {
      for (double x : a) EXPECT_EQ(x, 0.0);
    }
  }
}

TEST(Grpo, ClipCases) {
  EXPECT_NEAR(single_term(1.5, true), 1.4, 1e-12);
  EXPECT_NEAR(single_term(0.5, false), -0.6, 1e-12);
  // Inside the clip window the ratio passes through.
  EXPECT_NEAR(single_term(1.2, true), 1.2, 1e-12);
  // Pessimistic side: a large ratio on a negative advantage is not clipped.
  EXPECT_NEAR(single_term(2.0, false), -2.0, 1e-12);
}

TEST(Grpo, UnitRatiosGiveZero) {
  TrajectoryGroup g;
  g.rewards = {0.1, 0.9, 0.4, 0.4, 1.0};
  g.ratios = std::vector<double>(5, 1.0);
  EXPECT_NEAR(grpo_objective(g), 0.0, 1e-12);
}

TEST(Grpo, KlPenalty) {
  TrajectoryGroup g;
  g.rewards = {1, 1};
  g.ratios = {1, 1};
  g.kl_terms = {0.2, 0.4};
  g.beta = 0.5;
  EXPECT_NEAR(grpo_objective(g), -0.15, 1e-12);
}

TEST(Grpo, Errors) {
  TrajectoryGroup g;
  g.rewards = {0, 1};
  g.ratios = {1, 0};
  EXPECT_THROW(grpo_objective(g), Error);
  g.ratios = {1};
  EXPECT_THROW(grpo_objective(g), Error);
  g.ratios = {1, 1};
  g.kl_terms = {0};
  EXPECT_THROW(grpo_objective(g), Error);
}

TEST(GrpoProperty, NoClipReducesToMeanWeightedAdvantage) {
  Rng rng(5);
  for (int k = 0; k < 500; ++k) {
    const std::size_t n = 1 + rng.below(16);
    TrajectoryGroup g;
    g.epsilon = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      g.rewards.push_back(rng.unit());
      g.ratios.push_back(0.05 + 3.0 * rng.unit());
    }
    const auto a = group_advantages(g.rewards);
    double expect = 0.0;
    for (std::size_t i = 0; i < n; ++i) expect += g.ratios[i] * a[i];
    EXPECT_NEAR(grpo_objective(g), expect / static_cast<double>(n), 1e-9);
  }
}

TEST(PassAtK, Examples) {
  EXPECT_EQ(pass_at_k({true, false, false, false}, 4), 1.0);
  EXPECT_EQ(pass_at_k({false, false, false, false}, 4), 0.0);
  EXPECT_EQ(pass_at_k({true}, 1), 1.0);
  EXPECT_EQ(pass_at_k({false}, 1), 0.0);
  EXPECT_THROW(pass_at_k({true, false}, 4), Error);
}

TEST(ScoreTrajectories, AggregatesAndJudgeOverride) {
  auto rec = [](const std::string& ep, const std::string& task, const std::string& pred, const std::string& answer,
                const std::string& status) {
    nlohmann::json j;
    j["episode_id"] = ep;
    j["task_id"] = task;
    j["prediction"] = pred;
    j["answer"] = answer;
    j["status"] = status;
    j["reward"] = status == "Exhausted" ? 0.0 : f1_reward(pred, answer);
    j["turns"] = 3;
    j["searches"] = 2;
    j["accesses"] = 1;
    return j.dump() + "\n";
  };
  const std::string log = rec("e1", "t1", "Duskmere", "Duskmere", "Answered") +
                          rec("e2", "t1", "Orrenhall", "Duskmere", "Answered") +
                          rec("e3", "t2", "Silverwind", "Silverwind City", "Answered") +
                          rec("e4", "t2", "", "Silverwind City", "Exhausted");
  const auto s = score_trajectories(log);
  EXPECT_EQ(s.at("episodes"), 4);
  EXPECT_EQ(s.at("tasks"), 2);
  EXPECT_NEAR(s.at("mean_reward").get<double>(), (1.0 + 0.0 + 2.0 / 3.0 + 0.0) / 4.0, 1e-12);
  EXPECT_NEAR(s.at("pass@1").get<double>(), 0.5, 1e-12);
  EXPECT_EQ(s.at("exhausted"), 1);
  EXPECT_EQ(s.at("k"), 2);
  EXPECT_NEAR(s.at("pass@k").get<double>(), 0.5, 1e-12);
  EXPECT_NEAR(s.at("avg_search").get<double>(), 2.0, 1e-12);
  const auto judged = score_trajectories(log, std::string(R"({"episode_id":"e3","correct":true})") + "\n");
  EXPECT_NEAR(judged.at("pass@1").get<double>(), 1.0, 1e-12);
  EXPECT_THROW(score_trajectories(log, std::string("{not json\n")), Error);
}
