// Acceptance run: one PASS/FAIL line per primary criterion.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "searchgym/envsim.hpp"
#include "searchgym/pipeline.hpp"
#include "searchgym/rlmath.hpp"
#include "searchgym/text.hpp"
#include "support/bm25_oracle.hpp"
#include "support/desk_world.hpp"
#include "support/queries.hpp"

using namespace searchgym;
using Clock = std::chrono::steady_clock;

namespace {

int g_failures = 0;

void report(const std::string& name, bool pass, const std::string& detail) {
  std::printf("%s %s: %s\n", pass ? "PASS" : "FAIL", name.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

// Runs a criterion; an exception counts as a failure with its message.
void criterion(const std::string& name, const std::function<std::pair<bool, std::string>()>& body) {
  try {
    const auto [pass, detail] = body();
    report(name, pass, detail);
  } catch (const std::exception& e) {
    report(name, false, std::string("exception: ") + e.what());
  }
}

std::string fmt(const char* format, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* format, ...) {
  char buf[512];
  va_list args;
  va_start(args, format);
  std::vsnprintf(buf, sizeof buf, format, args);
  va_end(args);
  return buf;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

PipelineConfig desk_config(const std::filesystem::path& root, unsigned threads) {
  PipelineConfig c;
  c.root = root;
  c.threads = threads;
  return c;
}

struct World {
  KnowledgeGraph graph;
  KnowledgeGraph verified;
  Corpus corpus;
  SearchIndex index;
};

World load_world(const std::filesystem::path& root) {
  World w;
  w.graph = graph_from_jsonl(slurp(root / "world.jsonl"));
  w.verified = graph_from_jsonl(slurp(root / "verified.jsonl"));
  w.corpus = corpus_from_jsonl(slurp(root / "corpus.jsonl"));
  w.index = build_index(w.corpus);
  return w;
}

// --- composition fixtures ---------------------------------------------------

EntityNode person(const std::string& id, const std::string& name, std::int64_t year) {
  return {id, name, "Person", {{"birth_year", {std::to_string(year), year}}}};
}

ReasoningPath birth_year_path(const KnowledgeGraph& g, const std::string& id) {
  ReasoningPath p;
  p.anchor = g.node(id).display_name;
  p.nodes = {id};
  p.steps = {{StepKind::ScalarEnd, "birth_year", "Person", std::nullopt}};
  p.end_value = g.node(id).scalar_attrs.at("birth_year").text;
  return p;
}

ReasoningPath mayor_path(const KnowledgeGraph& g, const std::string& city, const std::string& mayor) {
  ReasoningPath p;
  p.anchor = g.node(city).display_name;
  p.nodes = {city, mayor};
  p.steps = {{StepKind::Forward, "mayor", "City", RelationEdge{city, "mayor", mayor}}};
  return p;
}

}  // namespace

int main() {
  const auto& schema = bundled_schema();
  const sgtest::TempDir run_a("acceptance-a");
  const sgtest::TempDir run_b("acceptance-b");

  // 1. Pipeline closure at desk scale.
  nlohmann::ordered_json first_report;
  criterion("pipeline-closure", [&] {
    const auto t0 = Clock::now();
    first_report = run_pipeline(desk_config(run_a.path(), 1));
    const double secs = seconds_since(t0);
    if (first_report.at("failures") != 0) return std::pair{false, first_report.at("stages").back().dump()};
    const auto& st = first_report.at("stages");
    const auto violations = st[0].at("violations").get<std::size_t>();
    const double coverage = st[1].at("fact_coverage").get<double>();
    const double retention = st[3].at("retention").get<double>();
    const bool pass = violations == 0 && coverage == 1.0 && retention >= 0.95 && secs < 120.0;
    return std::pair{pass, fmt("nodes=%zu violations=%zu fact_coverage=%.4f retention=%.4f runtime=%.1fs (limit 120s)",
                               st[0].at("nodes").get<std::size_t>(), violations, coverage, retention, secs)};
  });

  // 2. Retention rule exactness over forced hit counts.
  criterion("retention-rule", [&] {
    std::vector<Document> docs = {{"target", std::string(kUrlPrefix) + "target", "Target Page", "", "zorblax appears here", {}}};
    for (int i = 0; i < 6; ++i) {
      const auto id = "decoy" + std::to_string(i);
      docs.push_back({id, std::string(kUrlPrefix) + id, "Decoy", "", "quuxly appears here", {}});
    }
    const Corpus corpus(docs);
    const auto index = build_index(corpus);
    int ok = 0;
    for (int n = 0; n <= 15; ++n) {
      std::vector<std::string> queries;
      for (int i = 0; i < 15; ++i) queries.push_back((i < n ? "zorblax q" : "quuxly q") + std::to_string(i));
      const auto probe = verify_edge(index, corpus, queries, RelationEdge{"source", "rel", "target"});
      ok += probe.hit_count == n && probe.retained == (n >= 5) && probe.queries.size() == 15;
    }
    return std::pair{ok == 16, fmt("%d/16 forced hit counts classified correctly (retained iff >= 5 of 15)", ok)};
  });

  // 3. Oracle solvability on tasks from the freshly generated world.
  double oracle_mean = 0.0;
  double random_mean = 0.0;
  criterion("task-solvability", [&] {
    const auto w = load_world(run_a.path());
    // Combo is about 6% of the mix, so 1600 tasks leave room for a 100-task Combo bench.
    MixConfig mix;
    mix.total = 1600;
    mix.bench = {200, 100, 100};
    const auto ds = build_dataset(schema, w.verified, w.graph, mix, derive_seed(42, "acceptance"));
    Environment env(schema, w.corpus, w.index, ds.bench);
    std::map<TaskKind, std::pair<std::size_t, std::size_t>> tally;
    double oracle_sum = 0.0;
    double random_sum = 0.0;
    for (const auto& t : env.tasks()) {
      const auto run = oracle_solve(env, t, kEvalTurns);
      auto& [ok, all] = tally[t.kind];
      ++all;
      ok += run.state.prediction && exact_match(*run.state.prediction, t.answer);
      oracle_sum += run.state.terminal_reward.value_or(0.0);
      random_sum += random_agent(env, t, 42, kEvalTurns).state.terminal_reward.value_or(0.0);
    }
    const double n = static_cast<double>(env.tasks().size());
    oracle_mean = oracle_sum / n;
    random_mean = random_sum / n;
    auto rate = [&](TaskKind k) {
      const auto& [ok, all] = tally[k];
      return all == 0 ? 0.0 : static_cast<double>(ok) / static_cast<double>(all);
    };
    const auto& [sok, sall] = tally[TaskKind::Simple];
    const auto& [pok, pall] = tally[TaskKind::Parallel];
    const auto& [cok, call] = tally[TaskKind::Combo];
    const bool sizes = sall == 200 && pall == 100 && call == 100;
    const double composite = static_cast<double>(pok + cok) / static_cast<double>(std::max<std::size_t>(1, pall + call));
    const bool pass = sizes && rate(TaskKind::Simple) == 1.0 && composite >= 0.95;
    return std::pair{pass, fmt("pass@1 Simple %zu/%zu = %.2f (need 1.00); Parallel %zu/%zu, Combo %zu/%zu, "
                               "composite %.3f (need >= 0.95); 64-turn budget",
                               sok, sall, rate(TaskKind::Simple), pok, pall, cok, call, composite)};
  });
  std::printf("INFO oracle-random-gap: oracle mean reward %.4f, random mean reward %.4f, gap %.4f\n", oracle_mean,
              random_mean, oracle_mean - random_mean);

  // 4. Composition arithmetic on the worked examples.
  criterion("composition-arithmetic", [&] {
    const KnowledgeGraph g(
        {person("a000000000000001", "Elara Vance", 1968), person("a000000000000002", "Corin Lasko", 1978),
         person("a000000000000003", "Mirela Dost", 1987), person("a000000000000004", "Tavin Roke", 1964),
         person("a000000000000005", "Ysolde Brann", 1968), person("a000000000000006", "Halvar Quist", 1966),
         {"c000000000000001", "Duskmere", "City", {}}, {"c000000000000002", "Orrenhall", "City", {}}},
        {{"c000000000000001", "mayor", "a000000000000005"}, {"c000000000000002", "mayor", "a000000000000006"}});
    auto simple = [&](const ReasoningPath& p) { return verbalize_simple(schema, g, p, 0, 1); };
    const auto sum = compose_parallel(schema, g, simple(birth_year_path(g, "a000000000000001")),
                                      simple(birth_year_path(g, "a000000000000002")), Composition::Sum, std::nullopt);
    const auto diff = compose_parallel(schema, g, simple(birth_year_path(g, "a000000000000003")),
                                       simple(birth_year_path(g, "a000000000000004")), Composition::AbsDiff, std::nullopt);
    const auto older = compose_parallel(schema, g, simple(mayor_path(g, "c000000000000001", "a000000000000005")),
                                        simple(mayor_path(g, "c000000000000002", "a000000000000006")),
                                        Composition::Compare, "birth_year", "smaller");
    const bool pass = sum.answer == "3946" && diff.answer == "23" && older.answer == "Halvar Quist" &&
                      older.question.find("older") != std::string::npos;
    return std::pair{pass, "sum 1968+1978 -> \"" + sum.answer + "\", absdiff 1987/1964 -> \"" + diff.answer +
                               "\", older of 1968/1966 -> \"" + older.answer + "\" (1966-born: Halvar Quist)"};
  });

  // 5. F1 against the reference script's fixture.
  criterion("reward-oracle", [&] {
    std::ifstream in(sgtest::fixture("f1_pairs.json"));
    const auto pairs = nlohmann::json::parse(in).at("pairs");
    std::size_t agree = 0;
    for (const auto& p : pairs) {
      agree += f1_reward(p.at("prediction").get<std::string>(), p.at("ground_truth").get<std::string>()) ==
               p.at("f1").get<double>();
    }
    const double f = f1_reward("silverwind city", "silverwind");
    const bool pass = pairs.size() == 1000 && agree == pairs.size() && std::abs(f - 2.0 / 3.0) < 1e-9;
    return std::pair{pass, fmt("%zu/%zu pairs bit-equal to the reference script; f1(\"silverwind city\",\"silverwind\") = "
                               "%.10f (2/3 within 1e-9)",
                               agree, pairs.size(), f)};
  });

  // 6. GRPO advantages and clip cases.
  criterion("grpo-math", [&] {
    Rng rng(2024);
    double worst_mean = 0.0;
    double worst_std = 0.0;
    for (int i = 0; i < 1000; ++i) {
      std::vector<double> r(2 + rng.below(15));
      for (auto& x : r) x = rng.unit();
      const auto a = group_advantages(r);
      const double n = static_cast<double>(a.size());
      const double mean = std::accumulate(a.begin(), a.end(), 0.0) / n;
      double var = 0.0;
      for (double x : a) var += (x - mean) * (x - mean);
      worst_mean = std::max(worst_mean, std::abs(mean));
      worst_std = std::max(worst_std, std::abs(std::sqrt(var / n) - 1.0));
    }
    // Rewards {1, 0} give advantages {+1, -1}; the partner term has ratio 1.
    auto term = [](double ratio, bool positive) {
      TrajectoryGroup g;
      g.rewards = positive ? std::vector<double>{1, 0} : std::vector<double>{0, 1};
      g.ratios = {ratio, 1.0};
      return 2.0 * grpo_objective(g) - (positive ? -1.0 : 1.0);
    };
    const double up = term(1.5, true);
    const double down = term(0.5, false);
    const bool pass = worst_mean < 1e-9 && worst_std < 1e-6 && std::abs(up - 1.4) < 1e-12 && std::abs(down + 0.6) < 1e-12;
    return std::pair{pass, fmt("1000 groups: max |mean| %.2e, max |std-1| %.2e; clip cases %.15f (1.4), %.15f (-0.6)",
                               worst_mean, worst_std, up, down)};
  });

  // 7. Retrieval fidelity.
  criterion("retrieval-fidelity", [&] {
    const auto w = load_world(run_a.path());
    std::vector<Document> first(w.corpus.documents().begin(), w.corpus.documents().begin() + 200);
    const auto small = build_index(Corpus(first));
    std::vector<sgtest::Bm25Oracle::Fields> fields;
    for (std::size_t d = 0; d < small.document_count(); ++d) {
      const auto& x = small.document(d);
      fields.push_back({x.title, x.abstract, x.text});
    }
    const sgtest::Bm25Oracle oracle(fields);
    Rng rng(77);
    int same = 0;
    int exact_scores = 0;
    for (int i = 0; i < 1000; ++i) {
      const auto q = sgtest::random_query(small.vocabulary(), rng);
      const auto got = rank(small, q, 10);
      const auto want = oracle.rank(q, 10);
      bool eq = got.size() == want.size();
      bool bits = eq;
      for (std::size_t j = 0; eq && j < got.size(); ++j) {
        eq = got[j].doc == want[j].doc && std::abs(got[j].score - want[j].score) <= 1e-9 * want[j].score;
        bits = bits && got[j].score == want[j].score;
      }
      same += eq;
      exact_scores += eq && bits;
    }

    int eligible = 0;
    int found = 0;
    for (const auto& n : w.graph.nodes()) {
      if (utf8_length(n.display_name) < 5) continue;
      ++eligible;
      // One edit inside the longest word of the name.
      std::vector<std::string> words;
      std::istringstream in(n.display_name);
      for (std::string word; in >> word;) words.push_back(word);
      auto longest = std::max_element(words.begin(), words.end(),
                                      [](const std::string& a, const std::string& b) { return a.size() < b.size(); });
      *longest = sgtest::one_typo(*longest, rng);
      std::string q;
      for (const auto& word : words) q += (q.empty() ? "" : " ") + word;
      for (const auto& h : search(w.index, q, 5)) {
        if (h.title == n.display_name) {
          ++found;
          break;
        }
      }
    }
    const double recall = static_cast<double>(found) / static_cast<double>(std::max(1, eligible));

    auto counts = scaled_counts(5000);
    std::size_t placed = 0;
    for (const auto& [type, n] : counts) placed += n;
    counts["Person"] += 5000 - placed;
    const auto big_graph = synthesize_graph(schema, counts, 42);
    const auto big_corpus = build_corpus(schema, big_graph, kTemplateCount, derive_seed(42, "corpus"));
    const auto big = build_index(big_corpus);
    std::vector<double> ms;
    Rng qrng(5);
    for (int i = 0; i < 500; ++i) {
      const auto q = i % 2 == 0 ? sgtest::random_query(big.vocabulary(), qrng)
                                : big_graph.nodes()[qrng.below(big_graph.size())].display_name;
      if (query_terms(q).empty()) continue;
      const auto t0 = Clock::now();
      const auto hits = search(big, q, kDefaultTopK);
      ms.push_back(seconds_since(t0) * 1000.0);
    }
    std::nth_element(ms.begin(), ms.begin() + static_cast<std::ptrdiff_t>(ms.size() / 2), ms.end());
    const double median = ms[ms.size() / 2];
    const bool pass = same == 1000 && recall >= 0.90 && median < 50.0;
    return std::pair{pass, fmt("oracle ranking equal on %d/1000 queries (%d with bit-identical scores); one-typo "
                               "top-5 recall %.3f over %d names (need >= 0.90); median latency %.2f ms on %zu docs "
                               "(need < 50)",
                               same, exact_scores, recall, eligible, median, big.document_count())};
  });

  // 8. Distribution fidelity.
  criterion("distribution-fidelity", [&] {
    const auto w = load_world(run_a.path());
    const auto ds = build_dataset(schema, w.verified, w.graph, MixConfig{}, derive_seed(42, "tasks"));
    const double weight = static_cast<double>(std::accumulate(kTableCells.begin(), kTableCells.end(), std::size_t{0}));
    std::array<std::size_t, 6> cells{};
    std::array<std::size_t, 3> kinds{};
    for (const auto& t : ds.train) {
      ++cells[*table_cell(t.kind, t.hops)];
      ++kinds[static_cast<std::size_t>(t.kind)];
    }
    double worst_cell = 0.0;
    for (std::size_t i = 0; i < 6; ++i) {
      worst_cell = std::max(worst_cell, std::abs(static_cast<double>(cells[i]) - 1000.0 * static_cast<double>(kTableCells[i]) / weight));
    }
    const std::array<double, 3> kind_weight = {static_cast<double>(kTableCells[0] + kTableCells[1]),
                                               static_cast<double>(kTableCells[2] + kTableCells[3] + kTableCells[4]),
                                               static_cast<double>(kTableCells[5])};
    double worst_kind = 0.0;
    for (std::size_t k = 0; k < 3; ++k) {
      worst_kind = std::max(worst_kind, std::abs(static_cast<double>(kinds[k]) - 1000.0 * kind_weight[k] / weight));
    }

    MixConfig split;
    split.bench = {462, 134, 46};
    const auto sd = build_dataset(schema, w.verified, w.graph, split, derive_seed(42, "tasks"));
    std::array<std::size_t, 3> bench{};
    for (const auto& t : sd.bench) ++bench[static_cast<std::size_t>(t.kind)];
    const bool exact = bench == std::array<std::size_t, 3>{462, 134, 46};
    const bool pass = ds.train.size() == 1000 && worst_cell <= 1.0 && worst_kind <= 1.0 && exact;
    return std::pair{pass, fmt("kinds %zu/%zu/%zu of 1000 (max deviation %.2f tasks, cells %.2f); bench split "
                               "%zu/%zu/%zu (requested 462/134/46)",
                               kinds[0], kinds[1], kinds[2], worst_kind, worst_cell, bench[0], bench[1], bench[2])};
  });

  // 9. Determinism of two full runs.
  criterion("determinism", [&] {
    const auto second = run_pipeline(desk_config(run_b.path(), 4));
    if (second.at("failures") != 0) return std::pair{false, std::string("second run failed")};
    std::string detail;
    bool pass = true;
    for (const auto* file : {"world.jsonl", "corpus.jsonl", "tasks.jsonl"}) {
      const auto a = slurp(run_a.path() / file);
      const bool same = !a.empty() && a == slurp(run_b.path() / file);
      pass = pass && same;
      detail += fmt("%s %s (%zu bytes); ", file, same ? "identical" : "DIFFERS", a.size());
    }
    return std::pair{pass, detail + "threads 1 vs 4"};
  });

  // 10. Episode semantics.
  criterion("episode-semantics", [&] {
    const auto w = load_world(run_a.path());
    auto tasks = tasks_from_jsonl(slurp(run_a.path() / "tasks.jsonl"));
    Environment env(schema, w.corpus, w.index, tasks);
    int replayed = 0;
    for (std::size_t i = 0; i < 100; ++i) {
      const auto& t = env.tasks()[(i * 9) % env.tasks().size()];
      const auto run = i % 2 == 0 ? oracle_solve(env, t, kEvalTurns) : random_agent(env, t, i, kTrainTurns);
      std::vector<Action> actions;
      for (const auto& [a, o] : run.state.history) actions.push_back(a);
      const auto again = replay(env, t, actions, run.state.max_turns);
      replayed += again.history == run.state.history && again.terminal_reward == run.state.terminal_reward;
    }
    int exhausted_zero = 0;
    int limits = 0;
    for (const auto profile : {"train", "eval"}) {
      const auto limit = max_turns_for(profile);
      auto s = env.start_episode(env.tasks().front(), limit);
      std::size_t steps = 0;
      while (s.status == EpisodeStatus::Active) {
        env.step(s, Action::search(env.tasks().front().answer));
        ++steps;
      }
      exhausted_zero += s.status == EpisodeStatus::Exhausted && s.terminal_reward == 0.0;
      bool refused = false;
      try {
        env.step(s, Action::answer(env.tasks().front().answer));
      } catch (const Error&) {
        refused = true;
      }
      limits += steps == limit && refused;
    }
    const bool pass = replayed == 100 && exhausted_zero == 2 && limits == 2 && max_turns_for("train") == 16 &&
                      max_turns_for("eval") == 64;
    return std::pair{pass, fmt("%d/100 replays identical; exhausted => reward 0 in %d/2 profiles; turn limits 16/64 "
                               "enforced in %d/2",
                               replayed, exhausted_zero, limits)};
  });

  std::printf("%s: %d criterion(s) failed\n", g_failures == 0 ? "ALL PASS" : "SOME FAIL", g_failures);
  return g_failures == 0 ? 0 : 1;
}
