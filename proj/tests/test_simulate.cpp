#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <random>

#include "colldiff/errors.hpp"
#include "colldiff/simulate.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

namespace colldiff {
namespace {

using testing::TempDir;

TEST(ActivationProbability, Examples) {
  const ParentActivation a[] = {{1, 0.5}};
  EXPECT_DOUBLE_EQ(activation_probability(a), 0.5);
  const ParentActivation b[] = {{2, 0.5}};
  EXPECT_DOUBLE_EQ(activation_probability(b), 0.75);
  const ParentActivation c[] = {{1, 0.1}, {2, 0.2}};
  EXPECT_NEAR(activation_probability(c), 0.424, 1e-15);
  EXPECT_EQ(activation_probability({}), 0.0);
}

TEST(ActivationProbability, MatchesDirectProduct) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> lvl(1, 50);
  std::uniform_real_distribution<double> pr(0.0, 0.3);
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<ParentActivation> parents;
    std::vector<std::pair<int, double>> plain;
    for (int k = 0; k < 4; ++k) {
      parents.push_back({lvl(rng), pr(rng)});
      plain.emplace_back(parents.back().level, parents.back().p);
    }
    EXPECT_NEAR(activation_probability(parents), oracle::gamma_of(plain), 1e-12);
  }
}

TEST(StepDistribution, Examples) {
  const auto d = step_activation_distribution(2, 0.5);
  ASSERT_EQ(d.size(), 3u);
  EXPECT_NEAR(d[0], 0.25, 1e-15);
  EXPECT_NEAR(d[1], 0.5, 1e-15);
  EXPECT_NEAR(d[2], 0.25, 1e-15);
  const auto zero = step_activation_distribution(7, 0.0);
  EXPECT_EQ(zero[0], 1.0);
  for (std::size_t k = 1; k < zero.size(); ++k) EXPECT_EQ(zero[k], 0.0);
  EXPECT_NEAR(step_activation_distribution(3, 0.424)[1], 3 * 0.424 * 0.576 * 0.576, 1e-12);
  EXPECT_NEAR(step_activation_distribution(3, 0.424)[1], 0.4220, 5e-5);
  EXPECT_THROW(step_activation_distribution(3, 1.0), ParameterError);
  EXPECT_THROW(step_activation_distribution(3, -0.1), ParameterError);
}

TEST(StepDistribution, SumsToOneAndMatchesOracle) {
  for (int n : {1, 2, 5, 40, 1000}) {
    for (double g : {0.0, 1e-6, 0.01, 0.3, 0.5, 0.999}) {
      const auto d = step_activation_distribution(n, g);
      double s = 0.0;
      for (double v : d) s += v;
      EXPECT_NEAR(s, 1.0, 1e-12) << n << " " << g;
      if (n <= 40) {
        for (int k = 0; k <= n; ++k) {
          EXPECT_NEAR(d[static_cast<std::size_t>(k)], oracle::binomial_pmf(n, g, k), 1e-12);
        }
      }
    }
  }
}

TEST(SimulateCascade, ZeroProbabilityNetworkKeepsSeeds) {
  const Network net({3, 3, 3}, {{0, 1, 0.0}, {1, 2, 0.0}, {0, 2, 0.0}});
  const std::vector<Seed> seeds{{0, 2}};
  const Cascade c = simulate_cascade(net, seeds, 5);
  ASSERT_EQ(c.events.size(), 1u);
  EXPECT_EQ(c.events[0], (Event{0, 0, 2}));
}

TEST(SimulateCascade, RejectsInvalidSeeds) {
  const Network net({3, 3}, {{0, 1, 0.1}});
  EXPECT_THROW(simulate_cascade(net, std::vector<Seed>{{5, 1}}, 1), ParameterError);
  EXPECT_THROW(simulate_cascade(net, std::vector<Seed>{{0, 4}}, 1), ParameterError);
  EXPECT_THROW(simulate_cascade(net, std::vector<Seed>{{0, 0}}, 1), ParameterError);
  EXPECT_THROW(simulate_cascade(net, std::vector<Seed>{{0, 1}, {0, 2}}, 1), ParameterError);
}

TEST(SimulateCascade, IndependentCascadeSpecialCase) {
  // Capacities 1: the child activates at tau = 1 with probability exactly p.
  const Network net({1, 1}, {{0, 1, 0.3}});
  Rng rng(11);
  constexpr int kRuns = 100000;
  int hits = 0;
  for (int r = 0; r < kRuns; ++r) {
    const Cascade c = simulate_cascade(net, std::vector<Seed>{{0, 1}}, rng);
    if (c.events.size() == 2) {
      EXPECT_EQ(c.events[1], (Event{1, 1, 1}));
      ++hits;
    }
  }
  // 5 standard deviations.
  EXPECT_NEAR(hits / double(kRuns), 0.3, 5 * std::sqrt(0.3 * 0.7 / kRuns));
}

TEST(SimulateCascade, TwoNodeLevelDistribution) {
  const Network net({1, 2}, {{0, 1, 0.5}});
  Rng rng(12);
  constexpr int kRuns = 100000;
  std::array<double, 3> counts{};
  for (int r = 0; r < kRuns; ++r) {
    const Cascade c = simulate_cascade(net, std::vector<Seed>{{0, 1}}, rng);
    counts[c.events.size() == 2 ? static_cast<std::size_t>(c.events[1].level) : 0] += 1;
  }
  const std::array<double, 3> want{0.25, 0.5, 0.25};
  double tv = 0.0;
  for (std::size_t k = 0; k < 3; ++k) tv += 0.5 * std::abs(counts[k] / kRuns - want[k]);
  EXPECT_LT(tv, 0.01);
}

TEST(SimulateCascade, DeterministicAndWellFormed) {
  std::mt19937_64 rng(4);
  const Network net = oracle::random_network(rng, 30, 0.15, 20, 0.01, 0.2);
  SeedSampling sampling{0.1, 1, 5};
  const Cascade a = simulate_cascade(net, sampling, 77);
  const Cascade b = simulate_cascade(net, sampling, 77);
  EXPECT_EQ(a, b);
  for (std::uint64_t s = 0; s < 50; ++s) {
    const Cascade c = simulate_cascade(net, sampling, s);
    EXPECT_NO_THROW(validate_cascade(c, net));
    std::map<NodeId, Event> by_node;
    for (const Event& e : c.events) by_node[e.node] = e;
    for (const Event& e : c.events) {
      if (e.tau == 0) continue;
      bool parent_one_step_earlier = false;
      for (const Arc& a : net.parents(e.node)) {
        auto it = by_node.find(a.node);
        if (it != by_node.end() && it->second.tau == e.tau - 1) parent_one_step_earlier = true;
      }
      EXPECT_TRUE(parent_one_step_earlier);
    }
  }
}

TEST(SimulateCascade, SeedSamplingCounts) {
  const Network net(std::vector<int>(100, 1000), {});
  const Cascade c = simulate_cascade(net, SeedSampling{}, 3);
  ASSERT_EQ(c.events.size(), 5u);
  for (const Event& e : c.events) {
    EXPECT_EQ(e.tau, 0);
    EXPECT_GE(e.level, 5);
    EXPECT_LE(e.level, 25);
  }
}

TEST(SimulateBatch, IndependentOfThreadCount) {
  std::mt19937_64 rng(6);
  const Network net = oracle::random_network(rng, 25, 0.2, 10, 0.01, 0.1);
  const auto one = simulate_batch(net, SeedSampling{0.1, 1, 3}, 40, 99, 1);
  const auto four = simulate_batch(net, SeedSampling{0.1, 1, 3}, 40, 99, 4);
  EXPECT_EQ(one, four);
  EXPECT_EQ(one[7], simulate_cascade(net, SeedSampling{0.1, 1, 3}, Rng(99).substream(7).seed()));
}

TEST(SimulateLayered, ZeroProbabilitiesDieOut) {
  const Network base = fully_connected_with_self_loops({5, 5, 5}, 0.0);
  const auto levels = simulate_layered(build_layered(base, 4), std::vector<int>{3, 1, 0}, 1);
  ASSERT_EQ(levels.size(), 5u);
  for (std::size_t t = 1; t < levels.size(); ++t) {
    for (int v : levels[t]) EXPECT_EQ(v, 0);
  }
}

TEST(SimulateLayered, SelfLoopSurvival) {
  const Network base({1}, {{0, 0, 0.35}}, true);
  const LayeredNetwork layered = build_layered(base, 1);
  Rng rng(8);
  constexpr int kRuns = 100000;
  int alive = 0;
  for (int r = 0; r < kRuns; ++r) alive += simulate_layered(layered, std::vector<int>{1}, rng)[1][0];
  EXPECT_NEAR(alive / double(kRuns), 0.35, 5 * std::sqrt(0.35 * 0.65 / kRuns));
}

TEST(SimulateLayered, TwoRegionJointMatchesProductOfBinomials) {
  const Network base({2, 3}, {{0, 0, 0.3}, {0, 1, 0.2}, {1, 0, 0.1}, {1, 1, 0.4}}, true);
  const LayeredNetwork layered = build_layered(base, 1);
  const std::vector<int> start{2, 1};
  const double g0 = oracle::gamma_of({{2, 0.3}, {1, 0.1}});
  const double g1 = oracle::gamma_of({{2, 0.2}, {1, 0.4}});
  Rng rng(21);
  constexpr int kRuns = 100000;
  std::map<std::pair<int, int>, double> counts;
  for (int r = 0; r < kRuns; ++r) {
    const auto lv = simulate_layered(layered, start, rng);
    counts[{lv[1][0], lv[1][1]}] += 1.0 / kRuns;
  }
  double tv = 0.0;
  for (int a = 0; a <= 2; ++a) {
    for (int b = 0; b <= 3; ++b) {
      const double want = oracle::binomial_pmf(2, g0, a) * oracle::binomial_pmf(3, g1, b);
      tv += 0.5 * std::abs(counts[{a, b}] - want);
    }
  }
  EXPECT_LT(tv, 0.02);
}

TEST(SimulateLayered, RejectsLevelsAboveCapacity) {
  const Network base = fully_connected_with_self_loops({2, 2}, 0.1);
  EXPECT_THROW(simulate_layered(build_layered(base, 2), std::vector<int>{3, 0}, 1), ParameterError);
  EXPECT_THROW(simulate_layered(build_layered(base, 2), std::vector<int>{1}, 1), ParameterError);
}

TEST(CascadeLikelihood, Examples) {
  const Network zero({2, 2}, {{0, 1, 0.0}});
  EXPECT_EQ(cascade_log_likelihood(zero, Cascade{{{0, 0, 1}}}), 0.0);
  const Network si({1, 1}, {{0, 1, 0.3}});
  EXPECT_NEAR(cascade_log_likelihood(si, Cascade{{{0, 0, 1}, {1, 1, 1}}}), std::log(0.3), 1e-14);
  EXPECT_NEAR(cascade_log_likelihood(si, Cascade{{{0, 0, 1}}}), std::log(0.7), 1e-14);
  // Activation across a zero-probability edge with no other parent.
  EXPECT_EQ(cascade_log_likelihood(zero, Cascade{{{0, 0, 1}, {1, 1, 1}}}), -INFINITY);
  EXPECT_THROW(cascade_log_likelihood(si, Cascade{{{0, 0, 2}}}), ParameterError);
  EXPECT_THROW(cascade_log_likelihood(si, Cascade{{{0, 0, 1}, {1, 2, 1}}}), ParameterError);
}

// Brute-force enumeration of every cascade outcome on tiny networks: the
// outcome probabilities sum to one and each agrees with the closed-form
// likelihood.
TEST(CascadeLikelihood, ExhaustiveEnumerationOracle) {
  std::mt19937_64 rng(31);
  int checked = 0;
  for (int rep = 0; rep < 60; ++rep) {
    const int n = 2 + rep % 2;
    const Network net = oracle::random_network(rng, n, 0.7, 3, 0.05, 0.6);
    std::uniform_int_distribution<int> pick(0, n - 1);
    const NodeId s = pick(rng);
    std::uniform_int_distribution<int> lvl(1, net.capacity(s));
    const std::vector<Seed> seeds{{s, lvl(rng)}};
    const auto outcomes = oracle::enumerate_cascades(net, seeds);
    double total = 0.0, total_closed = 0.0;
    for (const auto& w : outcomes) {
      total += w.probability;
      const double ll = cascade_log_likelihood(net, w.cascade);
      total_closed += std::exp(ll);
      EXPECT_NEAR(std::exp(ll), w.probability, 1e-10);
      ++checked;
    }
    EXPECT_NEAR(total, 1.0, 1e-10);
    EXPECT_NEAR(total_closed, 1.0, 1e-8);
  }
  EXPECT_GT(checked, 200);
}

TEST(CascadeLikelihood, RejectsMalformedCascades) {
  const Network net({2, 2, 2}, {{0, 1, 0.1}, {1, 2, 0.1}});
  EXPECT_THROW(validate_cascade(Cascade{{{0, 0, 1}, {0, 1, 1}}}, net), ParameterError);
  EXPECT_THROW(validate_cascade(Cascade{{{0, 0, 1}, {2, 2, 1}}}, net), ParameterError);
  EXPECT_THROW(validate_cascade(Cascade{{{0, 0, 3}}}, net), ParameterError);
  EXPECT_THROW(validate_cascade(Cascade{{{4, 0, 1}}}, net), ParameterError);
}

TEST(SimulateIo, CascadeRoundTrip) {
  TempDir dir;
  std::mt19937_64 rng(5);
  const Network net = oracle::random_network(rng, 20, 0.2, 9, 0.05, 0.3);
  const auto batch = simulate_batch(net, SeedSampling{0.1, 1, 4}, 15, 3);
  save_cascades(batch, dir / "c.csv", "net.json");
  EXPECT_EQ(load_cascades(dir / "c.csv"), batch);
  EXPECT_EQ(testing::slurp(dir / "c.csv").rfind("# network: net.json\n", 0), 0u);
}

TEST(SimulateIo, LayerAndCapacityRoundTrip) {
  TempDir dir;
  const LayerLevels lv{{1, 0, 3}, {2, 2, 0}};
  save_layer_levels(lv, dir / "l.csv");
  EXPECT_EQ(load_layer_levels(dir / "l.csv"), lv);
  const std::vector<int> caps{4, 5, 6};
  save_capacities(caps, dir / "caps.csv");
  EXPECT_EQ(load_capacities(dir / "caps.csv"), caps);
}

TEST(SimulateIo, MalformedFilesNameTheLine) {
  TempDir dir;
  testing::spit(dir / "c.csv", "cascade_id,node_id,tau,level\n0,1,0,1\n0,2,x,1\n");
  try {
    load_cascades(dir / "c.csv");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("3"), std::string::npos) << e.what();
  }
  testing::spit(dir / "bad.csv", "wrong,header\n");
  EXPECT_THROW(load_cascades(dir / "bad.csv"), ParseError);
  EXPECT_THROW(load_cascades(dir / "missing.csv"), Error);
}

}  // namespace
}  // namespace colldiff
