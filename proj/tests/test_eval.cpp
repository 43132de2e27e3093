#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "colldiff/errors.hpp"
#include "colldiff/eval.hpp"
#include "oracles.hpp"

namespace colldiff {
namespace {

const Network kTruth({1, 1, 1, 1}, {{0, 1, 0.1}, {1, 2, 0.2}, {2, 3, 0.3}, {3, 0, 0.4}});

TEST(StructureMetrics, ExactSupport) {
  const Metrics m = structure_metrics(kTruth, kTruth, 1e-4);
  EXPECT_EQ(m.precision, 1.0);
  EXPECT_EQ(m.recall, 1.0);
  EXPECT_EQ(m.f1, 1.0);
  EXPECT_EQ(m.true_positives, 4u);
}

TEST(StructureMetrics, OneSpuriousEdge) {
  const Network inferred({1, 1, 1, 1},
                         {{0, 1, 0.1}, {1, 2, 0.2}, {2, 3, 0.3}, {3, 0, 0.4}, {0, 2, 0.05}});
  const Metrics m = structure_metrics(kTruth, inferred, 1e-4);
  EXPECT_DOUBLE_EQ(m.precision, 0.8);
  EXPECT_DOUBLE_EQ(m.recall, 1.0);
  EXPECT_NEAR(m.f1, 0.888888888888889, 1e-12);
  EXPECT_EQ(m.false_positives, 1u);
}

TEST(StructureMetrics, ThresholdAndEmptyConventions) {
  const Network weak({1, 1, 1, 1}, {{0, 1, 5e-5}});
  const Metrics none = structure_metrics(kTruth, weak, 1e-4);
  EXPECT_EQ(none.recall, 0.0);
  EXPECT_EQ(none.precision, 0.0);
  EXPECT_EQ(none.f1, 0.0);
  const Network empty({1, 1, 1, 1}, {});
  const Metrics both_empty = structure_metrics(empty, empty, 1e-4);
  EXPECT_EQ(both_empty.precision, 1.0);
  EXPECT_EQ(both_empty.recall, 1.0);
  EXPECT_THROW(structure_metrics(kTruth, Network({1}, {}), 1e-4), ParameterError);
}

TEST(StructureMetrics, InvariantUnderRelabeling) {
  std::mt19937_64 rng(3);
  for (int rep = 0; rep < 20; ++rep) {
    const Network t = oracle::random_network(rng, 8, 0.3, 1, 0.01, 0.2);
    const Network g = oracle::random_network(rng, 8, 0.3, 1, 0.01, 0.2);
    std::vector<NodeId> perm(8);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    auto relabel = [&](const Network& n) {
      std::vector<Edge> e;
      for (const Edge& x : n.edges()) e.push_back({perm[x.src], perm[x.dst], x.p});
      return Network(std::vector<int>(8, 1), e);
    };
    const Metrics a = structure_metrics(t, g, 0.05);
    const Metrics b = structure_metrics(relabel(t), relabel(g), 0.05);
    EXPECT_EQ(a.true_positives, b.true_positives);
    EXPECT_EQ(a.false_positives, b.false_positives);
    EXPECT_EQ(a.false_negatives, b.false_negatives);
  }
}

TEST(ParameterError, Examples) {
  const Network t({1, 1}, {{0, 1, 0.01}});
  const Network same = t;
  EXPECT_EQ(parameter_error(t, same, {{0, 1}}), 0.0);
  const Network off({1, 1}, {{0, 1, 0.0102}});
  EXPECT_NEAR(parameter_error(t, off, {{0, 1}}), 2.0, 1e-9);
  EXPECT_THROW(parameter_error(t, off, {}), MetricError);
}

TEST(ParameterError, ScaleConsistent) {
  const Network t({1, 1, 1}, {{0, 1, 0.01}, {1, 2, 0.03}});
  const Network g({1, 1, 1}, {{0, 1, 0.012}, {1, 2, 0.027}});
  const Network t2({1, 1, 1}, {{0, 1, 0.05}, {1, 2, 0.15}});
  const Network g2({1, 1, 1}, {{0, 1, 0.06}, {1, 2, 0.135}});
  const std::vector<EdgeKey> s{{0, 1}, {1, 2}};
  EXPECT_NEAR(parameter_error(t, g, s), parameter_error(t2, g2, s), 1e-9);
  EXPECT_NEAR(parameter_error(t, g, s), 100.0 * (0.002 + 0.003) / 0.04, 1e-9);
}

TEST(ParameterError, TruePositiveSetOnInferredNetwork) {
  InferredNetwork inf;
  inf.capacities = {1, 1, 1, 1};
  inf.estimates = {{0, 1, 0.11}, {1, 2, 5e-5}, {0, 2, 0.3}, {3, 0, 0.38}};
  const auto tp = true_positive_edges(kTruth, inf, 1e-4);
  EXPECT_EQ(tp, (std::vector<EdgeKey>{{0, 1}, {3, 0}}));
  EXPECT_NEAR(parameter_error(kTruth, inf, tp), 100.0 * (0.01 + 0.02) / 0.5, 1e-9);
}

TEST(MetricsRow, Format) {
  MetricsRow row{"r1", 50, structure_metrics(kTruth, kTruth, 1e-4), 2.5};
  EXPECT_EQ(metrics_header(), "run_id,cascades,precision,recall,f1,error_percent");
  EXPECT_EQ(format_metrics_row(row), "r1,50,1,1,1,2.5");
  row.error_percent = NAN;
  EXPECT_EQ(format_metrics_row(row), "r1,50,1,1,1,nan");
}

}  // namespace
}  // namespace colldiff
