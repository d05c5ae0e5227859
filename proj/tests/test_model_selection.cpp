#include <gtest/gtest.h>

#include <random>

#include "popnet/model_selection.hpp"
#include "popnet/simulation.hpp"

using namespace popnet;

TEST(LambdaPath, Endpoints) {
  const LambdaPath a = lambda_path(1.0, 2, 0.1);
  ASSERT_EQ(a.values.size(), 2u);
  EXPECT_DOUBLE_EQ(a.values[0], 1.0);
  EXPECT_DOUBLE_EQ(a.values[1], 0.1);
  const LambdaPath b = lambda_path(1.0, 3, 0.01);
  EXPECT_DOUBLE_EQ(b.values[0], 1.0);
  EXPECT_NEAR(b.values[1], 0.1, 1e-15);
  EXPECT_DOUBLE_EQ(b.values[2], 0.01);
}

TEST(LambdaPath, StrictlyDecreasingFromCovariance) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n;
  MatrixXd x(50, 6);
  for (int i = 0; i < 50; ++i)
    for (int j = 0; j < 6; ++j) x(i, j) = n(rng) + (j ? 0.5 * x(i, j - 1) : 0.0);
  const MatrixXd s = empirical_covariance(x);
  const LambdaPath path = lambda_path(s, 30, 0.01);
  EXPECT_DOUBLE_EQ(path.values.front(), lambda_max(s));
  for (std::size_t i = 1; i < path.values.size(); ++i) EXPECT_LT(path.values[i], path.values[i - 1]);
  EXPECT_THROW(lambda_path(MatrixXd::Identity(3, 3).eval(), 5, 0.1), ValidationError);
  EXPECT_THROW(lambda_path(1.0, 1, 0.1), ValidationError);
}

TEST(EdgeInstability, IdenticalSupportsAreStable) {
  const EdgeSupport s = EdgeSupport::from_edges(5, {{0, 1}, {2, 4}});
  EXPECT_EQ(edge_instability({s, s, s}).mean, 0.0);
}

TEST(EdgeInstability, HalfPresentEdge) {
  const int p = 6;
  const EdgeSupport with = EdgeSupport::from_edges(p, {{1, 3}});
  const EdgeSupport without = EdgeSupport::empty(p);
  const EdgeInstability r = edge_instability({with, without, with, without});
  EXPECT_DOUBLE_EQ(r.per_edge(static_cast<Eigen::Index>(edge_index(1, 3, p))), 0.5);
  EXPECT_DOUBLE_EQ(r.mean, 0.5 / static_cast<double>(pair_count(p)));
}

TEST(EdgeInstability, MatchesBruteForce) {
  const int p = 7, n = 9;
  std::mt19937_64 rng(17);
  std::bernoulli_distribution coin(0.3);
  std::vector<EdgeSupport> supports;
  for (int s = 0; s < n; ++s) {
    std::vector<Edge> edges;
    for (const auto& e : all_edges(p))
      if (coin(rng)) edges.push_back(e);
    supports.push_back(EdgeSupport::from_edges(p, edges));
  }
  const EdgeInstability r = edge_instability(supports);
  double total = 0;
  int pairs = 0;
  for (int k = 0; k < p; ++k)
    for (int l = k + 1; l < p; ++l) {
      int count = 0;
      for (const auto& s : supports) count += s.has(k, l);
      const double f = static_cast<double>(count) / n;
      EXPECT_DOUBLE_EQ(r.frequency(static_cast<Eigen::Index>(edge_index(k, l, p))), f);
      total += 2 * f * (1 - f);
      ++pairs;
    }
  EXPECT_NEAR(r.mean, total / pairs, 1e-15);
  for (Eigen::Index i = 0; i < r.per_edge.size(); ++i) {
    EXPECT_GE(r.per_edge(i), 0.0);
    EXPECT_LE(r.per_edge(i), 0.5);
  }
  EXPECT_THROW(edge_instability({supports[0]}), ValidationError);
  EXPECT_THROW(edge_instability({supports[0], EdgeSupport::empty(p + 1)}), ValidationError);
}

TEST(SubsampleSize, Rule) {
  EXPECT_EQ(default_subsample_size(400), 200);
  EXPECT_EQ(default_subsample_size(1000), 316);
  // 10 sqrt(80) = 89 >= 80, so fall back to 0.8 T.
  EXPECT_EQ(default_subsample_size(80), 64);
}

namespace {

struct BandedCase {
  MatrixXd x;
  EdgeSupport truth;
};

BandedCase banded_case(int p, int t, std::uint64_t seed) {
  ScenarioSpec spec;
  spec.p = p;
  spec.T = t;
  spec.n_a = 2;
  spec.n_b = 2;
  spec.structure = Structure::Banded;
  spec.bandwidth = 1;
  spec.n_diff = 0;
  spec.seed = seed;
  const Population pop = sample_population(spec);
  return {pop.data[0].x, pop.truth.subject_supports[0]};
}

}  // namespace

TEST(Stars, BetaOneSelectsSmallestLambda) {
  const BandedCase c = banded_case(8, 200, 4);
  const LambdaPath path = lambda_path(empirical_covariance(c.x), 10, 0.05);
  StarsOptions opt;
  opt.beta = 1.0;
  const StarsResult r = stars_select(c.x, path, opt, 9);
  EXPECT_EQ(r.selected_index, path.values.size() - 1);
  EXPECT_DOUBLE_EQ(r.selected_lambda, path.values.back());
}

TEST(Stars, Deterministic) {
  const BandedCase c = banded_case(10, 200, 5);
  const LambdaPath path = lambda_path(empirical_covariance(c.x), 12, 0.05);
  StarsOptions serial;
  StarsOptions parallel = serial;
  parallel.workers = 4;
  const StarsResult a = stars_select(c.x, path, serial, 77);
  const StarsResult b = stars_select(c.x, path, parallel, 77);
  EXPECT_EQ(a.selected_lambda, b.selected_lambda);
  ASSERT_EQ(a.instability_curve.size(), b.instability_curve.size());
  for (std::size_t i = 0; i < a.instability_curve.size(); ++i) {
    if (std::isnan(a.instability_curve[i]))
      EXPECT_TRUE(std::isnan(b.instability_curve[i]));
    else
      EXPECT_EQ(a.instability_curve[i], b.instability_curve[i]);
  }
}

TEST(Stars, MonotoneCurveAndBound) {
  const BandedCase c = banded_case(12, 300, 6);
  const LambdaPath path = lambda_path(empirical_covariance(c.x), 20, 0.01);
  StarsOptions opt;
  opt.early_stop = false;
  const StarsResult r = stars_select(c.x, path, opt, 3);
  for (std::size_t i = 1; i < r.monotone_curve.size(); ++i)
    EXPECT_GE(r.monotone_curve[i], r.monotone_curve[i - 1]);
  EXPECT_LE(r.monotone_curve[r.selected_index], opt.beta);
  EXPECT_EQ(r.subsample_size, default_subsample_size(300));
  EXPECT_EQ(r.subsample_count, 20);
  // Early stopping selects the same lambda.
  StarsOptions early = opt;
  early.early_stop = true;
  EXPECT_EQ(stars_select(c.x, path, early, 3).selected_lambda, r.selected_lambda);
}

TEST(Stars, SmallerBetaSelectsLargerLambda) {
  const BandedCase c = banded_case(12, 300, 8);
  const LambdaPath path = lambda_path(empirical_covariance(c.x), 20, 0.01);
  StarsOptions lo;
  lo.beta = 0.02;
  StarsOptions hi;
  hi.beta = 0.1;
  EXPECT_GE(stars_select(c.x, path, lo, 11).selected_lambda, stars_select(c.x, path, hi, 11).selected_lambda);
}

TEST(Stars, FallbackToLargestLambda) {
  const BandedCase c = banded_case(8, 200, 2);
  // A path that stays far below lambda_max is unstable everywhere.
  const double lmax = lambda_max(empirical_covariance(c.x));
  LambdaPath path{{0.002 * lmax, 0.001 * lmax}};
  StarsOptions opt;
  opt.beta = 1e-6;
  const StarsResult r = stars_select(c.x, path, opt, 1);
  EXPECT_TRUE(r.fallback);
  EXPECT_EQ(r.selected_lambda, path.values[0]);
  EXPECT_FALSE(r.warnings.empty());
}

TEST(Stars, RecoversBandedGraph) {
  const int p = 20;
  const BandedCase c = banded_case(p, 400, 12);
  const LambdaPath path = lambda_path(empirical_covariance(c.x), 30, 0.01);
  const StarsResult r = stars_select(c.x, path, {}, 21);
  const auto est = weighted_glasso(empirical_covariance(c.x), uniform_penalty(p, r.selected_lambda));
  const EdgeSupport got = edge_support(est);
  int hamming = 0;
  for (const auto& e : all_edges(p)) hamming += got.has(e.k, e.l) != c.truth.has(e.k, e.l);
  EXPECT_LE(hamming, static_cast<int>(0.1 * pair_count(p)));
}

TEST(Stars, RejectsBadSubsampleSize) {
  const BandedCase c = banded_case(6, 50, 1);
  StarsOptions opt;
  opt.subsample_size = 50;
  EXPECT_THROW(stars_select(c.x, lambda_path(1.0, 3, 0.1), opt, 1), ValidationError);
}
