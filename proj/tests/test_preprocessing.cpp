#include <gtest/gtest.h>

#include <random>

#include "popnet/preprocessing.hpp"

using namespace popnet;

namespace {

VectorXd ar1(int n, double phi, std::mt19937_64& rng) {
  std::normal_distribution<double> z;
  VectorXd x(n);
  double prev = 0;
  for (int burn = 0; burn < 200; ++burn) prev = phi * prev + z(rng);
  for (int i = 0; i < n; ++i) {
    prev = phi * prev + z(rng);
    x(i) = prev;
  }
  return x;
}

VectorXd white(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> z;
  VectorXd x(n);
  for (int i = 0; i < n; ++i) x(i) = z(rng);
  return x;
}

double lag1(const VectorXd& x) {
  const VectorXd c = x.array() - x.mean();
  double num = 0;
  for (Eigen::Index i = 1; i < c.size(); ++i) num += c(i) * c(i - 1);
  return num / c.squaredNorm();
}

}  // namespace

TEST(ChiSquare, KnownTails) {
  // dof 2 is exponential with mean 2: P(X > q) = exp(-q/2).
  for (double q : {0.5, 3.0, 10.0}) EXPECT_NEAR(chi_square_upper_tail(q, 2), std::exp(-q / 2), 1e-14);
  EXPECT_NEAR(chi_square_upper_tail(18.307038053275146, 10), 0.05, 1e-10);
  EXPECT_DOUBLE_EQ(chi_square_upper_tail(0, 10), 1.0);
}

TEST(LjungBox, ZeroAutocorrelationGivesUnitPvalue) {
  VectorXd y(4);
  y << 1, 0, -1, 0;  // lag-1 products cancel
  auto r = ljung_box(y, 1);
  EXPECT_NEAR(r.statistic, 0.0, 1e-15);
  EXPECT_NEAR(r.pvalue, 1.0, 1e-15);
  EXPECT_THROW(ljung_box(VectorXd::Ones(20), 3), ValidationError);
  EXPECT_THROW(ljung_box(VectorXd::LinSpaced(50, 0, 1), 50), ValidationError);
}

TEST(LjungBox, FormulaMatchesDirectSum) {
  std::mt19937_64 rng(8);
  const VectorXd x = white(60, rng);
  const int h = 5;
  const VectorXd c = x.array() - x.mean();
  const double n = 60;
  long double q = 0;
  for (int k = 1; k <= h; ++k) {
    long double num = 0;
    for (int i = k; i < 60; ++i) num += c(i) * c(i - k);
    const long double rho = num / c.squaredNorm();
    q += rho * rho / (n - k);
  }
  q *= n * (n + 2);
  EXPECT_NEAR(ljung_box(x, h).statistic, static_cast<double>(q), 1e-10);
}

TEST(LjungBox, SizeUnderIidNoise) {
  std::mt19937_64 rng(1234);
  int rejections = 0;
  const int reps = 1000;
  for (int r = 0; r < reps; ++r)
    if (ljung_box(white(1000, rng), 10).pvalue < 0.05) ++rejections;
  const double rate = static_cast<double>(rejections) / reps;
  EXPECT_GE(rate, 0.03);
  EXPECT_LE(rate, 0.07);
}

TEST(LjungBox, PowerAgainstAr1) {
  std::mt19937_64 rng(99);
  for (int r = 0; r < 20; ++r) EXPECT_LT(ljung_box(ar1(1000, 0.8, rng), 10).pvalue, 0.01);
}

TEST(FitAr, RecoversCoefficient) {
  std::mt19937_64 rng(5);
  const VectorXd x = ar1(5000, 0.5, rng);
  const ARFit fit = fit_ar(x, 1);
  ASSERT_EQ(fit.coefficients.size(), 1u);
  EXPECT_NEAR(fit.coefficients[0], 0.5, 0.05);
  EXPECT_NEAR(fit.noise_variance, 1.0, 0.1);
  EXPECT_LT(ar_spectral_radius(fit.coefficients), 1.0);
}

TEST(SpectralRadius, Companion) {
  EXPECT_NEAR(ar_spectral_radius({0.5}), 0.5, 1e-12);
  EXPECT_NEAR(ar_spectral_radius({0.0, 0.25}), 0.5, 1e-12);
  EXPECT_GT(ar_spectral_radius({1.2}), 1.0);
  EXPECT_EQ(ar_spectral_radius({}), 0.0);
}

TEST(WhitenAr, WhiteNoiseKeepsCenteredInput) {
  std::mt19937_64 rng(77);
  MatrixXd x(300, 3);
  for (int j = 0; j < 3; ++j) x.col(j) = white(300, rng).array() + 5.0;
  WhitenOptions opt;
  opt.max_order = 0;
  const WhitenedSeries w = whiten_ar(x, opt);
  ASSERT_EQ(w.residuals.rows(), 300);
  const MatrixXd centered = x.rowwise() - x.colwise().mean();
  EXPECT_LT((w.residuals - centered).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(WhitenAr, Ar1IsWhitened) {
  std::mt19937_64 rng(2024);
  MatrixXd x(2000, 2);
  x.col(0) = ar1(2000, 0.5, rng);
  x.col(1) = ar1(2000, 0.5, rng);
  const WhitenedSeries w = whiten_ar(x);
  for (const auto& fit : w.fits) {
    EXPECT_GE(fit.order, 1);
    EXPECT_LE(fit.order, 5);
  }
  for (int j = 0; j < 2; ++j) EXPECT_LT(std::abs(lag1(w.residuals.col(j))), 0.05);
  int qmax = 0;
  for (const auto& fit : w.fits) qmax = std::max(qmax, fit.order);
  EXPECT_EQ(w.residuals.rows(), 2000 - qmax);
  EXPECT_EQ(w.ljung_box_pvalues.size(), 2u);
}

TEST(WhitenAr, RewhiteningSelectsOrderZeroMostly) {
  std::mt19937_64 rng(31);
  int zero = 0, total = 0;
  for (int r = 0; r < 40; ++r) {
    MatrixXd x(500, 2);
    x.col(0) = ar1(500, 0.6, rng);
    x.col(1) = ar1(500, -0.3, rng);
    const WhitenedSeries once = whiten_ar(x);
    const WhitenedSeries twice = whiten_ar(once.residuals);
    for (const auto& fit : twice.fits) {
      zero += fit.order == 0;
      ++total;
    }
  }
  EXPECT_GE(static_cast<double>(zero) / total, 0.9);
}

TEST(WhitenAr, LjungBoxPvaluesRoughlyUniform) {
  std::mt19937_64 rng(4242);
  std::vector<double> p;
  for (int r = 0; r < 1000; ++r) {
    MatrixXd x(400, 1);
    x.col(0) = ar1(400, 0.4, rng);
    WhitenOptions opt;
    opt.max_order = 1;
    p.push_back(whiten_ar(x, opt).ljung_box_pvalues[0]);
  }
  std::sort(p.begin(), p.end());
  double ks = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double lo = static_cast<double>(i) / p.size(), hi = static_cast<double>(i + 1) / p.size();
    ks = std::max({ks, std::abs(p[i] - lo), std::abs(p[i] - hi)});
  }
  EXPECT_LT(ks, 0.1);
}

TEST(WhitenAr, Errors) {
  std::mt19937_64 rng(1);
  MatrixXd x(100, 2);
  x.col(0) = white(100, rng);
  x.col(1).setConstant(3.0);
  EXPECT_THROW(whiten_ar(x), ValidationError);
  MatrixXd shortx(40, 1);
  shortx.col(0) = white(40, rng);
  EXPECT_THROW(whiten_ar(shortx), ValidationError);
}
