#include "popnet/preprocessing.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/special_functions/gamma.hpp>
#include <Eigen/Eigenvalues>

namespace popnet {

double chi_square_upper_tail(double q, double dof) {
  if (!(dof > 0)) throw ValidationError("chi_square_upper_tail: dof must be positive");
  if (q <= 0) return 1.0;
  if (std::isinf(q)) return 0.0;
  return boost::math::gamma_q(dof / 2.0, q / 2.0);
}

double ar_spectral_radius(const std::vector<double>& coefficients) {
  const auto q = static_cast<Eigen::Index>(coefficients.size());
  if (q == 0) return 0.0;
  MatrixXd companion = MatrixXd::Zero(q, q);
  for (Eigen::Index i = 0; i < q; ++i) companion(0, i) = coefficients[static_cast<std::size_t>(i)];
  for (Eigen::Index i = 1; i < q; ++i) companion(i, i - 1) = 1.0;
  Eigen::EigenSolver<MatrixXd> eig(companion, false);
  return eig.eigenvalues().cwiseAbs().maxCoeff();
}

ARFit fit_ar(const VectorXd& x, int order, int first) {
  if (order < 0) throw ValidationError("fit_ar: negative order");
  if (first < 0) first = order;
  if (first < order) throw ValidationError("fit_ar: first sample precedes available lags");
  const Eigen::Index n = x.size() - first;
  if (n <= order + 1) throw ValidationError("fit_ar: series too short for order");

  MatrixXd design(n, order + 1);
  VectorXd target = x.segment(first, n);
  design.col(0).setOnes();
  for (int lag = 1; lag <= order; ++lag) design.col(lag) = x.segment(first - lag, n);
  const VectorXd beta = design.colPivHouseholderQr().solve(target);
  const VectorXd resid = target - design * beta;

  ARFit fit;
  fit.order = order;
  fit.intercept = beta(0);
  fit.coefficients.assign(beta.data() + 1, beta.data() + beta.size());
  fit.noise_variance = resid.squaredNorm() / static_cast<double>(n);
  fit.aic = static_cast<double>(n) * std::log(fit.noise_variance) + 2.0 * (order + 1);
  return fit;
}

namespace {

VectorXd ar_residuals(const VectorXd& x, const ARFit& fit) {
  const int q = fit.order;
  const Eigen::Index n = x.size() - q;
  VectorXd r = x.segment(q, n).array() - fit.intercept;
  for (int lag = 1; lag <= q; ++lag)
    r -= fit.coefficients[static_cast<std::size_t>(lag - 1)] * x.segment(q - lag, n);
  return r;
}

}  // namespace

WhitenedSeries whiten_ar(const MatrixXd& x, const WhitenOptions& options) {
  const int max_order = options.max_order;
  if (max_order < 0) throw ValidationError("whiten_ar: max_order must be non-negative");
  if (!x.allFinite()) throw ValidationError("whiten_ar: non-finite input");
  if (x.rows() <= 10 * std::max(1, max_order))
    throw ValidationError("whiten_ar: series too short, need T > 10 * max_order");

  const auto p = static_cast<int>(x.cols());
  WhitenedSeries out;
  out.fits.resize(static_cast<std::size_t>(p));
  std::vector<VectorXd> resid(static_cast<std::size_t>(p));

  for (int j = 0; j < p; ++j) {
    const VectorXd col = x.col(j);
    if ((col.array() == col(0)).all())
      throw ValidationError("whiten_ar: degenerate input, region " + std::to_string(j) +
                            " is constant");
    int best_order = 0;
    double best_aic = std::numeric_limits<double>::infinity();
    for (int q = 0; q <= max_order; ++q) {
      const ARFit trial = fit_ar(col, q, max_order);
      if (q > 0 && ar_spectral_radius(trial.coefficients) >= 1.0) continue;
      if (trial.aic < best_aic) {
        best_aic = trial.aic;
        best_order = q;
      }
    }
    ARFit fit = fit_ar(col, best_order);
    if (best_order > 0 && ar_spectral_radius(fit.coefficients) >= 1.0) fit = fit_ar(col, 0);
    fit.aic = best_aic;
    resid[static_cast<std::size_t>(j)] = ar_residuals(col, fit);
    out.fits[static_cast<std::size_t>(j)] = std::move(fit);
  }

  int q_max = 0;
  for (const auto& f : out.fits) q_max = std::max(q_max, f.order);
  const Eigen::Index rows = x.rows() - q_max;
  out.residuals.resize(rows, p);
  out.ljung_box_pvalues.resize(static_cast<std::size_t>(p));
  for (int j = 0; j < p; ++j) {
    const auto& r = resid[static_cast<std::size_t>(j)];
    out.residuals.col(j) = r.tail(rows);
    const int lags = std::min<int>(options.ljung_box_lags, static_cast<int>(rows) - 1);
    double pv = 1.0;
    if (lags >= 1) {
      const VectorXd series = out.residuals.col(j);
      if (!(series.array() == series(0)).all()) pv = ljung_box(series, lags).pvalue;
    }
    out.ljung_box_pvalues[static_cast<std::size_t>(j)] = pv;
    if (pv < options.alpha)
      out.warnings.push_back("Ljung-Box rejects independence for region " + std::to_string(j) +
                             " (p = " + std::to_string(pv) + ")");
  }
  return out;
}

LjungBoxResult ljung_box(const VectorXd& x, int lags) {
  const Eigen::Index n = x.size();
  if (lags < 1 || n <= lags) throw ValidationError("ljung_box: need n > h >= 1");
  const VectorXd c = x.array() - x.mean();
  const double denom = c.squaredNorm();
  if (!(denom > 0)) throw ValidationError("ljung_box: zero-variance series");
  double q = 0;
  for (int k = 1; k <= lags; ++k) {
    const double rho = c.tail(n - k).dot(c.head(n - k)) / denom;
    q += rho * rho / static_cast<double>(n - k);
  }
  q *= static_cast<double>(n) * static_cast<double>(n + 2);
  return {q, chi_square_upper_tail(q, lags)};
}

}  // namespace popnet
