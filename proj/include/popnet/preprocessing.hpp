#pragma once

#include <string>
#include <vector>

#include "popnet/core.hpp"

namespace popnet {

/// Conditional least-squares AR(q) fit of one series.
struct ARFit {
  int order = 0;
  double intercept = 0;
  std::vector<double> coefficients;  // phi_1 .. phi_q
  double noise_variance = 0;
  double aic = 0;
};

struct WhitenedSeries {
  MatrixXd residuals;                    // (T - q_max) x p, rows aligned in time
  std::vector<ARFit> fits;               // one per region
  std::vector<double> ljung_box_pvalues; // one per region
  std::vector<std::string> warnings;     // Ljung-Box rejections
};

struct LjungBoxResult {
  double statistic = 0;
  double pvalue = 1;
};

struct WhitenOptions {
  int max_order = 5;
  int ljung_box_lags = 10;
  double alpha = 0.05;
};

/// Upper tail P(X > q) of a chi-square variable with `dof` degrees of freedom.
double chi_square_upper_tail(double q, double dof);

/// Fits AR(order) with intercept to x[first..T-1] regressed on its lags.
/// `first` defaults to `order`; passing a larger value fits on a common
/// sample so that information criteria are comparable across orders.
ARFit fit_ar(const VectorXd& x, int order, int first = -1);

/// Largest modulus among the roots of the AR companion matrix.
double ar_spectral_radius(const std::vector<double>& coefficients);

/// Per-region AR whitening with AIC order selection (orders 0..max_order),
/// followed by a Ljung-Box check of each residual series.
WhitenedSeries whiten_ar(const MatrixXd& x, const WhitenOptions& options = {});

LjungBoxResult ljung_box(const VectorXd& x, int lags);

}  // namespace popnet
