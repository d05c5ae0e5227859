#include "popnet/resampling.hpp"

#include <cmath>

namespace popnet {

PenaltyDraw random_penalty_matrix(const RandomPenaltySpec& spec, int p, Rng& rng) {
  if (!(spec.c >= 0 && spec.c < 0.5)) throw ValidationError("random penalty: c must lie in [0, 0.5)");
  if (!(spec.pilot_lambda >= 0) || !(spec.lambda_max >= 0))
    throw ValidationError("random penalty: lambdas must be non-negative");
  PenaltyDraw out;
  out.penalty = MatrixXd::Zero(p, p);
  const double shift = spec.c * spec.lambda_max;
  for (int k = 0; k < p; ++k) {
    for (int l = k + 1; l < p; ++l) {
      const bool up = uniform01(rng) < 0.5;
      double v = spec.pilot_lambda + (up ? shift : -shift);
      if (v < 0) {
        v = 0;
        out.clamped = true;
      }
      out.penalty(k, l) = v;
      out.penalty(l, k) = v;
    }
  }
  return out;
}

namespace {

bool has_constant_column(const MatrixXd& m) {
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    if ((m.col(j).array() == m(0, j)).all()) return true;
  return false;
}

}  // namespace

BootstrapRow bootstrap_edge_stats(const MatrixXd& x, const RandomPenaltySpec& spec,
                                  const BootstrapOptions& options, std::uint64_t seed,
                                  std::uint64_t subject, const MatrixXd& warm_start) {
  if (options.B < 1) throw ValidationError("bootstrap_edge_stats: B must be >= 1");
  const auto t = static_cast<int>(x.rows());
  const auto p = static_cast<int>(x.cols());

  BootstrapRow row;
  row.z = VectorXd::Zero(static_cast<Eigen::Index>(pair_count(p)));
  const MatrixXd uniform = uniform_penalty(p, spec.pilot_lambda);
  MatrixXd sample(t, p);

  for (int b = 0; b < options.B; ++b) {
    Rng rng = make_rng(seed, {stream::kBootstrap, subject, static_cast<std::uint64_t>(b)});
    bool drawn = false;
    for (int attempt = 0; attempt < options.max_redraws && !drawn; ++attempt) {
      if (options.identity_resample) {
        sample = x;
      } else {
        for (int i = 0; i < t; ++i) sample.row(i) = x.row(uniform_int(rng, 0, t - 1));
      }
      drawn = !has_constant_column(sample);
      if (options.identity_resample && !drawn) break;
    }
    if (!drawn)
      throw NumericalError("bootstrap_edge_stats: degenerate bootstrap covariance after " +
                           std::to_string(options.max_redraws) + " redraws");
    const MatrixXd sigma = empirical_covariance(sample);

    PrecisionEstimate<double> est;
    if (options.random_penalty) {
      PenaltyDraw draw = random_penalty_matrix(spec, p, rng);
      row.clamped_draws += draw.clamped ? 1 : 0;
      est = weighted_glasso(sigma, draw.penalty, options.glasso, warm_start);
    } else {
      est = weighted_glasso(sigma, uniform, options.glasso, warm_start);
    }
    row.nonconverged_fits += est.converged ? 0 : 1;
    row.z += edge_support(est).indicators();
  }
  row.z /= static_cast<double>(options.B);
  return row;
}

FilteredEdgeSet filter_edges(const EdgeStatTable& table, double tau) {
  if (!(tau > 0 && tau < 1)) throw ValidationError("filter_edges: tau must lie in (0,1)");
  FilteredEdgeSet out;
  out.tau = tau;
  const auto n_edges = static_cast<std::size_t>(table.z.cols());
  for (std::size_t e = 0; e < n_edges; ++e) {
    const auto col = static_cast<Eigen::Index>(e);
    if (table.z.rows() > 0 && table.z.col(col).maxCoeff() > tau) {
      out.edges.push_back(edge_at(e, table.p));
      out.columns.push_back(e);
    }
  }
  return out;
}

}  // namespace popnet
