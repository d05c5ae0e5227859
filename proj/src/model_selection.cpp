#include "popnet/model_selection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "popnet/parallel.hpp"
#include "popnet/random.hpp"

namespace popnet {

LambdaPath lambda_path(double lambda_max, int n_points, double ratio) {
  if (n_points < 2) throw ValidationError("lambda_path: need at least 2 points");
  if (!(ratio > 0 && ratio < 1)) throw ValidationError("lambda_path: ratio must lie in (0,1)");
  if (!(lambda_max > 0)) throw ValidationError("lambda_path: lambda_max is zero");
  LambdaPath path;
  path.values.resize(static_cast<std::size_t>(n_points));
  const double step = std::log(ratio) / (n_points - 1);
  for (int i = 0; i < n_points; ++i)
    path.values[static_cast<std::size_t>(i)] = lambda_max * std::exp(step * i);
  path.values.back() = lambda_max * ratio;
  return path;
}

LambdaPath lambda_path(const MatrixXd& sigma, int n_points, double ratio) {
  return lambda_path(popnet::lambda_max(sigma), n_points, ratio);
}

EdgeInstability edge_instability(const std::vector<EdgeSupport>& supports) {
  if (supports.size() < 2) throw ValidationError("edge_instability: need at least 2 supports");
  const int p = supports.front().p();
  for (const auto& s : supports)
    if (s.p() != p) throw ValidationError("edge_instability: dimension mismatch");

  EdgeInstability out;
  out.frequency = VectorXd::Zero(static_cast<Eigen::Index>(pair_count(p)));
  for (const auto& s : supports) out.frequency += s.indicators();
  out.frequency /= static_cast<double>(supports.size());
  out.per_edge = 2.0 * out.frequency.array() * (1.0 - out.frequency.array());
  out.mean = out.per_edge.size() > 0 ? out.per_edge.mean() : 0.0;
  return out;
}

int default_subsample_size(int t) {
  const int b = static_cast<int>(std::floor(10.0 * std::sqrt(static_cast<double>(t))));
  return b < t ? b : static_cast<int>(std::floor(0.8 * t));
}

StarsResult stars_select(const MatrixXd& x, const LambdaPath& path, const StarsOptions& options,
                         std::uint64_t seed) {
  const auto t = static_cast<int>(x.rows());
  const auto p = static_cast<int>(x.cols());
  const int n_sub = options.subsamples;
  const int b = options.subsample_size > 0 ? options.subsample_size : default_subsample_size(t);
  if (n_sub < 2) throw ValidationError("stars_select: need at least 2 subsamples");
  if (b < 2 || b >= t) throw ValidationError("stars_select: subsample size must lie in [2, T)");
  if (path.values.empty()) throw ValidationError("stars_select: empty lambda path");

  // Subsample covariances; each subsample has its own derived stream.
  std::vector<MatrixXd> covs(static_cast<std::size_t>(n_sub));
  parallel_for(static_cast<std::size_t>(n_sub), options.workers, [&](std::size_t s) {
    Rng rng = make_rng(seed, {stream::kStars, s});
    std::vector<int> idx(static_cast<std::size_t>(t));
    std::iota(idx.begin(), idx.end(), 0);
    for (int i = 0; i < b; ++i) {
      const int j = uniform_int(rng, i, t - 1);
      std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
    }
    MatrixXd rows(b, p);
    for (int i = 0; i < b; ++i) rows.row(i) = x.row(idx[static_cast<std::size_t>(i)]);
    covs[s] = empirical_covariance(rows);
  });

  const std::size_t n_path = path.values.size();
  StarsResult result;
  result.subsample_count = n_sub;
  result.subsample_size = b;
  result.instability_curve.assign(n_path, std::numeric_limits<double>::quiet_NaN());
  result.monotone_curve.assign(n_path, std::numeric_limits<double>::quiet_NaN());

  std::vector<MatrixXd> warm(static_cast<std::size_t>(n_sub));
  std::vector<EdgeSupport> supports(static_cast<std::size_t>(n_sub));
  double running = 0;
  bool any_ok = false;
  std::size_t selected = 0;
  for (std::size_t i = 0; i < n_path; ++i) {
    const MatrixXd pen = uniform_penalty(p, path.values[i]);
    parallel_for(static_cast<std::size_t>(n_sub), options.workers, [&](std::size_t s) {
      auto est = weighted_glasso(covs[s], pen, options.glasso, warm[s]);
      supports[s] = edge_support(est);
      warm[s] = std::move(est.theta);
    });
    const double xi = edge_instability(supports).mean;
    running = std::max(running, xi);
    result.instability_curve[i] = xi;
    result.monotone_curve[i] = running;
    if (running <= options.beta) {
      selected = i;
      any_ok = true;
    } else if (options.early_stop) {
      break;
    }
  }

  if (!any_ok) {
    result.fallback = true;
    result.warnings.push_back("stars_select: no lambda on the path meets the instability bound; "
                              "using the largest lambda");
    selected = 0;
  }
  result.selected_index = selected;
  result.selected_lambda = path.values[selected];
  return result;
}

}  // namespace popnet
