#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "popnet/core.hpp"
#include "popnet/ggm.hpp"

namespace popnet {

/// Strictly decreasing, log-spaced penalty grid.
struct LambdaPath {
  std::vector<double> values;
};

LambdaPath lambda_path(double lambda_max, int n_points = 30, double ratio = 0.01);
LambdaPath lambda_path(const MatrixXd& sigma, int n_points = 30, double ratio = 0.01);

struct EdgeInstability {
  VectorXd frequency;  // selection frequency per node pair
  VectorXd per_edge;   // 2 f (1 - f)
  double mean = 0;
};

EdgeInstability edge_instability(const std::vector<EdgeSupport>& supports);

struct StarsOptions {
  int subsamples = 20;
  double beta = 0.1;
  int subsample_size = 0;  // 0: floor(10 sqrt(T)), or floor(0.8 T) when that is not < T
  bool early_stop = true;  // stop once the monotonized curve exceeds beta
  int workers = 1;
  GlassoOptions<double> glasso{};
};

struct StarsResult {
  double selected_lambda = 0;
  std::size_t selected_index = 0;
  // Mean instability per path point. With early stopping, points past the
  // first one whose monotonized value exceeds beta are left as NaN.
  std::vector<double> instability_curve;
  std::vector<double> monotone_curve;
  int subsample_count = 0;
  int subsample_size = 0;
  bool fallback = false;
  std::vector<std::string> warnings;
};

int default_subsample_size(int t);

/// Stability-based selection of a single penalty for x (T x p): N subsamples
/// of size b without replacement, one path of uniform-penalty fits each,
/// choosing the smallest lambda whose monotonized instability is <= beta.
/// Subsample s draws from the stream derived from (seed, s).
StarsResult stars_select(const MatrixXd& x, const LambdaPath& path, const StarsOptions& options,
                         std::uint64_t seed);

}  // namespace popnet
