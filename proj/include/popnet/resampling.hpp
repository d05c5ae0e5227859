#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "popnet/core.hpp"
#include "popnet/ggm.hpp"
#include "popnet/random.hpp"

namespace popnet {

/// Per-subject random penalty: each off-diagonal pair gets
/// pilot_lambda +/- c * lambda_max with equal probability.
struct RandomPenaltySpec {
  double pilot_lambda = 0;
  double lambda_max = 0;
  double c = 0.25;
};

struct PenaltyDraw {
  MatrixXd penalty;
  bool clamped = false;  // some entry fell below zero and was set to 0
};

PenaltyDraw random_penalty_matrix(const RandomPenaltySpec& spec, int p, Rng& rng);

/// Subject-by-edge bootstrap selection proportions. Columns follow
/// edge_index order over all p-choose-2 pairs.
struct EdgeStatTable {
  MatrixXd z;  // n_subjects x pair_count(p)
  int B = 1;
  int p = 0;
  std::vector<std::string> subject_ids;
  std::vector<Group> groups;

  std::size_t n_subjects() const { return static_cast<std::size_t>(z.rows()); }
};

struct FilteredEdgeSet {
  std::vector<Edge> edges;          // k < l, ascending edge index
  std::vector<std::size_t> columns; // matching EdgeStatTable columns
  double tau = 0;
};

struct BootstrapOptions {
  int B = 100;
  bool random_penalty = true;
  bool identity_resample = false;  // test hook: every replicate reuses the original rows
  int max_redraws = 10;
  GlassoOptions<double> glasso{};
};

struct BootstrapRow {
  VectorXd z;  // proportion of replicates selecting each pair
  int clamped_draws = 0;
  int nonconverged_fits = 0;
};

/// B bootstrap replicates of one subject: resample T of T rows with
/// replacement, draw a penalty (random or uniform pilot), fit, and average
/// the selected supports. Replicate b of subject `subject` uses the stream
/// derived from (seed, subject, b).
BootstrapRow bootstrap_edge_stats(const MatrixXd& x, const RandomPenaltySpec& spec,
                                  const BootstrapOptions& options, std::uint64_t seed,
                                  std::uint64_t subject, const MatrixXd& warm_start = {});

/// Keeps pairs whose proportion exceeds tau in at least one subject.
FilteredEdgeSet filter_edges(const EdgeStatTable& table, double tau);

}  // namespace popnet
