#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "popnet/core.hpp"
#include "popnet/ggm.hpp"
#include "popnet/random.hpp"
#include "popnet/resampling.hpp"

namespace popnet {

enum class Structure { Banded, SmallWorld, Hub };
enum class DiffCase { Clustered, Random };

std::string to_string(Structure s);
std::string to_string(DiffCase c);
Structure parse_structure(const std::string& s);
DiffCase parse_diff_case(const std::string& s);

/// Recipe for a simulated two-group population.
struct ScenarioSpec {
  int p = 50;
  int T = 400;
  int n_a = 20;
  int n_b = 20;
  Structure structure = Structure::Hub;
  int bandwidth = 1;           // banded
  int sw_neighbors = 2;        // small world: neighbours per side
  double sw_rewire = 0.1;      // small world: rewiring probability
  int hub_clusters = 0;        // hub: 0 means p / 10
  double common_degree = 0;    // > 0 overrides the structure's own density
  int n_diff = 150;
  DiffCase diff_case = DiffCase::Random;
  double pi_diff = 1.0;
  bool correlation_mode = false;
  std::uint64_t seed = 1;

  void validate() const;

  /// Desk-scale default: p = 50, T = 400, 20 + 20 subjects, hub, 150 random
  /// differential edges.
  static ScenarioSpec desk_hub_random();
  /// p = 100 > T = 80, otherwise as desk_hub_random.
  static ScenarioSpec high_dimensional();
};

struct GroundTruth {
  EdgeSupport common;
  std::vector<Edge> diff_a;  // present (with prob pi_diff) only in group A
  std::vector<Edge> diff_b;
  std::vector<EdgeSupport> subject_supports;
  std::vector<MatrixXd> subject_precisions;
  std::vector<Group> groups;

  int p() const { return common.p(); }
  /// diff_a and diff_b, ascending.
  std::vector<Edge> differential() const;
  bool is_differential(const Edge& e) const;
};

EdgeSupport generate_structure(const ScenarioSpec& spec, Rng& rng);

std::pair<std::vector<Edge>, std::vector<Edge>> place_differential_edges(const EdgeSupport& common,
                                                                         const ScenarioSpec& spec,
                                                                         Rng& rng);

/// Precision matrix on `support`: off-diagonal weights uniform on
/// [-1.25,-1] U [1,1.25], unit diagonal raised so the smallest eigenvalue is
/// at least 0.1; optionally rescaled to a unit-diagonal covariance.
MatrixXd build_precision(const EdgeSupport& support, const ScenarioSpec& spec, Rng& rng);

struct Population {
  Dataset data;
  GroundTruth truth;
};

/// Draws the whole population from spec.seed. Subject i uses its own
/// derived stream, so the output is reproducible bit for bit.
Population sample_population(const ScenarioSpec& spec);

/// (false positive, true positive) counts after each sequential rejection.
struct RocCurve {
  std::vector<std::pair<int, int>> points;

  /// True positives at the last point whose FP count is <= fp.
  int tp_at_fp(int fp) const;
};

/// Rejects tested edges in decreasing |statistic| (infinities first, ties by
/// ascending edge index) and scores them against the differential truth.
RocCurve roc_points(std::span<const double> statistics, const GroundTruth& truth,
                    const FilteredEdgeSet& tested);

struct ConfusionSummary {
  double tpr = 0;
  double fdp = 0;
  // Lower triangle: truth (0 none, 1 common, 2 differential). Upper
  // triangle: detections (3 true positive, 4 false positive).
  Eigen::MatrixXi matrix;
};

enum ConfusionCode : int { kNone = 0, kCommon = 1, kDifferential = 2, kDetectedTP = 3, kDetectedFP = 4 };

ConfusionSummary confusion_summary(const std::vector<Edge>& rejected, const GroundTruth& truth,
                                   const FilteredEdgeSet& tested);

}  // namespace popnet
