#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "popnet/core.hpp"
#include "popnet/inference.hpp"
#include "popnet/model_selection.hpp"
#include "popnet/resampling.hpp"
#include "popnet/simulation.hpp"

namespace popnet {

enum class Method { R3, Standard, RsRe, RsRp };
enum class FdrMethod { BY, Storey };

struct MethodFlags {
  bool resampling = false;
  bool random_penalty = false;
  bool random_effects = false;
};

MethodFlags method_flags(Method m);
std::string to_string(Method m);
std::string to_string(FdrMethod m);
Method parse_method(const std::string& s);
FdrMethod parse_fdr_method(const std::string& s);

/// Resolved run configuration. Every field has a default.
struct RunConfig {
  Method method = Method::R3;
  int B = 100;
  double c = 0.25;
  double tau = 0.3;
  double stars_beta = 0.1;
  int n_perm = 1000;
  double fdr_level = 0.10;
  FdrMethod fdr = FdrMethod::BY;
  bool whiten = true;
  bool standardize = true;  // unit-variance regions before estimation
  std::uint64_t seed = 1;
  int workers = 0;  // 0: hardware concurrency

  int stars_subsamples = 20;
  int stars_path_points = 30;
  double stars_ratio = 0.01;
  int ar_max_order = 5;
  int ljung_box_lags = 10;
  double storey_lambda = 0.5;
  double glasso_tol = 1e-6;
  int glasso_max_iter = 200;
  bool identity_bootstrap = false;  // test hook
  bool normal_null = false;         // standard only: asymptotic N(0,1) p-values

  void validate() const;
  GlassoOptions<double> glasso() const { return {glasso_tol, glasso_max_iter, false}; }
};

/// Stages 0-1 for one subject: the (optionally whitened) data, its full-data
/// lambda_max, and the StARS pilot penalty with its fit.
struct SubjectPrep {
  std::string id;
  Group group = Group::A;
  MatrixXd x;
  double lambda_max = 0;
  double pilot_lambda = 0;
  MatrixXd pilot_theta;
  EdgeSupport pilot_support;
  StarsResult stars;
  std::vector<double> ljung_box_pvalues;
};

struct PreparedData {
  int p = 0;
  std::vector<SubjectPrep> subjects;
  std::vector<std::string> warnings;

  std::vector<Group> groups() const;
  std::vector<std::string> ids() const;
};

struct EdgeResult {
  Edge edge;
  double stat = 0;
  double pvalue = 1;
  double q_by = 1;
  double q_storey = 1;
  double pi_a = 0;
  double pi_b = 0;
  double rho_a = 0;
  double rho_b = 0;
  bool reject = false;
};

struct PipelineResult {
  RunConfig config;
  int p = 0;
  std::vector<std::string> subject_ids;
  std::vector<Group> groups;
  std::vector<double> pilot_lambdas;
  std::vector<double> lambda_maxes;
  EdgeStatTable table;
  FilteredEdgeSet filtered;
  std::vector<EdgeResult> edges;  // one per filtered edge
  double storey_pi0 = 1;
  std::vector<std::string> warnings;

  std::vector<Edge> rejected() const;
  std::vector<double> statistics() const;
};

PreparedData prepare_subjects(const Dataset& data, const RunConfig& config);

/// Stage 2: subject-by-edge table for the method's resampling flags. Methods
/// with the same flags, seed, B and c produce identical tables.
EdgeStatTable edge_stat_table(const PreparedData& prep, const RunConfig& config,
                              std::vector<std::string>& warnings);

/// Stages 3-4: filtering, per-edge statistics, permutation p-values, FDR.
PipelineResult test_edges(const PreparedData& prep, EdgeStatTable table, const RunConfig& config,
                          std::vector<std::string> warnings = {});

/// Full procedure for config.method.
PipelineResult run_pipeline(const Dataset& data, const RunConfig& config);

// ---------------------------------------------------------------------------
// Replicated simulation benchmark.

struct ReplicateScore {
  int replicate = 0;
  Method method = Method::R3;
  double tpr = 0;
  double fdp = 0;
  int n_tested = 0;
  int n_rejected = 0;
  RocCurve roc;
};

struct BenchResult {
  std::vector<ReplicateScore> scores;

  std::vector<ReplicateScore> for_method(Method m) const;
  double mean_tpr(Method m) const;
  double mean_fdp(Method m) const;
};

/// Runs every requested method on `replicates` independently drawn
/// populations. Replicate r draws its scenario and pipeline seeds from
/// (scenario.seed, r) and (config.seed, r). Pilots and tables are shared
/// between methods whose stages coincide.
BenchResult run_benchmark(const ScenarioSpec& scenario, const RunConfig& config,
                          const std::vector<Method>& methods, int replicates);

}  // namespace popnet
