#include "popnet/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "popnet/parallel.hpp"
#include "popnet/preprocessing.hpp"
#include "popnet/random.hpp"

namespace popnet {

MethodFlags method_flags(Method m) {
  switch (m) {
    case Method::R3: return {true, true, true};
    case Method::Standard: return {false, false, false};
    case Method::RsRe: return {true, false, true};
    case Method::RsRp: return {true, true, false};
  }
  return {};
}

std::string to_string(Method m) {
  switch (m) {
    case Method::R3: return "r3";
    case Method::Standard: return "standard";
    case Method::RsRe: return "rs_re";
    case Method::RsRp: return "rs_rp";
  }
  return "?";
}

std::string to_string(FdrMethod m) { return m == FdrMethod::BY ? "by" : "storey"; }

Method parse_method(const std::string& s) {
  if (s == "r3") return Method::R3;
  if (s == "standard") return Method::Standard;
  if (s == "rs-re" || s == "rs_re") return Method::RsRe;
  if (s == "rs-rp" || s == "rs_rp") return Method::RsRp;
  throw ValidationError("unknown method '" + s + "'");
}

FdrMethod parse_fdr_method(const std::string& s) {
  if (s == "by") return FdrMethod::BY;
  if (s == "storey") return FdrMethod::Storey;
  throw ValidationError("unknown FDR method '" + s + "'");
}

void RunConfig::validate() const {
  if (B < 1) throw ValidationError("B must be >= 1");
  if (method_flags(method).random_effects && B < 2 && !identity_bootstrap)
    throw ValidationError("random-effects methods need B >= 2 (rho is unidentifiable at m = 1)");
  if (!(c >= 0 && c < 0.5)) throw ValidationError("c must lie in [0, 0.5)");
  if (!(tau > 0 && tau < 1)) throw ValidationError("tau must lie in (0,1)");
  if (!(stars_beta > 0 && stars_beta < 0.5)) throw ValidationError("stars_beta must lie in (0, 0.5)");
  if (n_perm < 1) throw ValidationError("n_perm must be >= 1");
  if (!(fdr_level > 0 && fdr_level < 1)) throw ValidationError("fdr_level must lie in (0,1)");
  if (workers < 0) throw ValidationError("workers must be >= 0");
  if (stars_subsamples < 2) throw ValidationError("stars_subsamples must be >= 2");
  if (stars_path_points < 2) throw ValidationError("stars_path_points must be >= 2");
  if (!(stars_ratio > 0 && stars_ratio < 1)) throw ValidationError("stars_ratio must lie in (0,1)");
  if (ar_max_order < 0) throw ValidationError("ar_max_order must be >= 0");
  if (ljung_box_lags < 1) throw ValidationError("ljung_box_lags must be >= 1");
  if (!(storey_lambda > 0 && storey_lambda < 1)) throw ValidationError("storey_lambda must lie in (0,1)");
  if (!(glasso_tol > 0)) throw ValidationError("glasso_tol must be > 0");
  if (glasso_max_iter < 1) throw ValidationError("glasso_max_iter must be >= 1");
  if (normal_null && method != Method::Standard)
    throw ValidationError("the asymptotic normal null is only available for method=standard");
}

std::vector<Group> PreparedData::groups() const {
  std::vector<Group> out;
  for (const auto& s : subjects) out.push_back(s.group);
  return out;
}

std::vector<std::string> PreparedData::ids() const {
  std::vector<std::string> out;
  for (const auto& s : subjects) out.push_back(s.id);
  return out;
}

std::vector<Edge> PipelineResult::rejected() const {
  std::vector<Edge> out;
  for (const auto& e : edges)
    if (e.reject) out.push_back(e.edge);
  return out;
}

std::vector<double> PipelineResult::statistics() const {
  std::vector<double> out;
  for (const auto& e : edges) out.push_back(e.stat);
  return out;
}

namespace {

void check_dataset(const Dataset& data) {
  if (data.empty()) throw ValidationError("dataset is empty");
  const auto p = data.front().x.cols();
  if (p < 2) throw ValidationError("need at least 2 regions");
  int n_a = 0, n_b = 0;
  for (const auto& s : data) {
    if (s.x.cols() != p)
      throw ValidationError("subject '" + s.id + "' has " + std::to_string(s.x.cols()) +
                            " columns, expected " + std::to_string(p));
    (s.group == Group::A ? n_a : n_b)++;
  }
  if (n_a < 2 || n_b < 2) throw ValidationError("each group needs at least 2 subjects");
}

void standardize_columns(MatrixXd& x, const std::string& id) {
  const double t = static_cast<double>(x.rows());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    auto col = x.col(j);
    col.array() -= col.mean();
    const double sd = std::sqrt(col.squaredNorm() / t);
    if (!(sd > 0) || !std::isfinite(sd))
      throw ValidationError("subject '" + id + "': region " + std::to_string(j) + " has zero variance");
    col /= sd;
  }
}

}  // namespace

PreparedData prepare_subjects(const Dataset& data, const RunConfig& config) {
  config.validate();
  check_dataset(data);
  const std::size_t n = data.size();
  PreparedData prep;
  prep.p = static_cast<int>(data.front().x.cols());
  prep.subjects.resize(n);

  StarsOptions stars;
  stars.subsamples = config.stars_subsamples;
  stars.beta = config.stars_beta;
  stars.workers = 1;
  stars.glasso = config.glasso();
  WhitenOptions whiten;
  whiten.max_order = config.ar_max_order;
  whiten.ljung_box_lags = config.ljung_box_lags;

  parallel_for(n, config.workers, [&](std::size_t i) {
    const SubjectData& in = data[i];
    SubjectPrep& out = prep.subjects[i];
    out.id = in.id;
    out.group = in.group;
    if (config.whiten) {
      WhitenedSeries w = whiten_ar(in.x, whiten);
      out.x = std::move(w.residuals);
      out.ljung_box_pvalues = std::move(w.ljung_box_pvalues);
      for (auto& msg : w.warnings) out.stars.warnings.push_back("subject " + in.id + ": " + msg);
    } else {
      out.x = in.x;
    }
    if (config.standardize) standardize_columns(out.x, in.id);
    const MatrixXd sigma = empirical_covariance(out.x);
    out.lambda_max = lambda_max(sigma);
    const LambdaPath path = lambda_path(out.lambda_max, config.stars_path_points, config.stars_ratio);
    std::vector<std::string> pre_warnings = std::move(out.stars.warnings);
    out.stars = stars_select(out.x, path, stars, derive_seed(config.seed, {stream::kStars, i}));
    for (auto& msg : out.stars.warnings) pre_warnings.push_back("subject " + in.id + ": " + msg);
    out.stars.warnings = std::move(pre_warnings);
    out.pilot_lambda = out.stars.selected_lambda;
    PrecisionEstimate<double> fit = weighted_glasso(sigma, uniform_penalty(prep.p, out.pilot_lambda),
                                                    config.glasso());
    out.pilot_support = edge_support(fit);
    out.pilot_theta = std::move(fit.theta);
  });

  for (const auto& s : prep.subjects)
    prep.warnings.insert(prep.warnings.end(), s.stars.warnings.begin(), s.stars.warnings.end());
  return prep;
}

EdgeStatTable edge_stat_table(const PreparedData& prep, const RunConfig& config,
                              std::vector<std::string>& warnings) {
  config.validate();
  const MethodFlags flags = method_flags(config.method);
  const std::size_t n = prep.subjects.size();
  EdgeStatTable table;
  table.p = prep.p;
  table.subject_ids = prep.ids();
  table.groups = prep.groups();
  table.z.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(pair_count(prep.p)));

  if (!flags.resampling) {
    table.B = 1;
    for (std::size_t i = 0; i < n; ++i)
      table.z.row(static_cast<Eigen::Index>(i)) = prep.subjects[i].pilot_support.indicators().transpose();
    return table;
  }

  table.B = config.B;
  BootstrapOptions opts;
  opts.B = config.B;
  opts.random_penalty = flags.random_penalty;
  opts.identity_resample = config.identity_bootstrap;
  opts.glasso = config.glasso();

  std::vector<BootstrapRow> rows(n);
  parallel_for(n, config.workers, [&](std::size_t i) {
    const SubjectPrep& s = prep.subjects[i];
    RandomPenaltySpec spec{s.pilot_lambda, s.lambda_max, config.c};
    rows[i] = bootstrap_edge_stats(s.x, spec, opts, config.seed, i, s.pilot_theta);
  });
  for (std::size_t i = 0; i < n; ++i) {
    table.z.row(static_cast<Eigen::Index>(i)) = rows[i].z.transpose();
    const std::string& id = prep.subjects[i].id;
    if (rows[i].clamped_draws > 0)
      warnings.push_back("subject " + id + ": " + std::to_string(rows[i].clamped_draws) +
                         " penalty draws clamped at zero");
    if (rows[i].nonconverged_fits > 0)
      warnings.push_back("subject " + id + ": " + std::to_string(rows[i].nonconverged_fits) +
                         " bootstrap fits did not converge");
  }
  return table;
}

PipelineResult test_edges(const PreparedData& prep, EdgeStatTable table, const RunConfig& config,
                          std::vector<std::string> warnings) {
  config.validate();
  const MethodFlags flags = method_flags(config.method);
  PipelineResult result;
  result.config = config;
  result.p = prep.p;
  result.subject_ids = prep.ids();
  result.groups = prep.groups();
  for (const auto& s : prep.subjects) {
    result.pilot_lambdas.push_back(s.pilot_lambda);
    result.lambda_maxes.push_back(s.lambda_max);
  }
  result.warnings = prep.warnings;
  result.warnings.insert(result.warnings.end(), warnings.begin(), warnings.end());

  result.filtered = filter_edges(table, config.tau);
  result.table = std::move(table);
  const FilteredEdgeSet& tested = result.filtered;
  if (tested.edges.empty()) {
    result.warnings.push_back("no edge passed the filter at tau = " + std::to_string(config.tau) +
                              "; nothing to test");
    return result;
  }

  const StatisticKind kind = flags.random_effects ? StatisticKind::Wald : StatisticKind::Binomial;
  std::vector<double> pvalues;
  std::vector<double> observed;
  if (config.normal_null) {
    for (std::size_t e = 0; e < tested.columns.size(); ++e) {
      const VectorXd col = result.table.z.col(static_cast<Eigen::Index>(tested.columns[e]));
      observed.push_back(edge_statistic(kind, std::span<const double>(col.data(), col.size()),
                                        result.groups, result.table.B));
      pvalues.push_back(normal_pvalue(observed.back()));
    }
  } else {
    PermutationResult perm = permutation_pvalues(result.table, tested, result.groups, kind,
                                                 config.n_perm, config.seed, config.workers);
    observed = std::move(perm.observed);
    pvalues = std::move(perm.pvalues);
  }

  const std::vector<double> q_by = by_adjust(pvalues);
  const StoreyResult storey = storey_qvalues(pvalues, config.storey_lambda);
  result.storey_pi0 = storey.pi0;
  if (storey.floored)
    result.warnings.push_back("Storey pi0: no p-value exceeds lambda; pi0 floored at 1/m");

  const int m = result.table.B;
  constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t e = 0; e < tested.edges.size(); ++e) {
    const auto col = static_cast<Eigen::Index>(tested.columns[e]);
    std::vector<double> a, b;
    for (std::size_t i = 0; i < result.groups.size(); ++i)
      (result.groups[i] == Group::A ? a : b).push_back(result.table.z(static_cast<Eigen::Index>(i), col));

    EdgeResult r;
    r.edge = tested.edges[e];
    r.stat = observed[e];
    r.pvalue = pvalues[e];
    r.q_by = q_by[e];
    r.q_storey = storey.qvalues[e];
    r.pi_a = std::accumulate(a.begin(), a.end(), 0.0) / static_cast<double>(a.size());
    r.pi_b = std::accumulate(b.begin(), b.end(), 0.0) / static_cast<double>(b.size());
    if (flags.random_effects && m >= 2) {
      r.rho_a = beta_binomial_fit(a, m).rho_hat;
      r.rho_b = beta_binomial_fit(b, m).rho_hat;
    } else {
      r.rho_a = kNaN;
      r.rho_b = kNaN;
    }
    const double q = config.fdr == FdrMethod::BY ? r.q_by : r.q_storey;
    r.reject = q <= config.fdr_level;
    result.edges.push_back(r);
  }
  return result;
}

PipelineResult run_pipeline(const Dataset& data, const RunConfig& config) {
  const PreparedData prep = prepare_subjects(data, config);
  std::vector<std::string> warnings;
  EdgeStatTable table = edge_stat_table(prep, config, warnings);
  return test_edges(prep, std::move(table), config, std::move(warnings));
}

// ---------------------------------------------------------------------------

std::vector<ReplicateScore> BenchResult::for_method(Method m) const {
  std::vector<ReplicateScore> out;
  for (const auto& s : scores)
    if (s.method == m) out.push_back(s);
  return out;
}

double BenchResult::mean_tpr(Method m) const {
  const auto rows = for_method(m);
  if (rows.empty()) return std::numeric_limits<double>::quiet_NaN();
  double sum = 0;
  for (const auto& r : rows) sum += r.tpr;
  return sum / static_cast<double>(rows.size());
}

double BenchResult::mean_fdp(Method m) const {
  const auto rows = for_method(m);
  if (rows.empty()) return std::numeric_limits<double>::quiet_NaN();
  double sum = 0;
  for (const auto& r : rows) sum += r.fdp;
  return sum / static_cast<double>(rows.size());
}

BenchResult run_benchmark(const ScenarioSpec& scenario, const RunConfig& config,
                          const std::vector<Method>& methods, int replicates) {
  if (replicates < 1) throw ValidationError("bench: need at least one replicate");
  if (methods.empty()) throw ValidationError("bench: no methods requested");
  scenario.validate();
  config.validate();

  BenchResult bench;
  for (int r = 0; r < replicates; ++r) {
    const auto key = static_cast<std::uint64_t>(r);
    ScenarioSpec spec = scenario;
    spec.seed = derive_seed(scenario.seed, {stream::kReplicate, key});
    RunConfig base = config;
    base.seed = derive_seed(config.seed, {stream::kReplicate, key});

    const Population pop = sample_population(spec);
    const PreparedData prep = prepare_subjects(pop.data, base);

    // Tables keyed by the resampling flags so r3 and rs_rp share one.
    struct Cached {
      bool resampling;
      bool random_penalty;
      EdgeStatTable table;
      std::vector<std::string> warnings;
    };
    std::vector<Cached> cache;
    for (Method m : methods) {
      RunConfig cfg = base;
      cfg.method = m;
      const MethodFlags flags = method_flags(m);
      auto hit = std::find_if(cache.begin(), cache.end(), [&](const Cached& c) {
        return c.resampling == flags.resampling && c.random_penalty == flags.random_penalty;
      });
      if (hit == cache.end()) {
        Cached c{flags.resampling, flags.random_penalty, {}, {}};
        c.table = edge_stat_table(prep, cfg, c.warnings);
        cache.push_back(std::move(c));
        hit = cache.end() - 1;
      }
      const PipelineResult res = test_edges(prep, hit->table, cfg, hit->warnings);

      ReplicateScore score;
      score.replicate = r;
      score.method = m;
      const ConfusionSummary cs = confusion_summary(res.rejected(), pop.truth, res.filtered);
      score.tpr = cs.tpr;
      score.fdp = cs.fdp;
      score.n_tested = static_cast<int>(res.filtered.edges.size());
      score.n_rejected = static_cast<int>(res.rejected().size());
      const std::vector<double> stats = res.statistics();
      score.roc = roc_points(stats, pop.truth, res.filtered);
      bench.scores.push_back(std::move(score));
    }
  }
  return bench;
}

}  // namespace popnet
