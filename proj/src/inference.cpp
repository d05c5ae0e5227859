#include "popnet/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "popnet/parallel.hpp"
#include "popnet/random.hpp"

namespace popnet {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double ratio_or_sentinel(double diff, double denom) {
  if (denom > 0) return diff / std::sqrt(denom);
  if (diff == 0) return 0.0;
  return diff > 0 ? kInf : -kInf;
}

// Tolerance when comparing permuted and observed |T|: the same set of values
// summed in a different order may differ in the last bits.
constexpr double kTieTolerance = 1e-10;

}  // namespace

double BetaBinomialFit::variance() const {
  if (n < 2 || m < 1) return std::numeric_limits<double>::quiet_NaN();
  return pi_hat * (1 - pi_hat) * (1 + (m - 1) * rho_hat) / (m * static_cast<double>(n - 1));
}

BetaBinomialFit beta_binomial_fit(std::span<const double> z, int m) {
  if (m == 1)
    throw ValidationError("beta_binomial_fit: rho is unidentifiable with a single replicate "
                          "per subject; resample to obtain m >= 2");
  if (m < 2) throw ValidationError("beta_binomial_fit: m must be >= 2");
  if (z.size() < 2) throw ValidationError("beta_binomial_fit: need at least 2 subjects");
  for (double v : z)
    if (!(v >= 0 && v <= 1)) throw ValidationError("beta_binomial_fit: proportions must lie in [0,1]");

  BetaBinomialFit fit;
  fit.n = static_cast<int>(z.size());
  fit.m = m;
  fit.pi_hat = std::accumulate(z.begin(), z.end(), 0.0) / fit.n;
  const double pq = fit.pi_hat * (1 - fit.pi_hat);
  if (pq <= 0) {
    fit.pi_hat = std::clamp(fit.pi_hat, 0.0, 1.0);
    fit.rho_raw = 0;
    fit.rho_hat = 0;
    return fit;
  }
  double ss = 0;
  for (double v : z) ss += (fit.pi_hat - v) * (fit.pi_hat - v);
  const double md = m;
  fit.rho_raw = (md / (md - 1)) * ss / (pq * (fit.n - 1)) - 1 / (md - 1);
  fit.rho_hat = std::clamp(fit.rho_raw, 0.0, 1.0);
  return fit;
}

double wald_statistic(const BetaBinomialFit& a, const BetaBinomialFit& b) {
  const double va = a.variance() * (a.n - 1) / a.n;
  const double vb = b.variance() * (b.n - 1) / b.n;
  return ratio_or_sentinel(a.pi_hat - b.pi_hat, va + vb);
}

double binomial_statistic(std::span<const double> y_a, std::span<const double> y_b) {
  if (y_a.size() < 2 || y_b.size() < 2)
    throw ValidationError("binomial_statistic: need at least 2 subjects per group");
  const double na = static_cast<double>(y_a.size());
  const double nb = static_cast<double>(y_b.size());
  const double pa = std::accumulate(y_a.begin(), y_a.end(), 0.0) / na;
  const double pb = std::accumulate(y_b.begin(), y_b.end(), 0.0) / nb;
  return ratio_or_sentinel(pa - pb, pa * (1 - pa) / na + pb * (1 - pb) / nb);
}

double normal_pvalue(double statistic) {
  if (std::isnan(statistic)) return std::numeric_limits<double>::quiet_NaN();
  return std::erfc(std::abs(statistic) / std::sqrt(2.0));
}

std::string to_string(StatisticKind kind) {
  return kind == StatisticKind::Wald ? "wald" : "binomial";
}

double edge_statistic(StatisticKind kind, std::span<const double> values,
                      std::span<const Group> labels, int m) {
  if (values.size() != labels.size())
    throw ValidationError("edge_statistic: values and labels differ in length");
  std::vector<double> a, b;
  a.reserve(values.size());
  b.reserve(values.size());
  for (std::size_t i = 0; i < values.size(); ++i)
    (labels[i] == Group::A ? a : b).push_back(values[i]);
  if (kind == StatisticKind::Wald) return wald_statistic(beta_binomial_fit(a, m), beta_binomial_fit(b, m));
  return binomial_statistic(a, b);
}

PermutationResult permutation_pvalues(const EdgeStatTable& table, const FilteredEdgeSet& edges,
                                      std::span<const Group> labels, StatisticKind kind,
                                      int n_perm, std::uint64_t seed, int workers) {
  if (n_perm < 1) throw ValidationError("permutation_pvalues: need at least one permutation");
  const std::size_t n = table.n_subjects();
  if (labels.size() != n) throw ValidationError("permutation_pvalues: label count mismatch");
  const auto n_a = std::count(labels.begin(), labels.end(), Group::A);
  if (n_a == 0 || n_a == static_cast<long>(n))
    throw ValidationError("permutation_pvalues: both groups must be non-empty");

  const std::size_t n_edges = edges.columns.size();
  // Subject values per edge, contiguous.
  std::vector<std::vector<double>> values(n_edges, std::vector<double>(n));
  for (std::size_t e = 0; e < n_edges; ++e)
    for (std::size_t i = 0; i < n; ++i)
      values[e][i] = table.z(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(edges.columns[e]));

  PermutationResult out;
  out.observed.resize(n_edges);
  for (std::size_t e = 0; e < n_edges; ++e)
    out.observed[e] = edge_statistic(kind, values[e], labels, table.B);

  std::vector<std::vector<Group>> perms(static_cast<std::size_t>(n_perm));
  Rng rng = make_rng(seed, {stream::kPermutation});
  for (auto& perm : perms) {
    perm.assign(labels.begin(), labels.end());
    shuffle(perm, rng);
  }

  std::vector<std::vector<int>> exceed(static_cast<std::size_t>(n_perm), std::vector<int>(n_edges, 0));
  parallel_for(perms.size(), workers, [&](std::size_t r) {
    for (std::size_t e = 0; e < n_edges; ++e) {
      const double t = std::abs(edge_statistic(kind, values[e], perms[r], table.B));
      const double obs = std::abs(out.observed[e]);
      exceed[r][e] = t >= obs * (1 - kTieTolerance) ? 1 : 0;
    }
  });

  out.pvalues.resize(n_edges);
  for (std::size_t e = 0; e < n_edges; ++e) {
    long count = 0;
    for (const auto& row : exceed) count += row[e];
    out.pvalues[e] = static_cast<double>(1 + count) / static_cast<double>(n_perm + 1);
  }
  return out;
}

namespace {

void check_pvalues(std::span<const double> p) {
  for (double v : p)
    if (!(v >= 0 && v <= 1)) throw ValidationError("p-values must lie in [0,1]");
}

// Step-up adjustment q_(i) = min_{j >= i} min(1, p_(j) * scale / j).
std::vector<double> step_up(std::span<const double> p, double scale) {
  const std::size_t m = p.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p[a] < p[b]; });
  std::vector<double> q(m);
  double running = 1.0;
  for (std::size_t r = m; r-- > 0;) {
    const std::size_t i = order[r];
    running = std::min(running, p[i] * scale / static_cast<double>(r + 1));
    q[i] = std::min(1.0, running);
  }
  return q;
}

}  // namespace

std::vector<double> by_adjust(std::span<const double> pvalues) {
  check_pvalues(pvalues);
  const std::size_t m = pvalues.size();
  double harmonic = 0;
  for (std::size_t i = 1; i <= m; ++i) harmonic += 1.0 / static_cast<double>(i);
  return step_up(pvalues, static_cast<double>(m) * harmonic);
}

StoreyResult storey_qvalues(std::span<const double> pvalues, double lambda) {
  if (!(lambda > 0 && lambda < 1)) throw ValidationError("storey_qvalues: lambda must lie in (0,1)");
  check_pvalues(pvalues);
  StoreyResult out;
  const std::size_t m = pvalues.size();
  if (m == 0) return out;
  const auto above = std::count_if(pvalues.begin(), pvalues.end(), [&](double v) { return v > lambda; });
  if (above == 0) {
    out.pi0 = 1.0 / static_cast<double>(m);
    out.floored = true;
  } else {
    out.pi0 = std::min(1.0, static_cast<double>(above) / (static_cast<double>(m) * (1 - lambda)));
  }
  out.qvalues = step_up(pvalues, out.pi0 * static_cast<double>(m));
  return out;
}

}  // namespace popnet
