#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "popnet/core.hpp"
#include "popnet/resampling.hpp"

namespace popnet {

/// Moment fit of a beta-binomial group: mean pi and intra-subject
/// correlation rho over n subjects with m replicates each.
struct BetaBinomialFit {
  double pi_hat = 0;
  double rho_hat = 0;  // clamped to [0,1]
  double rho_raw = 0;  // before clamping
  int n = 0;
  int m = 0;

  /// Estimated variance of pi_hat: pi(1-pi)(1+(m-1)rho) / (m(n-1)).
  double variance() const;
};

BetaBinomialFit beta_binomial_fit(std::span<const double> z, int m);

/// Two-sample Wald statistic for pi_A - pi_B. A zero standard error gives 0
/// when the means agree and a signed infinity otherwise.
double wald_statistic(const BetaBinomialFit& a, const BetaBinomialFit& b);

/// One-level difference-of-proportions statistic with s_g^2 = pi_g(1-pi_g)/n_g.
/// Accepts 0/1 indicators or, for the resampled variant, proportions.
double binomial_statistic(std::span<const double> y_a, std::span<const double> y_b);

/// Two-sided p-value of a standard normal reference.
double normal_pvalue(double statistic);

enum class StatisticKind { Wald, Binomial };

std::string to_string(StatisticKind kind);

/// Statistic for one edge given per-subject values and group labels.
double edge_statistic(StatisticKind kind, std::span<const double> values,
                      std::span<const Group> labels, int m);

struct PermutationResult {
  std::vector<double> observed;  // per filtered edge
  std::vector<double> pvalues;   // (1 + #{|T_perm| >= |T_obs|}) / (N_perm + 1)
};

/// Permutation p-values. Each of the n_perm label permutations is shared by
/// every edge. Permutations come from the stream derived from `seed`; the
/// statistic sweep may run on several workers without changing the result.
PermutationResult permutation_pvalues(const EdgeStatTable& table, const FilteredEdgeSet& edges,
                                      std::span<const Group> labels, StatisticKind kind,
                                      int n_perm, std::uint64_t seed, int workers = 1);

/// Benjamini-Yekutieli adjusted p-values (step-up with c(m) = sum 1/i).
std::vector<double> by_adjust(std::span<const double> pvalues);

struct StoreyResult {
  double pi0 = 1;
  std::vector<double> qvalues;
  bool floored = false;  // no p-value exceeded lambda; pi0 set to 1/m
};

StoreyResult storey_qvalues(std::span<const double> pvalues, double lambda = 0.5);

}  // namespace popnet
