#include "popnet/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <set>

#include <Eigen/Eigenvalues>

namespace popnet {

std::string to_string(Structure s) {
  switch (s) {
    case Structure::Banded: return "banded";
    case Structure::SmallWorld: return "small_world";
    case Structure::Hub: return "hub";
  }
  return "?";
}

std::string to_string(DiffCase c) { return c == DiffCase::Clustered ? "clustered" : "random"; }

Structure parse_structure(const std::string& s) {
  if (s == "banded") return Structure::Banded;
  if (s == "small_world" || s == "small-world" || s == "smallw") return Structure::SmallWorld;
  if (s == "hub") return Structure::Hub;
  throw ValidationError("unknown structure '" + s + "'");
}

DiffCase parse_diff_case(const std::string& s) {
  if (s == "clustered" || s == "I" || s == "1") return DiffCase::Clustered;
  if (s == "random" || s == "II" || s == "2") return DiffCase::Random;
  throw ValidationError("unknown differential case '" + s + "'");
}

void ScenarioSpec::validate() const {
  if (p < 4) throw ValidationError("scenario: p must be >= 4");
  if (T < 2) throw ValidationError("scenario: T must be >= 2");
  if (n_a < 2 || n_b < 2) throw ValidationError("scenario: each group needs at least 2 subjects");
  if (!(pi_diff > 0 && pi_diff <= 1)) throw ValidationError("scenario: pi_diff must lie in (0,1]");
  if (n_diff < 0) throw ValidationError("scenario: n_diff must be non-negative");
  if (bandwidth < 1 || sw_neighbors < 1 || hub_clusters < 0)
    throw ValidationError("scenario: structure parameters must be positive");
  if (!(sw_rewire >= 0 && sw_rewire <= 1)) throw ValidationError("scenario: rewire probability in [0,1]");
}

ScenarioSpec ScenarioSpec::desk_hub_random() { return ScenarioSpec{}; }

ScenarioSpec ScenarioSpec::high_dimensional() {
  ScenarioSpec s;
  s.p = 100;
  s.T = 80;
  return s;
}

std::vector<Edge> GroundTruth::differential() const {
  std::vector<Edge> out = diff_a;
  out.insert(out.end(), diff_b.begin(), diff_b.end());
  std::sort(out.begin(), out.end());
  return out;
}

bool GroundTruth::is_differential(const Edge& e) const {
  return std::find(diff_a.begin(), diff_a.end(), e) != diff_a.end() ||
         std::find(diff_b.begin(), diff_b.end(), e) != diff_b.end();
}

namespace {

void add_edge(Adjacency& adj, int a, int b) {
  adj(a, b) = 1;
  adj(b, a) = 1;
}

void banded(Adjacency& adj, int bandwidth) {
  const auto p = static_cast<int>(adj.rows());
  for (int k = 0; k < p; ++k)
    for (int l = k + 1; l <= std::min(p - 1, k + bandwidth); ++l) add_edge(adj, k, l);
}

// Ring lattice with k neighbours per side; each lattice edge (i, i+j) is
// rewired to a uniformly chosen new endpoint with probability `rewire`.
void watts_strogatz(Adjacency& adj, int k, double rewire, Rng& rng) {
  const auto p = static_cast<int>(adj.rows());
  for (int i = 0; i < p; ++i)
    for (int j = 1; j <= k; ++j) add_edge(adj, i, (i + j) % p);
  for (int j = 1; j <= k; ++j) {
    for (int i = 0; i < p; ++i) {
      const int target = (i + j) % p;
      if (uniform01(rng) >= rewire) continue;
      if (adj.row(i).cast<int>().sum() >= p - 1) continue;
      int next = target;
      do {
        next = uniform_int(rng, 0, p - 1);
      } while (next == i || adj(i, next));
      adj(i, target) = adj(target, i) = 0;
      add_edge(adj, i, next);
    }
  }
}

std::vector<std::vector<int>> hub_clusters(int p, int clusters) {
  std::vector<std::vector<int>> out(static_cast<std::size_t>(clusters));
  for (int c = 0, node = 0; c < clusters; ++c) {
    const int size = p / clusters + (c < p % clusters ? 1 : 0);
    for (int s = 0; s < size; ++s) out[static_cast<std::size_t>(c)].push_back(node++);
  }
  return out;
}

}  // namespace

EdgeSupport generate_structure(const ScenarioSpec& spec, Rng& rng) {
  spec.validate();
  const int p = spec.p;
  EdgeSupport support = EdgeSupport::empty(p);
  auto& adj = support.adjacency;
  const bool densify = spec.common_degree > 0;

  switch (spec.structure) {
    case Structure::Banded: {
      const int bw = densify ? std::max(1, static_cast<int>(std::lround(spec.common_degree / 2))) : spec.bandwidth;
      banded(adj, bw);
      break;
    }
    case Structure::SmallWorld: {
      const int k = densify ? std::max(1, static_cast<int>(std::lround(spec.common_degree / 2))) : spec.sw_neighbors;
      if (2 * k >= p) throw ValidationError("generate_structure: too many small-world neighbours for p");
      watts_strogatz(adj, k, spec.sw_rewire, rng);
      break;
    }
    case Structure::Hub: {
      const int n_clusters = spec.hub_clusters > 0 ? spec.hub_clusters : std::max(1, p / 10);
      if (n_clusters > p / 2) throw ValidationError("generate_structure: too many hub clusters for p");
      const auto clusters = hub_clusters(p, n_clusters);
      for (const auto& members : clusters)
        for (std::size_t m = 1; m < members.size(); ++m) add_edge(adj, members.front(), members[m]);
      if (densify) {
        // Extra within-cluster edges until the average degree reaches the target.
        const auto target = static_cast<std::size_t>(std::lround(spec.common_degree * p / 2));
        std::vector<Edge> candidates;
        for (const auto& members : clusters)
          for (std::size_t a = 1; a < members.size(); ++a)
            for (std::size_t b = a + 1; b < members.size(); ++b) candidates.push_back({members[a], members[b]});
        shuffle(candidates, rng);
        for (const auto& e : candidates) {
          if (support.edge_count() >= target) break;
          add_edge(adj, e.k, e.l);
        }
      }
      break;
    }
  }
  if (support.edge_count() == 0) throw ValidationError("generate_structure: parameters yield no edges");
  return support;
}

namespace {

// Greedy clustered growth: every chosen pair touches the frontier, which
// starts at an endpoint of a random common edge and absorbs the endpoints of
// each chosen pair.
std::vector<Edge> grow_cluster(const EdgeSupport& common, std::set<Edge>& taken, int count, Rng& rng) {
  const int p = common.p();
  const auto common_edges = common.edges();
  std::vector<Edge> chosen;
  std::vector<std::uint8_t> frontier(static_cast<std::size_t>(p), 0);
  auto seed_frontier = [&] {
    const Edge e = common_edges[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(common_edges.size()) - 1))];
    frontier[static_cast<std::size_t>(uniform01(rng) < 0.5 ? e.k : e.l)] = 1;
  };
  seed_frontier();
  int reseeds = 0;
  while (static_cast<int>(chosen.size()) < count) {
    std::vector<Edge> candidates;
    for (int k = 0; k < p; ++k)
      for (int l = k + 1; l < p; ++l) {
        if (!frontier[static_cast<std::size_t>(k)] && !frontier[static_cast<std::size_t>(l)]) continue;
        const Edge e{k, l};
        if (common.has(k, l) || taken.count(e)) continue;
        candidates.push_back(e);
      }
    if (candidates.empty()) {
      if (++reseeds > 4 * p) throw ValidationError("place_differential_edges: cannot grow clustered edges");
      seed_frontier();
      continue;
    }
    const Edge e = candidates[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(candidates.size()) - 1))];
    taken.insert(e);
    chosen.push_back(e);
    frontier[static_cast<std::size_t>(e.k)] = 1;
    frontier[static_cast<std::size_t>(e.l)] = 1;
  }
  return chosen;
}

}  // namespace

std::pair<std::vector<Edge>, std::vector<Edge>> place_differential_edges(const EdgeSupport& common,
                                                                         const ScenarioSpec& spec,
                                                                         Rng& rng) {
  const int p = common.p();
  std::vector<Edge> vacant;
  for (int k = 0; k < p; ++k)
    for (int l = k + 1; l < p; ++l)
      if (!common.has(k, l)) vacant.push_back({k, l});
  if (spec.n_diff > static_cast<int>(vacant.size()))
    throw ValidationError("place_differential_edges: only " + std::to_string(vacant.size()) +
                          " vacant pairs for " + std::to_string(spec.n_diff) + " differential edges");
  const int n_a = (spec.n_diff + 1) / 2;
  const int n_b = spec.n_diff / 2;

  std::vector<Edge> a, b;
  if (spec.diff_case == DiffCase::Random) {
    shuffle(vacant, rng);
    a.assign(vacant.begin(), vacant.begin() + n_a);
    b.assign(vacant.begin() + n_a, vacant.begin() + n_a + n_b);
  } else {
    if (common.edge_count() == 0) throw ValidationError("place_differential_edges: clustered case needs common edges");
    std::set<Edge> taken;
    a = grow_cluster(common, taken, n_a, rng);
    b = grow_cluster(common, taken, n_b, rng);
  }
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  return {a, b};
}

MatrixXd build_precision(const EdgeSupport& support, const ScenarioSpec& spec, Rng& rng) {
  const int p = support.p();
  MatrixXd theta = MatrixXd::Identity(p, p);
  for (int k = 0; k < p; ++k)
    for (int l = k + 1; l < p; ++l) {
      if (!support.has(k, l)) continue;
      const double magnitude = 1.0 + 0.25 * uniform01(rng);
      const double w = uniform01(rng) < 0.5 ? -magnitude : magnitude;
      theta(k, l) = theta(l, k) = w;
    }
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(theta, Eigen::EigenvaluesOnly);
  const double delta = std::max(0.0, 0.1 - eig.eigenvalues().minCoeff());
  theta.diagonal().array() += delta;

  if (spec.correlation_mode) {
    // Theta' = D Theta D with D = diag(sqrt(diag(Theta^{-1}))) gives a
    // unit-diagonal covariance.
    const MatrixXd sigma = theta.llt().solve(MatrixXd::Identity(p, p));
    const VectorXd d = sigma.diagonal().cwiseSqrt();
    theta = d.asDiagonal() * theta * d.asDiagonal();
    theta = (theta + theta.transpose()).eval() / 2.0;
  }
  return theta;
}

Population sample_population(const ScenarioSpec& spec) {
  spec.validate();
  Population pop;
  auto& truth = pop.truth;
  Rng scenario_rng = make_rng(spec.seed, {stream::kScenario});
  truth.common = generate_structure(spec, scenario_rng);
  std::tie(truth.diff_a, truth.diff_b) = place_differential_edges(truth.common, spec, scenario_rng);

  const int n = spec.n_a + spec.n_b;
  const int p = spec.p;
  for (int i = 0; i < n; ++i) {
    const Group g = i < spec.n_a ? Group::A : Group::B;
    Rng rng = make_rng(spec.seed, {stream::kSubject, static_cast<std::uint64_t>(i)});
    EdgeSupport support = truth.common;
    for (const auto& e : g == Group::A ? truth.diff_a : truth.diff_b)
      if (uniform01(rng) < spec.pi_diff) support.adjacency(e.k, e.l) = support.adjacency(e.l, e.k) = 1;
    MatrixXd theta = build_precision(support, spec, rng);

    MatrixXd z(spec.T, p);
    for (int t = 0; t < spec.T; ++t)
      for (int j = 0; j < p; ++j) z(t, j) = standard_normal(rng);
    // Rows x = L^{-T} z with Theta = L L^T have covariance Theta^{-1}.
    Eigen::LLT<MatrixXd> llt(theta);
    if (llt.info() != Eigen::Success) throw NumericalError("sample_population: precision not positive definite");
    MatrixXd x = llt.matrixU().solve(z.transpose()).transpose();

    char id[16];
    std::snprintf(id, sizeof id, "s%03d", i + 1);
    pop.data.push_back({id, g, std::move(x)});
    truth.groups.push_back(g);
    truth.subject_supports.push_back(std::move(support));
    truth.subject_precisions.push_back(std::move(theta));
  }
  return pop;
}

int RocCurve::tp_at_fp(int fp) const {
  int tp = 0;
  for (const auto& [f, t] : points) {
    if (f > fp) break;
    tp = t;
  }
  return tp;
}

RocCurve roc_points(std::span<const double> statistics, const GroundTruth& truth,
                    const FilteredEdgeSet& tested) {
  if (statistics.size() != tested.edges.size())
    throw ValidationError("roc_points: statistics must cover every tested edge");
  const int p = truth.p();
  std::vector<std::size_t> order(statistics.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double ta = std::abs(statistics[a]);
    const double tb = std::abs(statistics[b]);
    if (ta != tb) return ta > tb;
    return edge_index(tested.edges[a].k, tested.edges[a].l, p) < edge_index(tested.edges[b].k, tested.edges[b].l, p);
  });
  RocCurve curve;
  int fp = 0, tp = 0;
  for (std::size_t i : order) {
    if (truth.is_differential(tested.edges[i]))
      ++tp;
    else
      ++fp;
    curve.points.emplace_back(fp, tp);
  }
  return curve;
}

ConfusionSummary confusion_summary(const std::vector<Edge>& rejected, const GroundTruth& truth,
                                   const FilteredEdgeSet& tested) {
  for (const auto& e : rejected)
    if (std::find(tested.edges.begin(), tested.edges.end(), e) == tested.edges.end())
      throw ValidationError("confusion_summary: rejected edge is not in the tested set");
  const int p = truth.p();
  ConfusionSummary out;
  out.matrix = Eigen::MatrixXi::Zero(p, p);
  for (const auto& e : truth.common.edges()) out.matrix(e.l, e.k) = kCommon;
  const auto diff = truth.differential();
  for (const auto& e : diff) out.matrix(e.l, e.k) = kDifferential;

  int tp = 0;
  for (const auto& e : rejected) {
    const bool hit = truth.is_differential(e);
    tp += hit ? 1 : 0;
    out.matrix(e.k, e.l) = hit ? kDetectedTP : kDetectedFP;
  }
  const int fp = static_cast<int>(rejected.size()) - tp;
  out.tpr = diff.empty() ? 0.0 : static_cast<double>(tp) / static_cast<double>(diff.size());
  out.fdp = rejected.empty() ? 0.0 : static_cast<double>(fp) / static_cast<double>(rejected.size());
  return out;
}

}  // namespace popnet
