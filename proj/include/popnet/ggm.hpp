#pragma once

// Penalized Gaussian maximum likelihood for sparse precision matrices.
//
// The estimator minimizes
//
//   Tr(S Theta) - log det Theta + sum_{k != l} Lambda_kl |theta_kl|
//
// over symmetric positive-definite Theta, with an unpenalized diagonal.
// With this scaling the stationarity condition for an off-diagonal entry is
// (S - Theta^{-1})_kl + Lambda_kl sign(theta_kl) = 0, and a uniform
// Lambda = lambda * 1_off gives the ordinary graphical lasso.
//
// The solver is primal block coordinate descent over columns: for column j
// with the rest of Theta fixed, the off-diagonal block solves a weighted
// lasso whose Gram matrix is S_jj * (Theta_{-j,-j})^{-1}, and the diagonal
// entry follows in closed form. Each block step is an exact minimization
// started from the current iterate, so the objective never increases and
// Theta stays positive definite throughout.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "popnet/core.hpp"

namespace popnet {

template <class Scalar>
struct GlassoOptions {
  Scalar tol = Scalar(1e-6);  // KKT residual
  int max_iter = 200;         // outer sweeps
  bool record_objective = false;
};

template <class Scalar>
struct PrecisionEstimate {
  Matrix<Scalar> theta;
  Matrix<Scalar> penalty;
  bool converged = false;
  int iterations = 0;
  Scalar objective = 0;
  Scalar kkt_residual = std::numeric_limits<Scalar>::infinity();
  std::vector<Scalar> objective_trace;  // one entry per sweep when recorded
};

/// Symmetric 0/1 adjacency with zero diagonal.
struct EdgeSupport {
  Adjacency adjacency;

  int p() const { return static_cast<int>(adjacency.rows()); }
  bool has(int k, int l) const { return adjacency(k, l) != 0; }
  std::size_t edge_count() const {
    std::size_t n = 0;
    for (int k = 0; k < p(); ++k)
      for (int l = k + 1; l < p(); ++l) n += adjacency(k, l) != 0;
    return n;
  }
  std::vector<Edge> edges() const {
    std::vector<Edge> out;
    for (int k = 0; k < p(); ++k)
      for (int l = k + 1; l < p(); ++l)
        if (adjacency(k, l)) out.push_back({k, l});
    return out;
  }
  /// Indicator per node pair, in edge_index order.
  VectorXd indicators() const {
    VectorXd v(static_cast<Eigen::Index>(pair_count(p())));
    Eigen::Index e = 0;
    for (int k = 0; k < p(); ++k)
      for (int l = k + 1; l < p(); ++l) v(e++) = adjacency(k, l) ? 1.0 : 0.0;
    return v;
  }

  static EdgeSupport empty(int p) { return {Adjacency::Zero(p, p)}; }
  static EdgeSupport from_edges(int p, const std::vector<Edge>& edges) {
    EdgeSupport s = empty(p);
    for (const auto& e : edges) {
      s.adjacency(e.k, e.l) = 1;
      s.adjacency(e.l, e.k) = 1;
    }
    return s;
  }
};

namespace detail {

template <class Derived>
void require_square(const Eigen::MatrixBase<Derived>& m, const char* what) {
  if (m.rows() != m.cols())
    throw ValidationError(std::string(what) + " must be square");
}

template <class Scalar>
Scalar soft_threshold(Scalar x, Scalar t) {
  if (x > t) return x - t;
  if (x < -t) return x + t;
  return Scalar(0);
}

}  // namespace detail

/// Column-centered sample covariance (1/T) Xc^T Xc of a T x p matrix.
template <class Derived>
Matrix<typename Derived::Scalar> empirical_covariance(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  if (x.rows() < 2) throw ValidationError("empirical_covariance: need at least 2 observations");
  if (!x.allFinite()) throw ValidationError("empirical_covariance: non-finite input");
  const Eigen::Index n = x.rows();
  const Matrix<Scalar> centered = x.rowwise() - x.colwise().mean();
  Matrix<Scalar> cov = (centered.transpose() * centered) / static_cast<Scalar>(n);
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    if ((x.col(j).array() == x(0, j)).all() || !(cov(j, j) > Scalar(0)))
      throw ValidationError("empirical_covariance: degenerate input, column " +
                            std::to_string(j) + " has zero variance");
  }
  return cov;
}

/// Checks the covariance invariants: finite, symmetric, non-negative diagonal,
/// positive semi-definite within 1e-8 (relative to the largest eigenvalue).
template <class Derived>
void validate_covariance(const Eigen::MatrixBase<Derived>& sigma) {
  using Scalar = typename Derived::Scalar;
  detail::require_square(sigma, "covariance");
  if (!sigma.allFinite()) throw ValidationError("covariance: non-finite entries");
  const Scalar scale = std::max(Scalar(1), sigma.cwiseAbs().maxCoeff());
  if ((sigma - sigma.transpose()).cwiseAbs().maxCoeff() > Scalar(1e-10) * scale)
    throw ValidationError("covariance: not symmetric");
  if ((sigma.diagonal().array() < Scalar(0)).any())
    throw ValidationError("covariance: negative diagonal");
  Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> eig(sigma, Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() < -Scalar(1e-8) * scale)
    throw ValidationError("covariance: not positive semi-definite");
}

/// Checks the penalty invariants: symmetric, non-negative, zero diagonal.
template <class Derived>
void validate_penalty(const Eigen::MatrixBase<Derived>& penalty) {
  using Scalar = typename Derived::Scalar;
  detail::require_square(penalty, "penalty");
  if (!penalty.allFinite()) throw ValidationError("penalty: non-finite entries");
  if ((penalty.array() < Scalar(0)).any()) throw ValidationError("penalty: negative entry");
  if ((penalty.diagonal().array() != Scalar(0)).any())
    throw ValidationError("penalty: diagonal must be zero");
  if ((penalty - penalty.transpose()).cwiseAbs().maxCoeff() > Scalar(0))
    throw ValidationError("penalty: not symmetric");
}

template <class Scalar = double>
Matrix<Scalar> uniform_penalty(int p, Scalar lambda) {
  Matrix<Scalar> m = Matrix<Scalar>::Constant(p, p, lambda);
  m.diagonal().setZero();
  return m;
}

/// Largest absolute off-diagonal covariance: the smallest uniform penalty
/// whose solution has no edges.
template <class Derived>
typename Derived::Scalar lambda_max(const Eigen::MatrixBase<Derived>& sigma) {
  using Scalar = typename Derived::Scalar;
  detail::require_square(sigma, "covariance");
  if (sigma.rows() < 2) throw ValidationError("lambda_max: need p >= 2");
  Scalar best = 0;
  for (Eigen::Index k = 0; k < sigma.rows(); ++k)
    for (Eigen::Index l = k + 1; l < sigma.cols(); ++l)
      best = std::max(best, std::abs(sigma(k, l)));
  return best;
}

template <class DerivedS, class DerivedL, class DerivedT>
typename DerivedS::Scalar glasso_objective(const Eigen::MatrixBase<DerivedS>& sigma,
                                           const Eigen::MatrixBase<DerivedL>& penalty,
                                           const Eigen::MatrixBase<DerivedT>& theta) {
  using Scalar = typename DerivedS::Scalar;
  Eigen::LLT<Matrix<Scalar>> llt(theta);
  if (llt.info() != Eigen::Success) return std::numeric_limits<Scalar>::infinity();
  const Scalar logdet = 2 * llt.matrixLLT().diagonal().array().log().sum();
  const Scalar trace = (sigma.array() * theta.array()).sum();
  const Scalar pen = (penalty.array() * theta.array().abs()).sum();
  return trace - logdet + pen;
}

namespace detail {

template <class Scalar>
Scalar kkt_residual_from(const Matrix<Scalar>& sigma, const Matrix<Scalar>& penalty,
                         const Matrix<Scalar>& theta, const Matrix<Scalar>& w) {
  Scalar worst = 0;
  const Eigen::Index p = sigma.rows();
  for (Eigen::Index l = 0; l < p; ++l) {
    for (Eigen::Index k = 0; k < l; ++k) {
      const Scalar grad = sigma(k, l) - w(k, l);
      const Scalar t = theta(k, l);
      Scalar r;
      if (t != Scalar(0))
        r = std::abs(grad + penalty(k, l) * (t > 0 ? Scalar(1) : Scalar(-1)));
      else
        r = std::max(Scalar(0), std::abs(grad) - penalty(k, l));
      worst = std::max(worst, r);
    }
  }
  return worst;
}

// Stopping measure: the largest of the KKT residual, the diagonal residual
// and the first-order error estimate |Theta R Theta| of Theta, where R holds
// the signed residuals.
template <class Scalar>
Scalar stopping_gap(const Matrix<Scalar>& sigma, const Matrix<Scalar>& penalty, const Matrix<Scalar>& theta,
                    const Matrix<Scalar>& w, Scalar kkt) {
  const Eigen::Index p = sigma.rows();
  Matrix<Scalar> r = Matrix<Scalar>::Zero(p, p);
  for (Eigen::Index l = 0; l < p; ++l) {
    r(l, l) = sigma(l, l) - w(l, l);
    for (Eigen::Index k = 0; k < l; ++k) {
      const Scalar grad = sigma(k, l) - w(k, l);
      const Scalar t = theta(k, l);
      Scalar v;
      if (t != Scalar(0))
        v = grad + penalty(k, l) * (t > 0 ? Scalar(1) : Scalar(-1));
      else
        v = grad > 0 ? std::max(Scalar(0), grad - penalty(k, l)) : std::min(Scalar(0), grad + penalty(k, l));
      r(k, l) = r(l, k) = v;
    }
  }
  const Scalar step = (theta * r * theta).cwiseAbs().maxCoeff();
  return std::max({kkt, r.diagonal().cwiseAbs().maxCoeff(), step});
}

template <class Scalar>
bool invert_spd(const Matrix<Scalar>& theta, Matrix<Scalar>& out) {
  Eigen::LLT<Matrix<Scalar>> llt(theta);
  if (llt.info() != Eigen::Success) return false;
  out = llt.solve(Matrix<Scalar>::Identity(theta.rows(), theta.cols()));
  out = (out + out.transpose()).eval() / Scalar(2);
  return out.allFinite();
}

}  // namespace detail

/// First-order optimality residual of `est` for covariance `sigma`: the
/// largest violation over k<l of the stationarity (nonzero entries) or
/// subgradient bound (zero entries).
template <class DerivedS, class Scalar = typename DerivedS::Scalar>
Scalar kkt_check(const Eigen::MatrixBase<DerivedS>& sigma, const PrecisionEstimate<Scalar>& est) {
  Matrix<Scalar> w;
  if (!detail::invert_spd(est.theta, w))
    throw NumericalError("kkt_check: precision estimate is singular or indefinite");
  return detail::kkt_residual_from<Scalar>(sigma, est.penalty, est.theta, w);
}

/// Weighted graphical lasso. `warm_start`, when non-empty and positive
/// definite, seeds the iteration; otherwise Theta starts at diag(1/S_jj).
/// A fit that does not reach `tol` within `max_iter` sweeps is returned
/// with converged = false.
template <class DerivedS, class DerivedL>
PrecisionEstimate<typename DerivedS::Scalar> weighted_glasso(
    const Eigen::MatrixBase<DerivedS>& sigma_in, const Eigen::MatrixBase<DerivedL>& penalty_in,
    const GlassoOptions<typename DerivedS::Scalar>& options = {},
    const Matrix<typename DerivedS::Scalar>& warm_start = {}) {
  using Scalar = typename DerivedS::Scalar;
  using Mat = Matrix<Scalar>;
  using Vec = Vector<Scalar>;

  detail::require_square(sigma_in, "covariance");
  detail::require_square(penalty_in, "penalty");
  if (sigma_in.rows() != penalty_in.rows())
    throw ValidationError("weighted_glasso: penalty and covariance dimensions differ");
  if (!(options.tol > Scalar(0))) throw ValidationError("weighted_glasso: tol must be positive");
  if (!sigma_in.allFinite() || !penalty_in.allFinite())
    throw ValidationError("weighted_glasso: non-finite input");
  if ((penalty_in.array() < Scalar(0)).any())
    throw ValidationError("weighted_glasso: negative penalty");

  const Mat sigma = sigma_in;
  const Eigen::Index p = sigma.rows();
  if ((sigma.diagonal().array() <= Scalar(0)).any())
    throw ValidationError("weighted_glasso: covariance has a non-positive diagonal entry");

  PrecisionEstimate<Scalar> est;
  est.penalty = penalty_in;
  est.penalty.diagonal().setZero();
  const Mat& lambda = est.penalty;

  Mat theta;
  Mat w;
  if (warm_start.rows() == p && warm_start.cols() == p && detail::invert_spd(warm_start, w)) {
    theta = (warm_start + warm_start.transpose()) / Scalar(2);
  } else {
    theta = sigma.diagonal().cwiseInverse().asDiagonal();
    w = sigma.diagonal().asDiagonal();
  }

  const Scalar inner_tol = options.tol / Scalar(1000);
  Mat a(p, p);
  Vec t(p), g(p);
  Mat last_theta = theta;

  auto column_step = [&](Eigen::Index j) {
    const Scalar s22 = sigma(j, j);
    // a = (Theta_{-j,-j})^{-1}, embedded with a zero row/column at j.
    a.noalias() = w - (w.col(j) * w.col(j).transpose()) / w(j, j);
    a.row(j).setZero();
    a.col(j).setZero();
    t = theta.col(j);
    t(j) = 0;
    g.noalias() = s22 * (a * t);

    auto pass = [&](bool active_only) {
      Scalar max_step = 0;
      for (Eigen::Index k = 0; k < p; ++k) {
        if (k == j || (active_only && t(k) == Scalar(0))) continue;
        const Scalar curv = s22 * a(k, k);
        const Scalar r = sigma(k, j) + g(k) - curv * t(k);
        const Scalar next = -detail::soft_threshold(r, lambda(k, j)) / curv;
        const Scalar d = next - t(k);
        if (d != Scalar(0)) {
          g.noalias() += (s22 * d) * a.col(k);
          t(k) = next;
          max_step = std::max(max_step, std::abs(d) * curv);
        }
      }
      return max_step;
    };

    for (int outer = 0; outer < 1000; ++outer) {
      if (pass(false) < inner_tol) break;
      for (int inner = 0; inner < 1000; ++inner)
        if (pass(true) < inner_tol) break;
    }

    const Scalar t22 = Scalar(1) / s22 + t.dot(g) / s22;
    theta.col(j) = t;
    theta.row(j) = t.transpose();
    theta(j, j) = t22;
    // Block inverse update of W = Theta^{-1}.
    w.noalias() = a + (g * g.transpose()) / s22;
    w.col(j) = -g;
    w.row(j) = -g.transpose();
    w(j, j) = s22;
  };

  for (int sweep = 1; sweep <= options.max_iter; ++sweep) {
    last_theta = theta;
    for (Eigen::Index j = 0; j < p; ++j) column_step(j);
    est.iterations = sweep;
    if (!theta.allFinite() || !w.allFinite()) {
      theta = last_theta;
      est.converged = false;
      break;
    }
    if (options.record_objective)
      est.objective_trace.push_back(glasso_objective(sigma, lambda, theta));
    Scalar res = detail::kkt_residual_from<Scalar>(sigma, lambda, theta, w);
    if (detail::stopping_gap<Scalar>(sigma, lambda, theta, w, res) <= options.tol) {
      if (!detail::invert_spd(theta, w)) {
        theta = last_theta;
        break;
      }
      res = detail::kkt_residual_from<Scalar>(sigma, lambda, theta, w);
      est.kkt_residual = res;
      if (detail::stopping_gap<Scalar>(sigma, lambda, theta, w, res) <= options.tol) {
        est.converged = true;
        break;
      }
    }
    est.kkt_residual = res;
  }

  est.theta = std::move(theta);
  est.objective = glasso_objective(sigma, lambda, est.theta);
  return est;
}

/// Edge (k,l) is present iff |theta_kl| > zero_tol.
template <class Scalar>
EdgeSupport edge_support(const PrecisionEstimate<Scalar>& est, Scalar zero_tol = Scalar(1e-8)) {
  const auto p = static_cast<int>(est.theta.rows());
  EdgeSupport s = EdgeSupport::empty(p);
  for (int k = 0; k < p; ++k)
    for (int l = k + 1; l < p; ++l)
      if (std::abs(est.theta(k, l)) > zero_tol) {
        s.adjacency(k, l) = 1;
        s.adjacency(l, k) = 1;
      }
  return s;
}

}  // namespace popnet
