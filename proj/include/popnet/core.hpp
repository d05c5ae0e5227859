#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace popnet {

template <class Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <class Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using MatrixXd = Matrix<double>;
using VectorXd = Vector<double>;
using Adjacency = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>;

/// Bad input or configuration. The CLI maps this to exit code 2.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A numerical stage could not produce a usable result. Exit code 3.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Undirected edge between nodes k < l (0-based).
struct Edge {
  int k = 0;
  int l = 0;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

/// Number of unordered node pairs.
constexpr std::size_t pair_count(int p) {
  return p < 2 ? 0 : static_cast<std::size_t>(p) * (p - 1) / 2;
}

/// Position of (k,l), k<l, in the row-major upper-triangle enumeration
/// (0,1), (0,2), ..., (0,p-1), (1,2), ...
constexpr std::size_t edge_index(int k, int l, int p) {
  const auto kk = static_cast<std::size_t>(k);
  return kk * (2 * static_cast<std::size_t>(p) - kk - 1) / 2 +
         static_cast<std::size_t>(l - k - 1);
}

inline Edge edge_at(std::size_t index, int p) {
  int k = 0;
  std::size_t row = static_cast<std::size_t>(p - 1);
  while (index >= row) {
    index -= row;
    ++k;
    --row;
  }
  return {k, k + 1 + static_cast<int>(index)};
}

inline std::vector<Edge> all_edges(int p) {
  std::vector<Edge> out;
  out.reserve(pair_count(p));
  for (int k = 0; k < p; ++k)
    for (int l = k + 1; l < p; ++l) out.push_back({k, l});
  return out;
}

enum class Group : std::uint8_t { A = 0, B = 1 };

inline char group_char(Group g) { return g == Group::A ? 'A' : 'B'; }

/// One subject's T x p observation matrix (rows = time points).
struct SubjectData {
  std::string id;
  Group group = Group::A;
  MatrixXd x;
};

using Dataset = std::vector<SubjectData>;

}  // namespace popnet
