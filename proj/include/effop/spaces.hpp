#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "effop/error.hpp"
#include "effop/linalg.hpp"

namespace effop {

/// Relative Hermiticity tolerance (scaled by the largest entry modulus).
inline constexpr double kHermitianRelTol = 1e-12;
/// Eigen-residual tolerance, scaled by (1 + ||O||_F).
inline constexpr double kEigenResidualRelTol = 1e-9;

inline double eigen_tolerance(const Matrix& m) { return kEigenResidualRelTol * (1.0 + m.norm()); }

/// A validated N x N Hermitian matrix. The stored entries are the exact
/// Hermitian part (M + M^dagger) / 2 of the input.
class ObservableMatrix {
 public:
  ObservableMatrix() = default;

  Index dim() const { return matrix_.rows(); }
  const Matrix& matrix() const { return matrix_; }
  double frobenius_norm() const { return matrix_.norm(); }

  friend ObservableMatrix validate_hermitian(const Matrix& m);

 private:
  explicit ObservableMatrix(Matrix m) : matrix_(std::move(m)) {}
  Matrix matrix_;
};

/// Accepts `m` if it is square, finite and Hermitian to within
/// 1e-12 * max|m_ij|; returns its symmetrized copy.
inline ObservableMatrix validate_hermitian(const Matrix& m) {
  if (m.rows() != m.cols() || m.rows() == 0)
    throw Error(ErrorCode::DimensionMismatch, "observable must be a non-empty square matrix");
  if (!all_finite(m)) throw Error(ErrorCode::NonFinite, "matrix contains NaN or Inf");
  const double defect = hermiticity_defect(m);
  const double tol = kHermitianRelTol * max_abs_entry(m);
  if (defect > tol) {
    std::ostringstream msg;
    msg << "max |M_ij - conj(M_ji)| = " << defect << " exceeds " << tol;
    throw Error(ErrorCode::NotHermitian, msg.str());
  }
  Matrix sym = m;
  for (Index i = 0; i < m.rows(); ++i) {
    sym(i, i) = Complex(m(i, i).real(), 0.0);
    for (Index j = i + 1; j < m.cols(); ++j) {
      sym(i, j) = 0.5 * (m(i, j) + std::conj(m(j, i)));
      sym(j, i) = std::conj(sym(i, j));
    }
  }
  return ObservableMatrix(std::move(sym));
}

/// Index subset K of {0..N-1} (stored 0-based) that spans the model space,
/// together with the permutation that lists K first and its complement after.
class ModelSpace {
 public:
  ModelSpace() = default;

  /// `indices` are 0-based; they must be strictly increasing and in range.
  ModelSpace(Index total_dim, std::vector<Index> indices)
      : total_dim_(total_dim), indices_(std::move(indices)) {
    if (total_dim_ < 1) throw Error(ErrorCode::DimensionMismatch, "total dimension must be >= 1");
    if (indices_.empty()) throw Error(ErrorCode::IndexOutOfRange, "model space must be non-empty");
    if (static_cast<Index>(indices_.size()) > total_dim_)
      throw Error(ErrorCode::IndexOutOfRange, "model space larger than the full space");
    for (std::size_t k = 0; k < indices_.size(); ++k) {
      if (indices_[k] < 0 || indices_[k] >= total_dim_)
        throw Error(ErrorCode::IndexOutOfRange,
                    "index " + std::to_string(indices_[k] + 1) + " outside 1.." +
                        std::to_string(total_dim_));
      if (k > 0 && indices_[k] == indices_[k - 1])
        throw Error(ErrorCode::DuplicateIndex, "index " + std::to_string(indices_[k] + 1));
      if (k > 0 && indices_[k] < indices_[k - 1])
        throw Error(ErrorCode::IndexOutOfRange, "model-space indices must be increasing");
    }
    std::vector<bool> in_k(static_cast<std::size_t>(total_dim_), false);
    for (Index i : indices_) in_k[static_cast<std::size_t>(i)] = true;
    for (Index i = 0; i < total_dim_; ++i)
      if (!in_k[static_cast<std::size_t>(i)]) complement_.push_back(i);
  }

  /// 1-based input, in any order; duplicates are rejected.
  static ModelSpace from_one_based(Index total_dim, const std::vector<Index>& one_based) {
    std::vector<Index> idx;
    idx.reserve(one_based.size());
    for (Index k : one_based) idx.push_back(k - 1);
    std::sort(idx.begin(), idx.end());
    if (std::adjacent_find(idx.begin(), idx.end()) != idx.end())
      throw Error(ErrorCode::DuplicateIndex, "repeated model-space index");
    return ModelSpace(total_dim, std::move(idx));
  }

  Index total_dim() const { return total_dim_; }
  Index dim() const { return static_cast<Index>(indices_.size()); }
  Index complement_dim() const { return total_dim_ - dim(); }
  const std::vector<Index>& indices() const { return indices_; }
  const std::vector<Index>& complement() const { return complement_; }

  /// perm[k] = original index placed at position k (K first, then the rest).
  std::vector<Index> permutation() const {
    std::vector<Index> perm(indices_);
    perm.insert(perm.end(), complement_.begin(), complement_.end());
    return perm;
  }

  std::vector<Index> one_based() const {
    std::vector<Index> out;
    for (Index i : indices_) out.push_back(i + 1);
    return out;
  }

  friend bool operator==(const ModelSpace& a, const ModelSpace& b) {
    return a.total_dim_ == b.total_dim_ && a.indices_ == b.indices_;
  }

 private:
  Index total_dim_ = 0;
  std::vector<Index> indices_;
  std::vector<Index> complement_;
};

/// "1,2,5" style rendering of 0-based indices as 1-based labels.
inline std::string format_indices(const std::vector<Index>& zero_based) {
  std::string out;
  for (std::size_t k = 0; k < zero_based.size(); ++k) {
    if (k) out += ',';
    out += std::to_string(zero_based[k] + 1);
  }
  return out;
}

struct Projectors {
  Matrix P;
  Matrix Q;
};

inline Projectors projectors(const ModelSpace& ms) {
  const Index n = ms.total_dim();
  Projectors out{Matrix::Zero(n, n), Matrix::Identity(n, n)};
  for (Index i : ms.indices()) {
    out.P(i, i) = 1.0;
    out.Q(i, i) = 0.0;
  }
  return out;
}

/// Rows of `m` belonging to K (the "P part" as a d-row block).
inline Matrix p_rows(const Matrix& m, const ModelSpace& ms) { return m(ms.indices(), Eigen::all); }
/// Rows of `m` belonging to the complement of K.
inline Matrix q_rows(const Matrix& m, const ModelSpace& ms) {
  return m(ms.complement(), Eigen::all);
}

/// All N eigenpairs, eigenvalues ascending, eigenvectors as columns.
struct Eigenpairs {
  RealVector values;
  Matrix vectors;

  Index size() const { return values.size(); }
};

namespace detail {

/// Ascending eigenvalues; within a cluster of (numerically) equal eigenvalues
/// the phase-normalized eigenvectors are ordered lexicographically.
inline void canonical_order(RealVector& values, Matrix& vectors, double cluster_tol) {
  const Index n = values.size();
  for (Index k = 0; k < n; ++k) normalize_phase(vectors.col(k));
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  // values arrive ascending from the solver; cluster on consecutive gaps
  std::vector<Index> cluster(static_cast<std::size_t>(n), 0);
  for (Index k = 1; k < n; ++k)
    cluster[static_cast<std::size_t>(k)] =
        cluster[static_cast<std::size_t>(k - 1)] + (values(k) - values(k - 1) > cluster_tol ? 1 : 0);
  std::stable_sort(order.begin(), order.end(), [&](Index x, Index y) {
    const Index cx = cluster[static_cast<std::size_t>(x)];
    const Index cy = cluster[static_cast<std::size_t>(y)];
    if (cx != cy) return cx < cy;
    return lexicographic_less(vectors.col(x), vectors.col(y));
  });
  RealVector v2(n);
  Matrix m2(vectors.rows(), n);
  for (Index k = 0; k < n; ++k) {
    v2(k) = values(order[static_cast<std::size_t>(k)]);
    m2.col(k) = vectors.col(order[static_cast<std::size_t>(k)]);
  }
  values = std::move(v2);
  vectors = std::move(m2);
}

}  // namespace detail

/// Dense Hermitian eigensolve (Eigen's tridiagonal QR). Eigenvalues are
/// ascending; degenerate ties are broken by eigenvector order after phase
/// normalization (first significant component real-positive).
inline Eigenpairs eigendecompose(const ObservableMatrix& o) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(o.matrix());
  if (solver.info() != Eigen::Success)
    throw Error(ErrorCode::SolverFailure, "Hermitian eigensolver did not converge");
  Eigenpairs out{solver.eigenvalues(), solver.eigenvectors()};
  detail::canonical_order(out.values, out.vectors, 1e-10 * (1.0 + o.frobenius_norm()));
  const double tol = eigen_tolerance(o.matrix());
  for (Index k = 0; k < out.size(); ++k) {
    const double res = (o.matrix() * out.vectors.col(k) - out.values(k) * out.vectors.col(k)).norm();
    if (res > tol)
      throw Error(ErrorCode::SolverFailure,
                  "eigen-residual " + std::to_string(res) + " above tolerance");
  }
  return out;
}

/// A chosen set J of d eigenpairs (J stored 0-based, in the caller's order).
struct EigenSelection {
  std::vector<Index> indices;
  RealVector values;
  Matrix vectors;  // N x d, columns psi_i

  Index dim() const { return static_cast<Index>(indices.size()); }
  Index total_dim() const { return vectors.rows(); }
  /// Lambda_J
  Matrix lambda() const { return values.cast<Complex>().asDiagonal(); }
};

namespace detail {

inline void check_index_set(const std::vector<Index>& idx, Index n, const char* what) {
  if (idx.empty()) throw Error(ErrorCode::IndexOutOfRange, std::string(what) + " is empty");
  std::vector<Index> sorted(idx);
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t k = 0; k < sorted.size(); ++k) {
    if (sorted[k] < 0 || sorted[k] >= n)
      throw Error(ErrorCode::IndexOutOfRange, std::string(what) + " index " +
                                                  std::to_string(sorted[k] + 1) + " outside 1.." +
                                                  std::to_string(n));
    if (k > 0 && sorted[k] == sorted[k - 1])
      throw Error(ErrorCode::DuplicateIndex,
                  std::string(what) + " index " + std::to_string(sorted[k] + 1));
  }
}

}  // namespace detail

/// Picks eigenpairs J (0-based) out of a full decomposition.
inline EigenSelection select_eigenvectors(const Eigenpairs& pairs, const std::vector<Index>& j) {
  detail::check_index_set(j, pairs.size(), "J");
  EigenSelection sel;
  sel.indices = j;
  sel.values.resize(static_cast<Index>(j.size()));
  sel.vectors.resize(pairs.vectors.rows(), static_cast<Index>(j.size()));
  for (std::size_t k = 0; k < j.size(); ++k) {
    sel.values(static_cast<Index>(k)) = pairs.values(j[k]);
    sel.vectors.col(static_cast<Index>(k)) = pairs.vectors.col(j[k]);
  }
  if (numerical_rank(sel.vectors) != sel.dim())
    throw Error(ErrorCode::SingularProjection, "selected eigenvectors are linearly dependent");
  return sel;
}

/// [P_K Psi_J]: the d x d matrix of model-space components.
inline Matrix projected_block(const Matrix& columns, const ModelSpace& ms) {
  return p_rows(columns, ms);
}

/// A well-conditioned model space for the columns of `columns` (N x d),
/// picked by column-pivoted QR on its transpose. Not necessarily optimal.
inline ModelSpace pivoted_model_space(const Matrix& columns) {
  Eigen::ColPivHouseholderQR<Matrix> qr(columns.transpose());
  std::vector<Index> k;
  for (Index i = 0; i < columns.cols(); ++i) k.push_back(qr.colsPermutation().indices()(i));
  std::sort(k.begin(), k.end());
  return ModelSpace(columns.rows(), std::move(k));
}

struct ModelSpaceCandidate {
  ModelSpace space;
  double condition_number;
  double min_singular_value;  // ||s||_2^2 = 1/sigma_min^2 - 1 for orthonormal Psi_J
};

/// Visits every d-subset of {0..n-1} in lexicographic order.
template <class Visitor>
void for_each_subset(Index n, Index d, Visitor&& visit) {
  if (d < 0 || d > n) return;
  std::vector<Index> idx(static_cast<std::size_t>(d));
  std::iota(idx.begin(), idx.end(), Index{0});
  while (true) {
    visit(static_cast<const std::vector<Index>&>(idx));
    Index k = d - 1;
    while (k >= 0 && idx[static_cast<std::size_t>(k)] == n - d + k) --k;
    if (k < 0) return;
    ++idx[static_cast<std::size_t>(k)];
    for (Index m = k + 1; m < d; ++m)
      idx[static_cast<std::size_t>(m)] = idx[static_cast<std::size_t>(m - 1)] + 1;
  }
}

inline std::uint64_t binomial(Index n, Index k) {
  if (k < 0 || k > n) return 0;
  k = std::min(k, n - k);
  std::uint64_t out = 1;
  for (Index i = 1; i <= k; ++i) out = out * static_cast<std::uint64_t>(n - k + i) / static_cast<std::uint64_t>(i);
  return out;
}

/// Every legitimate model space K for the selection (those with invertible
/// [P_K Psi_J] and condition number <= cond_cap), best-conditioned first.
/// Ties (always the case for d = 1) go to the larger sigma_min, i.e. the
/// smaller s.
inline std::vector<ModelSpaceCandidate> enumerate_model_spaces(const EigenSelection& sel,
                                                               double cond_cap = kDefaultCondCap) {
  std::vector<ModelSpaceCandidate> out;
  const Index n = sel.total_dim();
  for_each_subset(n, sel.dim(), [&](const std::vector<Index>& k) {
    const Matrix block = sel.vectors(k, Eigen::all);
    const double cond = condition_number(block);
    if (std::isfinite(cond) && cond <= cond_cap && 1.0 / cond >= kSingularRatio) {
      const auto sv = Eigen::JacobiSVD<Matrix>(block).singularValues();
      out.push_back({ModelSpace(n, k), cond, sv(sv.size() - 1)});
    }
  });
  if (out.empty())
    throw Error(ErrorCode::CapTooTight,
                "no model space has [P_K Psi_J] with condition number <= " + std::to_string(cond_cap));
  std::stable_sort(out.begin(), out.end(), [](const auto& x, const auto& y) {
    if (x.condition_number != y.condition_number) return x.condition_number < y.condition_number;
    return x.min_singular_value > y.min_singular_value;
  });
  return out;
}

}  // namespace effop
