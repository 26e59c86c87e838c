#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "effop/effective.hpp"
#include "effop/error.hpp"
#include "effop/linalg.hpp"
#include "effop/spaces.hpp"
#include "effop/transform.hpp"

namespace effop {

inline constexpr double kCommutatorRelTol = 1e-10;
/// Bound on ||[O_eff^r, O_eff^s]||_F for a shared decoupling map.
inline constexpr double kEffectiveCommutatorTol = 1e-9;

/// Pairwise-commuting Hermitian observables; member 0 is the Hamiltonian.
class CommutingSet {
 public:
  const std::vector<ObservableMatrix>& members() const { return members_; }
  const ObservableMatrix& operator[](std::size_t k) const { return members_[k]; }
  std::size_t size() const { return members_.size(); }
  Index dim() const { return members_.front().dim(); }
  double max_commutator_norm() const { return max_commutator_; }

  friend CommutingSet verify_commuting(std::vector<ObservableMatrix> members, double comm_tol);

 private:
  std::vector<ObservableMatrix> members_;
  double max_commutator_ = 0.0;
};

/// Validates ||[O^r, O^s]||_F <= comm_tol for every pair. A negative
/// comm_tol selects the default 1e-10 * max_s ||O^s||_F.
inline CommutingSet verify_commuting(std::vector<ObservableMatrix> members, double comm_tol = -1.0) {
  if (members.empty()) throw Error(ErrorCode::DimensionMismatch, "commuting set is empty");
  const Index n = members.front().dim();
  double max_norm = 0.0;
  for (const auto& m : members) {
    if (m.dim() != n)
      throw Error(ErrorCode::DimensionMismatch, "members of a commuting set differ in dimension");
    max_norm = std::max(max_norm, m.frobenius_norm());
  }
  if (comm_tol < 0.0) comm_tol = kCommutatorRelTol * max_norm;
  CommutingSet out;
  for (std::size_t r = 0; r < members.size(); ++r)
    for (std::size_t s = r + 1; s < members.size(); ++s) {
      const double c = commutator(members[r].matrix(), members[s].matrix()).norm();
      out.max_commutator_ = std::max(out.max_commutator_, c);
      if (c > comm_tol)
        throw Error(ErrorCode::NotCommuting, "members " + std::to_string(r + 1) + " and " +
                                                 std::to_string(s + 1) + ": ||[A,B]||_F = " +
                                                 std::to_string(c));
    }
  out.members_ = std::move(members);
  return out;
}

/// Shared eigenvectors with one eigenvalue per member: values(i, sigma) = E_i^sigma.
struct SimultaneousEigenbasis {
  Matrix vectors;          // N x N, columns psi_i
  Eigen::MatrixXd values;  // N x c
  /// All eigenvalue tuples distinct (one-dimensional joint eigenspaces).
  bool complete = true;

  Index size() const { return vectors.cols(); }
  /// Per-member view as ordinary eigenpairs (not sorted by that member).
  Eigenpairs member(std::size_t sigma) const {
    return {values.col(static_cast<Index>(sigma)), vectors};
  }
};

namespace detail {

/// Splits the columns of `basis` (an orthonormal block of a joint eigenspace
/// of members < sigma) by diagonalizing member sigma inside it, recursing on
/// any remaining degeneracy.
inline void refine_cluster(const CommutingSet& cs, std::size_t sigma, Matrix basis,
                           std::vector<Vector>& out) {
  if (basis.cols() == 1 || sigma >= cs.size()) {
    for (Index k = 0; k < basis.cols(); ++k) out.push_back(basis.col(k));
    return;
  }
  const Matrix& m = cs[sigma].matrix();
  Matrix sub = basis.adjoint() * m * basis;
  sub = 0.5 * (sub + sub.adjoint()).eval();
  Eigen::SelfAdjointEigenSolver<Matrix> es(sub);
  if (es.info() != Eigen::Success)
    throw Error(ErrorCode::SolverFailure, "eigensolver failed inside a degenerate cluster");
  const Matrix rotated = basis * es.eigenvectors();
  const double tol = 1e-9 * (1.0 + cs[sigma].frobenius_norm());
  Index start = 0;
  for (Index k = 1; k <= rotated.cols(); ++k) {
    if (k == rotated.cols() || es.eigenvalues()(k) - es.eigenvalues()(k - 1) > tol) {
      refine_cluster(cs, sigma + 1, rotated.middleCols(start, k - start), out);
      start = k;
    }
  }
}

}  // namespace detail

/// Diagonalizes a fixed-seed random real combination sum_s w_s O^s, then
/// resolves each degenerate cluster member by member. Columns are ordered
/// by the eigenvalue tuples (member 0 first), phases normalized.
inline SimultaneousEigenbasis simultaneous_eigenbasis(const CommutingSet& cs) {
  const Index n = cs.dim();
  std::mt19937_64 rng(0x5eedULL);
  std::uniform_real_distribution<double> weight(0.5, 1.5);
  Matrix combo = Matrix::Zero(n, n);
  for (const auto& m : cs.members()) combo += weight(rng) * m.matrix() / (1.0 + m.frobenius_norm());
  combo = 0.5 * (combo + combo.adjoint()).eval();
  Eigen::SelfAdjointEigenSolver<Matrix> es(combo);
  if (es.info() != Eigen::Success)
    throw Error(ErrorCode::SolverFailure, "eigensolver failed on the combined observable");

  std::vector<Vector> vecs;
  const double tol = 1e-9 * (1.0 + combo.norm());
  Index start = 0;
  for (Index k = 1; k <= n; ++k) {
    if (k == n || es.eigenvalues()(k) - es.eigenvalues()(k - 1) > tol) {
      detail::refine_cluster(cs, 0, es.eigenvectors().middleCols(start, k - start), vecs);
      start = k;
    }
  }

  const std::size_t c = cs.size();
  std::vector<std::vector<double>> tuples(vecs.size(), std::vector<double>(c));
  for (std::size_t i = 0; i < vecs.size(); ++i) {
    normalize_phase(vecs[i]);
    for (std::size_t s = 0; s < c; ++s)
      tuples[i][s] = vecs[i].dot(cs[s].matrix() * vecs[i]).real();
  }

  std::vector<double> member_tol(c);
  for (std::size_t s = 0; s < c; ++s) member_tol[s] = 1e-9 * (1.0 + cs[s].frobenius_norm());
  auto tuple_less = [&](std::size_t x, std::size_t y) {
    for (std::size_t s = 0; s < c; ++s)
      if (std::abs(tuples[x][s] - tuples[y][s]) > member_tol[s]) return tuples[x][s] < tuples[y][s];
    return lexicographic_less(vecs[x], vecs[y]);
  };
  std::vector<std::size_t> order(vecs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), tuple_less);

  SimultaneousEigenbasis out;
  out.vectors.resize(n, n);
  out.values.resize(n, static_cast<Index>(c));
  for (std::size_t k = 0; k < order.size(); ++k) {
    out.vectors.col(static_cast<Index>(k)) = vecs[order[k]];
    for (std::size_t s = 0; s < c; ++s)
      out.values(static_cast<Index>(k), static_cast<Index>(s)) = tuples[order[k]][s];
  }
  for (std::size_t k = 1; k < order.size(); ++k) {
    bool same = true;
    for (std::size_t s = 0; s < c; ++s)
      same = same && std::abs(tuples[order[k]][s] - tuples[order[k - 1]][s]) <= member_tol[s];
    if (same) out.complete = false;
  }

  for (std::size_t s = 0; s < c; ++s) {
    const double etol = eigen_tolerance(cs[s].matrix());
    for (Index i = 0; i < n; ++i) {
      const Vector v = out.vectors.col(i);
      const double res = (cs[s].matrix() * v - out.values(i, static_cast<Index>(s)) * v).norm();
      if (res > etol)
        throw Error(ErrorCode::SolverFailure, "member " + std::to_string(s + 1) +
                                                  " not diagonalized (residual " +
                                                  std::to_string(res) + ")");
    }
  }
  return out;
}

/// Selection J out of a simultaneous eigenbasis; `values` holds member `sigma`.
inline EigenSelection select_simultaneous(const SimultaneousEigenbasis& basis,
                                          const std::vector<Index>& j, std::size_t sigma = 0) {
  return select_eigenvectors(basis.member(sigma), j);
}

/// One s from the shared eigenvectors Psi_J; it decouples every member.
inline DecouplingMap common_s(const CommutingSet& cs, const SimultaneousEigenbasis& basis,
                              const std::vector<Index>& j, const ModelSpace& k) {
  if (k.total_dim() != cs.dim())
    throw Error(ErrorCode::DimensionMismatch, "model space does not match the commuting set");
  return construct_s_direct(select_simultaneous(basis, j), k);
}

struct EffectivePair {
  EffectiveOperator first;
  SecondTypeOperator second;
};

struct EffectiveSet {
  std::vector<EffectivePair> pairs;  // one per member
  double max_commutator_norm = 0.0;  // over pairs of first-type operators
  /// max over members of ||O_eff^s [P Psi_J] - [P Psi_J] Lambda_J^s||_F; only
  /// filled when the selection is supplied.
  double max_eigen_relation_residual = 0.0;
};

/// O_eff^s and O_bar^s for every member under one map, plus the commutator
/// report. Throws NotDecoupled naming the first member the map fails on.
inline EffectiveSet effective_set(const CommutingSet& cs, const DecouplingMap& dm,
                                  const SimultaneousEigenbasis* basis = nullptr) {
  EffectiveSet out;
  for (std::size_t s = 0; s < cs.size(); ++s) {
    try {
      out.pairs.push_back({first_type(cs[s], dm), second_type(cs[s], dm)});
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NotDecoupled) throw;
      throw Error(ErrorCode::NotDecoupled, "member " + std::to_string(s + 1) + ": " + e.what());
    }
  }
  for (std::size_t r = 0; r < out.pairs.size(); ++r)
    for (std::size_t s = r + 1; s < out.pairs.size(); ++s)
      out.max_commutator_norm =
          std::max(out.max_commutator_norm,
                   commutator(out.pairs[r].first.matrix, out.pairs[s].first.matrix).norm());
  if (basis != nullptr && dm.provenance().kind == MapProvenance::Kind::Direct) {
    const auto& j = dm.provenance().selection;
    for (std::size_t s = 0; s < cs.size(); ++s) {
      const EigenSelection sel = select_simultaneous(*basis, j, s);
      const Matrix p = p_rows(sel.vectors, dm.model_space());
      out.max_eigen_relation_residual =
          std::max(out.max_eigen_relation_residual,
                   (out.pairs[s].first.matrix * p - p * sel.lambda()).norm());
    }
  }
  return out;
}

/// The single (second-type) representative of an observable outside the
/// commuting set. No decoupling requirement.
inline SecondTypeOperator second_type_only(const ObservableMatrix& outside, const DecouplingMap& dm) {
  return second_type(outside, dm);
}

struct DecompositionBlock {
  std::vector<Index> selection;  // J_r (0-based)
  DecouplingMap map;
  std::vector<EffectivePair> pairs;  // per member
};

/// H_N = Lin Psi_{J_1} + ... + Lin Psi_{J_a}, each block with its own map
/// and representatives.
struct SpaceDecomposition {
  std::vector<DecompositionBlock> blocks;
  /// Per member: union of block spectra of O_eff^s against spec(O^s).
  std::vector<SpectrumMatch> spectrum_union;
};

inline void validate_partition(const std::vector<std::vector<Index>>& parts, Index n) {
  std::vector<int> seen(static_cast<std::size_t>(n), 0);
  for (std::size_t r = 0; r < parts.size(); ++r) {
    if (parts[r].empty())
      throw Error(ErrorCode::PartitionInvalid, "block " + std::to_string(r + 1) + " is empty");
    for (Index i : parts[r]) {
      if (i < 0 || i >= n)
        throw Error(ErrorCode::PartitionInvalid, "index " + std::to_string(i + 1) + " out of range");
      if (seen[static_cast<std::size_t>(i)]++)
        throw Error(ErrorCode::PartitionInvalid,
                    "index " + std::to_string(i + 1) + " appears in more than one block");
    }
  }
  for (Index i = 0; i < n; ++i)
    if (!seen[static_cast<std::size_t>(i)])
      throw Error(ErrorCode::PartitionInvalid, "index " + std::to_string(i + 1) + " not covered");
}

/// Builds per-block maps and representatives. Blocks are independent; they
/// are processed in order and the result lists them in block order.
inline SpaceDecomposition decompose_space(const CommutingSet& cs,
                                          const std::vector<std::vector<Index>>& selections,
                                          const std::vector<ModelSpace>& model_spaces) {
  const Index n = cs.dim();
  if (selections.size() != model_spaces.size())
    throw Error(ErrorCode::PartitionInvalid, "need one model space per block");
  validate_partition(selections, n);
  const SimultaneousEigenbasis basis = simultaneous_eigenbasis(cs);

  SpaceDecomposition out;
  for (std::size_t r = 0; r < selections.size(); ++r) {
    const ModelSpace& k = model_spaces[r];
    if (k.total_dim() != n || k.dim() != static_cast<Index>(selections[r].size()))
      throw Error(ErrorCode::PartitionInvalid,
                  "block " + std::to_string(r + 1) + ": |K| must equal |J| and K must live in 1.." +
                      std::to_string(n));
    DecompositionBlock blk;
    blk.selection = selections[r];
    try {
      blk.map = common_s(cs, basis, selections[r], k);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::SingularProjection) throw;
      throw Error(ErrorCode::SingularProjection, "block " + std::to_string(r + 1) + ": " + e.what());
    }
    blk.pairs = effective_set(cs, blk.map).pairs;
    out.blocks.push_back(std::move(blk));
  }

  for (std::size_t s = 0; s < cs.size(); ++s) {
    std::vector<Complex> joined;
    for (const auto& blk : out.blocks) {
      const auto ev = blk.pairs[s].first.eigenvalues();
      joined.insert(joined.end(), ev.begin(), ev.end());
    }
    const auto full = to_complex(eigendecompose(cs[s]).values);
    out.spectrum_union.push_back(match_spectra(joined, full, 1e-9));
  }
  return out;
}

}  // namespace effop
