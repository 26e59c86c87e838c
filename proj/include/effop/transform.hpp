#pragma once

#include <string>
#include <vector>

#include "effop/error.hpp"
#include "effop/linalg.hpp"
#include "effop/spaces.hpp"

namespace effop {

/// Relative decoupling tolerance: residual <= 1e-9 * (1 + ||O||_F).
inline constexpr double kDecouplingRelTol = 1e-9;

inline double decoupling_tolerance(const ObservableMatrix& o) {
  return kDecouplingRelTol * (1.0 + o.frobenius_norm());
}

/// How a decoupling map came to be.
struct MapProvenance {
  enum class Kind { Direct, Iterative, External };
  Kind kind = Kind::External;
  std::vector<Index> selection;  // J (0-based) for Direct
  int iterations = 0;            // for Iterative
  double residual = 0.0;         // for Iterative
};

/// The (N-d) x d block s of S = QSP for a given model space. S^2 = 0, so
/// e^{+-S} = 1 +- S; both are formed from s alone.
class DecouplingMap {
 public:
  DecouplingMap() = default;

  DecouplingMap(ModelSpace ms, Matrix s, MapProvenance provenance = {})
      : ms_(std::move(ms)), s_(std::move(s)), provenance_(std::move(provenance)) {
    if (s_.rows() != ms_.complement_dim() || s_.cols() != ms_.dim())
      throw Error(ErrorCode::DimensionMismatch,
                  "s must be " + std::to_string(ms_.complement_dim()) + "x" +
                      std::to_string(ms_.dim()) + ", got " + std::to_string(s_.rows()) + "x" +
                      std::to_string(s_.cols()));
    if (!all_finite(s_)) throw Error(ErrorCode::NonFinite, "s contains NaN or Inf");
  }

  /// s = 0 for the given model space.
  static DecouplingMap zero(const ModelSpace& ms) {
    return DecouplingMap(ms, Matrix::Zero(ms.complement_dim(), ms.dim()));
  }

  const ModelSpace& model_space() const { return ms_; }
  const Matrix& s() const { return s_; }
  const MapProvenance& provenance() const { return provenance_; }
  Index total_dim() const { return ms_.total_dim(); }
  Index dim() const { return ms_.dim(); }

  /// S embedded as an N x N matrix in the original index order.
  Matrix embedded() const {
    Matrix out = Matrix::Zero(total_dim(), total_dim());
    out(ms_.complement(), ms_.indices()) = s_;
    return out;
  }

 private:
  ModelSpace ms_;
  Matrix s_;
  MapProvenance provenance_;
};

/// s from arbitrary independent columns spanning Lin Psi:
/// s [P Psi] = [Q Psi], solved as [P Psi]^T s^T = [Q Psi]^T by a
/// column-pivoted QR rather than an explicit inverse.
inline DecouplingMap construct_s_from_columns(const Matrix& columns, const ModelSpace& ms,
                                              MapProvenance provenance = {}) {
  if (columns.rows() != ms.total_dim() || columns.cols() != ms.dim())
    throw Error(ErrorCode::DimensionMismatch, "columns must be N x d for the model space");
  const Matrix p_block = p_rows(columns, ms);
  if (!is_invertible(p_block))
    throw Error(ErrorCode::SingularProjection,
                "[P_K Psi_J] is singular for K=" + format_indices(ms.indices()) +
                    " (condition number " + std::to_string(condition_number(p_block)) + ")");
  const Matrix q_block = q_rows(columns, ms);
  Matrix s;
  if (q_block.rows() == 0) {
    s.resize(0, ms.dim());
  } else {
    Eigen::ColPivHouseholderQR<Matrix> qr(p_block.transpose());
    s = qr.solve(q_block.transpose()).transpose();
  }
  return DecouplingMap(ms, std::move(s), std::move(provenance));
}

/// s_J = [Q Psi_J][P Psi_J]^{-1}.
inline DecouplingMap construct_s_direct(const EigenSelection& sel, const ModelSpace& ms) {
  MapProvenance prov;
  prov.kind = MapProvenance::Kind::Direct;
  prov.selection = sel.indices;
  return construct_s_from_columns(sel.vectors, ms, std::move(prov));
}

/// e^{sign * S} = I + sign * S in the original index order.
inline Matrix exp_s(const DecouplingMap& dm, int sign) {
  Matrix out = Matrix::Identity(dm.total_dim(), dm.total_dim());
  out(dm.model_space().complement(), dm.model_space().indices()) =
      (sign >= 0 ? 1.0 : -1.0) * dm.s();
  return out;
}

namespace detail {

inline void check_dims(const ObservableMatrix& o, const DecouplingMap& dm) {
  if (o.dim() != dm.total_dim())
    throw Error(ErrorCode::DimensionMismatch,
                "observable is " + std::to_string(o.dim()) + "-dimensional, map expects " +
                    std::to_string(dm.total_dim()));
}

}  // namespace detail

/// O~ = e^{-S} O e^{S} by dense multiplication (generally non-Hermitian).
inline Matrix similarity_transform(const ObservableMatrix& o, const DecouplingMap& dm) {
  detail::check_dims(o, dm);
  return exp_s(dm, -1) * o.matrix() * exp_s(dm, +1);
}

/// O partitioned as [[a, b], [b+, f]] with respect to the model space.
struct PartitionedBlocks {
  Matrix a, b, b_dagger, f;
};

inline PartitionedBlocks partition(const Matrix& o, const ModelSpace& ms) {
  const auto& k = ms.indices();
  const auto& kc = ms.complement();
  return {o(k, k), o(k, kc), o(kc, k), o(kc, kc)};
}

/// The four blocks of e^{-S} O e^{S} in the K-first ordering.
struct TransformedBlocks {
  Matrix pp;  // a + b s
  Matrix pq;  // b
  Matrix qp;  // -s (a + b s) + b+ + f s
  Matrix qq;  // f - s b

  /// Reassembles the N x N matrix in original index order.
  Matrix assemble(const ModelSpace& ms) const {
    Matrix out(ms.total_dim(), ms.total_dim());
    const auto& k = ms.indices();
    const auto& kc = ms.complement();
    out(k, k) = pp;
    out(k, kc) = pq;
    out(kc, k) = qp;
    out(kc, kc) = qq;
    return out;
  }
};

inline TransformedBlocks transformed_blocks(const ObservableMatrix& o, const DecouplingMap& dm) {
  detail::check_dims(o, dm);
  const auto blk = partition(o.matrix(), dm.model_space());
  const Matrix& s = dm.s();
  TransformedBlocks out;
  out.pp = blk.a + blk.b * s;
  out.pq = blk.b;
  out.qp = -s * out.pp + blk.b_dagger + blk.f * s;
  out.qq = blk.f - s * blk.b;
  return out;
}

/// ||Q O~ P||_F = || -s(a + bs) + b+ + fs ||_F.
inline double decoupling_residual(const ObservableMatrix& o, const DecouplingMap& dm) {
  detail::check_dims(o, dm);
  const auto blk = partition(o.matrix(), dm.model_space());
  const Matrix& s = dm.s();
  if (s.rows() == 0) return 0.0;
  return (-s * (blk.a + blk.b * s) + blk.b_dagger + blk.f * s).norm();
}

inline bool is_decoupled(const ObservableMatrix& o, const DecouplingMap& dm) {
  return decoupling_residual(o, dm) <= decoupling_tolerance(o);
}

/// Inverse image of a model-space vector: P-components alpha, Q-components
/// s alpha, in original index order.
inline Vector retrieve_full_vector(const Vector& alpha, const DecouplingMap& dm) {
  if (alpha.size() != dm.dim())
    throw Error(ErrorCode::DimensionMismatch,
                "alpha has length " + std::to_string(alpha.size()) + ", model space has d=" +
                    std::to_string(dm.dim()));
  Vector out(dm.total_dim());
  out(dm.model_space().indices()) = alpha;
  out(dm.model_space().complement()) = dm.s() * alpha;
  return out;
}

/// ||Q psi - s P psi||: zero exactly for psi in Lin Psi_J of a direct map.
inline double subspace_membership_residual(const Vector& psi, const DecouplingMap& dm) {
  if (psi.size() != dm.total_dim())
    throw Error(ErrorCode::DimensionMismatch, "vector length does not match the map");
  const Vector p = psi(dm.model_space().indices());
  const Vector q = psi(dm.model_space().complement());
  if (q.size() == 0) return 0.0;
  return (q - dm.s() * p).norm();
}

}  // namespace effop
