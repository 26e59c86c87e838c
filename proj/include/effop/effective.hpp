#pragma once

#include <string>
#include <vector>

#include "effop/error.hpp"
#include "effop/linalg.hpp"
#include "effop/spaces.hpp"
#include "effop/transform.hpp"

namespace effop {

/// Relative tolerance for eigenvalue multiset comparisons.
inline constexpr double kSpectrumRelTol = 1e-8;
/// Relative tolerance for ||Q psi - s P psi|| when testing psi in Lin Psi_J.
inline constexpr double kMembershipRelTol = 1e-8;

/// First-type representative O_eff = P O~ P (d x d, generally non-Hermitian).
struct EffectiveOperator {
  Matrix matrix;
  ModelSpace model_space;
  double residual = 0.0;  // decoupling residual of the map it came from
  MapProvenance provenance;

  std::vector<Complex> eigenvalues() const { return general_eigenvalues(matrix); }
};

/// Second-type representative P e^{S+} O e^{S} P (d x d, Hermitian).
struct SecondTypeOperator {
  Matrix matrix;
  ModelSpace model_space;
  MapProvenance provenance;
};

/// O_eff = a + b s. Refuses maps that do not decouple O.
inline EffectiveOperator first_type(const ObservableMatrix& o, const DecouplingMap& dm) {
  const double res = decoupling_residual(o, dm);
  const double tol = decoupling_tolerance(o);
  if (res > tol)
    throw Error(ErrorCode::NotDecoupled, "||Q O~ P||_F = " + sci(res) + " exceeds " + sci(tol));
  const auto blk = partition(o.matrix(), dm.model_space());
  return {blk.a + blk.b * dm.s(), dm.model_space(), res, dm.provenance()};
}

struct FactorizationReport {
  Matrix qq;  // Q O~ Q = f - s b
  std::vector<Complex> effective_eigenvalues;
  std::vector<Complex> complement_eigenvalues;
  std::vector<Complex> full_eigenvalues;
  SpectrumMatch match;  // (eff U complement) vs full
};

/// Splits spec(O) into spec(O_eff) and spec(Q O~ Q), which must recombine
/// to spec(O) for a decoupling map.
inline FactorizationReport q_block_and_factorization(const ObservableMatrix& o,
                                                     const DecouplingMap& dm) {
  const EffectiveOperator eff = first_type(o, dm);
  const auto blk = partition(o.matrix(), dm.model_space());
  FactorizationReport out;
  out.qq = blk.f - dm.s() * blk.b;
  out.effective_eigenvalues = eff.eigenvalues();
  out.complement_eigenvalues = general_eigenvalues(out.qq);
  out.full_eigenvalues = to_complex(eigendecompose(o).values);
  std::vector<Complex> joined = out.effective_eigenvalues;
  joined.insert(joined.end(), out.complement_eigenvalues.begin(), out.complement_eigenvalues.end());
  out.match = match_spectra(joined, out.full_eigenvalues, kSpectrumRelTol);
  return out;
}

/// Which part of the transformed space an eigenvector of O~ lives in.
enum class EigenvectorCase {
  ModelSpace,  // Q phi = 0: (E, P phi) is an eigenpair of O_eff
  Complement,  // Q phi != 0: Q phi is an eigenvector of Q O~ Q
};

struct EigenvectorClassification {
  EigenvectorCase which = EigenvectorCase::ModelSpace;
  Vector p_part;  // P phi as a d-vector
  Vector q_part;  // Q phi as an (N-d)-vector
  /// Complement case: Q O~ Q (Q phi) = E Q phi (always true when S decouples O).
  bool q_part_is_complement_eigenvector = false;
  /// Complement case: b Q phi = 0, so E is shared by O_eff and Q O~ Q.
  bool common_eigenvalue = false;
  /// E lies in both spec(O_eff) and spec(Q O~ Q).
  bool spectra_intersect_at_e = false;
  /// P phi != 0 and O_eff P phi = E P phi.
  bool p_part_is_effective_eigenvector = false;
  /// If the spectra do not meet at E: (Q phi = 0) <=> p_part_is_effective_eigenvector.
  /// Vacuously true when they do meet.
  bool boundary_criterion_holds = true;
};

/// Classifies an eigenvector phi of O~ = e^{-S} O e^{S} with eigenvalue E.
/// The O_eff / Q O~ Q blocks are read off O~ directly, so the map does not
/// need to decouple O.
inline EigenvectorClassification classify_eigenvector(const ObservableMatrix& o,
                                                      const DecouplingMap& dm, const Vector& phi,
                                                      double e) {
  const Matrix transformed = similarity_transform(o, dm);
  if (phi.size() != o.dim()) throw Error(ErrorCode::DimensionMismatch, "phi has the wrong length");
  const double scale = std::max(1.0, phi.norm());
  const double tol = eigen_tolerance(transformed) * scale;
  if (phi.norm() == 0.0) throw Error(ErrorCode::NotAnEigenvector, "phi is zero");
  const double res = (transformed * phi - e * phi).norm();
  if (res > tol)
    throw Error(ErrorCode::NotAnEigenvector,
                "||O~ phi - E phi|| = " + std::to_string(res) + " exceeds " + std::to_string(tol));

  const ModelSpace& ms = dm.model_space();
  const Matrix eff = transformed(ms.indices(), ms.indices());
  const Matrix pq = transformed(ms.indices(), ms.complement());
  const Matrix qq = transformed(ms.complement(), ms.complement());

  EigenvectorClassification out;
  out.p_part = phi(ms.indices());
  out.q_part = phi(ms.complement());

  const double vec_tol = 1e-10 * scale;
  const bool q_zero = out.q_part.size() == 0 || out.q_part.norm() <= vec_tol;
  out.which = q_zero ? EigenvectorCase::ModelSpace : EigenvectorCase::Complement;
  if (!q_zero) {
    out.q_part_is_complement_eigenvector = (qq * out.q_part - e * out.q_part).norm() <= tol;
    out.common_eigenvalue = (pq * out.q_part).norm() <= tol;
  }

  out.p_part_is_effective_eigenvector =
      out.p_part.norm() > vec_tol && (eff * out.p_part - e * out.p_part).norm() <= tol;

  auto contains = [&](const std::vector<Complex>& spec) {
    for (const Complex& x : spec)
      if (std::abs(x - e) <= kSpectrumRelTol * (1.0 + std::abs(e))) return true;
    return false;
  };
  out.spectra_intersect_at_e =
      contains(general_eigenvalues(eff)) && contains(general_eigenvalues(qq));
  if (!out.spectra_intersect_at_e)
    out.boundary_criterion_holds = (q_zero == out.p_part_is_effective_eigenvector);
  return out;
}

/// Gram matrix gamma_ij = <P psi_i | P psi_j> of the projected eigenvectors.
struct OverlapMatrix {
  Matrix gamma;
  Matrix basis;  // d x d, columns P psi_i as model-space d-vectors
};

inline OverlapMatrix overlap_matrix(const EigenSelection& sel, const ModelSpace& ms) {
  if (sel.total_dim() != ms.total_dim() || sel.dim() != ms.dim())
    throw Error(ErrorCode::DimensionMismatch, "selection and model space disagree");
  Matrix basis = p_rows(sel.vectors, ms);
  if (!is_invertible(basis))
    throw Error(ErrorCode::SingularProjection,
                "[P_K Psi_J] is singular for K=" + format_indices(ms.indices()));
  Matrix gamma = basis.adjoint() * basis;
  return {std::move(gamma), std::move(basis)};
}

/// Coefficients b with chi = sum_k b_k P psi_k, from b = gamma^{-1} (<P psi_i|chi>)_i.
inline Vector expansion_coefficients(const Vector& chi, const OverlapMatrix& om) {
  if (chi.size() != om.basis.rows())
    throw Error(ErrorCode::DimensionMismatch, "chi must be a model-space d-vector");
  const Vector overlaps = om.basis.adjoint() * chi;
  return om.gamma.ldlt().solve(overlaps);
}

/// O_eff = sum_{i,k} E_i (gamma^{-1})_{ik} |P psi_i><P psi_k|, from
/// model-space quantities only.
inline Matrix spectral_reconstruct(const EigenSelection& sel, const ModelSpace& ms) {
  const OverlapMatrix om = overlap_matrix(sel, ms);
  const Matrix gamma_inv = om.gamma.inverse();
  const Index d = sel.dim();
  Matrix out = Matrix::Zero(d, d);
  for (Index i = 0; i < d; ++i)
    for (Index k = 0; k < d; ++k)
      out += sel.values(i) * gamma_inv(i, k) * om.basis.col(i) * om.basis.col(k).adjoint();
  return out;
}

/// Second-type representative a + b s + s+ b+ + s+ f s. Defined for any map;
/// matrix elements are only reproduced on Lin Psi_J of the map used.
inline SecondTypeOperator second_type(const ObservableMatrix& o, const DecouplingMap& dm) {
  detail::check_dims(o, dm);
  const auto blk = partition(o.matrix(), dm.model_space());
  const Matrix& s = dm.s();
  Matrix m = blk.a + blk.b * s + s.adjoint() * blk.b_dagger + s.adjoint() * blk.f * s;
  return {std::move(m), dm.model_space(), dm.provenance()};
}

namespace detail {

inline void require_in_subspace(const Vector& psi, const DecouplingMap& dm, const char* name) {
  const double res = subspace_membership_residual(psi, dm);
  const double tol = kMembershipRelTol * psi.norm();
  if (res > tol)
    throw Error(ErrorCode::NotInSubspace, std::string(name) + ": ||Q psi - s P psi|| = " +
                                              std::to_string(res) + " exceeds " +
                                              std::to_string(tol));
}

}  // namespace detail

/// <P psi | O_bar | P phi>, equal to <psi|O|phi> for psi, phi in Lin Psi_J.
inline Complex matrix_element(const Vector& psi, const Vector& phi, const SecondTypeOperator& ot,
                              const DecouplingMap& dm) {
  if (!(ot.model_space == dm.model_space()))
    throw Error(ErrorCode::DimensionMismatch, "operator and map use different model spaces");
  detail::require_in_subspace(psi, dm, "psi");
  detail::require_in_subspace(phi, dm, "phi");
  const Vector p_psi = psi(dm.model_space().indices());
  const Vector p_phi = phi(dm.model_space().indices());
  return p_psi.dot(ot.matrix * p_phi);
}

/// <alpha|O_eff|alpha> / ||alpha||^2; complex in general.
inline Complex expectation_first_type(const EffectiveOperator& eo, const Vector& alpha) {
  if (alpha.size() != eo.matrix.rows())
    throw Error(ErrorCode::DimensionMismatch, "alpha must be a model-space d-vector");
  const double n2 = alpha.squaredNorm();
  if (n2 == 0.0) throw Error(ErrorCode::ZeroVector, "alpha is zero");
  return alpha.dot(eo.matrix * alpha) / n2;
}

/// <O>_psi = ||P psi||^2 <O_bar>_{P psi} = <P psi|O_bar|P psi> / ||psi||^2.
inline double expectation_second_type(const SecondTypeOperator& ot, const Vector& psi,
                                      const DecouplingMap& dm) {
  const double n2 = psi.size() == 0 ? 0.0 : psi.squaredNorm();
  if (n2 == 0.0) throw Error(ErrorCode::ZeroVector, "psi is zero");
  return matrix_element(psi, psi, ot, dm).real() / n2;
}

struct EquivalenceTransform {
  Matrix t;         // [P Psi_J][P' Psi_J]^{-1}
  double residual;  // ||O_eff - T O'_eff T^{-1}||_F
  double tolerance; // 1e-9 (1 + ||O_eff||_F)
};

/// Similarity between the representatives of one selection on two model spaces.
inline EquivalenceTransform equivalence_transform(const EffectiveOperator& eo,
                                                  const EffectiveOperator& eo_prime,
                                                  const EigenSelection& sel) {
  const Matrix p = p_rows(sel.vectors, eo.model_space);
  const Matrix p_prime = p_rows(sel.vectors, eo_prime.model_space);
  if (!is_invertible(p) || !is_invertible(p_prime))
    throw Error(ErrorCode::SingularProjection, "a model space is not legitimate for J");
  Eigen::ColPivHouseholderQR<Matrix> qr_prime(p_prime.transpose());
  // T = P Psi (P' Psi)^{-1}  <=>  (P' Psi)^T T^T = (P Psi)^T
  Matrix t = qr_prime.solve(p.transpose()).transpose();
  // O' T^{-1} = ((T^T)^{-1} O'^T)^T
  const Matrix o_prime_tinv = Eigen::ColPivHouseholderQR<Matrix>(t.transpose())
                                  .solve(eo_prime.matrix.transpose())
                                  .transpose();
  const Matrix similar = t * o_prime_tinv;
  EquivalenceTransform out{t, (eo.matrix - similar).norm(), 0.0};
  out.tolerance = kDecouplingRelTol * (1.0 + eo.matrix.norm());
  return out;
}

}  // namespace effop
