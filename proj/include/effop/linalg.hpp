#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <vector>

#include <Eigen/Dense>

namespace effop {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Threshold on sigma_min / sigma_max below which a matrix counts as singular.
inline constexpr double kSingularRatio = 1e-12;
/// Default cap on the 2-norm condition number for invertibility tests.
inline constexpr double kDefaultCondCap = 1e12;

/// 2-norm condition number sigma_max / sigma_min; +inf for singular or
/// empty-spectrum input.
inline double condition_number(const Matrix& m) {
  if (m.rows() == 0 || m.cols() == 0) return 1.0;
  Eigen::JacobiSVD<Matrix> svd(m);
  const auto& sv = svd.singularValues();
  const double smax = sv(0);
  const double smin = sv(sv.size() - 1);
  if (smin <= 0.0 || smax <= 0.0) return std::numeric_limits<double>::infinity();
  return smax / smin;
}

/// Invertibility by SVD: rejects sigma_min/sigma_max < 1e-12 and any
/// condition number above cond_cap.
inline bool is_invertible(const Matrix& m, double cond_cap = kDefaultCondCap) {
  if (m.rows() != m.cols()) return false;
  const double cond = condition_number(m);
  return std::isfinite(cond) && cond <= cond_cap && 1.0 / cond >= kSingularRatio;
}

/// Numerical rank from singular values relative to the largest one.
inline Index numerical_rank(const Matrix& m, double rel_tol = kSingularRatio) {
  if (m.size() == 0) return 0;
  Eigen::JacobiSVD<Matrix> svd(m);
  const auto& sv = svd.singularValues();
  if (sv(0) <= 0.0) return 0;
  Index rank = 0;
  for (Index i = 0; i < sv.size(); ++i) {
    if (sv(i) >= rel_tol * sv(0)) ++rank;
  }
  return rank;
}

inline bool all_finite(const Matrix& m) {
  for (Index j = 0; j < m.cols(); ++j)
    for (Index i = 0; i < m.rows(); ++i)
      if (!std::isfinite(m(i, j).real()) || !std::isfinite(m(i, j).imag())) return false;
  return true;
}

/// max |M_ij - conj(M_ji)|
inline double hermiticity_defect(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  return (m - m.adjoint()).cwiseAbs().maxCoeff();
}

inline double max_abs_entry(const Matrix& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

inline Matrix commutator(const Matrix& a, const Matrix& b) { return a * b - b * a; }

/// Scales v so its first entry with modulus above `eps` relative to the
/// vector norm is real and positive.
inline void normalize_phase(Eigen::Ref<Vector> v, double eps = 1e-10) {
  const double norm = v.norm();
  if (norm == 0.0) return;
  for (Index i = 0; i < v.size(); ++i) {
    const double mag = std::abs(v(i));
    if (mag > eps * norm) {
      v *= std::conj(v(i)) / mag;
      return;
    }
  }
}

/// Lexicographic order on complex vectors by (real, imag) per component.
inline bool lexicographic_less(const Vector& x, const Vector& y, double eps = 1e-10) {
  for (Index i = 0; i < std::min(x.size(), y.size()); ++i) {
    if (std::abs(x(i).real() - y(i).real()) > eps) return x(i).real() < y(i).real();
    if (std::abs(x(i).imag() - y(i).imag()) > eps) return x(i).imag() < y(i).imag();
  }
  return false;
}

/// Outcome of pairing two multisets of (possibly complex) eigenvalues.
struct SpectrumMatch {
  bool sizes_agree = false;
  bool matched = false;
  /// max over pairs of |x - y| / (1 + |y|)
  double max_relative_deviation = 0.0;
  double max_abs_deviation = 0.0;
};

namespace detail {

inline SpectrumMatch greedy_match(const std::vector<Complex>& found,
                                  const std::vector<Complex>& reference, double rel_tol) {
  SpectrumMatch out;
  std::vector<bool> used(reference.size(), false);
  for (const Complex& x : found) {
    std::size_t best = reference.size();
    double best_dist = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < reference.size(); ++k) {
      if (used[k]) continue;
      const double dist = std::abs(x - reference[k]);
      if (dist < best_dist) {
        best_dist = dist;
        best = k;
      }
    }
    used[best] = true;
    out.max_abs_deviation = std::max(out.max_abs_deviation, best_dist);
    out.max_relative_deviation =
        std::max(out.max_relative_deviation, best_dist / (1.0 + std::abs(reference[best])));
  }
  out.matched = out.max_relative_deviation <= rel_tol;
  return out;
}

}  // namespace detail

/// Greedy nearest-neighbour matching of `found` against `reference`:
/// each entry of `found` (in order) takes the closest unused reference
/// value. Match succeeds when every |delta| <= rel_tol * (1 + |reference|).
inline SpectrumMatch match_spectra(const std::vector<Complex>& found,
                                   const std::vector<Complex>& reference, double rel_tol) {
  if (found.size() != reference.size()) return {};
  SpectrumMatch out = detail::greedy_match(found, reference, rel_tol);
  out.sizes_agree = true;
  return out;
}

/// Same pairing, but `found` only needs to be a sub-multiset of `reference`.
inline SpectrumMatch match_subspectrum(const std::vector<Complex>& found,
                                       const std::vector<Complex>& reference, double rel_tol) {
  if (found.size() > reference.size()) return {};
  SpectrumMatch out = detail::greedy_match(found, reference, rel_tol);
  out.sizes_agree = true;
  return out;
}

/// Eigenvalues of a general square matrix, sorted by (real, imag).
inline std::vector<Complex> general_eigenvalues(const Matrix& m) {
  std::vector<Complex> out;
  if (m.rows() == 0) return out;
  Eigen::ComplexEigenSolver<Matrix> solver(m, /*computeEigenvectors=*/false);
  out.assign(solver.eigenvalues().data(), solver.eigenvalues().data() + m.rows());
  std::sort(out.begin(), out.end(), [](Complex x, Complex y) {
    return x.real() != y.real() ? x.real() < y.real() : x.imag() < y.imag();
  });
  return out;
}

inline std::vector<Complex> to_complex(const RealVector& v) {
  std::vector<Complex> out(static_cast<std::size_t>(v.size()));
  for (Index i = 0; i < v.size(); ++i) out[static_cast<std::size_t>(i)] = v(i);
  return out;
}

}  // namespace effop
