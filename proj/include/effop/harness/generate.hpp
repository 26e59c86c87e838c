#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "effop/error.hpp"
#include "effop/linalg.hpp"
#include "effop/observables.hpp"
#include "effop/spaces.hpp"

namespace effop {

/// Identifier of the PRNG behind every seeded generator, for reports.
inline constexpr std::string_view kRngAlgorithm = "mt19937_64";

enum class ProblemKind { RandomHermitian, PlantedSpectrum, TridiagonalChain, CommutingFamily };

inline std::string_view to_string(ProblemKind k) {
  switch (k) {
    case ProblemKind::RandomHermitian: return "random_hermitian";
    case ProblemKind::PlantedSpectrum: return "planted_spectrum";
    case ProblemKind::TridiagonalChain: return "tridiagonal_chain";
    case ProblemKind::CommutingFamily: return "commuting_family";
  }
  return "unknown";
}

inline ProblemKind parse_problem_kind(std::string_view name) {
  for (auto k : {ProblemKind::RandomHermitian, ProblemKind::PlantedSpectrum,
                 ProblemKind::TridiagonalChain, ProblemKind::CommutingFamily})
    if (to_string(k) == name) return k;
  throw Error(ErrorCode::InvalidSpec, "unknown problem kind '" + std::string(name) + "'");
}

struct ProblemParams {
  /// random_hermitian: when > 0, the first `model_dim` diagonal entries are
  /// separated from the rest so the `model_dim` lowest eigenvalues sit at
  /// least `gap` below the others.
  double gap = 0.0;
  Index model_dim = 0;
  /// Off-diagonal strength: uniform hopping for tridiagonal_chain, bound on
  /// off-diagonal moduli for gapped random_hermitian.
  double coupling = 0.1;
  /// commuting_family: number of members c.
  int family_size = 3;
  /// planted_spectrum: eigenvalues (defaults to 1..N).
  std::vector<double> spectrum;
};

struct ProblemSpec {
  ProblemKind kind = ProblemKind::RandomHermitian;
  Index dim = 2;
  std::uint64_t seed = 0;
  ProblemParams params;
};

namespace detail {

inline Complex complex_normal(std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  const double re = g(rng);
  const double im = g(rng);
  return {re, im};
}

}  // namespace detail

/// Haar-distributed unitary: QR of a complex Gaussian matrix with the
/// phases of diag(R) divided out.
inline Matrix random_unitary(Index n, std::mt19937_64& rng) {
  Matrix g(n, n);
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i < n; ++i) g(i, j) = detail::complex_normal(rng);
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ();
  const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Index k = 0; k < n; ++k) {
    const double mag = std::abs(r(k, k));
    if (mag > 0.0) q.col(k) *= r(k, k) / mag;
  }
  return q;
}

/// Complex Gaussian Hermitian matrix (G + G^+) / 2, exactly Hermitian.
inline Matrix random_hermitian_matrix(Index n, std::mt19937_64& rng) {
  Matrix m(n, n);
  for (Index i = 0; i < n; ++i) {
    m(i, i) = std::normal_distribution<double>(0.0, 1.0)(rng);
    for (Index j = i + 1; j < n; ++j) {
      m(i, j) = detail::complex_normal(rng) / std::sqrt(2.0);
      m(j, i) = std::conj(m(i, j));
    }
  }
  return m;
}

/// V diag(lambda) V^+ with V Haar-random; symmetrized to exact Hermiticity.
inline Matrix planted_matrix(const RealVector& lambda, const Matrix& v) {
  Matrix m = v * lambda.cast<Complex>().asDiagonal() * v.adjoint();
  return 0.5 * (m + m.adjoint());
}

namespace detail {

inline void check_spec(const ProblemSpec& spec) {
  if (spec.dim < 2) throw Error(ErrorCode::InvalidSpec, "dimension must be >= 2");
  const auto& p = spec.params;
  if (p.gap < 0.0) throw Error(ErrorCode::InvalidSpec, "gap must be non-negative");
  if (p.gap > 0.0 && (p.model_dim < 1 || p.model_dim >= spec.dim))
    throw Error(ErrorCode::InvalidSpec, "gapped instances need 1 <= model_dim < N");
  if (p.family_size < 1) throw Error(ErrorCode::InvalidSpec, "family_size must be >= 1");
  if (!p.spectrum.empty() && static_cast<Index>(p.spectrum.size()) != spec.dim)
    throw Error(ErrorCode::InvalidSpec, "planted spectrum must have N entries");
}

inline Matrix gapped_matrix(const ProblemSpec& spec, std::mt19937_64& rng) {
  const Index n = spec.dim;
  const auto& p = spec.params;
  std::uniform_real_distribution<double> low(0.0, 0.5);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * 3.14159265358979323846);
  // Weyl: eigenvalues move by at most ||offdiag||_2 <= (n - 1) * coupling
  const double shift = 0.5 + p.gap + 2.0 * static_cast<double>(n - 1) * p.coupling;
  Matrix m = Matrix::Zero(n, n);
  for (Index i = 0; i < n; ++i)
    m(i, i) = i < p.model_dim ? low(rng) : shift + static_cast<double>(n) * unit(rng);
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j) {
      m(i, j) = std::polar(p.coupling * unit(rng), phase(rng));
      m(j, i) = std::conj(m(i, j));
    }
  return m;
}

}  // namespace detail

/// Single-matrix kinds (everything except commuting_family).
inline ObservableMatrix generate_matrix(const ProblemSpec& spec) {
  detail::check_spec(spec);
  std::mt19937_64 rng(spec.seed);
  const Index n = spec.dim;
  switch (spec.kind) {
    case ProblemKind::RandomHermitian:
      if (spec.params.gap > 0.0) return validate_hermitian(detail::gapped_matrix(spec, rng));
      return validate_hermitian(random_hermitian_matrix(n, rng));
    case ProblemKind::PlantedSpectrum: {
      RealVector lambda(n);
      for (Index i = 0; i < n; ++i)
        lambda(i) = spec.params.spectrum.empty() ? static_cast<double>(i + 1)
                                                 : spec.params.spectrum[static_cast<std::size_t>(i)];
      return validate_hermitian(planted_matrix(lambda, random_unitary(n, rng)));
    }
    case ProblemKind::TridiagonalChain: {
      Matrix m = Matrix::Zero(n, n);
      for (Index i = 0; i < n; ++i) m(i, i) = static_cast<double>(i + 1);
      for (Index i = 0; i + 1 < n; ++i) m(i, i + 1) = m(i + 1, i) = spec.params.coupling;
      return validate_hermitian(m);
    }
    case ProblemKind::CommutingFamily:
      break;
  }
  throw Error(ErrorCode::InvalidSpec, "commuting_family produces a set; use generate_family");
}

/// (V Lambda_s V^+)_{s=1..c}. Member 1 has non-degenerate eigenvalues near
/// 1..N; the others are drawn uniformly from [-2, 2].
inline CommutingSet generate_family(const ProblemSpec& spec) {
  detail::check_spec(spec);
  if (spec.kind != ProblemKind::CommutingFamily)
    throw Error(ErrorCode::InvalidSpec, "generate_family needs kind commuting_family");
  std::mt19937_64 rng(spec.seed);
  const Index n = spec.dim;
  const Matrix v = random_unitary(n, rng);
  std::uniform_real_distribution<double> jitter(-0.3, 0.3);
  std::uniform_real_distribution<double> spread(-2.0, 2.0);
  std::vector<ObservableMatrix> members;
  for (int s = 0; s < spec.params.family_size; ++s) {
    RealVector lambda(n);
    for (Index i = 0; i < n; ++i)
      lambda(i) = s == 0 ? static_cast<double>(i + 1) + jitter(rng) : spread(rng);
    members.push_back(validate_hermitian(planted_matrix(lambda, v)));
  }
  return verify_commuting(std::move(members));
}

using GeneratedProblem = std::variant<ObservableMatrix, CommutingSet>;

inline GeneratedProblem generate(const ProblemSpec& spec) {
  if (spec.kind == ProblemKind::CommutingFamily) return generate_family(spec);
  return generate_matrix(spec);
}

}  // namespace effop
