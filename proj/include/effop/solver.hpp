#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "effop/error.hpp"
#include "effop/linalg.hpp"
#include "effop/spaces.hpp"
#include "effop/transform.hpp"

namespace effop {

struct SolverConfig {
  double tol = 1e-11;
  int max_iter = 500;
  std::optional<Matrix> initial_s;  // zero when absent
  double divergence_cap = 1e8;      // on ||s_k||_F
};

struct SolverStep {
  int iteration;
  double residual;  // decoupling residual of s_k
  double step;      // ||s_k - s_{k-1}||_F / max(1, ||s_{k-1}||_F)
};

struct SolverTrace {
  std::vector<SolverStep> steps;
  bool converged = false;
};

struct FixedPointResult {
  DecouplingMap map;
  SolverTrace trace;
};

/// Thrown for MaxIterExceeded and Diverged; carries the best iterate seen.
class SolverError : public Error {
 public:
  SolverError(ErrorCode code, const std::string& what, FixedPointResult best)
      : Error(code, what), best_(std::move(best)) {}

  const FixedPointResult& best() const { return best_; }

 private:
  FixedPointResult best_;
};

/// Solves f X - X a = rhs for Hermitian a (d x d) and f ((N-d) x (N-d)) via
/// their eigenbases, X = U_f [ (U_f^+ rhs U_a)_ij / (lambda^f_i - lambda^a_j) ] U_a^+.
class HermitianSylvester {
 public:
  HermitianSylvester(const Matrix& a, const Matrix& f, double singular_tol = 1e-10) {
    Eigen::SelfAdjointEigenSolver<Matrix> ea(a), ef(f);
    if (ea.info() != Eigen::Success || ef.info() != Eigen::Success)
      throw Error(ErrorCode::SolverFailure, "eigensolver failed on a diagonal block");
    ua_ = ea.eigenvectors();
    uf_ = ef.eigenvectors();
    denom_.resize(f.rows(), a.rows());
    double min_gap = std::numeric_limits<double>::infinity();
    for (Index i = 0; i < f.rows(); ++i)
      for (Index j = 0; j < a.rows(); ++j) {
        denom_(i, j) = ef.eigenvalues()(i) - ea.eigenvalues()(j);
        min_gap = std::min(min_gap, std::abs(denom_(i, j)));
      }
    if (min_gap < singular_tol)
      throw Error(ErrorCode::SylvesterSingular,
                  "spectra of the diagonal blocks a and f overlap (min gap " +
                      std::to_string(min_gap) + ")");
  }

  Matrix solve(const Matrix& rhs) const {
    Matrix y = uf_.adjoint() * rhs * ua_;
    for (Index i = 0; i < y.rows(); ++i)
      for (Index j = 0; j < y.cols(); ++j) y(i, j) /= denom_(i, j);
    return uf_ * y * ua_.adjoint();
  }

 private:
  Matrix ua_, uf_;
  Eigen::MatrixXd denom_;
};

/// Fixed-point iteration for the decoupling equation -s(a + bs) + b+ + fs = 0:
///   f s_{k+1} - s_{k+1} a = s_k b s_k - b+,
/// starting from cfg.initial_s (default 0). From s_0 = 0 this targets the
/// small-norm branch; there is no global convergence guarantee.
///
/// Stops when both the relative step and the decoupling residual are <= tol.
inline FixedPointResult solve_decoupling_fixed_point(const ObservableMatrix& o,
                                                     const ModelSpace& ms,
                                                     const SolverConfig& cfg = {}) {
  if (!(cfg.tol > 0.0)) throw Error(ErrorCode::InvalidSpec, "tol must be positive");
  if (cfg.max_iter < 1) throw Error(ErrorCode::InvalidSpec, "max_iter must be >= 1");
  if (o.dim() != ms.total_dim())
    throw Error(ErrorCode::DimensionMismatch, "model space does not match the observable");

  const auto blk = partition(o.matrix(), ms);
  Matrix s = cfg.initial_s ? *cfg.initial_s : Matrix::Zero(ms.complement_dim(), ms.dim());
  if (s.rows() != ms.complement_dim() || s.cols() != ms.dim())
    throw Error(ErrorCode::DimensionMismatch, "initial s has the wrong shape");

  const HermitianSylvester sylvester(blk.a, blk.f);
  auto residual_of = [&](const Matrix& x) {
    if (x.rows() == 0) return 0.0;
    return (-x * (blk.a + blk.b * x) + blk.b_dagger + blk.f * x).norm();
  };
  auto make_map = [&](Matrix x, int iters, double res) {
    MapProvenance prov;
    prov.kind = MapProvenance::Kind::Iterative;
    prov.iterations = iters;
    prov.residual = res;
    return DecouplingMap(ms, std::move(x), std::move(prov));
  };

  SolverTrace trace;
  Matrix best = s;
  double best_residual = residual_of(s);
  int best_iter = 0;
  for (int k = 1; k <= cfg.max_iter; ++k) {
    Matrix next = sylvester.solve(s * blk.b * s - blk.b_dagger);
    const double step = (next - s).norm() / std::max(1.0, s.norm());
    const double res = residual_of(next);
    trace.steps.push_back({k, res, step});
    if (!all_finite(next) || next.norm() > cfg.divergence_cap) {
      throw SolverError(ErrorCode::Diverged,
                        "||s|| exceeded " + std::to_string(cfg.divergence_cap) + " at iteration " +
                            std::to_string(k),
                        {make_map(best, best_iter, best_residual), trace});
    }
    s = std::move(next);
    if (res < best_residual) {
      best = s;
      best_residual = res;
      best_iter = k;
    }
    if (step <= cfg.tol && res <= cfg.tol) {
      trace.converged = true;
      return {make_map(s, k, res), std::move(trace)};
    }
  }
  throw SolverError(ErrorCode::MaxIterExceeded,
                    "no convergence in " + std::to_string(cfg.max_iter) +
                        " iterations (best residual " + std::to_string(best_residual) + ")",
                    {make_map(best, best_iter, best_residual), trace});
}

struct ResidualHistory {
  std::vector<std::pair<int, double>> entries;
  /// Reported only; the scheme does not promise monotone residuals.
  bool monotone_decreasing = true;
};

inline ResidualHistory residual_history(const SolverTrace& trace) {
  ResidualHistory out;
  for (const auto& st : trace.steps) {
    if (!out.entries.empty() && st.residual > out.entries.back().second)
      out.monotone_decreasing = false;
    out.entries.emplace_back(st.iteration, st.residual);
  }
  return out;
}

}  // namespace effop
