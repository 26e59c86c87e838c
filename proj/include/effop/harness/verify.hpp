#pragma once

// Invariant suite behind `effop verify`: every module's properties checked
// against brute-force eigendecomposition on seeded random selections.

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "effop/effective.hpp"
#include "effop/error.hpp"
#include "effop/harness/generate.hpp"
#include "effop/harness/report.hpp"
#include "effop/linalg.hpp"
#include "effop/observables.hpp"
#include "effop/solver.hpp"
#include "effop/spaces.hpp"
#include "effop/transform.hpp"

namespace effop {

struct VerifyConfig {
  Index d = 3;
  int trials = 20;
  std::uint64_t seed = 1;
  /// Exhaustive model-space enumeration is skipped above this many subsets.
  std::uint64_t max_enumeration = 50000;
};

namespace detail {

inline Vector random_complex_vector(Index n, std::mt19937_64& rng) {
  Vector v(n);
  for (Index i = 0; i < n; ++i) v(i) = complex_normal(rng);
  return v;
}

inline Matrix random_complex_matrix(Index rows, Index cols, std::mt19937_64& rng) {
  Matrix m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = complex_normal(rng);
  return m;
}

inline std::vector<Index> random_subset(Index n, Index d, std::mt19937_64& rng) {
  std::vector<Index> all(static_cast<std::size_t>(n));
  std::iota(all.begin(), all.end(), Index{0});
  std::shuffle(all.begin(), all.end(), rng);
  all.resize(static_cast<std::size_t>(d));
  std::sort(all.begin(), all.end());
  return all;
}

inline bool distinct_eigenvalues(const RealVector& values, double tol) {
  for (Index k = 1; k < values.size(); ++k)
    if (values(k) - values(k - 1) <= tol) return false;
  return true;
}

/// Rank test used as an oracle for model-space enumeration, computed with a
/// different SVD than the library's condition-number path.
inline bool full_rank_oracle(const Matrix& block) {
  Eigen::BDCSVD<Matrix> svd(block);
  const auto& sv = svd.singularValues();
  return sv.size() > 0 && sv(0) > 0.0 && sv(sv.size() - 1) >= kSingularRatio * sv(0);
}

template <class Fn>
bool throws_code(ErrorCode code, Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code() == code;
  }
  return false;
}

inline Matrix hermitian_product(const Matrix& a, const Matrix& b) {
  Matrix m = a * b;
  return 0.5 * (m + m.adjoint());
}

}  // namespace detail

/// Runs every module's invariants on `o`. Each trial draws a random J with
/// |J| = cfg.d and a pivoted model space for it.
inline Report verify_invariants(const ObservableMatrix& o, const VerifyConfig& cfg) {
  const Index n = o.dim();
  if (cfg.d < 1 || cfg.d >= n)
    throw Error(ErrorCode::InvalidSpec, "verify needs 1 <= d < N (N=" + std::to_string(n) + ")");
  if (cfg.trials < 1) throw Error(ErrorCode::InvalidSpec, "trials must be >= 1");

  Report rep;
  rep.set_provenance("input_fnv1a", hex(fingerprint(o.matrix())));
  rep.set_provenance("rng", std::string(kRngAlgorithm));
  rep.set_provenance("seed", std::to_string(cfg.seed));
  rep.set_provenance("config", "N=" + std::to_string(n) + " d=" + std::to_string(cfg.d) +
                                   " trials=" + std::to_string(cfg.trials));

  const Matrix& om = o.matrix();
  const double onorm = o.frobenius_norm();
  const double scale = std::max(1.0, onorm);
  const Eigenpairs pairs = eigendecompose(o);
  const double spectral_radius = pairs.values.cwiseAbs().maxCoeff();
  const double abs_scale = std::max(1.0, spectral_radius);
  const bool distinct = detail::distinct_eigenvalues(pairs.values, 1e-6 * abs_scale);
  const auto full_spectrum = to_complex(pairs.values);

  // spaces: decomposition quality is independent of the trial
  {
    const Matrix recon =
        pairs.vectors * pairs.values.cast<Complex>().asDiagonal() * pairs.vectors.adjoint();
    rep.record("spaces.eigen_reconstruction", (recon - om).norm() / scale, 1e-10);
    const Matrix gram = pairs.vectors.adjoint() * pairs.vectors;
    rep.record("spaces.eigenvector_orthonormality",
               (gram - Matrix::Identity(n, n)).norm(), 1e-10);
  }

  // the commuting family used for the observables suite: powers of O,
  // rescaled to the norm of O
  std::vector<ObservableMatrix> family_members{o};
  {
    const Matrix o2 = detail::hermitian_product(om, om);
    const Matrix o3 = detail::hermitian_product(o2, om);
    for (const Matrix& m : {o2, o3}) {
      const double mn = m.norm();
      family_members.push_back(validate_hermitian(mn > 0.0 ? Matrix(m * (onorm / mn)) : m));
    }
  }
  const CommutingSet family = verify_commuting(family_members);
  const SimultaneousEigenbasis joint = simultaneous_eigenbasis(family);

  std::mt19937_64 rng(cfg.seed);
  int solver_converged = 0;
  for (int trial = 0; trial < cfg.trials; ++trial) {
    const std::vector<Index> j = detail::random_subset(n, cfg.d, rng);
    const EigenSelection sel = select_eigenvectors(pairs, j);
    const ModelSpace ms = pivoted_model_space(sel.vectors);
    const Index d = ms.dim();

    // ---- spaces
    {
      const Projectors pr = projectors(ms);
      const double id = (pr.P + pr.Q - Matrix::Identity(n, n)).cwiseAbs().maxCoeff() +
                        (pr.P * pr.Q).cwiseAbs().maxCoeff() + (pr.Q * pr.P).cwiseAbs().maxCoeff();
      rep.record("spaces.projector_identity", id, 0.0);
    }
    if (binomial(n, d) <= cfg.max_enumeration) {
      const auto found = enumerate_model_spaces(sel);
      std::vector<std::vector<Index>> oracle;
      for_each_subset(n, d, [&](const std::vector<Index>& k) {
        if (detail::full_rank_oracle(sel.vectors(k, Eigen::all))) oracle.push_back(k);
      });
      std::vector<std::vector<Index>> got;
      for (const auto& c : found) got.push_back(c.space.indices());
      std::sort(got.begin(), got.end());
      rep.record_flag("spaces.enumeration_bounds",
                      !found.empty() && found.size() <= binomial(n, d));
      rep.record_flag("spaces.enumeration_rank_agreement", got == oracle);
    }

    const DecouplingMap dm = construct_s_direct(sel, ms);
    const double s_norm = dm.s().norm();
    {
      Vector psi = sel.vectors * detail::random_complex_vector(d, rng);
      psi.normalize();
      const Vector back = retrieve_full_vector(psi(ms.indices()), dm);
      rep.record("spaces.retrieve_round_trip", (back - psi).norm(), eigen_tolerance(om));
    }

    // ---- transform
    rep.record("transform.decoupling_residual", decoupling_residual(o, dm), decoupling_tolerance(o));
    {
      const Matrix dense = similarity_transform(o, dm);
      const Matrix blocks = transformed_blocks(o, dm).assemble(ms);
      rep.record("transform.blocks_vs_dense", (dense - blocks).cwiseAbs().maxCoeff() / (scale * (1.0 + s_norm) * (1.0 + s_norm)),
                 1e-12);
      const auto tr = match_spectra(general_eigenvalues(dense), full_spectrum, 1e-9);
      rep.record("transform.spectrum_similarity", tr.max_relative_deviation, 1e-9);
    }
    {
      const Matrix c = detail::random_complex_matrix(d, d, rng);
      const Matrix mixed = sel.vectors * c;
      if (is_invertible(c) && is_invertible(p_rows(mixed, ms))) {
        const DecouplingMap dm2 = construct_s_from_columns(mixed, ms);
        rep.record("transform.basis_change_invariance", (dm2.s() - dm.s()).norm(), 1e-10);
      }
    }
    {
      Vector q_only = Vector::Zero(n);
      q_only(ms.complement()) = detail::random_complex_vector(n - d, rng);
      const Vector image = exp_s(dm, -1) * q_only;
      rep.record("transform.fixed_points", (image - q_only).cwiseAbs().maxCoeff(), 0.0);

      Vector phi = detail::random_complex_vector(n, rng);
      phi.normalize();
      const Vector phi_t = exp_s(dm, -1) * phi;
      rep.record_at_least("transform.non_membership", phi_t(ms.complement()).norm(), 1e-8);
    }
    {
      const Matrix p = p_rows(sel.vectors, ms);
      const Matrix eff = transformed_blocks(o, dm).pp;
      rep.record("transform.effective_eigenvectors",
                 (eff * p - p * sel.lambda()).norm(), decoupling_tolerance(o));
      if (distinct) {
        int count = 0;
        for (Index i = 0; i < n; ++i)
          if (subspace_membership_residual(pairs.vectors.col(i), dm) <= 1e-8 * scale) ++count;
        rep.record_flag("transform.fixed_eigenvector_count", count == d);
      }
    }

    // ---- effective
    const EffectiveOperator eff = first_type(o, dm);
    {
      const auto m = match_spectra(eff.eigenvalues(), to_complex(sel.values), kSpectrumRelTol);
      rep.record("effective.eigenvalue_reproduction", m.max_relative_deviation, kSpectrumRelTol);
      const auto f = q_block_and_factorization(o, dm);
      rep.record("effective.factorization", f.match.max_relative_deviation, kSpectrumRelTol);
    }
    {
      const Matrix route = spectral_reconstruct(sel, ms);
      rep.record("effective.route_equivalence", (route - eff.matrix).cwiseAbs().maxCoeff(),
                 1e-9 * std::max(1.0, eff.matrix.norm()));
      const OverlapMatrix ov = overlap_matrix(sel, ms);
      const Vector chi = detail::random_complex_vector(d, rng);
      const Vector b = expansion_coefficients(chi, ov);
      rep.record("effective.expansion_coefficients", (ov.basis * b - chi).norm(),
                 1e-10 * std::max(1.0, chi.norm()) * condition_number(ov.basis));
    }
    {
      const SecondTypeOperator bar = second_type(o, dm);
      rep.record("effective.second_type_hermitian", hermiticity_defect(bar.matrix),
                 1e-12 * std::max(1.0, bar.matrix.norm()));
      const Matrix exact = sel.vectors.adjoint() * om * sel.vectors;
      const Matrix p = p_rows(sel.vectors, ms);
      const Matrix via_bar = p.adjoint() * bar.matrix * p;
      rep.record("effective.matrix_element_gram", (exact - via_bar).cwiseAbs().maxCoeff(),
                 1e-9 * abs_scale);
      Vector psi = sel.vectors * detail::random_complex_vector(d, rng);
      psi.normalize();
      rep.record("effective.expectation_second_type",
                 std::abs(expectation_second_type(bar, psi, dm) - psi.dot(om * psi).real()),
                 1e-9 * abs_scale);
      bool all_rejected = true;
      for (int k = 0; k < 10; ++k) {
        const Vector outside = detail::random_complex_vector(n, rng);
        all_rejected = all_rejected && detail::throws_code(ErrorCode::NotInSubspace, [&] {
                         (void)matrix_element(outside, psi, bar, dm);
                       });
      }
      rep.record_flag("effective.not_in_subspace", all_rejected);
      double worst = 0.0;
      for (Index i = 0; i < d; ++i)
        worst = std::max(worst, std::abs(expectation_first_type(eff, p.col(i)) - sel.values(i)));
      rep.record("effective.expectation_first_type", worst, 1e-9 * abs_scale);
    }
    if (binomial(n, d) <= cfg.max_enumeration) {
      const auto candidates = enumerate_model_spaces(sel);
      if (candidates.size() >= 2) {
        // the alternative K with the smallest s; a near-singular but
        // legitimate K can put ||s|| past what double precision decouples
        const ModelSpaceCandidate* alt = nullptr;
        for (const auto& c : candidates)
          if (!(c.space == ms) && (alt == nullptr || c.min_singular_value > alt->min_singular_value))
            alt = &c;
        const ModelSpace& k2 = alt->space;
        const EffectiveOperator eff2 = first_type(o, construct_s_direct(sel, k2));
        const auto eq = equivalence_transform(eff, eff2, sel);
        rep.record("effective.equivalence_transform", eq.residual, eq.tolerance);
      }
    }

    // ---- solver
    try {
      const auto a = solve_decoupling_fixed_point(o, ms);
      const auto b = solve_decoupling_fixed_point(o, ms);
      rep.record_flag("solver.deterministic", a.map.s() == b.map.s() &&
                                                  a.trace.steps.size() == b.trace.steps.size());
      ++solver_converged;
      const auto eff_it = first_type(o, a.map);
      const auto m = match_subspectrum(eff_it.eigenvalues(), full_spectrum, kSpectrumRelTol);
      rep.record("solver.spectrum_subset", m.max_relative_deviation, kSpectrumRelTol);
      rep.record("solver.residual_at_convergence", a.trace.steps.back().residual, SolverConfig{}.tol);
      if (distinct) {
        int count = 0;
        for (Index i = 0; i < n; ++i)
          if (subspace_membership_residual(pairs.vectors.col(i), a.map) <= 1e-8 * scale) ++count;
        rep.record_flag("solver.converse_count", count == d);
      }
    } catch (const Error& e) {
      if (!is_numerical(e.code())) throw;
    }

    // ---- observables
    {
      const ModelSpace jk = pivoted_model_space(select_simultaneous(joint, j).vectors);
      const DecouplingMap cs_map = common_s(family, joint, j, jk);
      double worst_ratio = 0.0;
      for (const auto& m : family.members())
        worst_ratio = std::max(worst_ratio, decoupling_residual(m, cs_map) / decoupling_tolerance(m));
      rep.record("observables.common_s_universality", worst_ratio, 1.0);
      const EffectiveSet es = effective_set(family, cs_map, &joint);
      rep.record("observables.commutator_preservation", es.max_commutator_norm,
                 1e-9 * scale * scale);
      rep.record("observables.effective_eigen_relation", es.max_eigen_relation_residual,
                 1e-9 * scale);

      // a Hermitian observable outside the set
      const Matrix g = random_hermitian_matrix(n, rng);
      const ObservableMatrix outside = validate_hermitian(g);
      const SecondTypeOperator bar = second_type_only(outside, cs_map);
      const EigenSelection jsel = select_simultaneous(joint, j);
      Vector x = jsel.vectors * detail::random_complex_vector(d, rng);
      Vector y = jsel.vectors * detail::random_complex_vector(d, rng);
      x.normalize();
      y.normalize();
      rep.record("observables.second_type_only",
                 std::abs(matrix_element(x, y, bar, cs_map) - x.dot(g * y)),
                 1e-9 * std::max(1.0, g.norm()));
    }
  }

  // ---- decomposition: blocks of size d over a random permutation
  {
    std::vector<Index> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), Index{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<std::vector<Index>> parts;
    std::vector<ModelSpace> spaces;
    for (Index start = 0; start < n; start += cfg.d) {
      std::vector<Index> part(perm.begin() + start, perm.begin() + std::min(n, start + cfg.d));
      std::sort(part.begin(), part.end());
      spaces.push_back(pivoted_model_space(select_simultaneous(joint, part).vectors));
      parts.push_back(std::move(part));
    }
    const SpaceDecomposition dec = decompose_space(family, parts, spaces);
    double worst = 0.0;
    bool sizes = true;
    for (const auto& m : dec.spectrum_union) {
      worst = std::max(worst, m.max_relative_deviation);
      sizes = sizes && m.sizes_agree;
    }
    rep.record("observables.decomposition_completeness", sizes ? worst : 1.0, 1e-9);
    if (dec.blocks.size() >= 2) {
      const auto& b0 = dec.blocks[0];
      const Vector foreign = joint.vectors.col(dec.blocks[1].selection.front());
      rep.record_flag("observables.cross_block_not_in_subspace",
                      detail::throws_code(ErrorCode::NotInSubspace, [&] {
                        (void)matrix_element(foreign, foreign, b0.pairs[0].second, b0.map);
                      }));
    }
  }

  rep.note("solver converged in " + std::to_string(solver_converged) + "/" +
           std::to_string(cfg.trials) + " trials (no global convergence claim)");
  if (!joint.complete) rep.note("warning: joint eigenvalue tuples are not all distinct");
  return rep;
}

}  // namespace effop
