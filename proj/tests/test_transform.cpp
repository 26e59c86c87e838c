#include <catch_amalgamated.hpp>

#include <cmath>

#include "test_util.hpp"

using namespace effop;
using namespace effop::test;
using Catch::Matchers::WithinAbs;

namespace {

const ObservableMatrix& exchange() {
  static const ObservableMatrix o = herm({{0, 1}, {1, 0}});
  return o;
}

DecouplingMap plus_state_map() {
  const auto sel = select_eigenvectors(eigendecompose(exchange()), {1});
  return construct_s_direct(sel, ModelSpace::from_one_based(2, {1}));
}

}  // namespace

TEST_CASE("construct_s_direct: 2x2 hand examples") {
  // P psi = Q psi = 1/sqrt 2  =>  s = 1
  const DecouplingMap dm = plus_state_map();
  REQUIRE(dm.s().rows() == 1);
  CHECK(std::abs(dm.s()(0, 0) - 1.0) < 1e-15);
  CHECK(dm.provenance().kind == MapProvenance::Kind::Direct);
  CHECK(dm.provenance().selection == std::vector<Index>{1});

  const auto diag = select_eigenvectors(eigendecompose(herm({{1, 0}, {0, 2}})), {0});
  CHECK(construct_s_direct(diag, ModelSpace::from_one_based(2, {1})).s() == mat({{0}}));

  EigenSelection e1;
  e1.indices = {0};
  e1.values = RealVector::Ones(1);
  e1.vectors = mat({{1}, {0}});
  try {
    construct_s_direct(e1, ModelSpace::from_one_based(2, {2}));
    FAIL("expected SingularProjection");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SingularProjection);
  }
}

TEST_CASE("construct_s_direct annihilates Q e^{-S} psi for psi in J") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto o = random_observable(8, seed);
    const auto sel = select_eigenvectors(eigendecompose(o), {0, 2, 7});
    const DecouplingMap dm = construct_s_direct(sel, pivoted_model_space(sel.vectors));
    const Matrix image = exp_s(dm, -1) * sel.vectors;
    CHECK(q_rows(image, dm.model_space()).norm() <= 1e-12);
  }
}

TEST_CASE("exp_s") {
  const ModelSpace k1 = ModelSpace::from_one_based(2, {1});
  const DecouplingMap one(k1, mat({{1}}));
  CHECK(exp_s(one, -1) == mat({{1, 0}, {-1, 1}}));
  CHECK(exp_s(one, +1) * exp_s(one, -1) == Matrix::Identity(2, 2));
  const auto zero = DecouplingMap::zero(k1);
  CHECK(exp_s(zero, +1) == Matrix::Identity(2, 2));
  CHECK(exp_s(zero, -1) == Matrix::Identity(2, 2));
}

TEST_CASE("S is nilpotent and e^{S} e^{-S} = I by block structure") {
  std::mt19937_64 rng(3);
  const ModelSpace ms = ModelSpace::from_one_based(7, {2, 5, 6});
  const DecouplingMap dm(ms, random_matrix(4, 3, rng));
  const Matrix s = dm.embedded();
  CHECK(s * s == Matrix::Zero(7, 7));
  CHECK((exp_s(dm, 1) * exp_s(dm, -1) - Matrix::Identity(7, 7)).cwiseAbs().maxCoeff() == 0.0);
  CHECK(exp_s(dm, 1) == Matrix(Matrix::Identity(7, 7) + s));
}

TEST_CASE("similarity_transform") {
  const Matrix t = similarity_transform(exchange(), plus_state_map());
  CHECK((t - mat({{1, 1}, {0, -1}})).norm() < 1e-15);

  const auto o = random_observable(5, 9);
  CHECK(similarity_transform(o, DecouplingMap::zero(ModelSpace(5, {1, 3}))) == o.matrix());

  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 5; ++trial) {
    const auto r = random_observable(6, 40 + static_cast<std::uint64_t>(trial));
    const DecouplingMap dm(ModelSpace(6, {0, 4}), 0.5 * random_matrix(4, 2, rng));
    const auto m = match_spectra(general_eigenvalues(similarity_transform(r, dm)),
                                 to_complex(eigendecompose(r).values), 1e-9);
    CHECK(m.matched);
  }
  CHECK_THROWS_AS(similarity_transform(o, DecouplingMap::zero(ModelSpace(4, {0}))), Error);
}

TEST_CASE("transformed_blocks: closed forms") {
  const auto b = transformed_blocks(exchange(), plus_state_map());
  CHECK((b.pp - mat({{1}})).norm() < 1e-15);
  CHECK((b.pq - mat({{1}})).norm() < 1e-15);
  CHECK((b.qp - mat({{0}})).norm() < 1e-15);
  CHECK((b.qq - mat({{-1}})).norm() < 1e-15);

  const auto d = transformed_blocks(herm({{1, 0}, {0, 2}}), DecouplingMap::zero(ModelSpace(2, {0})));
  CHECK(d.pp == mat({{1}}));
  CHECK(d.pq == mat({{0}}));
  CHECK(d.qp == mat({{0}}));
  CHECK(d.qq == mat({{2}}));

  // root of -0.1 s^2 + 2 s + 0.1 = 0 nearest zero
  const auto near = transformed_blocks(herm({{1, 0.1}, {0.1, 3}}),
                                       DecouplingMap(ModelSpace(2, {0}), mat({{-0.0498756}})));
  CHECK(std::abs(near.qp(0, 0)) < 1e-6);
}

TEST_CASE("transformed_blocks reassemble the dense product") {
  std::mt19937_64 rng(5);
  for (std::uint64_t seed = 1; seed <= 8; ++seed) {
    const auto o = random_observable(9, seed);
    const ModelSpace ms(9, {1, 2, 6, 8});
    const DecouplingMap dm(ms, random_matrix(5, 4, rng));
    const Matrix dense = similarity_transform(o, dm);
    CHECK((transformed_blocks(o, dm).assemble(ms) - dense).cwiseAbs().maxCoeff() <=
          1e-12 * o.frobenius_norm() * (1.0 + dm.s().norm()) * (1.0 + dm.s().norm()));
  }
}

TEST_CASE("decoupling_residual") {
  CHECK(decoupling_residual(exchange(), plus_state_map()) < 1e-15);
  CHECK(decoupling_residual(exchange(), DecouplingMap::zero(ModelSpace(2, {0}))) == 1.0);
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto o = random_observable(8, seed);
    const auto sel = select_eigenvectors(eigendecompose(o), {1, 3, 4});
    const DecouplingMap dm = construct_s_direct(sel, pivoted_model_space(sel.vectors));
    CHECK(decoupling_residual(o, dm) <= 1e-10);
    CHECK(is_decoupled(o, dm));
  }
}

TEST_CASE("s depends only on Lin Psi_J and K") {
  std::mt19937_64 rng(23);
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto o = random_observable(8, seed);
    const auto sel = select_eigenvectors(eigendecompose(o), {0, 5, 6});
    const ModelSpace ms = pivoted_model_space(sel.vectors);
    const DecouplingMap dm = construct_s_direct(sel, ms);
    for (int k = 0; k < 5; ++k) {
      const Matrix c = random_matrix(3, 3, rng);
      const DecouplingMap mixed = construct_s_from_columns(sel.vectors * c, ms);
      CHECK((mixed.s() - dm.s()).norm() <= 1e-10);
    }
  }
}

TEST_CASE("eigenvector-derived s decouples and P Psi_J are effective eigenvectors") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto o = random_observable(7, seed);
    const auto pairs = eigendecompose(o);
    const auto sel = select_eigenvectors(pairs, {0, 3});
    const DecouplingMap dm = construct_s_direct(sel, pivoted_model_space(sel.vectors));
    CHECK(decoupling_residual(o, dm) <= decoupling_tolerance(o));
    const Matrix p = p_rows(sel.vectors, dm.model_space());
    const Matrix eff = transformed_blocks(o, dm).pp;
    CHECK((eff * p - p * sel.lambda()).norm() <= 1e-10);
  }
}

TEST_CASE("a decoupling s fixes exactly d eigenvectors") {
  // Any s solving the decoupling equation equals s_J for some J: count the
  // eigenvectors with s alpha_i = beta_i over all N of them.
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto o = random_observable(7, seed);
    const auto pairs = eigendecompose(o);
    const auto sel = select_eigenvectors(pairs, {1, 2, 5});
    const DecouplingMap dm = construct_s_direct(sel, pivoted_model_space(sel.vectors));
    std::vector<Index> fixed;
    for (Index i = 0; i < 7; ++i)
      if (subspace_membership_residual(pairs.vectors.col(i), dm) <= 1e-8) fixed.push_back(i);
    CHECK(fixed == sel.indices);
  }
}

TEST_CASE("fixed points and non-membership") {
  std::mt19937_64 rng(29);
  const auto o = random_observable(6, 2);
  const auto sel = select_eigenvectors(eigendecompose(o), {2, 3});
  const DecouplingMap dm = construct_s_direct(sel, pivoted_model_space(sel.vectors));
  const ModelSpace& ms = dm.model_space();
  for (int k = 0; k < 10; ++k) {
    Vector q_only = Vector::Zero(6);
    q_only(ms.complement()) = random_vector(4, rng);
    CHECK(exp_s(dm, -1) * q_only == q_only);

    const Vector phi = random_vector(6, rng);
    const Vector image = exp_s(dm, -1) * phi;
    CHECK(Vector(image(ms.complement())).norm() > 1e-8);
  }
}

TEST_CASE("DecouplingMap validates its shape") {
  CHECK_THROWS_AS(DecouplingMap(ModelSpace(3, {0}), Matrix::Zero(1, 1)), Error);
  CHECK_NOTHROW(DecouplingMap(ModelSpace(3, {0, 1, 2}), Matrix::Zero(0, 3)));
  const auto full = DecouplingMap::zero(ModelSpace(3, {0, 1, 2}));
  CHECK(decoupling_residual(random_observable(3, 1), full) == 0.0);
}
