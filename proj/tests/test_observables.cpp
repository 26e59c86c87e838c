#include <catch_amalgamated.hpp>

#include <cmath>

#include "test_util.hpp"

using namespace effop;
using namespace effop::test;
using Catch::Matchers::WithinAbs;

namespace {

const double kR = 1.0 / std::sqrt(2.0);

ObservableMatrix sigma_x() { return herm({{0, 1}, {1, 0}}); }
ObservableMatrix sigma_z() { return herm({{1, 0}, {0, -1}}); }

CommutingSet a_and_a2() {
  return verify_commuting({sigma_x(), herm({{1, 0}, {0, 1}})});
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an effop::Error");
  return ErrorCode::ParseError;
}

/// (V diag(l_1) V^+, ..., V diag(l_c) V^+) for a random unitary V.
CommutingSet random_commuting(Index n, int c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const Matrix v = random_unitary(n, rng);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::vector<ObservableMatrix> members;
  for (int s = 0; s < c; ++s) {
    RealVector l(n);
    for (Index i = 0; i < n; ++i) l(i) = u(rng);
    members.push_back(validate_hermitian(planted_matrix(l, v)));
  }
  return verify_commuting(std::move(members));
}

}  // namespace

TEST_CASE("verify_commuting") {
  const Matrix a = sigma_x().matrix();
  CHECK_NOTHROW(verify_commuting({sigma_x(), validate_hermitian(a * a)}));
  CHECK_NOTHROW(verify_commuting({herm({{1, 0}, {0, 2}}), herm({{1, 0}, {0, 1}})}));
  try {
    verify_commuting({sigma_x(), sigma_z()});
    FAIL("expected NotCommuting");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NotCommuting);
    CHECK(std::string(e.what()).find("2.828") != std::string::npos);
  }
  CHECK(commutator(sigma_x().matrix(), sigma_z().matrix()).norm() ==
        Catch::Approx(2.0 * std::sqrt(2.0)).epsilon(1e-15));
  CHECK(code_of([] { verify_commuting({sigma_x(), random_observable(3, 1)}); }) ==
        ErrorCode::DimensionMismatch);
}

TEST_CASE("simultaneous_eigenbasis: hand examples") {
  const auto diag = simultaneous_eigenbasis(verify_commuting({herm({{1, 0}, {0, 2}}), herm({{5, 0}, {0, 5}})}));
  CHECK(diag.vectors.col(0) == vec({1, 0}));
  CHECK(diag.vectors.col(1) == vec({0, 1}));
  CHECK_THAT(diag.values(0, 0), WithinAbs(1, 1e-15));
  CHECK_THAT(diag.values(0, 1), WithinAbs(5, 1e-15));
  CHECK_THAT(diag.values(1, 0), WithinAbs(2, 1e-15));
  CHECK_THAT(diag.values(1, 1), WithinAbs(5, 1e-15));
  CHECK(diag.complete);

  const auto pair = simultaneous_eigenbasis(a_and_a2());
  CHECK((pair.vectors.col(0) - vec({kR, -kR})).norm() < 1e-14);
  CHECK((pair.vectors.col(1) - vec({kR, kR})).norm() < 1e-14);
  CHECK_THAT(pair.values(0, 0), WithinAbs(-1, 1e-14));
  CHECK_THAT(pair.values(1, 0), WithinAbs(1, 1e-14));
  CHECK_THAT(pair.values(0, 1), WithinAbs(1, 1e-14));
  CHECK_THAT(pair.values(1, 1), WithinAbs(1, 1e-14));
}

TEST_CASE("simultaneous_eigenbasis: degenerate first member resolved by the second") {
  const auto cs = verify_commuting({herm({{1, 0, 0}, {0, 1, 0}, {0, 0, 2}}),
                                    herm({{0, 1, 0}, {1, 0, 0}, {0, 0, 0}})});
  const auto b = simultaneous_eigenbasis(cs);
  CHECK(b.complete);
  CHECK_THAT(b.values(0, 1), WithinAbs(-1, 1e-14));
  CHECK_THAT(b.values(1, 1), WithinAbs(1, 1e-14));
  CHECK_THAT(b.values(2, 0), WithinAbs(2, 1e-14));

  const auto id = simultaneous_eigenbasis(verify_commuting({herm({{1, 0}, {0, 1}})}));
  CHECK_FALSE(id.complete);
}

TEST_CASE("simultaneous_eigenbasis: random commuting sets") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto cs = random_commuting(7, 3, seed);
    const auto b = simultaneous_eigenbasis(cs);
    for (std::size_t s = 0; s < cs.size(); ++s)
      for (Index i = 0; i < 7; ++i) {
        const Vector v = b.vectors.col(i);
        CHECK((cs[s].matrix() * v - b.values(i, static_cast<Index>(s)) * v).norm() <= 1e-9);
      }
    CHECK((b.vectors.adjoint() * b.vectors - Matrix::Identity(7, 7)).norm() <= 1e-10);
  }
}

TEST_CASE("common_s") {
  const auto cs = a_and_a2();
  const auto basis = simultaneous_eigenbasis(cs);
  const auto dm = common_s(cs, basis, {1}, ModelSpace::from_one_based(2, {1}));
  CHECK(std::abs(dm.s()(0, 0) - 1.0) < 1e-14);
  CHECK(decoupling_residual(cs[0], dm) < 1e-15);
  CHECK(decoupling_residual(cs[1], dm) == 0.0);

  const auto dcs = verify_commuting({herm({{1, 0}, {0, 2}}), herm({{3, 0}, {0, 4}})});
  const auto dz = common_s(dcs, simultaneous_eigenbasis(dcs), {0}, ModelSpace(2, {0}));
  CHECK(dz.s() == mat({{0}}));

  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto r = random_commuting(6, 3, 100 + seed);
    const auto rb = simultaneous_eigenbasis(r);
    const auto sel = select_simultaneous(rb, {1, 4});
    const auto map = common_s(r, rb, {1, 4}, pivoted_model_space(sel.vectors));
    for (std::size_t s = 0; s < r.size(); ++s) CHECK(decoupling_residual(r[s], map) <= 1e-10);
  }
}

TEST_CASE("effective_set") {
  const auto cs = a_and_a2();
  const auto basis = simultaneous_eigenbasis(cs);
  const auto dm = common_s(cs, basis, {1}, ModelSpace::from_one_based(2, {1}));
  const auto es = effective_set(cs, dm, &basis);
  REQUIRE(es.pairs.size() == 2);
  CHECK((es.pairs[0].first.matrix - mat({{1}})).norm() < 1e-14);
  CHECK((es.pairs[1].first.matrix - mat({{1}})).norm() < 1e-14);
  CHECK(es.max_commutator_norm == 0.0);

  const auto dcs = verify_commuting({herm({{1, 0, 0}, {0, 2, 0}, {0, 0, 3}}),
                                     herm({{4, 0, 0}, {0, 5, 0}, {0, 0, 6}})});
  const auto des = effective_set(dcs, DecouplingMap::zero(ModelSpace(3, {0, 1})));
  CHECK(des.pairs[1].first.matrix == mat({{4, 0}, {0, 5}}));
  CHECK(des.max_commutator_norm == 0.0);

  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto r = random_commuting(8, 3, 200 + seed);
    const auto rb = simultaneous_eigenbasis(r);
    const auto sel = select_simultaneous(rb, {0, 3, 6});
    const auto map = common_s(r, rb, {0, 3, 6}, pivoted_model_space(sel.vectors));
    const auto set = effective_set(r, map, &rb);
    CHECK(set.max_commutator_norm <= kEffectiveCommutatorTol);
    CHECK(set.max_eigen_relation_residual <= 1e-9);
  }

  // a map built for sigma_x does not decouple sigma_z
  const auto mixed = verify_commuting({herm({{1, 0}, {0, 1}}), sigma_z()});
  try {
    effective_set(mixed, dm);
    FAIL("expected NotDecoupled");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NotDecoupled);
    CHECK(std::string(e.what()).find("member 2") != std::string::npos);
  }
}

TEST_CASE("second_type_only") {
  const auto cs = verify_commuting({sigma_x()});
  const auto basis = simultaneous_eigenbasis(cs);
  const auto dm = common_s(cs, basis, {1}, ModelSpace::from_one_based(2, {1}));
  const auto z = second_type_only(sigma_z(), dm);
  CHECK(z.matrix.norm() < 1e-14);
  const Vector psi = vec({kR, kR});
  CHECK(std::abs(matrix_element(psi, psi, z, dm)) < 1e-14);

  std::mt19937_64 rng(6);
  const ModelSpace ms(5, {1, 3});
  const DecouplingMap any(ms, random_matrix(3, 2, rng));
  const auto id = second_type_only(validate_hermitian(Matrix::Identity(5, 5)), any);
  CHECK((id.matrix - (Matrix::Identity(2, 2) + any.s().adjoint() * any.s())).norm() <= 1e-13);

  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto h = random_observable(7, seed);
    const auto sel = select_eigenvectors(eigendecompose(h), {0, 1, 2});
    const auto map = construct_s_direct(sel, pivoted_model_space(sel.vectors));
    const auto outside = random_observable(7, 50 + seed);
    const auto ot = second_type_only(outside, map);
    const Vector chi = sel.vectors * random_vector(3, rng);
    const Vector chi2 = sel.vectors * random_vector(3, rng);
    const Complex direct = chi.dot(outside.matrix() * chi2);
    CHECK(std::abs(matrix_element(chi, chi2, ot, map) - direct) <= 1e-9 * (1.0 + std::abs(direct)));
  }
}

TEST_CASE("decompose_space: exchange matrix into two blocks") {
  const auto cs = verify_commuting({sigma_x()});
  const ModelSpace k1 = ModelSpace::from_one_based(2, {1});
  const auto dec = decompose_space(cs, {{1}, {0}}, {k1, k1});
  REQUIRE(dec.blocks.size() == 2);
  CHECK(std::abs(dec.blocks[0].map.s()(0, 0) - 1.0) < 1e-14);
  CHECK(std::abs(dec.blocks[1].map.s()(0, 0) + 1.0) < 1e-14);
  CHECK(dec.spectrum_union[0].matched);
}

TEST_CASE("decompose_space: diagonal singletons") {
  const auto cs = verify_commuting({herm({{3, 0, 0}, {0, 1, 0}, {0, 0, 2}})});
  const auto dec = decompose_space(cs, {{0}, {1}, {2}},
                                   {ModelSpace(3, {1}), ModelSpace(3, {2}), ModelSpace(3, {0})});
  for (const auto& blk : dec.blocks) CHECK(blk.map.s().norm() < 1e-15);
  CHECK(dec.blocks[0].pairs[0].first.matrix == mat({{1}}));
  CHECK(dec.blocks[2].pairs[0].first.matrix == mat({{3}}));
}

TEST_CASE("decompose_space: random 9x9 pair in three blocks") {
  std::mt19937_64 rng(77);
  const auto cs = random_commuting(9, 2, 9);
  const auto basis = simultaneous_eigenbasis(cs);
  const std::vector<std::vector<Index>> parts = {{0, 1, 2}, {3, 4, 5}, {6, 7, 8}};
  std::vector<ModelSpace> spaces;
  for (const auto& j : parts) spaces.push_back(pivoted_model_space(select_simultaneous(basis, j).vectors));
  const auto dec = decompose_space(cs, parts, spaces);
  REQUIRE(dec.blocks.size() == 3);
  for (const auto& m : dec.spectrum_union) CHECK(m.matched);

  // a vector of block 1 is not in Lin Psi_J of block 2
  const Vector psi = basis.vectors.col(0);
  const Vector phi = basis.vectors.col(4);
  const auto& b2 = dec.blocks[1];
  CHECK(code_of([&] { matrix_element(psi, phi, b2.pairs[0].second, b2.map); }) ==
        ErrorCode::NotInSubspace);
}

TEST_CASE("decompose_space: partition and rank errors") {
  const auto cs = verify_commuting({sigma_x()});
  const ModelSpace k1 = ModelSpace::from_one_based(2, {1});
  CHECK(code_of([&] { decompose_space(cs, {{0}, {0}}, {k1, k1}); }) == ErrorCode::PartitionInvalid);
  CHECK(code_of([&] { decompose_space(cs, {{0}}, {k1}); }) == ErrorCode::PartitionInvalid);
  CHECK(code_of([&] { decompose_space(cs, {{0, 1}}, {k1}); }) == ErrorCode::PartitionInvalid);

  const auto diag = verify_commuting({herm({{1, 0}, {0, 2}})});
  try {
    decompose_space(diag, {{0}, {1}}, {ModelSpace(2, {1}), ModelSpace(2, {1})});
    FAIL("expected SingularProjection");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SingularProjection);
    CHECK(std::string(e.what()).find("block 1") != std::string::npos);
  }
}
