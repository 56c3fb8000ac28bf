#include <doctest.h>

#include <cmath>
#include <random>

#include "helpers.hpp"
#include "scbohm/errors.hpp"
#include "scbohm/paths.hpp"

using namespace scbohm;
using namespace scbohm::testing;

namespace {

CMatrix hadamard_on_modes(const ModeSpinBasis& b) {
  const double r = 1.0 / std::sqrt(2.0);
  CMatrix u = CMatrix::Zero(b.dim_a(), b.dim_a());
  for (std::size_t s = 0; s < b.spins_a; ++s) {
    u(b.local_a(0, s), b.local_a(0, s)) = r;
    u(b.local_a(0, s), b.local_a(1, s)) = r;
    u(b.local_a(1, s), b.local_a(0, s)) = r;
    u(b.local_a(1, s), b.local_a(1, s)) = -r;
  }
  return u;
}

CMatrix id(std::size_t n) { return CMatrix::Identity(n, n); }

}  // namespace

TEST_CASE("product factorization") {
  std::mt19937_64 eng(4);
  const ModeSpinBasis b(3, 2, 2, 2);
  CVector a = random_unit_vector(b.dim_a(), eng);
  a(2) = 0.0;
  a.normalize();
  const auto s = PureState2P::product(b, a, random_unit_vector(b.dim_b(), eng));
  const auto f = factor_product_state(s);
  CHECK(f.psi_a(2) == cplx(0.0, 0.0));
  CHECK(std::abs(f.psi_b.norm() - 1.0) < 1e-15);
  CHECK((f.psi_a * f.psi_b.transpose() - s.amplitudes()).cwiseAbs().maxCoeff() < 1e-15);

  CMatrix bell = CMatrix::Zero(b.dim_a(), b.dim_b());
  bell(0, 0) = bell(2, 2) = 1.0 / std::sqrt(2.0);
  CHECK_THROWS_AS(PathEnumerator({}, PureState2P(b, bell)), InvalidInput);
}

TEST_CASE("trivial bundles") {
  const ModeSpinBasis b(2, 1, 2, 1);
  const auto s0 = PureState2P::basis_state(b, {0, 0, 1, 0});
  SUBCASE("identity circuit") {
    const PathEnumerator e({CircuitLayer::identity(b), CircuitLayer::identity(b)}, s0);
    const auto hit = e.enumerate({0, 0}, 2);
    REQUIRE(hit.size() == 1);
    CHECK(hit.amplitudes[0] == cplx(1.0, 0.0));
    CHECK(e.enumerate({1, 0}, 2).size() == 0);
    CHECK(e.marginal(2) == std::vector<double>{1.0, 0.0});
  }
  SUBCASE("balanced mixer") {
    const PathEnumerator e({CircuitLayer(b, hadamard_on_modes(b), id(2))}, s0);
    for (std::size_t j = 0; j < 2; ++j) {
      const auto bundle = e.enumerate({j, 0}, 1);
      REQUIRE(bundle.size() == 1);
      CHECK(std::abs(std::abs(bundle.amplitudes[0]) - 1.0 / std::sqrt(2.0)) < 1e-15);
    }
    const auto p = e.marginal(1);
    CHECK(p[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(p[1] == doctest::Approx(0.5).epsilon(1e-15));
  }
}

TEST_CASE("path sums reproduce circuit marginals on random circuits") {
  std::mt19937_64 eng(123);
  for (int trial = 0; trial < 12; ++trial) {
    const std::size_t ma = 2 + trial % 3, mb = 2 + (trial / 3) % 3;
    const ModeSpinBasis b(ma, 2, mb, 2);
    const int n = 1 + trial % 4;
    const auto c = random_circuit(b, n, eng);
    const auto s0 = PureState2P::basis_state(b, {trial % ma, 0, 0, 1});
    const PathEnumerator e(c, s0);
    const auto direct = marginal_distribution(evolve_circuit(s0, c), Particle::A);
    const auto paths = e.marginal(n);
    for (std::size_t j = 0; j < ma; ++j) CHECK(std::abs(paths[j] - direct[j]) < 1e-10);
  }
}

TEST_CASE("bundle contents agree with the explicit definitions") {
  std::mt19937_64 eng(77);
  const ModeSpinBasis b(3, 2, 2, 2);
  const auto c = random_circuit(b, 3, eng);
  const auto s0 = PureState2P::product(b, random_unit_vector(b.dim_a(), eng), random_unit_vector(b.dim_b(), eng));
  const PathEnumerator e(c, s0);
  const auto& f = e.factors();
  for (std::size_t j = 0; j < 3; ++j) {
    const auto bundle = e.enumerate({j, 1}, 3, true);
    CHECK(bundle.size() == 6 * 6 * 6);
    for (std::size_t p = 0; p < bundle.size(); p += 37) {
      const auto& path = bundle.paths[p];
      CHECK(path.size() == 4);
      CHECK(std::abs(path_amplitude(c, f.psi_a, path) - bundle.amplitudes[p]) < 1e-15);
      const CMatrix u = conditional_unitary(c, path);
      CHECK(max_unitarity_defect(u) < 1e-12);
      CHECK((u * f.psi_b - bundle.branches.col(p)).cwiseAbs().maxCoeff() < 1e-14);
    }
  }
}

TEST_CASE("uncoupled amplitudes sum to the single-particle transition amplitude") {
  std::mt19937_64 eng(9);
  const ModeSpinBasis b(3, 2, 2, 1);
  const auto c = random_circuit(b, 3, eng, false);
  const auto s0 = PureState2P::basis_state(b, {1, 1, 0, 0});
  const PathEnumerator e(c, s0);
  CMatrix ua = id(b.dim_a());
  for (const auto& l : c) ua = l.u_a() * ua;
  for (std::size_t j = 0; j < 3; ++j)
    for (std::size_t a = 0; a < 2; ++a) {
      const auto bundle = e.enumerate({j, a}, 3);
      cplx sum(0.0, 0.0);
      for (auto amp : bundle.amplitudes) sum += amp;
      CHECK(std::abs(sum - ua(b.local_a(j, a), b.local_a(1, 1))) < 1e-14);
    }
}

TEST_CASE("conditional unitaries") {
  std::mt19937_64 eng(5);
  const ModeSpinBasis b(3, 2, 2, 2);
  SUBCASE("zero couplings: independent of the path") {
    const auto c = random_circuit(b, 3, eng, false);
    CMatrix prod = id(b.dim_b());
    for (const auto& l : c) prod = l.u_b() * prod;
    for (const Path& p : {Path{{0, 0}, {1, 1}, {2, 0}, {0, 1}}, Path{{2, 1}, {2, 1}, {0, 0}, {1, 0}}})
      CHECK((conditional_unitary(c, p) - prod).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("coupling at one location only") {
    auto c = random_circuit(b, 2, eng, false);
    Eigen::MatrixXd phi = Eigen::MatrixXd::Zero(b.dim_a(), b.dim_b());
    for (std::size_t s = 0; s < 2; ++s)
      for (std::size_t k = 0; k < b.dim_b(); ++k) phi(b.local_a(2, s), k) = 0.3 + 0.1 * double(k);
    c.emplace_back(b, haar_unitary(b.dim_a(), eng), haar_unitary(b.dim_b(), eng), phi);
    const Path p{{0, 0}, {1, 0}, {0, 1}, {1, 1}};
    const Path q{{1, 1}, {0, 0}, {0, 0}, {0, 0}};
    const Path through{{1, 1}, {0, 0}, {0, 0}, {2, 0}};
    CHECK((conditional_unitary(c, p) - conditional_unitary(c, q)).cwiseAbs().maxCoeff() == 0.0);
    CHECK((conditional_unitary(c, p) - conditional_unitary(c, through)).cwiseAbs().maxCoeff() > 0.1);
  }
}

TEST_CASE("lambda for single pairs") {
  std::mt19937_64 eng(21);
  const ModeSpinBasis b(3, 1, 3, 1);
  const CVector psi_b = random_unit_vector(3, eng);
  SUBCASE("no couplings") {
    const auto c = random_circuit(b, 3, eng, false);
    const auto r = path_lambda(c, {{0, 0}, {1, 0}, {2, 0}, {0, 0}}, {{1, 0}, {1, 0}, {0, 0}, {0, 0}}, psi_b);
    CHECK(std::abs(r.value - 1.0) < 1e-14);
    for (auto h : r.hits) CHECK(std::abs(h) < 1e-14);
  }
  SUBCASE("P == Q is exactly one") {
    const auto c = random_circuit(b, 3, eng, true);
    const Path p{{0, 0}, {2, 0}, {1, 0}, {1, 0}};
    const auto r = path_lambda(c, p, p, psi_b);
    CHECK(r.value == cplx(1.0, 0.0));
    for (auto h : r.hits) CHECK(h == cplx(0.0, 0.0));
  }
  SUBCASE("one coupling layer phasing location j*") {
    const CMatrix b1 = haar_unitary(3, eng), b2 = haar_unitary(3, eng);
    Eigen::MatrixXd phi = Eigen::MatrixXd::Zero(3, 3);
    phi.row(2) << 0.4, -1.1, 2.5;
    const Circuit c{CircuitLayer(b, haar_unitary(3, eng), b1),
                    CircuitLayer(b, haar_unitary(3, eng), b2, phi)};
    const Path p{{0, 0}, {1, 0}, {2, 0}};
    const Path q{{0, 0}, {1, 0}, {0, 0}};
    const auto r = path_lambda(c, p, q, psi_b);
    const CVector chi = b2 * b1 * psi_b;
    cplx expect(0.0, 0.0);
    for (int k = 0; k < 3; ++k) expect += std::norm(chi(k)) * std::polar(1.0, -phi(2, k));
    CHECK(std::abs(r.value - expect) < 1e-14);
    const cplx dense = psi_b.dot(conditional_unitary(c, p).adjoint() * conditional_unitary(c, q) * psi_b);
    CHECK(std::abs(r.value - dense) < 1e-14);
    CHECK(std::abs(r.hits[0]) < 1e-15);
    CHECK(std::abs(1.0 + r.hits[0] + r.hits[1] - r.value) < 1e-15);
  }
}

TEST_CASE("lambda tables: invariants and agreement with pairwise lambda") {
  std::mt19937_64 eng(2);
  for (int trial = 0; trial < 6; ++trial) {
    const ModeSpinBasis b(3, 2, 2, 2);
    const auto c = random_circuit(b, 3, eng);
    const auto s0 = PureState2P::basis_state(b, {0, 1, 1, 0});
    const PathEnumerator e(c, s0);
    const auto bundle = e.enumerate({std::size_t(trial % 3), std::size_t(trial % 2)}, 3, true);
    const auto t = lambda_table(bundle);
    const auto np = static_cast<Eigen::Index>(bundle.size());
    REQUIRE(t.hits.size() == 3);
    for (Eigen::Index p = 0; p < np; ++p) {
      CHECK(t.lambda(p, p) == cplx(1.0, 0.0));
      for (Eigen::Index q = 0; q < np; ++q) {
        CHECK(std::abs(t.lambda(p, q)) <= 1.0 + 1e-12);
        CHECK(t.lambda(q, p) == std::conj(t.lambda(p, q)));
        cplx tele(1.0, 0.0);
        for (const auto& h : t.hits) tele += h(p, q);
        CHECK(std::abs(tele - t.lambda(p, q)) < 1e-12);
      }
    }
    for (Eigen::Index p = 0; p < np; p += 7)
      for (Eigen::Index q = 0; q < np; q += 5) {
        const auto r = path_lambda(c, bundle.paths[p], bundle.paths[q], e.factors().psi_b);
        CHECK(std::abs(r.value - t.lambda(p, q)) < 1e-13);
        for (int k = 0; k < 3; ++k) CHECK(std::abs(r.hits[k] - t.hits[k](p, q)) < 1e-13);
      }
  }
}

TEST_CASE("density decomposition") {
  SUBCASE("uncoupled: total equals the one-body interference result") {
    std::mt19937_64 eng(10);
    const ModeSpinBasis b(4, 2, 2, 2);
    const auto c = random_circuit(b, 3, eng, false);
    const CVector a0 = CVector::Unit(b.dim_a(), b.local_a(2, 0));
    const auto s0 = PureState2P::product(b, a0, random_unit_vector(b.dim_b(), eng));
    const PathEnumerator e(c, s0);
    CVector one = a0;
    for (const auto& l : c) one = l.u_a() * one;
    for (std::size_t j = 0; j < 4; ++j) {
      const auto d = e.density(j, 3);
      const double expect = std::norm(one(b.local_a(j, 0))) + std::norm(one(b.local_a(j, 1)));
      CHECK(std::abs(d.total - expect) < 1e-12);
      CHECK(d.diagonal >= 0.0);
    }
  }
  SUBCASE("single-path endpoints have no cross term") {
    const ModeSpinBasis b(2, 1, 2, 1);
    std::mt19937_64 eng(3);
    const PathEnumerator e({CircuitLayer(b, hadamard_on_modes(b), haar_unitary(2, eng))},
                           PureState2P::basis_state(b, {0, 0, 0, 0}));
    for (std::size_t j = 0; j < 2; ++j) CHECK(e.density(j, 1).cross == 0.0);
  }
  SUBCASE("which-path coupling removes the interference term") {
    const ModeSpinBasis b(2, 1, 2, 1);
    Eigen::MatrixXd phi = Eigen::MatrixXd::Zero(2, 2);
    phi(1, 1) = M_PI;
    const CMatrix h = hadamard_on_modes(b);
    const CMatrix hb = hadamard_on_modes(ModeSpinBasis(2, 1, 1, 1));
    const Circuit c{CircuitLayer(b, h, id(2), phi), CircuitLayer(b, h, id(2))};
    // Partner starts in |+>, so the two A branches leave it in |+> and |->.
    const PureState2P s0 = PureState2P::product(b, CVector::Unit(2, 0), hb.col(0));
    const PathEnumerator e(c, s0);
    const auto direct = marginal_distribution(evolve_circuit(s0, c), Particle::A);
    for (std::size_t j = 0; j < 2; ++j) {
      const auto d = e.density(j, 2);
      CHECK(d.paths == 2);
      CHECK(std::abs(d.total - d.diagonal) < 1e-10);
      CHECK(std::abs(d.total - direct[j]) < 1e-12);
    }
  }
}

TEST_CASE("path cap turns blowup into a resource error") {
  std::mt19937_64 eng(1);
  const ModeSpinBasis b(4, 2, 2, 2);
  const auto c = random_circuit(b, 4, eng);
  const auto s0 = PureState2P::basis_state(b, {0, 0, 0, 0});
  const PathEnumerator tight(c, s0, PathLimits{10});
  CHECK_THROWS_AS(tight.enumerate({0, 0}, 4), ResourceError);
  CHECK_THROWS_AS(tight.density(1, 4), ResourceError);
  const PathEnumerator roomy(c, s0);
  CHECK_NOTHROW(roomy.density(1, 4));
}

TEST_CASE("walk path sums match direct densities and currents") {
  std::mt19937_64 eng(42);
  struct Setup {
    std::size_t n; int layers; double m1, m2;
    std::vector<std::size_t> s1; const char* sp1;
    std::vector<std::size_t> s2; const char* sp2;
    std::vector<int> coupled;
  };
  const std::vector<Setup> setups{
      {8, 3, 0.0, 0.0, {3}, "right", {5}, "up", {}},
      {8, 3, 1.0, 0.5, {3, 4}, "up", {2}, "left", {2}},
      {12, 4, 0.7, 0.0, {5}, "up", {6, 7}, "right-down", {1, 3}},
      {16, 3, 0.0, 1.0, {7, 8}, "left", {3}, "up", {1, 2, 3}},
      {10, 4, 1.3, 0.4, {2}, "right-down", {2}, "up", {4}},
  };
  for (const auto& su : setups) {
    const auto wc = make_walk_case(su.n, su.layers, su.m1, su.m2, su.s1, su.sp1, su.s2, su.sp2,
                                   su.coupled, eng);
    const PathEnumerator e(wc.circuit, wc.history[0].to_circuit_state(), {}, 1.0 / wc.grid.dx);
    for (int r = 0; r <= su.layers; ++r) {
      const auto direct = marginal_currents(wc.history[r], 1);
      for (std::size_t x = 0; x < su.n; ++x) {
        const auto d = e.density(x, r);
        const auto j = e.current(x, r);
        CHECK(std::abs(d.total - direct.density(x)) < 1e-10);
        CHECK(std::abs(j.current - direct.current(x)) < 1e-10);
        CHECK(j.diagonal == 0.0);
        CHECK(j.imag_residue < 1e-12);
        CHECK(d.diagonal >= 0.0);
      }
    }
  }
}

TEST_CASE("walk currents: trivial and one-body cases") {
  std::mt19937_64 eng(6);
  SUBCASE("at-rest single component, no dynamics") {
    const auto wc = make_walk_case(8, 0, 1.0, 0.0, {2, 3, 4}, "up", {1}, "up", {}, eng);
    const PathEnumerator e(wc.circuit, wc.history[0].to_circuit_state(), {}, 1.0 / wc.grid.dx);
    for (std::size_t x = 0; x < 8; ++x) CHECK(e.current(x, 0).current == 0.0);
  }
  SUBCASE("moving one-body packet, 3 layers") {
    const auto wc = make_walk_case(12, 3, 0.8, 0.0, {4, 5, 6}, "right", {0}, "up", {}, eng);
    const PathEnumerator e(wc.circuit, wc.history[0].to_circuit_state(), {}, 1.0 / wc.grid.dx);
    // One-body oracle: evolve particle 1 alone.
    const auto step = build_dirac_step(wc.grid, PotentialField::free(0.8, 12));
    CVector one = wc.history[0].psi().col(0) / wc.history[0].psi().col(0).norm() / std::sqrt(wc.grid.dx);
    for (int t = 0; t < 3; ++t) one = evolve_one_body(one, step);
    const auto ob = one_body_currents(wc.grid, one);
    for (std::size_t x = 0; x < 12; ++x) {
      CHECK(std::abs(e.current(x, 3).current - ob.current(x)) < 1e-10);
      CHECK(std::abs(e.density(x, 3).total - ob.density(x)) < 1e-10);
    }
  }
}

TEST_CASE("mode-projected path sums") {
  std::mt19937_64 eng(14);
  const std::size_t n = 16;
  const int layers = 3;
  const auto wc = make_walk_case(n, layers, 0.0, 0.5, {3}, "up", {10}, "up", {1, 2}, eng, 0.0, true);
  const PathEnumerator e(wc.circuit, wc.history[0].to_circuit_state(), {}, 1.0 / wc.grid.dx);
  SUBCASE("position basis reduces to site paths") {
    const CMatrix dict = id(n);
    for (std::size_t x = 0; x < n; ++x) {
      const auto mp = e.mode_projected(dict, x, layers);
      CHECK(std::abs(mp.j0 - e.density(x, layers).total) < 1e-13);
      CHECK(std::abs(mp.j1 - e.current(x, layers).current) < 1e-13);
      CHECK(std::abs(mp.captured_norm - 1.0) < 1e-12);
      CHECK(!mp.warning);
    }
  }
  SUBCASE("two-packet dictionary spanning a split packet") {
    // A massless "up" spinor splits into a right mover and a left mover;
    // after `layers` steps they occupy single sites 3 +/- layers.
    CMatrix dict = CMatrix::Zero(n, 2);
    dict(3 + layers, 0) = 1.0;
    dict(3 - layers, 1) = 1.0;
    const auto direct = marginal_currents(wc.history[layers], 1);
    for (std::size_t x = 0; x < n; ++x) {
      const auto mp = e.mode_projected(dict, x, layers);
      CHECK(std::abs(mp.j0 - direct.density(x)) < 1e-10);
      CHECK(std::abs(mp.j1 - direct.current(x)) < 1e-10);
    }
    CHECK(std::abs(e.mode_projected(dict, 0, layers).captured_norm - 1.0) < 1e-10);
    CMatrix half = dict.col(0);
    const auto mp = e.mode_projected(half, 3 + layers, layers);
    CHECK(std::abs(mp.captured_norm - 0.5) < 1e-10);
    CHECK(mp.warning.has_value());
  }
  SUBCASE("non-orthonormal dictionary is rejected") {
    CMatrix bad = CMatrix::Ones(n, 1);
    CHECK_THROWS_AS(e.mode_projected(bad, 0, layers), ConfigError);
  }
}
