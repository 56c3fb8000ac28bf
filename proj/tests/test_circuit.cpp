#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "helpers.hpp"
#include "scbohm/circuit.hpp"
#include "scbohm/circuit_json.hpp"
#include "scbohm/errors.hpp"

using namespace scbohm;
using namespace scbohm::testing;

namespace {

CMatrix mixer_on_modes(const ModeSpinBasis& b) {
  // Balanced two-mode mixer on modes {0,1} of particle A, identity on spin.
  const double r = 1.0 / std::sqrt(2.0);
  CMatrix h = CMatrix::Identity(b.modes_a, b.modes_a);
  h(0, 0) = r; h(0, 1) = r; h(1, 0) = r; h(1, 1) = -r;
  CMatrix u = CMatrix::Zero(b.dim_a(), b.dim_a());
  for (std::size_t j = 0; j < b.modes_a; ++j)
    for (std::size_t k = 0; k < b.modes_a; ++k)
      for (std::size_t s = 0; s < b.spins_a; ++s) u(b.local_a(j, s), b.local_a(k, s)) = h(j, k);
  return u;
}

}  // namespace

TEST_CASE("basis index bijection is total and invertible") {
  const ModeSpinBasis b(3, 2, 4, 2);
  for (std::size_t f = 0; f < b.dim(); ++f) {
    const auto k = b.unflatten(f);
    CHECK(b.flat(k.j, k.a, k.k, k.b) == f);
  }
  CHECK_THROWS_AS(ModeSpinBasis(0, 1, 1, 1), ConfigError);
}

TEST_CASE("identity layer leaves amplitudes and advances the layer counter") {
  std::mt19937_64 eng(7);
  const ModeSpinBasis b(3, 2, 2, 2);
  const CMatrix amp = random_unit_vector(b.dim(), eng).reshaped(b.dim_b(), b.dim_a()).transpose();
  const PureState2P s(b, amp);
  const auto t = apply_layer(s, CircuitLayer::identity(b));
  CHECK(t.time_layer() == 1);
  CHECK((t.amplitudes() - s.amplitudes()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("balanced mixer acts on particle A only") {
  const ModeSpinBasis b(2, 2, 3, 2);
  const auto s = PureState2P::basis_state(b, {0, 1, 2, 0});
  const CircuitLayer layer(b, mixer_on_modes(b), CMatrix::Identity(b.dim_b(), b.dim_b()));
  const auto t = apply_layer(s, layer);
  CHECK(std::abs(t.amplitude(0, 1, 2, 0) - 1.0 / std::sqrt(2.0)) < 1e-15);
  CHECK(std::abs(t.amplitude(1, 1, 2, 0) - 1.0 / std::sqrt(2.0)) < 1e-15);
  CHECK(std::abs(t.norm_squared() - 1.0) < 1e-15);
  CHECK(marginal_probability(t, Particle::B, 2) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("norm preserved over a random 3-layer circuit (M=3, S=2)") {
  std::mt19937_64 eng(11);
  const ModeSpinBasis b(3, 2, 3, 2);
  const auto c = random_circuit(b, 3, eng);
  auto s = PureState2P::basis_state(b, {0, 0, 0, 0});
  for (const auto& l : c) {
    s = apply_layer(s, l);
    CHECK(std::abs(s.norm_squared() - 1.0) < 1e-12);
  }
}

TEST_CASE("evolve_circuit: empty circuit, inverse round trip") {
  std::mt19937_64 eng(3);
  const ModeSpinBasis b(3, 2, 2, 2);
  const auto s0 = PureState2P::product(b, random_unit_vector(b.dim_a(), eng),
                                       random_unit_vector(b.dim_b(), eng));
  const auto same = evolve_circuit(s0, {});
  CHECK((same.amplitudes() - s0.amplitudes()).cwiseAbs().maxCoeff() == 0.0);
  CHECK(same.time_layer() == 0);

  const auto c = random_circuit(b, 4, eng);
  const auto back = evolve_circuit(evolve_circuit(s0, c), inverse_circuit(c));
  CHECK((back.amplitudes() - s0.amplitudes()).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("dense oracle: evolve_circuit equals explicit full-matrix action") {
  // Documented 2-layer circuit first, then a sweep over small sizes.
  std::mt19937_64 eng(2024);
  {
    const ModeSpinBasis b(2, 2, 2, 2);
    const auto c = random_circuit(b, 2, eng);
    const auto s0 = PureState2P::basis_state(b, {0, 0, 0, 0});
    const CVector expect = dense_circuit(c, b) * flatten(s0);
    CHECK(max_abs_diff(flatten(evolve_circuit(s0, c)), expect) < 1e-10);
  }
  for (std::size_t ma = 1; ma <= 4; ++ma)
    for (std::size_t mb = 1; mb <= 4; ++mb)
      for (int n = 1; n <= 4; ++n) {
        const ModeSpinBasis b(ma, 2, mb, 2);
        const auto c = random_circuit(b, n, eng);
        const auto s0 = PureState2P::product(b, random_unit_vector(b.dim_a(), eng),
                                             random_unit_vector(b.dim_b(), eng));
        const CVector expect = dense_circuit(c, b) * flatten(s0);
        CHECK(max_abs_diff(flatten(evolve_circuit(s0, c)), expect) < 1e-10);
      }
}

TEST_CASE("marginal probabilities") {
  const ModeSpinBasis b(2, 2, 2, 2);
  SUBCASE("product basis state") {
    const auto s = PureState2P::basis_state(b, {0, 1, 1, 0});
    CHECK(marginal_probability(s, Particle::A, 0) == 1.0);
    CHECK(marginal_probability(s, Particle::A, 1) == 0.0);
  }
  SUBCASE("maximally mode-entangled") {
    CMatrix amp = CMatrix::Zero(b.dim_a(), b.dim_b());
    amp(b.local_a(0, 0), b.local_b(0, 0)) = 1.0 / std::sqrt(2.0);
    amp(b.local_a(1, 0), b.local_b(1, 0)) = 1.0 / std::sqrt(2.0);
    const PureState2P s(b, amp);
    CHECK(marginal_probability(s, Particle::A, 0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(marginal_probability(s, Particle::A, 1) == doctest::Approx(0.5).epsilon(1e-15));
  }
  SUBCASE("completeness over random circuits") {
    std::mt19937_64 eng(5);
    for (int trial = 0; trial < 20; ++trial) {
      const ModeSpinBasis bb(3, 2, 4, 2);
      const auto s = evolve_circuit(PureState2P::basis_state(bb, {0, 0, 0, 0}), random_circuit(bb, 3, eng));
      const auto pa = marginal_distribution(s, Particle::A);
      const auto pb = marginal_distribution(s, Particle::B);
      CHECK(std::abs(std::accumulate(pa.begin(), pa.end(), 0.0) - 1.0) < 1e-12);
      CHECK(std::abs(std::accumulate(pb.begin(), pb.end(), 0.0) - 1.0) < 1e-12);
      for (double p : pa) CHECK((p >= 0.0 && p <= 1.0 + 1e-12));
    }
  }
  SUBCASE("mode out of range") {
    const auto s = PureState2P::basis_state(b, {0, 0, 0, 0});
    CHECK_THROWS_AS(marginal_probability(s, Particle::A, 2), InvalidInput);
  }
}

TEST_CASE("layers local to A never change B marginals") {
  std::mt19937_64 eng(99);
  const ModeSpinBasis b(3, 2, 3, 2);
  auto s = evolve_circuit(PureState2P::basis_state(b, {0, 0, 0, 0}), random_circuit(b, 3, eng));
  for (int trial = 0; trial < 10; ++trial) {
    const CircuitLayer local(b, haar_unitary(b.dim_a(), eng), CMatrix::Identity(b.dim_b(), b.dim_b()));
    const auto before = marginal_distribution(s, Particle::B);
    s = apply_layer(s, local);
    const auto after = marginal_distribution(s, Particle::B);
    for (std::size_t k = 0; k < before.size(); ++k) CHECK(std::abs(before[k] - after[k]) < 1e-14);
  }
}

TEST_CASE("layer validation") {
  const ModeSpinBasis b(2, 2, 2, 2);
  CMatrix bad = CMatrix::Identity(4, 4);
  bad(0, 0) = 1.0 + 1e-9;
  CHECK_THROWS_AS(CircuitLayer(b, bad, CMatrix::Identity(4, 4)), ConfigError);
  CHECK_THROWS_AS(CircuitLayer(b, CMatrix::Identity(3, 3), CMatrix::Identity(4, 4)), InvalidInput);
  const ModeSpinBasis other(3, 2, 2, 2);
  const auto s = PureState2P::basis_state(other, {0, 0, 0, 0});
  CHECK_THROWS_AS(apply_layer(s, CircuitLayer::identity(b)), InvalidInput);
}

TEST_CASE("circuit JSON round trip and schema errors") {
  std::mt19937_64 eng(1);
  const ModeSpinBasis b(2, 2, 2, 1);
  const auto c = random_circuit(b, 2, eng);
  const auto s0 = PureState2P::basis_state(b, {1, 0, 0, 0});
  const auto doc = parse_circuit(circuit_to_json(b, s0, c));
  CHECK(doc.basis == b);
  CHECK(doc.layers.size() == 2);
  const auto direct = evolve_circuit(s0, c);
  const auto loaded = evolve_circuit(doc.initial, doc.layers);
  CHECK((direct.amplitudes() - loaded.amplitudes()).cwiseAbs().maxCoeff() < 1e-14);

  nlohmann::json broken = circuit_to_json(b, s0, c);
  broken["layers"][0]["u_a"][0][0] = nlohmann::json::array({2.0, 0.0});
  CHECK_THROWS_AS(parse_circuit(broken), ConfigError);
  CHECK_THROWS_AS(parse_circuit(nlohmann::json::object()), ConfigError);
}
