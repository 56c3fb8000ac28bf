#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "helpers.hpp"
#include "scbohm/errors.hpp"
#include "scbohm/guidance.hpp"
#include "scbohm/stats.hpp"

using namespace scbohm;
using namespace scbohm::testing;

namespace {

struct OneBodyRun {
  LatticeGrid grid;
  std::vector<CurrentField> currents;
};

OneBodyRun one_body_run(std::size_t n, double length, double center, double sigma, double k0,
                        const char* spinor, double mass, int layers) {
  OneBodyRun r;
  r.grid = periodic_grid(n, length);
  CVector psi = gaussian_packet(r.grid, center, sigma, k0, named_spinor(spinor));
  const auto step = build_dirac_step(r.grid, PotentialField::free(mass, n));
  for (int t = 0; t <= layers; ++t) {
    r.currents.push_back(one_body_currents(r.grid, psi, t));
    psi = evolve_one_body(psi, step);
  }
  return r;
}

VelocityField constant_field(const LatticeGrid& g, int layer, double c) {
  VelocityField f;
  f.grid = g;
  f.layer = layer;
  f.v = RVector::Constant(g.sites, c);
  f.node.assign(g.sites, 0);
  return f;
}

}  // namespace

TEST_CASE("velocity field arithmetic and masking") {
  const LatticeGrid g = periodic_grid(4, 4.0);
  CurrentField c{g, RVector::Zero(4), RVector::Zero(4), 0};
  c.density << 0.5, 0.25, 0.0, 1e-12;
  c.current << 0.25, -0.1, 0.3, 0.2;
  const auto f = velocity_field(c);
  CHECK(f.v(0) == 0.5);
  CHECK(f.v(1) == doctest::Approx(-0.4).epsilon(1e-15));
  CHECK(f.node[2] == 1);
  CHECK(f.node[3] == 1);
  CHECK(f.masked_count() == 2);
  CHECK(f.threshold == doctest::Approx(0.5e-9));

  c.density.setZero();
  CHECK_THROWS_AS(velocity_field(c), DegenerateError);
}

TEST_CASE("at-rest spinor gives zero velocity") {
  const LatticeGrid g = periodic_grid(32, 16.0);
  const CVector psi = gaussian_packet(g, 0.0, 2.0, 0.0, named_spinor("down"));
  const auto f = velocity_field(one_body_currents(g, psi));
  CHECK(f.v.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("mirrored two-packet state has antisymmetric velocity") {
  const std::size_t n = 128;
  const LatticeGrid g = periodic_grid(n, 32.0);
  // Parity maps x -> -x with gamma0; "up" is a gamma0 eigenvector.
  CVector psi = gaussian_packet(g, 3.0, 1.0, -1.0, named_spinor("up")) +
                gaussian_packet(g, -3.0, 1.0, 1.0, named_spinor("up"));
  psi /= std::sqrt(psi.squaredNorm() * g.dx);
  const auto step = build_dirac_step(g, PotentialField::free(0.7, n));
  for (int t = 0; t < 10; ++t) psi = evolve_one_body(psi, step);
  const auto f = velocity_field(one_body_currents(g, psi, 10));
  double worst = 0.0;
  for (std::size_t i = 1; i < n; ++i) {
    if (f.node[i] || f.node[n - i]) continue;
    worst = std::max(worst, std::abs(f.v(i) + f.v(n - i)));
  }
  CHECK(worst < 1e-10);
  CHECK(std::abs(f.v(n / 2)) < 1e-10);
}

TEST_CASE("field stack validation and interpolation") {
  const LatticeGrid g = periodic_grid(8, 8.0);
  std::vector<VelocityField> fs{constant_field(g, 0, 1.0), constant_field(g, 1, 3.0)};
  const FieldStack stack(fs);
  double v = 0.0;
  REQUIRE(stack.velocity(0.3, 0.25, v));
  CHECK(v == doctest::Approx(1.5));
  fs[1].layer = 2;
  CHECK_THROWS_AS(FieldStack{fs}, InvalidInput);
  fs[1].layer = 1;
  fs[1].node[3] = 1;
  const FieldStack masked(fs);
  CHECK_FALSE(masked.velocity(g.position(3) - 0.5, 0.5, v));
  CHECK(masked.velocity(g.position(5) + 0.5, 0.5, v));
}

TEST_CASE("integration of trivial fields") {
  const LatticeGrid g = periodic_grid(64, 32.0);
  SUBCASE("v = 0 keeps the start position") {
    std::vector<VelocityField> fs;
    for (int t = 0; t <= 10; ++t) fs.push_back(constant_field(g, t, 0.0));
    const auto tr = integrate(FieldStack(fs), 1.234, 0, 10);
    for (double x : tr.positions) CHECK(x == 1.234);
    CHECK_FALSE(tr.flagged);
  }
  SUBCASE("v = c translates linearly, with wrap") {
    const double c = 0.37;
    std::vector<VelocityField> fs;
    for (int t = 0; t <= 40; ++t) fs.push_back(constant_field(g, t, c));
    const FieldStack stack(fs);
    const double x0 = 10.0;
    const auto tr = integrate(stack, x0, 2, 40, {8});
    for (std::size_t k = 0; k < tr.positions.size(); ++k) {
      const double expect = g.wrap(x0 + c * static_cast<double>(k) * g.dt);
      double d = std::abs(tr.positions[k] - expect);
      d = std::min(d, g.length() - d);
      CHECK(d < 1e-10);
    }
    const auto back = integrate(stack, x0, 40, 2, {8});
    CHECK(back.direction == Direction::backward);
    CHECK(back.at_layer(2) == doctest::Approx(g.wrap(x0 - c * 38 * g.dt)).epsilon(1e-12));
  }
  SUBCASE("bad inputs") {
    std::vector<VelocityField> fs{constant_field(g, 0, 0.0), constant_field(g, 1, 0.0)};
    const FieldStack stack(fs);
    CHECK_THROWS_AS(integrate(stack, 0.0, 0, 2), InvalidInput);
    CHECK_THROWS_AS(integrate(stack, 0.0, 0, 1, {0}), ConfigError);
    CHECK_THROWS_AS(integrate(stack, std::nan(""), 0, 1), InvalidInput);
  }
}

TEST_CASE("node regions freeze and flag the trajectory") {
  const LatticeGrid g = periodic_grid(16, 16.0);
  std::vector<VelocityField> fs;
  for (int t = 0; t <= 8; ++t) {
    auto f = constant_field(g, t, 1.0);
    f.node[10] = 1;
    fs.push_back(f);
  }
  const auto tr = integrate(FieldStack(fs), g.position(6), 0, 8, {4});
  REQUIRE(tr.flagged);
  // Cell [x9, x10] touches the node; the last RK stage reaches it in layer 2 -> 3.
  CHECK(tr.flag_layer == 2);
  CHECK(tr.positions.size() == 9);
  CHECK(tr.positions[2] == doctest::Approx(g.position(8)));
  for (std::size_t k = 4; k < tr.positions.size(); ++k) CHECK(tr.positions[k] == tr.positions[3]);
  CHECK(tr.positions[3] < g.position(9));
}

TEST_CASE("trajectories of a spreading packet: reversibility, ordering, determinism") {
  const auto run = one_body_run(128, 32.0, -4.0, 1.0, 1.0, "right", 0.5, 32);
  const FieldStack stack = make_field_stack(run.currents);
  auto eng = make_engine(11, Stream::initial_ensemble);
  auto x0 = sample_density(LinearDensity(run.grid, run.currents[0].density), 400, eng);
  std::sort(x0.begin(), x0.end());
  const IntegratorOptions opts{64};
  const auto fwd = integrate_ensemble(stack, x0, 0, 32, opts);

  SUBCASE("forward then backward returns to the start") {
    double worst = 0.0;
    std::size_t used = 0;
    for (const auto& tr : fwd) {
      if (tr.flagged) continue;
      const auto back = integrate(stack, tr.positions.back(), 32, 0, opts);
      if (back.flagged) continue;
      ++used;
      worst = std::max(worst, std::abs(back.positions.back() - tr.positions.front()));
    }
    CHECK(used > 390);
    CHECK(worst < 1e-6);
  }
  SUBCASE("trajectories never cross") {
    for (std::size_t k = 0; k < fwd.front().positions.size(); ++k)
      for (std::size_t i = 1; i < fwd.size(); ++i)
        if (!fwd[i].flagged && !fwd[i - 1].flagged) CHECK(fwd[i - 1].positions[k] <= fwd[i].positions[k]);
  }
  SUBCASE("bit-identical across thread counts and reruns") {
    const auto again = integrate_ensemble(stack, x0, 0, 32, opts, 1, 4);
    REQUIRE(again.size() == fwd.size());
    for (std::size_t i = 0; i < fwd.size(); ++i) {
      CHECK(again[i].positions == fwd[i].positions);
      CHECK(again[i].flagged == fwd[i].flagged);
    }
    auto eng2 = make_engine(11, Stream::initial_ensemble);
    auto y0 = sample_density(LinearDensity(run.grid, run.currents[0].density), 400, eng2);
    std::sort(y0.begin(), y0.end());
    CHECK(y0 == x0);
  }
}

TEST_CASE("linear density sampling") {
  const LatticeGrid g = periodic_grid(64, 32.0);
  SUBCASE("single-node density stays within its hat") {
    RVector rho = RVector::Zero(64);
    rho(20) = 1.0;
    const LinearDensity d(g, rho);
    auto eng = make_engine(1, Stream::initial_ensemble);
    for (double x : sample_density(d, 2000, eng)) {
      CHECK(x >= g.position(19));
      CHECK(x <= g.position(21));
    }
  }
  SUBCASE("uniform density") {
    const LinearDensity d(g, RVector::Constant(64, 1.0 / 32.0));
    CHECK(d.raw_mass() == doctest::Approx(1.0));
    CHECK(d.cdf(d.lower()) == 0.0);
    CHECK(d.cdf(d.upper()) == doctest::Approx(1.0));
    CHECK(d.inverse_cdf(0.25) == doctest::Approx(-8.0));
    auto eng = make_engine(2, Stream::initial_ensemble);
    const auto xs = sample_density(d, 10000, eng);
    const double ks = ks_statistic(xs, d);
    CHECK(ks < 0.02);
    CHECK(ks_critical_value(10000) == doctest::Approx(0.01358).epsilon(1e-3));
  }
  SUBCASE("two packets with weights 0.7 and 0.3") {
    const CVector a = gaussian_packet(g, -6.0, 1.0, 0.0, named_spinor("up"));
    const CVector b = gaussian_packet(g, 6.0, 1.0, 0.0, named_spinor("up"));
    const RVector rho = (0.7 * one_body_currents(g, a).density + 0.3 * one_body_currents(g, b).density);
    auto eng = make_engine(3, Stream::initial_ensemble);
    const auto xs = sample_density(LinearDensity(g, rho), 10000, eng);
    const double left = static_cast<double>(std::count_if(xs.begin(), xs.end(), [](double x) { return x < 0; }));
    CHECK(std::abs(left / 10000.0 - 0.7) < 0.02);
  }
  SUBCASE("within-cell inverse") {
    CHECK(linear_cell_inverse(1.0, 1.0, 2.0, 1.0) == doctest::Approx(1.0));
    // rho from 0 to 2 over h = 1: mass s^2, so s = sqrt(target).
    CHECK(linear_cell_inverse(0.0, 2.0, 1.0, 0.25) == doctest::Approx(0.5));
  }
  SUBCASE("invalid densities") {
    CHECK_THROWS_AS((LinearDensity{g, RVector::Zero(64)}), DegenerateError);
    CHECK_THROWS_AS((LinearDensity{g, RVector::Constant(63, 1.0)}), InvalidInput);
    RVector neg = RVector::Constant(64, 1.0);
    neg(3) = -1.0;
    CHECK_THROWS_AS((LinearDensity{g, neg}), InvalidInput);
  }
}

TEST_CASE("joint sampling follows the two-body density") {
  const LatticeGrid g = periodic_grid(64, 32.0);
  const CVector a = gaussian_packet(g, -5.0, 1.0, 0.0, named_spinor("up"));
  const CVector b = gaussian_packet(g, 5.0, 1.0, 0.0, named_spinor("up"));
  // (a, b) + (b, a): x1 and x2 always sit in opposite packets.
  CMatrix psi = a * b.transpose() + b * a.transpose();
  psi /= std::sqrt(psi.squaredNorm()) * g.dx;
  const TwoBodyState s(g, psi);
  const auto cur = dirac_currents(s);
  const JointSampler sampler(g, cur.j0);
  auto eng = make_engine(4, Stream::final_configuration);
  const auto pairs = sampler.draw(10000, eng);
  std::vector<double> x1;
  std::size_t opposite = 0;
  for (auto [p, q] : pairs) {
    x1.push_back(p);
    opposite += (p < 0) != (q < 0) ? 1 : 0;
  }
  CHECK(opposite == pairs.size());
  CHECK(ks_statistic(x1, LinearDensity(g, marginal_currents(s, 1).density)) < 0.02);
}

TEST_CASE("equivariance of a moving spreading packet, with a halved-velocity control") {
  const auto run = one_body_run(256, 32.0, -6.0, 1.0, 1.0, "right", 0.5, 64);
  auto eng = make_engine(7, Stream::initial_ensemble);
  const auto x0 = sample_density(LinearDensity(run.grid, run.currents[0].density), 10000, eng);
  const FieldStack stack = make_field_stack(run.currents);
  const IntegratorOptions opts{16};

  const auto rep = equivariance_test(integrate_ensemble(stack, x0, 0, 64, opts), run.currents);
  MESSAGE("max KS " << rep.max_ks() << ", flagged " << rep.flagged);
  CHECK(rep.layers.size() == 65);
  CHECK(rep.max_ks() < 0.02);

  const auto bad = equivariance_test(integrate_ensemble(stack.scaled(0.5), x0, 0, 64, opts), run.currents);
  MESSAGE("control final KS " << bad.ks.back());
  CHECK(bad.ks.back() > 0.05);
  for (std::size_t k = 1; k < bad.ks.size(); ++k) CHECK(bad.ks[k] > bad.ks[k - 1]);

  SUBCASE("backward ensemble from the last layer") {
    auto e2 = make_engine(8, Stream::final_configuration);
    const auto xf = sample_density(LinearDensity(run.grid, run.currents[64].density), 10000, e2);
    const auto brep = equivariance_test(integrate_ensemble(stack, xf, 64, 0, opts), run.currents);
    CHECK(brep.layers.front() == 64);
    CHECK(brep.layers.back() == 0);
    CHECK(brep.max_ks() < 0.02);
  }
}

TEST_CASE("frozen dynamics keep the initial KS") {
  const LatticeGrid g = periodic_grid(64, 32.0);
  const CVector psi = gaussian_packet(g, 0.0, 2.0, 0.0, named_spinor("up"));
  std::vector<CurrentField> cur;
  for (int t = 0; t <= 5; ++t) cur.push_back(one_body_currents(g, psi, t));
  std::vector<VelocityField> fs;
  for (int t = 0; t <= 5; ++t) fs.push_back(constant_field(g, t, 0.0));
  auto eng = make_engine(9, Stream::initial_ensemble);
  const auto x0 = sample_density(LinearDensity(g, cur[0].density), 2000, eng);
  const auto rep = equivariance_test(integrate_ensemble(FieldStack(fs), x0, 0, 5), cur);
  for (double k : rep.ks) CHECK(k == rep.ks.front());
}
