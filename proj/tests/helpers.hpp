#pragma once

// Test-only oracles and generators. Nothing here calls into the engine
// paths it is used to check.

#include <cmath>
#include <algorithm>
#include <random>
#include <string>

#include "scbohm/circuit.hpp"

namespace scbohm::testing {

inline Eigen::MatrixXd random_phases(const ModeSpinBasis& b, std::mt19937_64& eng) {
  std::uniform_real_distribution<double> u(-M_PI, M_PI);
  Eigen::MatrixXd phi(b.dim_a(), b.dim_b());
  for (Eigen::Index c = 0; c < phi.cols(); ++c)
    for (Eigen::Index r = 0; r < phi.rows(); ++r) phi(r, c) = u(eng);
  return phi;
}

inline Circuit random_circuit(const ModeSpinBasis& b, int layers, std::mt19937_64& eng,
                              bool coupled = true) {
  Circuit c;
  for (int i = 0; i < layers; ++i) {
    CMatrix ua = haar_unitary(b.dim_a(), eng);
    CMatrix ub = haar_unitary(b.dim_b(), eng);
    Eigen::MatrixXd phi = coupled ? random_phases(b, eng) : Eigen::MatrixXd::Zero(b.dim_a(), b.dim_b());
    c.emplace_back(b, std::move(ua), std::move(ub), std::move(phi));
  }
  return c;
}

inline CVector random_unit_vector(std::size_t n, std::mt19937_64& eng) {
  std::normal_distribution<double> g;
  CVector v(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double re = g(eng);
    v(i) = cplx(re, g(eng));
  }
  return v.normalized();
}

// Full (dim x dim) matrix of one layer on the flat index ia * dim_b + ib,
// built entry by entry from the definition D * (A kron B).
inline CMatrix dense_layer(const CircuitLayer& l) {
  const auto& b = l.basis();
  const std::size_t da = b.dim_a(), db = b.dim_b();
  CMatrix u(da * db, da * db);
  for (std::size_t i = 0; i < da; ++i)
    for (std::size_t k = 0; k < db; ++k)
      for (std::size_t j = 0; j < da; ++j)
        for (std::size_t m = 0; m < db; ++m)
          u(i * db + k, j * db + m) =
              std::polar(1.0, l.coupling()(i, k)) * l.u_a()(i, j) * l.u_b()(k, m);
  return u;
}

inline CMatrix dense_circuit(const Circuit& c, const ModeSpinBasis& b) {
  CMatrix u = CMatrix::Identity(b.dim(), b.dim());
  for (const auto& l : c) u = dense_layer(l) * u;
  return u;
}

inline CVector flatten(const PureState2P& s) {
  const auto& b = s.basis();
  CVector v(b.dim());
  for (std::size_t i = 0; i < b.dim_a(); ++i)
    for (std::size_t k = 0; k < b.dim_b(); ++k) v(i * b.dim_b() + k) = s.amplitudes()(i, k);
  return v;
}

inline double max_abs_diff(const CVector& a, const CVector& b) { return (a - b).cwiseAbs().maxCoeff(); }

}  // namespace scbohm::testing

#include "scbohm/gamma.hpp"
#include "scbohm/walk.hpp"

namespace scbohm::testing {

// Exact free one-body Dirac propagation exp(-i T (alpha p + m beta)) on a
// periodic grid, using the discrete Fourier basis (plain O(N^2) transform).
inline CVector spectral_dirac_reference(const LatticeGrid& g, const CVector& psi0, double mass,
                                        double T) {
  const std::size_t n = g.sites;
  const auto& gs = GammaSet::dirac();
  const Mat4 alpha = gs.alpha(1);
  const Mat4 beta = gs.gamma0;
  std::vector<Eigen::Vector4cd> hat(n, Eigen::Vector4cd::Zero());
  std::vector<double> ks(n);
  for (std::size_t j = 0; j < n; ++j) {
    const long long jj = j < n / 2 ? static_cast<long long>(j) : static_cast<long long>(j) - static_cast<long long>(n);
    ks[j] = 2.0 * M_PI * static_cast<double>(jj) / g.length();
    for (std::size_t x = 0; x < n; ++x)
      hat[j] += std::polar(1.0, -2.0 * M_PI * double(j * x % n) / double(n)) * Eigen::Vector4cd(psi0.segment<4>(4 * x));
  }
  for (std::size_t j = 0; j < n; ++j) {
    const double e = std::sqrt(ks[j] * ks[j] + mass * mass);
    const Mat4 h = ks[j] * alpha + mass * beta;
    const Mat4 u = e == 0.0 ? Mat4(Mat4::Identity())
                            : Mat4(std::cos(e * T) * Mat4::Identity() - cplx(0, 1) * (std::sin(e * T) / e) * h);
    hat[j] = u * hat[j];
  }
  CVector out = CVector::Zero(g.dim());
  for (std::size_t x = 0; x < n; ++x) {
    Eigen::Vector4cd acc = Eigen::Vector4cd::Zero();
    for (std::size_t j = 0; j < n; ++j)
      acc += std::polar(1.0, 2.0 * M_PI * double(j * x % n) / double(n)) * hat[j];
    out.segment<4>(4 * x) = acc / double(n);
  }
  return out;
}

inline LatticeGrid periodic_grid(std::size_t n, double length) {
  LatticeGrid g;
  g.sites = n;
  g.dx = length / double(n);
  g.dt = g.dx;
  g.x_min = -length / 2.0;
  return g;
}

}  // namespace scbohm::testing

namespace scbohm::testing {

// A lattice-walk scenario expressed both as a direct two-body run and as a
// circuit, for comparing path sums with the direct engine.
struct WalkCase {
  LatticeGrid grid;
  Circuit circuit;
  std::vector<TwoBodyState> history;  // layers 0..n
};

// Compact start: particle 1 occupies `sites1` with weights w1 and spinor s1;
// particle 2 likewise. Layers listed in `coupled` get random phases.
inline WalkCase make_walk_case(std::size_t n_sites, int layers, double m1, double m2,
                               const std::vector<std::size_t>& sites1, const std::string& s1,
                               const std::vector<std::size_t>& sites2, const std::string& s2,
                               const std::vector<int>& coupled, std::mt19937_64& eng,
                               double a0_2 = 0.0, bool position_only = false) {
  WalkCase c;
  c.grid = periodic_grid(n_sites, double(n_sites));
  const auto& g = c.grid;
  const auto st1 = build_dirac_step(g, PotentialField::free(m1, n_sites));
  const auto st2 = build_dirac_step(g, PotentialField::constant_a0(m2, 1.0, a0_2, n_sites));
  std::uniform_real_distribution<double> u(0.2, 1.0);
  auto compact = [&](const std::vector<std::size_t>& sites, const std::string& sp) {
    CVector v = CVector::Zero(g.dim());
    for (std::size_t x : sites) v.segment<4>(4 * x) = u(eng) * named_spinor(sp);
    return CVector(v / std::sqrt(v.squaredNorm() * g.dx));
  };
  c.history.push_back(TwoBodyState::product(g, compact(sites1, s1), compact(sites2, s2)));
  for (int r = 1; r <= layers; ++r) {
    Eigen::MatrixXd phi = Eigen::MatrixXd::Zero(g.dim(), g.dim());
    if (std::find(coupled.begin(), coupled.end(), r) != coupled.end()) {
      std::uniform_real_distribution<double> ph(-M_PI, M_PI);
      for (Eigen::Index j = 0; j < phi.cols(); ++j)
        for (Eigen::Index i = 0; i < phi.rows(); ++i)
          phi(i, j) = position_only && (i % 4 || j % 4) ? phi(i - i % 4, j - j % 4) : ph(eng);
    }
    c.circuit.push_back(walk_layer(st1, st2, phi));
    c.history.push_back(apply_coupling(evolve_two_body(c.history.back(), st1, st2), phi));
  }
  return c;
}

}  // namespace scbohm::testing
