#include "scbohm/walk.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "scbohm/errors.hpp"

namespace scbohm {

namespace {

constexpr double kRatioTolerance = 1e-12;

std::size_t wrap(long long i, std::size_t n) {
  const long long m = static_cast<long long>(n);
  return static_cast<std::size_t>(((i % m) + m) % m);
}

}  // namespace

void LatticeGrid::validate() const {
  if (sites < 2) throw ConfigError("grid needs at least 2 sites");
  if (!(dx > 0.0) || !std::isfinite(dx)) throw ConfigError("grid spacing dx must be positive");
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("time step dt must be positive");
  if (dt / dx > 1.0 + kRatioTolerance) {
    std::ostringstream os;
    os << "dt/dx = " << dt / dx << " exceeds 1: signal would cross more than one site per step";
    throw ConfigError(os.str());
  }
}

double LatticeGrid::x_max() const {
  return boundary == Boundary::periodic ? x_min + length() : position(sites - 1);
}

double LatticeGrid::wrap(double x) const {
  if (boundary != Boundary::periodic) return std::clamp(x, x_min, x_max());
  const double L = length();
  if (x >= x_min && x - x_min < L) return x;
  double y = std::fmod(x - x_min, L);
  if (y < 0) y += L;
  if (y >= L) y = 0.0;
  return x_min + y;
}

PotentialField PotentialField::free(double mass, std::size_t sites) {
  PotentialField p;
  p.mass = mass;
  p.a0.assign(1, std::vector<double>(sites, 0.0));
  p.a1.assign(1, std::vector<double>(sites, 0.0));
  return p;
}

PotentialField PotentialField::constant_a0(double mass, double charge, double a0,
                                           std::size_t sites) {
  PotentialField p = free(mass, sites);
  p.charge = charge;
  p.a0[0].assign(sites, a0);
  return p;
}

PotentialField PotentialField::barrier(double mass, double charge, double height, double lo,
                                       double hi, const LatticeGrid& grid) {
  PotentialField p = free(mass, grid.sites);
  p.charge = charge;
  for (std::size_t i = 0; i < grid.sites; ++i) {
    const double x = grid.position(i);
    if (x >= lo && x <= hi) p.a0[0][i] = height;
  }
  return p;
}

double PotentialField::a0_at(std::size_t layer, std::size_t site) const {
  if (a0.empty()) return 0.0;
  return a0[std::min(layer, a0.size() - 1)][site];
}

double PotentialField::a1_at(std::size_t layer, std::size_t site) const {
  if (a1.empty()) return 0.0;
  return a1[std::min(layer, a1.size() - 1)][site];
}

void PotentialField::validate(const LatticeGrid& grid) const {
  if (!std::isfinite(mass) || !std::isfinite(charge)) throw ConfigError("mass and charge must be finite");
  for (const auto* table : {&a0, &a1})
    for (const auto& row : *table) {
      if (row.size() != grid.sites) throw ConfigError("potential table row does not match grid sites");
      for (double v : row)
        if (!std::isfinite(v)) throw ConfigError("potential values must be finite");
    }
}

Mat4 dirac_coin(double dt, double mass, double charge, double a0, double a1) {
  // M = a g0 + b g0g1 with {g0, g0g1} = 0, so M^2 = (a^2 + b^2) I and
  // exp(-i dt M) = cos(w dt) I - i sin(w dt)/w M.
  const GammaSet& g = GammaSet::dirac();
  const double a = mass + charge * a0;
  const double b = -charge * a1;
  const double w = std::hypot(a, b);
  if (w == 0.0) return Mat4::Identity();
  const Mat4 m = a * g.gamma0 + b * g.alpha(1);
  return std::cos(w * dt) * Mat4::Identity() - kI * (std::sin(w * dt) / w) * m;
}

DiracStep build_dirac_step(const LatticeGrid& grid, const PotentialField& potential,
                           std::size_t layer) {
  grid.validate();
  if (std::abs(grid.dt / grid.dx - 1.0) > kRatioTolerance)
    throw ConfigError("the conditional shift moves one site per step; the walk requires dt == dx");
  potential.validate(grid);

  const GammaSet& g = GammaSet::dirac();
  const Mat4 alpha = g.alpha(1);
  const Mat4 p_right = 0.5 * (Mat4::Identity() + alpha);
  const Mat4 p_left = 0.5 * (Mat4::Identity() - alpha);
  const Mat4& beta = g.gamma0;

  DiracStep step;
  step.grid_ = grid;
  step.coins_.resize(grid.sites);
  const std::size_t n = grid.sites;
  std::vector<Eigen::Triplet<cplx>> trip;
  trip.reserve(32 * n);

  auto add_block = [&](std::size_t to, std::size_t from, const Mat4& block) {
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c)
        if (block(r, c) != cplx(0.0, 0.0))
          trip.emplace_back(static_cast<int>(4 * to + r), static_cast<int>(4 * from + c), block(r, c));
  };

  // Half rotations on both sides of the shift keep the layer symmetric in
  // time, so fields sampled at layer boundaries are second-order consistent.
  for (std::size_t x = 0; x < n; ++x)
    step.coins_[x] = dirac_coin(0.5 * grid.dt, potential.mass, potential.charge,
                                potential.a0_at(layer, x), potential.a1_at(layer, x));
  for (std::size_t x = 0; x < n; ++x) {
    const Mat4& c = step.coins_[x];
    const Mat4 right = p_right * c;
    const Mat4 left = p_left * c;
    if (grid.boundary == Boundary::periodic) {
      const std::size_t r = wrap(static_cast<long long>(x) + 1, n);
      const std::size_t l = wrap(static_cast<long long>(x) - 1, n);
      add_block(r, x, Mat4(step.coins_[r] * right));
      add_block(l, x, Mat4(step.coins_[l] * left));
    } else {
      // Walls: the outgoing chirality is turned around in place by gamma^0,
      // which maps one eigenspace of gamma^0 gamma^1 onto the other.
      if (x + 1 < n) add_block(x + 1, x, Mat4(step.coins_[x + 1] * right));
      else add_block(x, x, Mat4(c * beta * right));
      if (x > 0) add_block(x - 1, x, Mat4(step.coins_[x - 1] * left));
      else add_block(x, x, Mat4(c * beta * left));
    }
  }
  step.w_.resize(static_cast<int>(4 * n), static_cast<int>(4 * n));
  step.w_.setFromTriplets(trip.begin(), trip.end());
  step.w_.makeCompressed();
  return step;
}

TwoBodyState::TwoBodyState(const LatticeGrid& grid, CMatrix psi, int layer)
    : grid_(grid), psi_(std::move(psi)), layer_(layer) {
  grid_.validate();
  if (static_cast<std::size_t>(psi_.rows()) != grid_.dim() ||
      static_cast<std::size_t>(psi_.cols()) != grid_.dim())
    throw InvalidInput("two-body amplitude tensor does not match grid");
  if (layer < 0) throw InvalidInput("layer must be non-negative");
  const double n = norm();
  if (std::abs(n - 1.0) > 1e-10) {
    std::ostringstream os;
    os << "two-body state is not normalized (sum |Psi|^2 dx^2 = " << n << ")";
    throw InvalidInput(os.str());
  }
}

TwoBodyState::TwoBodyState(const LatticeGrid& grid, CMatrix psi, int layer, Unchecked)
    : grid_(grid), psi_(std::move(psi)), layer_(layer) {}

double TwoBodyState::norm() const { return psi_.squaredNorm() * grid_.dx * grid_.dx; }

PureState2P TwoBodyState::to_circuit_state() const {
  const ModeSpinBasis basis(grid_.sites, 4, grid_.sites, 4);
  return PureState2P::evolved(basis, psi_ * grid_.dx, layer_);
}

TwoBodyState TwoBodyState::from_circuit_state(const LatticeGrid& grid, const PureState2P& s) {
  const auto& b = s.basis();
  if (b.modes_a != grid.sites || b.modes_b != grid.sites || b.spins_a != 4 || b.spins_b != 4)
    throw InvalidInput("circuit state basis does not match the lattice grid");
  return TwoBodyState(grid, s.amplitudes() / grid.dx, s.time_layer());
}

TwoBodyState TwoBodyState::product(const LatticeGrid& grid, const CVector& psi1,
                                   const CVector& psi2) {
  if (static_cast<std::size_t>(psi1.size()) != grid.dim() ||
      static_cast<std::size_t>(psi2.size()) != grid.dim())
    throw InvalidInput("one-body factors do not match grid");
  return TwoBodyState(grid, psi1 * psi2.transpose());
}

CVector gaussian_packet(const LatticeGrid& grid, double center, double sigma, double k0,
                        const Eigen::Vector4cd& spinor) {
  if (!(sigma > 0.0)) throw ConfigError("packet width must be positive");
  if (spinor.norm() == 0.0) throw ConfigError("packet spinor must be nonzero");
  const Eigen::Vector4cd s = spinor.normalized();
  CVector psi(grid.dim());
  for (std::size_t i = 0; i < grid.sites; ++i) {
    double d = grid.position(i) - center;
    if (grid.boundary == Boundary::periodic) {
      const double L = grid.length();
      d -= L * std::round(d / L);
    }
    const cplx amp = std::exp(-d * d / (4.0 * sigma * sigma)) * std::polar(1.0, k0 * d);
    psi.segment<4>(4 * i) = amp * s;
  }
  const double n2 = psi.squaredNorm() * grid.dx;
  if (!(n2 > 0.0)) throw DegenerateError("packet has no support on the grid");
  return psi / std::sqrt(n2);
}

Eigen::Vector4cd named_spinor(const std::string& name) {
  const double r = 1.0 / std::sqrt(2.0);
  Eigen::Vector4cd s;
  if (name == "up") s << 1, 0, 0, 0;
  else if (name == "down") s << 0, 1, 0, 0;
  else if (name == "right") s << r, 0, 0, r;
  else if (name == "left") s << r, 0, 0, -r;
  else if (name == "right-down") s << 0, r, r, 0;
  else if (name == "left-down") s << 0, r, -r, 0;
  else throw ConfigError("unknown spinor preset '" + name + "'");
  return s;
}

TwoBodyState evolve_two_body(const TwoBodyState& state, const DiracStep& step1,
                             const DiracStep& step2) {
  if (!(step1.grid() == state.grid()) || !(step2.grid() == state.grid()))
    throw InvalidInput("Dirac steps were built on a different grid than the state");
  CMatrix tmp = step1.matrix() * state.psi();
  CMatrix next = (step2.matrix() * tmp.transpose()).transpose();
  return TwoBodyState(state.grid(), std::move(next), state.layer() + 1, TwoBodyState::Unchecked{});
}

CVector evolve_one_body(const CVector& psi, const DiracStep& step) {
  if (static_cast<std::size_t>(psi.size()) != step.grid().dim())
    throw InvalidInput("one-body state does not match the step grid");
  return step.apply(psi);
}

TwoBodyState apply_coupling(const TwoBodyState& state, const Eigen::MatrixXd& phases) {
  if (phases.rows() != state.psi().rows() || phases.cols() != state.psi().cols())
    throw InvalidInput("coupling table does not match state");
  CMatrix next = state.psi();
  for (Eigen::Index c = 0; c < next.cols(); ++c)
    for (Eigen::Index r = 0; r < next.rows(); ++r)
      if (phases(r, c) != 0.0) next(r, c) *= std::polar(1.0, phases(r, c));
  return TwoBodyState(state.grid(), std::move(next), state.layer(), TwoBodyState::Unchecked{});
}

TwoBodyCurrents dirac_currents(const TwoBodyState& state) {
  const std::size_t n = state.grid().sites;
  const Mat4 alpha = GammaSet::dirac().alpha(1);
  TwoBodyCurrents out;
  out.j0.resize(n, n);
  out.j1_x1.resize(n, n);
  out.j1_x2.resize(n, n);
  const CMatrix& psi = state.psi();
  Eigen::Matrix4cd block;
  for (std::size_t x2 = 0; x2 < n; ++x2) {
    for (std::size_t x1 = 0; x1 < n; ++x1) {
      block = psi.block<4, 4>(4 * x1, 4 * x2);  // rows alpha, cols beta
      out.j0(x1, x2) = block.squaredNorm();
      const cplx c1 = (block.adjoint() * alpha * block).trace();
      const cplx c2 = (block.conjugate() * alpha * block.transpose()).trace();
      out.j1_x1(x1, x2) = c1.real();
      out.j1_x2(x1, x2) = c2.real();
      out.max_imag_residue = std::max({out.max_imag_residue, std::abs(c1.imag()), std::abs(c2.imag())});
    }
  }
  return out;
}

CurrentField marginal_currents(const TwoBodyState& state, int particle) {
  if (particle != 1 && particle != 2) throw InvalidInput("particle must be 1 or 2");
  const LatticeGrid& grid = state.grid();
  const std::size_t n = grid.sites;
  const Mat4 alpha = GammaSet::dirac().alpha(1);
  CurrentField f;
  f.grid = grid;
  f.layer = state.layer();
  f.density = RVector::Zero(n);
  f.current = RVector::Zero(n);
  const CMatrix& psi = state.psi();
  if (particle == 1) {
    // sum over (x2, beta) of Psi^H M Psi, for the 4-row slab of site x1
    for (std::size_t x = 0; x < n; ++x) {
      const auto slab = psi.middleRows<4>(4 * x);
      const Mat4 gram = slab * slab.adjoint();  // G(a, a') = sum_c S(a,c) S*(a',c)
      f.density(x) = gram.trace().real() * grid.dx;
      f.current(x) = (alpha * gram).trace().real() * grid.dx;
    }
  } else {
    for (std::size_t x = 0; x < n; ++x) {
      const auto slab = psi.middleCols<4>(4 * x);
      const Mat4 gram = slab.adjoint() * slab;  // G(b, b') = sum_r S*(r,b) S(r,b')
      f.density(x) = gram.trace().real() * grid.dx;
      f.current(x) = alpha.cwiseProduct(gram).sum().real() * grid.dx;
    }
  }
  return f;
}

CurrentField one_body_currents(const LatticeGrid& grid, const CVector& psi, int layer) {
  const std::size_t n = grid.sites;
  if (static_cast<std::size_t>(psi.size()) != grid.dim()) throw InvalidInput("state does not match grid");
  const Mat4 alpha = GammaSet::dirac().alpha(1);
  CurrentField f;
  f.grid = grid;
  f.layer = layer;
  f.density = RVector::Zero(n);
  f.current = RVector::Zero(n);
  for (std::size_t x = 0; x < n; ++x) {
    const Eigen::Vector4cd s = psi.segment<4>(4 * x);
    f.density(x) = s.squaredNorm();
    f.current(x) = s.dot(alpha * s).real();
  }
  return f;
}

ContinuityResidual continuity_residual(const TwoBodyState& s0, const TwoBodyState& s1) {
  if (!(s0.grid() == s1.grid())) throw InvalidInput("states live on different grids");
  if (s1.layer() != s0.layer() + 1) throw InvalidInput("continuity residual needs consecutive layers");
  const LatticeGrid& g = s0.grid();
  const std::size_t n = g.sites;
  const bool periodic = g.boundary == Boundary::periodic;
  const auto c0 = dirac_currents(s0);
  const auto c1 = dirac_currents(s1);

  auto nb = [&](std::size_t i, int d) { return wrap(static_cast<long long>(i) + d, n); };
  const std::size_t lo = periodic ? 0 : 1;
  const std::size_t hi = periodic ? n : n - 1;

  ContinuityResidual r;
  r.dx = g.dx;
  r.dt = g.dt;
  for (std::size_t x2 = lo; x2 < hi; ++x2) {
    for (std::size_t x1 = lo; x1 < hi; ++x1) {
      const double dt_rho = (c1.j0(x1, x2) - c0.j0(x1, x2)) / g.dt;
      auto f1 = [&](std::size_t a) { return c0.j1_x1(a, x2) + c1.j1_x1(a, x2); };
      auto f2 = [&](std::size_t b) { return c0.j1_x2(x1, b) + c1.j1_x2(x1, b); };
      const double d1 = (f1(nb(x1, 1)) - f1(nb(x1, -1))) / (4 * g.dx);
      const double d2 = (f2(nb(x2, 1)) - f2(nb(x2, -1))) / (4 * g.dx);
      r.full = std::max(r.full, std::abs(dt_rho + d1 + d2));
    }
  }
  const auto m0 = marginal_currents(s0, 1);
  const auto m1 = marginal_currents(s1, 1);
  for (std::size_t x = lo; x < hi; ++x) {
    const double dt_rho = (m1.density(x) - m0.density(x)) / g.dt;
    auto f = [&](std::size_t a) { return m0.current(a) + m1.current(a); };
    const double d1 = (f(nb(x, 1)) - f(nb(x, -1))) / (4 * g.dx);
    r.marginal = std::max(r.marginal, std::abs(dt_rho + d1));
  }
  return r;
}

Eigen::Matrix2cd spin_reduced_state(const TwoBodyState& state, int particle) {
  if (particle != 1 && particle != 2) throw InvalidInput("particle must be 1 or 2");
  const std::size_t n = state.grid().sites;
  const double w = state.grid().dx * state.grid().dx;
  // Indices alpha = 2*o + s; trace over o, positions and the partner.
  Eigen::Matrix2cd rho = Eigen::Matrix2cd::Zero();
  const CMatrix& psi = state.psi();
  for (std::size_t x = 0; x < n; ++x)
    for (int o = 0; o < 2; ++o)
      for (int s = 0; s < 2; ++s)
        for (int t = 0; t < 2; ++t) {
          const auto i = 4 * x + 2 * o + s;
          const auto j = 4 * x + 2 * o + t;
          if (particle == 1) rho(s, t) += psi.row(j).dot(psi.row(i)) * w;
          else rho(s, t) += psi.col(j).dot(psi.col(i)) * w;
        }
  return rho;
}

CircuitLayer walk_layer(const DiracStep& step1, const DiracStep& step2,
                        const Eigen::MatrixXd& coupling) {
  const ModeSpinBasis basis(step1.grid().sites, 4, step2.grid().sites, 4);
  return CircuitLayer(basis, step1.dense(), step2.dense(), coupling);
}

}  // namespace scbohm
