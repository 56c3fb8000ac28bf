#include "scbohm/circuit.hpp"

#include <cmath>
#include <sstream>

#include "scbohm/errors.hpp"
#include "scbohm/rng.hpp"

namespace scbohm {

ModeSpinBasis::ModeSpinBasis(std::size_t ma, std::size_t sa, std::size_t mb, std::size_t sb)
    : modes_a(ma), spins_a(sa), modes_b(mb), spins_b(sb) {
  if (ma == 0 || sa == 0 || mb == 0 || sb == 0)
    throw ConfigError("mode/spin counts must be positive");
}

ModeSpinBasis::Ket ModeSpinBasis::unflatten(std::size_t flat_index) const {
  if (flat_index >= dim()) throw InvalidInput("flat index out of range");
  const std::size_t ia = flat_index / dim_b();
  const std::size_t ib = flat_index % dim_b();
  return {ia / spins_a, ia % spins_a, ib / spins_b, ib % spins_b};
}

double max_unitarity_defect(const CMatrix& u) {
  if (u.rows() != u.cols()) return INFINITY;
  const CMatrix d = u.adjoint() * u - CMatrix::Identity(u.rows(), u.cols());
  return d.cwiseAbs().maxCoeff();
}

namespace {

void check_unitary(const CMatrix& u, std::size_t dim, const char* which) {
  if (static_cast<std::size_t>(u.rows()) != dim || static_cast<std::size_t>(u.cols()) != dim) {
    std::ostringstream os;
    os << which << " has shape " << u.rows() << "x" << u.cols() << ", expected " << dim << "x" << dim;
    throw InvalidInput(os.str());
  }
  const double defect = max_unitarity_defect(u);
  if (!(defect <= kUnitarityTolerance)) {
    std::ostringstream os;
    os << which << " is not unitary (max |U^H U - I| = " << defect << ")";
    throw ConfigError(os.str());
  }
}

}  // namespace

CircuitLayer::CircuitLayer(const ModeSpinBasis& basis, CMatrix u_a, CMatrix u_b,
                           Eigen::MatrixXd coupling)
    : basis_(basis), u_a_(std::move(u_a)), u_b_(std::move(u_b)), coupling_(std::move(coupling)) {
  check_unitary(u_a_, basis_.dim_a(), "u_a");
  check_unitary(u_b_, basis_.dim_b(), "u_b");
  if (static_cast<std::size_t>(coupling_.rows()) != basis_.dim_a() ||
      static_cast<std::size_t>(coupling_.cols()) != basis_.dim_b())
    throw InvalidInput("coupling phase table does not match basis dimensions");
  if (!coupling_.allFinite()) throw ConfigError("coupling phases must be finite");
  has_coupling_ = (coupling_.array() != 0.0).any();
  phase_.resize(coupling_.rows(), coupling_.cols());
  for (Eigen::Index c = 0; c < coupling_.cols(); ++c)
    for (Eigen::Index r = 0; r < coupling_.rows(); ++r)
      phase_(r, c) = coupling_(r, c) == 0.0 ? cplx(1.0, 0.0) : std::polar(1.0, coupling_(r, c));
}

CircuitLayer::CircuitLayer(const ModeSpinBasis& basis, CMatrix u_a, CMatrix u_b)
    : CircuitLayer(basis, std::move(u_a), std::move(u_b),
                   Eigen::MatrixXd::Zero(basis.dim_a(), basis.dim_b())) {}

CircuitLayer CircuitLayer::identity(const ModeSpinBasis& basis) {
  return CircuitLayer(basis, CMatrix::Identity(basis.dim_a(), basis.dim_a()),
                      CMatrix::Identity(basis.dim_b(), basis.dim_b()));
}

std::vector<CircuitLayer> CircuitLayer::inverse() const {
  // (D (A x B))^-1 = (A^H x B^H) D^*
  std::vector<CircuitLayer> out;
  if (has_coupling_) {
    out.emplace_back(basis_, CMatrix::Identity(basis_.dim_a(), basis_.dim_a()),
                     CMatrix::Identity(basis_.dim_b(), basis_.dim_b()), Eigen::MatrixXd(-coupling_));
  }
  out.emplace_back(basis_, u_a_.adjoint(), u_b_.adjoint());
  return out;
}

Circuit inverse_circuit(const Circuit& circuit) {
  Circuit out;
  for (auto it = circuit.rbegin(); it != circuit.rend(); ++it)
    for (auto& l : it->inverse()) out.push_back(std::move(l));
  return out;
}

PureState2P::PureState2P(const ModeSpinBasis& basis, CMatrix amplitudes, int time_layer)
    : basis_(basis), amp_(std::move(amplitudes)), layer_(time_layer) {
  if (static_cast<std::size_t>(amp_.rows()) != basis_.dim_a() ||
      static_cast<std::size_t>(amp_.cols()) != basis_.dim_b())
    throw InvalidInput("amplitude tensor does not match basis dimensions");
  if (time_layer < 0) throw InvalidInput("time layer must be non-negative");
  const double n2 = amp_.squaredNorm();
  if (std::abs(n2 - 1.0) > 1e-12) {
    std::ostringstream os;
    os << "state is not normalized (|psi|^2 = " << n2 << ")";
    throw InvalidInput(os.str());
  }
}

PureState2P PureState2P::evolved(const ModeSpinBasis& basis, CMatrix amplitudes, int time_layer) {
  PureState2P s;
  s.basis_ = basis;
  s.amp_ = std::move(amplitudes);
  s.layer_ = time_layer;
  return s;
}

PureState2P PureState2P::basis_state(const ModeSpinBasis& basis, const ModeSpinBasis::Ket& ket) {
  if (ket.j >= basis.modes_a || ket.a >= basis.spins_a || ket.k >= basis.modes_b ||
      ket.b >= basis.spins_b)
    throw InvalidInput("basis ket out of range");
  CMatrix amp = CMatrix::Zero(basis.dim_a(), basis.dim_b());
  amp(basis.local_a(ket.j, ket.a), basis.local_b(ket.k, ket.b)) = 1.0;
  return PureState2P(basis, std::move(amp));
}

PureState2P PureState2P::product(const ModeSpinBasis& basis, const CVector& psi_a,
                                 const CVector& psi_b) {
  if (static_cast<std::size_t>(psi_a.size()) != basis.dim_a() ||
      static_cast<std::size_t>(psi_b.size()) != basis.dim_b())
    throw InvalidInput("product factors do not match basis dimensions");
  return PureState2P(basis, psi_a * psi_b.transpose());
}

PureState2P apply_layer(const PureState2P& state, const CircuitLayer& layer) {
  if (!(state.basis() == layer.basis())) throw InvalidInput("state and layer dimensions differ");
  CMatrix next = layer.u_a() * state.amplitudes() * layer.u_b().transpose();
  if (layer.has_coupling()) next.array() *= layer.phase_factors().array();
  return PureState2P::evolved(state.basis(), std::move(next), state.time_layer() + 1);
}

PureState2P evolve_circuit(const PureState2P& state0, const Circuit& circuit) {
  PureState2P s = state0;
  for (const auto& layer : circuit) s = apply_layer(s, layer);
  return s;
}

std::vector<double> marginal_distribution(const PureState2P& state, Particle particle) {
  const auto& b = state.basis();
  const CMatrix& amp = state.amplitudes();
  if (particle == Particle::A) {
    std::vector<double> p(b.modes_a, 0.0);
    for (std::size_t j = 0; j < b.modes_a; ++j)
      for (std::size_t a = 0; a < b.spins_a; ++a) p[j] += amp.row(b.local_a(j, a)).squaredNorm();
    return p;
  }
  std::vector<double> p(b.modes_b, 0.0);
  for (std::size_t k = 0; k < b.modes_b; ++k)
    for (std::size_t s = 0; s < b.spins_b; ++s) p[k] += amp.col(b.local_b(k, s)).squaredNorm();
  return p;
}

double marginal_probability(const PureState2P& state, Particle particle, std::size_t mode) {
  const auto& b = state.basis();
  const std::size_t modes = particle == Particle::A ? b.modes_a : b.modes_b;
  if (mode >= modes) throw InvalidInput("mode out of range");
  return marginal_distribution(state, particle)[mode];
}

Circuit random_circuit(const ModeSpinBasis& basis, int layers, bool coupled, std::mt19937_64& eng) {
  if (layers < 0) throw InvalidInput("layer count must be nonnegative");
  Circuit c;
  for (int i = 0; i < layers; ++i) {
    CMatrix ua = haar_unitary(basis.dim_a(), eng);
    CMatrix ub = haar_unitary(basis.dim_b(), eng);
    Eigen::MatrixXd phi = Eigen::MatrixXd::Zero(basis.dim_a(), basis.dim_b());
    if (coupled)
      for (Eigen::Index col = 0; col < phi.cols(); ++col)
        for (Eigen::Index row = 0; row < phi.rows(); ++row)
          phi(row, col) = (2.0 * uniform01(eng) - 1.0) * M_PI;
    c.emplace_back(basis, std::move(ua), std::move(ub), std::move(phi));
  }
  return c;
}

}  // namespace scbohm
