#pragma once

// Exact state-vector engine for two particles, each carrying a mode and a
// spin index, evolved by layers of the form AB * (A (x) B), where AB is a
// diagonal phase gate on the joint basis |j,a,k,b>.

#include <cstddef>
#include <random>
#include <vector>

#include "scbohm/types.hpp"

namespace scbohm {

enum class Particle { A = 0, B = 1 };

struct ModeSpinBasis {
  std::size_t modes_a = 1;
  std::size_t spins_a = 1;
  std::size_t modes_b = 1;
  std::size_t spins_b = 1;

  ModeSpinBasis() = default;
  ModeSpinBasis(std::size_t ma, std::size_t sa, std::size_t mb, std::size_t sb);

  std::size_t dim_a() const { return modes_a * spins_a; }
  std::size_t dim_b() const { return modes_b * spins_b; }
  std::size_t dim() const { return dim_a() * dim_b(); }

  // Local (single-particle) index of mode j, spin a.
  std::size_t local_a(std::size_t j, std::size_t a) const { return j * spins_a + a; }
  std::size_t local_b(std::size_t k, std::size_t b) const { return k * spins_b + b; }

  std::size_t flat(std::size_t j, std::size_t a, std::size_t k, std::size_t b) const {
    return local_a(j, a) * dim_b() + local_b(k, b);
  }

  struct Ket {
    std::size_t j, a, k, b;
    bool operator==(const Ket&) const = default;
  };
  Ket unflatten(std::size_t flat_index) const;

  bool operator==(const ModeSpinBasis&) const = default;
};

inline constexpr double kUnitarityTolerance = 1e-12;

// One circuit layer. The coupling table holds phi(j,a,k,b) in radians,
// stored as a dim_a x dim_b matrix indexed (local_a, local_b).
class CircuitLayer {
 public:
  CircuitLayer(const ModeSpinBasis& basis, CMatrix u_a, CMatrix u_b, Eigen::MatrixXd coupling);
  CircuitLayer(const ModeSpinBasis& basis, CMatrix u_a, CMatrix u_b);

  static CircuitLayer identity(const ModeSpinBasis& basis);

  const ModeSpinBasis& basis() const { return basis_; }
  const CMatrix& u_a() const { return u_a_; }
  const CMatrix& u_b() const { return u_b_; }
  const Eigen::MatrixXd& coupling() const { return coupling_; }
  bool has_coupling() const { return has_coupling_; }

  // exp(i phi) for every (local_a, local_b); cached at construction.
  const CMatrix& phase_factors() const { return phase_; }

  // Layers undoing this one: a pure phase layer with -phi followed by the
  // adjoint local unitaries (one layer when there is no coupling).
  std::vector<CircuitLayer> inverse() const;

 private:
  ModeSpinBasis basis_;
  CMatrix u_a_;
  CMatrix u_b_;
  Eigen::MatrixXd coupling_;
  CMatrix phase_;
  bool has_coupling_ = false;
};

using Circuit = std::vector<CircuitLayer>;

Circuit inverse_circuit(const Circuit& circuit);

// Amplitudes are held as a dim_a x dim_b matrix, psi(local_a, local_b).
class PureState2P {
 public:
  PureState2P(const ModeSpinBasis& basis, CMatrix amplitudes, int time_layer = 0);

  // No normalization check; for results of unitary evolution.
  static PureState2P evolved(const ModeSpinBasis& basis, CMatrix amplitudes, int time_layer);

  static PureState2P basis_state(const ModeSpinBasis& basis, const ModeSpinBasis::Ket& ket);
  static PureState2P product(const ModeSpinBasis& basis, const CVector& psi_a, const CVector& psi_b);

  const ModeSpinBasis& basis() const { return basis_; }
  const CMatrix& amplitudes() const { return amp_; }
  int time_layer() const { return layer_; }

  cplx amplitude(std::size_t j, std::size_t a, std::size_t k, std::size_t b) const {
    return amp_(basis_.local_a(j, a), basis_.local_b(k, b));
  }
  double norm_squared() const { return amp_.squaredNorm(); }

 private:
  PureState2P() = default;

  ModeSpinBasis basis_;
  CMatrix amp_;
  int layer_ = 0;
};

double max_unitarity_defect(const CMatrix& u);

PureState2P apply_layer(const PureState2P& state, const CircuitLayer& layer);
PureState2P evolve_circuit(const PureState2P& state0, const Circuit& circuit);

double marginal_probability(const PureState2P& state, Particle particle, std::size_t mode);
std::vector<double> marginal_distribution(const PureState2P& state, Particle particle);

// Haar-random unitary (QR of a complex Ginibre matrix with phase fix).
template <class Engine>
CMatrix haar_unitary(std::size_t n, Engine& eng) {
  std::normal_distribution<double> g(0.0, 1.0);
  CMatrix z(n, n);
  for (std::size_t c = 0; c < n; ++c)
    for (std::size_t r = 0; r < n; ++r) {
      const double re = g(eng);
      z(r, c) = cplx(re, g(eng));
    }
  Eigen::HouseholderQR<CMatrix> qr(z);
  CMatrix q = qr.householderQ();
  CMatrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (std::size_t i = 0; i < n; ++i) {
    const double mag = std::abs(r(i, i));
    if (mag > 0) q.col(i) *= r(i, i) / mag;
  }
  return q;
}

// Layers of Haar-random local unitaries with phases uniform in [-pi, pi)
// (zero phases when `coupled` is false).
Circuit random_circuit(const ModeSpinBasis& basis, int layers, bool coupled, std::mt19937_64& eng);

}  // namespace scbohm
