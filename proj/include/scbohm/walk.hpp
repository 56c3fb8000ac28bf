#pragma once

// Two-body Dirac evolution on a 1D lattice with 4-component spinors per
// particle. Each particle is advanced by a split-step local unitary: an
// on-site rotation generated by the mass and potential terms, then a shift
// that moves the +1 eigenspace of gamma^0 gamma^1 one site right and the -1
// eigenspace one site left. With dt == dx this is the exact lattice
// transport of the massless operator -i gamma^0 gamma^1 d/dx (hbar = 1).

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Sparse>

#include "scbohm/circuit.hpp"
#include "scbohm/gamma.hpp"
#include "scbohm/types.hpp"

namespace scbohm {

enum class Boundary { periodic, reflecting };

struct LatticeGrid {
  std::size_t sites = 2;
  double dx = 1.0;
  double dt = 1.0;
  double x_min = 0.0;
  Boundary boundary = Boundary::periodic;

  void validate() const;
  double position(std::size_t i) const { return x_min + static_cast<double>(i) * dx; }
  // Continuous coordinate range: [x_min, x_max] for reflecting walls and the
  // half-open ring [x_min, x_min + N dx) for periodic grids.
  double x_max() const;
  double length() const { return static_cast<double>(sites) * dx; }
  // Maps a coordinate onto the ring (periodic) or clamps it to the walls.
  double wrap(double x) const;
  std::size_t dim() const { return 4 * sites; }

  bool operator==(const LatticeGrid&) const = default;
};

// Classical potentials for one particle. Tables are indexed [layer][site];
// a single row is used for every layer.
struct PotentialField {
  double mass = 0.0;
  double charge = 0.0;
  std::vector<std::vector<double>> a0;
  std::vector<std::vector<double>> a1;

  static PotentialField free(double mass, std::size_t sites);
  static PotentialField constant_a0(double mass, double charge, double a0, std::size_t sites);
  // A0 = height on sites within [lo, hi] (positions), zero elsewhere.
  static PotentialField barrier(double mass, double charge, double height, double lo, double hi,
                                const LatticeGrid& grid);

  double a0_at(std::size_t layer, std::size_t site) const;
  double a1_at(std::size_t layer, std::size_t site) const;
  void validate(const LatticeGrid& grid) const;
};

// One split-step layer for a single particle: W = C_half * S * C_half.
class DiracStep {
 public:
  const LatticeGrid& grid() const { return grid_; }
  const Eigen::SparseMatrix<cplx>& matrix() const { return w_; }
  // Half-step on-site rotation applied before and after the shift.
  const Mat4& half_coin(std::size_t site) const { return coins_[site]; }
  CMatrix dense() const { return CMatrix(w_); }

  CVector apply(const CVector& psi) const { return w_ * psi; }

 private:
  friend DiracStep build_dirac_step(const LatticeGrid&, const PotentialField&, std::size_t);
  LatticeGrid grid_;
  std::vector<Mat4> coins_;
  Eigen::SparseMatrix<cplx> w_;
};

// On-site rotation exp(-i dt [(m + q A0) gamma^0 - q A1 gamma^0 gamma^1]).
Mat4 dirac_coin(double dt, double mass, double charge, double a0, double a1);

DiracStep build_dirac_step(const LatticeGrid& grid, const PotentialField& potential,
                           std::size_t layer = 0);

// Psi_{alpha beta}(x1, x2) stored as psi(4*x1 + alpha, 4*x2 + beta), normalized
// so that sum |Psi|^2 dx^2 = 1.
class TwoBodyState {
 public:
  TwoBodyState(const LatticeGrid& grid, CMatrix psi, int layer = 0);

  const LatticeGrid& grid() const { return grid_; }
  const CMatrix& psi() const { return psi_; }
  int layer() const { return layer_; }
  double norm() const;  // sum |Psi|^2 dx^2

  cplx operator()(std::size_t x1, int alpha, std::size_t x2, int beta) const {
    return psi_(4 * x1 + alpha, 4 * x2 + beta);
  }

  // Probability amplitudes <x1,a,x2,b|Psi> on the mode x spin basis (N,4,N,4).
  PureState2P to_circuit_state() const;
  static TwoBodyState from_circuit_state(const LatticeGrid& grid, const PureState2P& s);

  static TwoBodyState product(const LatticeGrid& grid, const CVector& psi1, const CVector& psi2);

 private:
  struct Unchecked {};
  TwoBodyState(const LatticeGrid& grid, CMatrix psi, int layer, Unchecked);
  friend TwoBodyState evolve_two_body(const TwoBodyState&, const DiracStep&, const DiracStep&);
  friend TwoBodyState apply_coupling(const TwoBodyState&, const Eigen::MatrixXd&);

  LatticeGrid grid_;
  CMatrix psi_;
  int layer_ = 0;
};

// Single-particle Gaussian packet exp(-(x-x0)^2/(4 sigma^2) + i k0 x) times a
// fixed spinor, normalized to sum |psi|^2 dx = 1. Periodic grids use the
// minimum-image distance.
CVector gaussian_packet(const LatticeGrid& grid, double center, double sigma, double k0,
                        const Eigen::Vector4cd& spinor);

// Named spinors: "up" (1,0,0,0), "down" (0,1,0,0), "right"/"left" (the
// +1/-1 eigenvectors of gamma^0 gamma^1 built on "up"), "right-down",
// "left-down". Note "up" is the equal superposition of "right" and "left".
Eigen::Vector4cd named_spinor(const std::string& name);

TwoBodyState evolve_two_body(const TwoBodyState& state, const DiracStep& step1,
                             const DiracStep& step2);
CVector evolve_one_body(const CVector& psi, const DiracStep& step);

// Multiplies Psi by exp(i phi) elementwise; phi is indexed like psi().
TwoBodyState apply_coupling(const TwoBodyState& state, const Eigen::MatrixXd& phases);

// Pointwise two-body bilinears, each N x N indexed (x1, x2).
struct TwoBodyCurrents {
  Eigen::MatrixXd j0;     // Psi^H Psi
  Eigen::MatrixXd j1_x1;  // Psi^H (g0 g1 (x) I) Psi
  Eigen::MatrixXd j1_x2;  // Psi^H (I (x) g0 g1) Psi
  double max_imag_residue = 0.0;
};
TwoBodyCurrents dirac_currents(const TwoBodyState& state);

struct CurrentField {
  LatticeGrid grid;
  RVector density;  // j0(x)
  RVector current;  // j1(x)
  int layer = 0;
};

// Subsystem density and current for particle 1 or 2 (partner integrated out).
CurrentField marginal_currents(const TwoBodyState& state, int particle = 1);
CurrentField one_body_currents(const LatticeGrid& grid, const CVector& psi, int layer = 0);

struct ContinuityResidual {
  double full = 0.0;
  double marginal = 0.0;
  double dx = 0.0;
  double dt = 0.0;
};

// Forward difference in time, centered differences in space; fluxes are the
// mean of the two layers. Reflecting grids skip the two boundary sites.
ContinuityResidual continuity_residual(const TwoBodyState& s0, const TwoBodyState& s1);

// 2x2 reduced density matrix of the Pauli spin s of one particle, tracing
// position, the upper/lower block index and the partner.
Eigen::Matrix2cd spin_reduced_state(const TwoBodyState& state, int particle);

// Builds the circuit-layer view of one two-body step (dense; small grids).
CircuitLayer walk_layer(const DiracStep& step1, const DiracStep& step2,
                        const Eigen::MatrixXd& coupling);

}  // namespace scbohm
