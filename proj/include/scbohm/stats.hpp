#pragma once

// Densities on lattice nodes, interpreted as piecewise-linear functions of a
// continuous coordinate; inverse-CDF sampling and one-sample KS distances.

#include <cstdint>
#include <utility>
#include <vector>

#include "scbohm/rng.hpp"
#include "scbohm/types.hpp"
#include "scbohm/walk.hpp"

namespace scbohm {

// Periodic grids close the ring with a last cell [x_{N-1}, x_min + L] that
// interpolates back to node 0; reflecting grids span [x_0, x_{N-1}].
class LinearDensity {
 public:
  LinearDensity(const LatticeGrid& grid, const RVector& nodes);

  double cdf(double x) const;
  double inverse_cdf(double u) const;
  double pdf(double x) const;
  double lower() const { return xs_.front(); }
  double upper() const { return xs_.back(); }
  std::size_t cells() const { return xs_.size() - 1; }
  // Integral of the interpolant before normalization.
  double raw_mass() const { return mass_; }

 private:
  std::size_t cell_of(double x) const;
  std::vector<double> xs_;
  std::vector<double> rho_;  // normalized node values (one per cell edge)
  std::vector<double> cum_;  // cumulative mass at cell edges
  double mass_ = 0.0;
};

// Solves the within-cell quadratic: the offset s in [0, h] at which the mass
// rho_a s + (rho_b - rho_a) s^2 / (2h) reaches `target`.
double linear_cell_inverse(double rho_a, double rho_b, double h, double target);

double ks_statistic(std::vector<double> samples, const LinearDensity& density);

// Asymptotic two-sided critical value sqrt(-ln(alpha/2)/2)/sqrt(n).
double ks_critical_value(std::size_t n, double alpha = 0.05);

std::vector<double> sample_density(const LinearDensity& density, std::size_t count,
                                   std::mt19937_64& eng);

// Samples (x1, x2) from the bilinear interpolant of a nonnegative N x N table:
// x1 from its marginal, then x2 from the conditional along the sampled x1.
class JointSampler {
 public:
  JointSampler(const LatticeGrid& grid, const Eigen::MatrixXd& rho);
  std::pair<double, double> draw(std::mt19937_64& eng) const;
  std::vector<std::pair<double, double>> draw(std::size_t count, std::mt19937_64& eng) const;
  const LinearDensity& marginal1() const { return m1_; }

 private:
  LatticeGrid grid_;
  Eigen::MatrixXd rho_;
  LinearDensity m1_;
};

}  // namespace scbohm
