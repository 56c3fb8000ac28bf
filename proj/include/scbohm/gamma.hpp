#pragma once

#include <array>

#include "scbohm/types.hpp"

namespace scbohm {

using Mat4 = Eigen::Matrix4cd;

// Dirac-representation gamma matrices. Spinor index alpha = 2*o + s, where o
// selects the upper/lower 2-block and s the Pauli spin within the block.
struct GammaSet {
  Mat4 gamma0;
  std::array<Mat4, 3> gamma;  // gamma^1, gamma^2, gamma^3

  static const GammaSet& dirac();

  // gamma^0 gamma^i, i in {1,2,3}
  Mat4 alpha(int i) const { return gamma0 * gamma[i - 1]; }
  const Mat4& gamma_mu(int mu) const { return mu == 0 ? gamma0 : gamma[mu - 1]; }
};

// Largest deviation from the Clifford relations {g^mu, g^nu} = 2 eta^{mu nu},
// with eta = diag(+1,-1,-1,-1).
double clifford_defect(const GammaSet& g);

}  // namespace scbohm
