#include "scbohm/gamma.hpp"

namespace scbohm {

namespace {

GammaSet build_dirac() {
  const cplx i = kI;
  Eigen::Matrix2cd sx, sy, sz, id;
  sx << 0, 1, 1, 0;
  sy << 0, -i, i, 0;
  sz << 1, 0, 0, -1;
  id = Eigen::Matrix2cd::Identity();

  GammaSet g;
  g.gamma0.setZero();
  g.gamma0.topLeftCorner<2, 2>() = id;
  g.gamma0.bottomRightCorner<2, 2>() = -id;
  const std::array<Eigen::Matrix2cd, 3> sig{sx, sy, sz};
  for (int k = 0; k < 3; ++k) {
    g.gamma[k].setZero();
    g.gamma[k].topRightCorner<2, 2>() = sig[k];
    g.gamma[k].bottomLeftCorner<2, 2>() = -sig[k];
  }
  return g;
}

}  // namespace

const GammaSet& GammaSet::dirac() {
  static const GammaSet g = build_dirac();
  return g;
}

double clifford_defect(const GammaSet& g) {
  double worst = 0.0;
  for (int mu = 0; mu < 4; ++mu) {
    for (int nu = 0; nu < 4; ++nu) {
      const Mat4& a = g.gamma_mu(mu);
      const Mat4& b = g.gamma_mu(nu);
      Mat4 expect = Mat4::Zero();
      if (mu == nu) expect = (mu == 0 ? 2.0 : -2.0) * Mat4::Identity();
      worst = std::max(worst, (a * b + b * a - expect).cwiseAbs().maxCoeff());
    }
  }
  return worst;
}

}  // namespace scbohm
