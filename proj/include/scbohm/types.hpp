#pragma once

#include <complex>
#include <vector>

#include <Eigen/Dense>

namespace scbohm {

using cplx = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RVector = Eigen::VectorXd;

inline constexpr cplx kI{0.0, 1.0};

}  // namespace scbohm
