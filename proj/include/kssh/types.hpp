#pragma once

#include <complex>

#include <Eigen/Dense>

namespace kssh {

using cplx = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using RealMatrix = Eigen::MatrixXd;
using RealVector = Eigen::VectorXd;

constexpr cplx kI{0.0, 1.0};

} // namespace kssh
