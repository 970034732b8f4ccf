#pragma once

#include <Eigen/Dense>

namespace ncl {

// 64-bit floats throughout; row-major so batches serialize in sample order.
using Scalar = double;
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

}  // namespace ncl
