#pragma once

#include <Eigen/Dense>

namespace simproto {

// Row-major so that row(i) is a contiguous per-sample / per-class slice.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

}  // namespace simproto
