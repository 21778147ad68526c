#pragma once

#include <Eigen/Core>

namespace eos {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

using Index = Eigen::Index;

}  // namespace eos
