#ifndef FBMC_CORE_TYPES_HPP
#define FBMC_CORE_TYPES_HPP

#include <Eigen/Dense>

namespace fbmc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

}  // namespace fbmc

#endif  // FBMC_CORE_TYPES_HPP
