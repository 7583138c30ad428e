#pragma once

#include <Eigen/Dense>
#include <vector>

#include "holoform/errors.hpp"

namespace holoform {

// Dense primal simplex with Bland's rule for
//     maximize c^T x  subject to  A x = b, x >= 0,
// sized for transport polytopes up to a few hundred variables. The caller
// supplies a starting basis whose columns are independent and whose basic
// solution is feasible.
struct SimplexResult {
  Eigen::VectorXd x;
  Eigen::VectorXd y;  // equality multipliers: y = B^{-T} c_B at optimality
  double value = 0.0;
  int pivots = 0;
  std::vector<int> basis;
};

SimplexResult simplex_maximize(const Eigen::MatrixXd& A,
                               const Eigen::VectorXd& b,
                               const Eigen::VectorXd& c,
                               std::vector<int> basis);

}  // namespace holoform
