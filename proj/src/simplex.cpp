#include "holoform/simplex.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace holoform {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {
constexpr double kPivotTol = 1e-11;
}

SimplexResult simplex_maximize(const MatrixXd& A, const VectorXd& b,
                               const VectorXd& c, std::vector<int> basis) {
  const int rows = static_cast<int>(A.rows());
  const int cols = static_cast<int>(A.cols());
  if (b.size() != rows || c.size() != cols) {
    throw DimensionError("simplex_maximize: inconsistent shapes");
  }
  if (static_cast<int>(basis.size()) != rows) {
    throw DimensionError("simplex_maximize: basis size must equal row count");
  }

  MatrixXd B(rows, rows);
  auto load_basis = [&]() {
    for (int i = 0; i < rows; ++i) B.col(i) = A.col(basis[i]);
  };

  // Bland's rule cannot cycle, so the pivot count is bounded by the number
  // of bases; the cap below is a defensive backstop for numerical trouble.
  const int max_pivots = 200000;
  SimplexResult res;

  load_basis();
  Eigen::PartialPivLU<MatrixXd> lu(B);
  VectorXd xB = lu.solve(b);

  for (int pivot = 0; pivot <= max_pivots; ++pivot) {
    VectorXd cB(rows);
    for (int i = 0; i < rows; ++i) cB(i) = c(basis[i]);
    const VectorXd y = lu.transpose().solve(cB);

    // Entering: smallest index with positive reduced cost.
    int enter = -1;
    for (int j = 0; j < cols; ++j) {
      if (std::find(basis.begin(), basis.end(), j) != basis.end()) continue;
      const double reduced = c(j) - y.dot(A.col(j));
      if (reduced > kPivotTol) {
        enter = j;
        break;
      }
    }
    if (enter < 0) {
      res.x = VectorXd::Zero(cols);
      for (int i = 0; i < rows; ++i) res.x(basis[i]) = std::max(xB(i), 0.0);
      res.y = y;
      res.value = c.dot(res.x);
      res.pivots = pivot;
      res.basis = basis;
      return res;
    }

    const VectorXd d = lu.solve(A.col(enter));
    double best_ratio = std::numeric_limits<double>::infinity();
    int leave = -1;
    for (int i = 0; i < rows; ++i) {
      if (d(i) > kPivotTol) {
        const double ratio = std::max(xB(i), 0.0) / d(i);
        // Bland tie-break: smallest basic variable index among minimizers.
        if (ratio < best_ratio - kPivotTol ||
            (ratio < best_ratio + kPivotTol &&
             (leave < 0 || basis[i] < basis[leave]))) {
          best_ratio = ratio;
          leave = i;
        }
      }
    }
    if (leave < 0) {
      throw ConvergenceError("simplex_maximize: unbounded objective",
                             std::numeric_limits<double>::infinity(), pivot);
    }

    basis[leave] = enter;
    load_basis();
    lu.compute(B);
    xB = lu.solve(b);
  }
  throw ConvergenceError("simplex_maximize: pivot cap exceeded", 0.0,
                         max_pivots);
}

}  // namespace holoform
