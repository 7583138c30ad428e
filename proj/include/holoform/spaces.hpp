#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "holoform/errors.hpp"

namespace holoform {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Deterministic uniform generator. mt19937_64 is fully specified by the
// standard; the scaling below avoids the implementation-defined
// std::uniform_real_distribution so results are bit-identical everywhere.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  double uniform() {  // [0, 1)
    return static_cast<double>(state_() >> 11) * 0x1.0p-53;
  }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  int uniform_int(int n) {  // {0, ..., n-1}
    return static_cast<int>(uniform() * n) % n;
  }
  std::uint64_t raw() { return state_(); }

 private:
  std::mt19937_64 state_;
};

// Finite metric space with an explicit distance matrix.
class BaseSpace {
 public:
  BaseSpace(std::vector<std::string> labels, MatrixXd metric);

  // n points with the discrete metric d(i,j) = 1 for i != j.
  static BaseSpace discrete(int n);
  static BaseSpace singleton(const std::string& label = "x0");

  int size() const { return static_cast<int>(labels_.size()); }
  const std::string& label(int i) const { return labels_.at(i); }
  double distance(int i, int j) const { return metric_(i, j); }
  const MatrixXd& metric() const { return metric_; }
  double diameter() const;

 private:
  std::vector<std::string> labels_;
  MatrixXd metric_;
};

// Fiber: either a uniform grid on [0,1] or a finite metric space.
class FiberSpace {
 public:
  enum class Kind { Grid, Finite };

  static FiberSpace grid(int node_count);
  static FiberSpace finite(std::vector<std::string> labels, MatrixXd metric);
  static FiberSpace singleton(const std::string& label = "z0");

  Kind kind() const { return kind_; }
  bool is_grid() const { return kind_ == Kind::Grid; }
  int size() const;
  double spacing() const;            // grid only: 1/(n-1)
  double node(int j) const;          // grid only: j/(n-1)
  const VectorXd& nodes() const;     // grid only
  double distance(int i, int j) const;
  double diameter() const;
  const std::string& label(int i) const;  // finite only

 private:
  FiberSpace() = default;
  Kind kind_ = Kind::Grid;
  VectorXd nodes_;
  std::vector<std::string> labels_;
  MatrixXd metric_;
};

// build_grid(n): uniform grid on [0,1]; throws DimensionError for n < 2.
FiberSpace build_grid(int node_count);

struct AffineMap {
  double a = 0.0;
  double b = 0.0;
  double operator()(double z) const { return a * z + b; }
  double fixed_point() const { return b / (1.0 - a); }
};

// Uniformly contractive IFS {tau_x} indexed by the base points.
// Grid fibers carry one affine branch per base point; finite fibers carry
// one index table per base point.
class ContractiveIFS {
 public:
  static ContractiveIFS affine(BaseSpace base, FiberSpace fiber,
                               std::vector<AffineMap> maps, double gamma);
  static ContractiveIFS table(BaseSpace base, FiberSpace fiber,
                              std::vector<std::vector<int>> tables,
                              double gamma);

  const BaseSpace& base() const { return base_; }
  const FiberSpace& fiber() const { return fiber_; }
  double gamma() const { return gamma_; }
  bool is_affine() const { return !affine_.empty(); }

  const AffineMap& map(int x) const { return affine_.at(x); }
  const std::vector<int>& map_table(int x) const { return tables_.at(x); }

  // Image of fiber point z under branch x (grid fibers).
  double apply(int x, double z) const;
  // Image node index under branch x (finite fibers).
  int apply_index(int x, int j) const;

  // Unique fixed point of branch x: coordinate for grid fibers, node index
  // cast to coordinate-free integer for finite fibers.
  double fixed_point(int x) const;
  int fixed_point_index(int x) const;

 private:
  ContractiveIFS() = default;
  BaseSpace base_ = BaseSpace::singleton();
  FiberSpace fiber_ = FiberSpace::singleton();
  double gamma_ = 0.5;
  std::vector<AffineMap> affine_;
  std::vector<std::vector<int>> tables_;
};

// Probability weights over a space's points or nodes.
class ProbMeasure {
 public:
  explicit ProbMeasure(VectorXd weights);

  static ProbMeasure uniform(int n);
  static ProbMeasure delta(int n, int at);
  // Rescale nonnegative weights to total mass 1.
  static ProbMeasure normalized(VectorXd weights);

  int size() const { return static_cast<int>(w_.size()); }
  double weight(int i) const { return w_(i); }
  const VectorXd& weights() const { return w_; }
  bool full_support() const { return w_.minCoeff() > 0.0; }
  void require_full_support(const std::string& who) const;

 private:
  VectorXd w_;
};

// Node values of a function on a fiber, with a recorded Lipschitz bound.
// The recorded bound is never below the measured discrete constant.
class GridFunction {
 public:
  GridFunction(FiberSpace fiber, VectorXd values);
  GridFunction(FiberSpace fiber, VectorXd values, double lip_bound);

  static GridFunction constant(const FiberSpace& fiber, double value);

  const FiberSpace& fiber() const { return fiber_; }
  int size() const { return static_cast<int>(values_.size()); }
  const VectorXd& values() const { return values_; }
  double value(int j) const { return values_(j); }
  double lip() const { return lip_; }

  // Piecewise-linear evaluation (grid fibers); exact at nodes.
  double operator()(double z) const;

  double max() const { return values_.maxCoeff(); }
  double min() const { return values_.minCoeff(); }

 private:
  FiberSpace fiber_;
  VectorXd values_;
  double lip_ = 0.0;
};

// eval_function(f, z): interpolation on [0,1]; DomainError outside.
double eval_function(const GridFunction& f, double z);

// Max over adjacent grid nodes of |dv|/dz (grid) or over all pairs of
// |dv|/d(i,j) (finite). Zero for singleton fibers.
double measured_lip(const FiberSpace& fiber, const VectorXd& values);

// Cost c(x, z): one row per base point, one column per fiber node.
// Lives here (not with the transfer operator) so the oracle layer can
// consume costs without linking any solver.
class CostFunction {
 public:
  CostFunction(const BaseSpace& base, FiberSpace fiber, MatrixXd values);
  CostFunction(int base_size, FiberSpace fiber, MatrixXd values);

  static CostFunction zero(const BaseSpace& base, const FiberSpace& fiber);
  static CostFunction constant(const BaseSpace& base, const FiberSpace& fiber,
                               double value);

  // Same spaces, new entries.
  CostFunction with_values(MatrixXd values) const;

  int base_size() const { return static_cast<int>(values_.rows()); }
  int fiber_size() const { return static_cast<int>(values_.cols()); }
  const FiberSpace& fiber() const { return fiber_; }
  const MatrixXd& values() const { return values_; }
  double operator()(int x, int j) const { return values_(x, j); }
  GridFunction slice(int x) const;  // c(x, .) as a fiber function
  // Lipschitz estimate in the fiber variable, uniform over x.
  double fiber_lip() const { return fiber_lip_; }

 private:
  FiberSpace fiber_;
  MatrixXd values_;
  double fiber_lip_ = 0.0;
};

// Random cost with moderate Lipschitz constant, deterministic given seed.
// Grid fibers: low-order cosine series with decaying coefficients; finite
// fibers: independent uniform node values.
CostFunction random_lipschitz_cost(const BaseSpace& base,
                                   const FiberSpace& fiber, std::uint64_t seed,
                                   double amplitude = 1.0, int modes = 3);

struct ContractionReport {
  double max_ratio = 0.0;  // max d(images) / (d(x1,x2)+d(z1,z2)) observed
  bool pass = false;
  int pairs_checked = 0;
  std::optional<ContractionWitness> witness;  // present when pass is false
};

// Certify d(tau_x1(z1), tau_x2(z2)) <= gamma (d(x1,x2) + d(z1,z2)).
// Affine branches: exhaustive corner pairs (the max of the piecewise-convex
// defect over [0,1]^2 is attained at corners) plus `samples` random pairs.
// Table branches: exhaustive over all pairs; `samples` ignored.
ContractionReport verify_contraction(const ContractiveIFS& ifs, int samples,
                                     std::uint64_t seed);

// Push m forward through branch x. Off-grid images split linearly between
// the neighboring nodes; mass and nonnegativity are preserved.
ProbMeasure pushforward_measure(const ContractiveIFS& ifs, int x,
                                const ProbMeasure& m);

}  // namespace holoform
