#pragma once

#include <optional>
#include <vector>

#include "holoform/spaces.hpp"

namespace holoform {

// Computational kernel shared by every operator-side routine: per-branch
// interpolation stencils for psi(tau_x(z_j)) on grid fibers (index lookup on
// finite fibers) and their adjoint mass-splitting form. Weight matrices
// E(x,j) = alpha(x) e^{c(x,z_j)} are built once per cost by the callers so
// iterative solvers pay only gathers and multiplies per step.
class TransferOperator {
 public:
  TransferOperator(const ContractiveIFS& ifs, const ProbMeasure& alpha);

  int base_size() const { return static_cast<int>(alpha_.size()); }
  int fiber_size() const { return static_cast<int>(lo_.cols()); }

  // alpha(x) e^{cost(x,j)} entrywise.
  MatrixXd weights(const MatrixXd& cost_values) const;

  // (L psi)(z_j) = sum_x E(x,j) interp(psi)(tau_x z_j).
  VectorXd apply(const MatrixXd& E, const VectorXd& psi) const;

  // (L^ g)(z_j) = sum_x E(x,j) g(x,j); g depends on both variables.
  VectorXd apply_hat(const MatrixXd& E, const MatrixXd& g) const;

  // Adjoint on measures: node j sends E(x,j) rho(j) through branch x with
  // linear mass splitting.
  VectorXd apply_adjoint(const MatrixXd& E, const VectorXd& rho) const;

  // interp(psi)(tau_x z_j) for every node j.
  VectorXd compose(int x, const VectorXd& psi) const;

  const VectorXd& alpha() const { return alpha_; }

 private:
  Eigen::ArrayXXi lo_;   // base x fiber: lower stencil node
  Eigen::ArrayXXd wt_;   // base x fiber: weight of the upper node
  VectorXd alpha_;
};

struct Eigenpair {
  double lambda = 0.0;      // may overflow to inf for extreme costs
  double log_lambda = 0.0;  // authoritative
  GridFunction h;           // strictly positive, max h = 1
  double residual = 0.0;    // sup |L_c h - lambda h| (shift-reduced scale)
  int iterations = 0;
};

// Default iteration cap: 10 ceil(log tol / log gamma).
int default_max_iter(double tol, double gamma);

// Node-wise transfer application; records the Lipschitz propagation bound
// lip(e^c) sup|psi| + gamma sup(L1) lip(psi) on the result.
GridFunction apply_transfer(const CostFunction& c, const ProbMeasure& alpha,
                            const GridFunction& psi, const ContractiveIFS& ifs);

// Two-variable form: integrates g(x, z) against e^{c(x,z)} d alpha without
// composing with the dynamics.
GridFunction apply_hat(const CostFunction& c, const ProbMeasure& alpha,
                       const CostFunction& g, const ContractiveIFS& ifs);

// Leading eigenpair by power iteration from psi = 1. The iteration is run on
// the shifted cost c - max c, so only log_lambda is exposed to overflow.
// Never returns an eigenfunction vanishing somewhere: iterates stay strictly
// positive. `initial` warm-starts the iteration (must be strictly positive).
Eigenpair power_eigenpair(const CostFunction& c, const ProbMeasure& alpha,
                          const ContractiveIFS& ifs, double tol = 1e-10,
                          int max_iter = 0,
                          const std::optional<VectorXd>& initial = std::nullopt);

// Fixed point of the discounted operator
//   T_s(u)(z) = log int e^{c(x,z) + s u(tau_x z)} d alpha(x),
// found by iteration; contraction in sup norm at rate s makes the stopping
// rule |T_s u - u| <= tol (1-s)/s certify |u - u_s| <= tol.
GridFunction bousch_fixpoint(const CostFunction& c, const ProbMeasure& alpha,
                             const ContractiveIFS& ifs, double s,
                             double tol = 1e-10);

struct BouschSweepPoint {
  double s = 0.0;
  double value = 0.0;  // (1-s) max u_s
  double lip = 0.0;    // measured lip(u_s)
};

struct BouschSweep {
  std::vector<BouschSweepPoint> points;
  double extrapolated = 0.0;  // polynomial extrapolation of value to s = 1
};

// Discounted-approximation sweep of log lambda; independent validator for
// the power iteration.
BouschSweep bousch_sweep(const CostFunction& c, const ProbMeasure& alpha,
                         const ContractiveIFS& ifs,
                         const std::vector<double>& s_values,
                         double tol = 1e-10);

// cbar = c + log h(tau_x z) - log h(z) - log lambda, so L_cbar 1 = 1.
class NormalizedCost {
 public:
  NormalizedCost(CostFunction cbar, CostFunction original, Eigenpair eigenpair,
                 double normalization_residual);

  const CostFunction& cost() const { return cbar_; }
  const CostFunction& original() const { return original_; }
  const Eigenpair& eigenpair() const { return eig_; }
  double log_lambda() const { return eig_.log_lambda; }
  // sup |L_cbar 1 - 1| measured after construction.
  double normalization_residual() const { return norm_residual_; }

 private:
  CostFunction cbar_;
  CostFunction original_;
  Eigenpair eig_;
  double norm_residual_ = 0.0;
};

NormalizedCost normalize_cost(const CostFunction& c, const ProbMeasure& alpha,
                              const ContractiveIFS& ifs, double tol = 1e-10,
                              int max_iter = 0);

// Same, reusing an already computed eigenpair for c.
NormalizedCost normalize_with(const CostFunction& c, const ProbMeasure& alpha,
                              const ContractiveIFS& ifs, const Eigenpair& eig);

struct InvariantMeasure {
  ProbMeasure rho;
  double tv_residual = 0.0;  // total-variation change at the last step
  int iterations = 0;
  // Uniform-convergence diagnostics: L^n u flattens to the constant
  // int u d rho for Lipschitz u; gap = sup - inf at termination, error =
  // |midpoint - <rho, u>|.
  double flatness_gap = 0.0;
  double flatness_error = 0.0;
};

// Unique fixed probability of the dual operator, by adjoint iteration with
// linear mass splitting; total-variation stopping.
InvariantMeasure invariant_measure(const NormalizedCost& cbar,
                                   const ProbMeasure& alpha,
                                   const ContractiveIFS& ifs,
                                   double tol = 1e-10, int max_iter = 0,
                                   const std::optional<VectorXd>& initial = std::nullopt);

// Fixed basis of fiber test functions for holonomy checks: Chebyshev
// polynomials T_1..T_count of 2z-1 on grid fibers, point indicators on
// finite fibers.
std::vector<GridFunction> fiber_test_basis(const FiberSpace& fiber, int count);

// Joint weights pi(x, z_j) = alpha(x) e^{cbar(x,z_j)} rho(j): the plan whose
// integrals realize int g e^{cbar} d alpha d rho.
class HolonomicPlan {
 public:
  HolonomicPlan(MatrixXd weights, ContractiveIFS ifs,
                std::optional<NormalizedCost> generator, int test_functions);

  const MatrixXd& weights() const { return w_; }
  const ContractiveIFS& ifs() const { return ifs_; }
  const std::optional<NormalizedCost>& generator() const { return generator_; }

  double holonomy_residual() const { return holonomy_residual_; }

  VectorXd x_marginal() const { return w_.rowwise().sum(); }
  VectorXd z_marginal() const { return w_.colwise().sum().transpose(); }

  // int f(x, z) d pi over the plan's atoms.
  double integrate(const MatrixXd& f_values) const;
  // int g(z) d pi.
  double integrate_fiber(const GridFunction& g) const;
  // int g(tau_x(z)) d pi, interpolating g at the branch images.
  double integrate_composed(const GridFunction& g) const;

 private:
  MatrixXd w_;
  ContractiveIFS ifs_;
  std::optional<NormalizedCost> generator_;
  double holonomy_residual_ = 0.0;
};

// Builds the equilibrium plan of a normalized cost and checks holonomy
// against the fixed test basis; HolonomyError above tol.
HolonomicPlan holonomic_plan(const NormalizedCost& cbar,
                             const ProbMeasure& alpha, const ProbMeasure& rho,
                             const ContractiveIFS& ifs, double tol = 1e-8,
                             int test_functions = 10);

// Max over the test basis of |int g(tau_x z) d pi - int g d pi| for an
// arbitrary weight matrix on X x Z.
double holonomy_residual_of(const MatrixXd& plan_weights,
                            const ContractiveIFS& ifs, int test_functions);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  double length() const { return hi - lo; }
};

struct AttractorCover {
  int depth = 0;
  std::vector<Interval> intervals;  // grid fibers: sorted, disjoint
  std::vector<int> points;          // finite fibers: sorted node indices
  bool covers(double z, double pad = 0.0) const;
  bool covers_index(int j) const;
  double total_length() const;
};

// Iterated image of the full fiber: union_x tau_x(C) applied `depth` times.
// Nested by construction.
AttractorCover attractor_cover(const ContractiveIFS& ifs, int depth);

// Mass of rho on nodes farther than pad from the cover. pad defaults to one
// splitting cell Delta/(1-gamma) in the caller's usage; here it is explicit.
double measure_outside(const ProbMeasure& rho, const AttractorCover& cover,
                       const FiberSpace& fiber, double pad);

}  // namespace holoform
