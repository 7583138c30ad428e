#pragma once

#include <optional>
#include <vector>

#include "holoform/thermo.hpp"

namespace holoform {

// Cost on X x Y x Z x W, stored flat in x-major order.
class Cost4 {
 public:
  Cost4(int nx, int ny, int nz, int nw, VectorXd values);

  static Cost4 zeros(int nx, int ny, int nz, int nw);
  static Cost4 constant(int nx, int ny, int nz, int nw, double value);
  // c(x,y,z,w) = b(x,z) + d(y,w).
  static Cost4 separable(const CostFunction& b, const CostFunction& d);

  int nx() const { return nx_; }
  int ny() const { return ny_; }
  int nz() const { return nz_; }
  int nw() const { return nw_; }
  long size() const { return v_.size(); }
  double at(int x, int y, int z, int w) const { return v_(index(x, y, z, w)); }
  double& at(int x, int y, int z, int w) { return v_(index(x, y, z, w)); }
  const VectorXd& values() const { return v_; }
  double max() const { return v_.maxCoeff(); }
  double min() const { return v_.minCoeff(); }

  long index(int x, int y, int z, int w) const {
    return ((static_cast<long>(x) * ny_ + y) * nz_ + z) * nw_ + w;
  }

  // c - phi(x) - psi(y), the shifted cost of the outer descent.
  Cost4 shifted(const VectorXd& phi, const VectorXd& psi) const;

 private:
  int nx_, ny_, nz_, nw_;
  VectorXd v_;
};

// Plan on X x Y x Z x W (ny = nw = 1 covers the X x Z case, nz = nw = 1 the
// zero-temperature coupling on X x Y).
class TransportPlan {
 public:
  TransportPlan(int nx, int ny, int nz, int nw, VectorXd weights);

  int nx() const { return nx_; }
  int ny() const { return ny_; }
  int nz() const { return nz_; }
  int nw() const { return nw_; }
  double at(int x, int y, int z, int w) const {
    return w_(((static_cast<long>(x) * ny_ + y) * nz_ + z) * nw_ + w);
  }
  const VectorXd& weights() const { return w_; }

  VectorXd x_marginal() const;
  VectorXd y_marginal() const;
  MatrixXd xz_marginal() const;
  MatrixXd yw_marginal() const;
  MatrixXd xy_marginal() const;
  double integrate(const Cost4& c) const;

  // Residual fields are filled by the constructing operation.
  double marginal_residual_mu = 0.0;
  double marginal_residual_nu = 0.0;
  double holonomy_residual_x = 0.0;
  double holonomy_residual_y = 0.0;

 private:
  int nx_, ny_, nz_, nw_;
  VectorXd w_;
};

struct DualPotentials {
  VectorXd phi;                 // on X
  std::optional<VectorXd> psi;  // on Y (two-marginal problems)
  double objective = 0.0;
  double pressure_residual = 0.0;  // |P(c - phi)| or |P^m(c - phi - psi)|
};

struct SeparableBound {
  CostFunction b;  // on X x Z with P_alpha(b) = 0
  CostFunction d;  // on Y x W with P_beta(d) = 0
  double lambda = 0.0;
  double max_violation = 0.0;  // max over points of c - lambda - b - d
  double pressure_residual_b = 0.0;
  double pressure_residual_d = 0.0;
};

struct CoboundaryPair {
  GridFunction g;  // on Z
  GridFunction f;  // on W
};

// ---------------------------------------------------------------------------
// Feasibility witness: d pi = (delta_{x, z_x} d mu)(delta_{y, w_y} d nu) with
// z_x, w_y the branch fixed points; both holonomy checks pass by
// construction (exactly when the fixed points are grid nodes or the fibers
// are finite).
TransportPlan product_plan(const ProbMeasure& mu, const ProbMeasure& nu,
                           const ContractiveIFS& ifs_x,
                           const ContractiveIFS& ifs_y);

// ---------------------------------------------------------------------------
struct DescentOptions {
  double tol = 1e-6;       // total-variation target for the marginal match
  int max_iter = 5000;
  double step0 = 1.0;      // eta_k = step0 / sqrt(k)
  double solver_tol = 1e-10;
  bool throw_on_stall = true;
};

struct SingleMarginalResult {
  DualPotentials potentials;  // phi shifted so P_alpha(c - phi) = 0
  HolonomicPlan plan;         // equilibrium of c - phi
  double marginal_tv = 0.0;   // TV(x-marginal, mu)
  double primal_value = 0.0;  // int c d pi + H_alpha(pi)
  double gap = 0.0;           // objective - primal_value
  int iterations = 0;
};

// Minimizes <mu, phi> + P_alpha(c - phi) by gradient descent; the gradient
// is mu minus the equilibrium x-marginal. The constrained form with
// P_alpha(c - phi) = 0 is recovered by the exact constant shift.
SingleMarginalResult single_marginal_dual(const CostFunction& c,
                                          const ProbMeasure& mu,
                                          const ProbMeasure& alpha,
                                          const ContractiveIFS& ifs,
                                          const DescentOptions& opt = {});

// ---------------------------------------------------------------------------
struct MarginalPressureOptions {
  int restarts = 8;            // softmax temperature halves at each restart
  int iters_per_restart = 300;
  double temp_factor = 1e-3;   // initial T = temp_factor * range(c)
  double step0 = 0.5;
  double solver_tol = 1e-10;
  // Warm start for the separable pair (used by the outer two-marginal loop):
  // iterates, and the annealed temperature to resume from.
  std::optional<MatrixXd> init_b;
  std::optional<MatrixXd> init_d;
  std::optional<double> init_temp;
};

struct MarginalPressureResult {
  double value = 0.0;  // P^m
  SeparableBound certificate;
  // Product-of-equilibria primal value (a feasible lower bound) and the
  // resulting bracket on P^m.
  double lower_bound = 0.0;
  double gap = 0.0;
  int iterations = 0;
  // Equilibrium marginals of the certificate pair: the derivative data the
  // outer loops need.
  MatrixXd plan_b;  // X x Z weights
  MatrixXd plan_d;  // Y x W weights
  MatrixXd raw_b;   // unshifted iterates, for warm restarts
  MatrixXd raw_d;
};

// P^m(c) = inf over (b, d) of max(c - b - d) + P_alpha(b) + P_beta(d), by
// subgradient descent on the softmax-smoothed max; the constrained
// P_alpha(b) = P_beta(d) = 0 form follows from the exact shift identities.
// Exact eigen short-circuit when either factor's spaces are singletons.
MarginalPressureResult marginal_pressure(const Cost4& c,
                                         const ProbMeasure& alpha,
                                         const ProbMeasure& beta,
                                         const ContractiveIFS& ifs_x,
                                         const ContractiveIFS& ifs_y,
                                         const MarginalPressureOptions& opt = {});

// ---------------------------------------------------------------------------
struct TwoMarginalOptions {
  double tol = 1e-3;  // TV target on both marginals (inner noise floor)
  int max_iter = 800;
  double step0 = 1.0;
  MarginalPressureOptions inner;
  bool throw_on_stall = true;
};

struct TwoMarginalResult {
  DualPotentials potentials;  // psi shifted so P^m(c - phi - psi) = 0
  TransportPlan witness;      // product of the two inner equilibria
  double primal_value = 0.0;  // int c d witness + H_alpha + H_beta
  double gap = 0.0;
  double marginal_tv_mu = 0.0;
  double marginal_tv_nu = 0.0;
  int iterations = 0;
};

// Minimizes <mu,phi> + <nu,psi> + P^m(c - phi - psi): outer descent on
// (phi, psi) with the inner marginal-pressure solve supplying value and
// equilibrium marginals; inner iterates are warm-started across steps.
TwoMarginalResult two_marginal_dual(const Cost4& c, const ProbMeasure& mu,
                                    const ProbMeasure& nu,
                                    const ProbMeasure& alpha,
                                    const ProbMeasure& beta,
                                    const ContractiveIFS& ifs_x,
                                    const ContractiveIFS& ifs_y,
                                    const TwoMarginalOptions& opt = {});

// ---------------------------------------------------------------------------
struct KantorovichResult {
  TransportPlan plan;  // nz = nw = 1
  DualPotentials potentials;
  double value = 0.0;
  int pivots = 0;
};

// Zero-temperature case: sup <c, pi> over the transport polytope, solved
// exactly by the dense simplex; optimal (phi, psi) come from the final basis
// with the gauge psi(last) = 0.
KantorovichResult kantorovich_solve(const MatrixXd& c, const ProbMeasure& mu,
                                    const ProbMeasure& nu);

// ---------------------------------------------------------------------------
struct CoboundaryCheck {
  bool feasible = false;
  double max_violation = 0.0;  // max of lhs - rhs over all points
};

// Pointwise check of
//   c - phi - psi + g(tau_x z) - g + f(tau_y w) - f <= b + d.
CoboundaryCheck coboundary_feasibility(const Cost4& c, const VectorXd& phi,
                                       const VectorXd& psi,
                                       const CoboundaryPair& pair,
                                       const CostFunction& b,
                                       const CostFunction& d,
                                       const ContractiveIFS& ifs_x,
                                       const ContractiveIFS& ifs_y,
                                       double tol = 1e-9);

// ---------------------------------------------------------------------------
struct SlacknessReport {
  double pressure_residual = 0.0;  // |P(c - phi)|
  double dual_value = 0.0;         // <mu, phi>
  double primal_value = 0.0;       // int c d pi + H(pi)
  double gap = 0.0;
  double marginal_tv = 0.0;        // TV(mu, x-marginal of pi)
  bool optimal = false;
};

// P(c - phi) = 0 plus pi = equilibrium of c - phi forces joint optimality:
// the identity <mu, phi> = int c d pi + H(pi) is checked against the
// supplied mu (defaults to the plan's own x-marginal).
SlacknessReport slackness_check(const CostFunction& c, const VectorXd& phi,
                                const ProbMeasure& alpha,
                                const ContractiveIFS& ifs,
                                const std::optional<ProbMeasure>& mu,
                                double tol = 1e-5, double pressure_tol = 1e-6);

}  // namespace holoform
