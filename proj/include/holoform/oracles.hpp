#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include "holoform/spaces.hpp"

// Independent ground-truth computations used by the test suites. Everything
// here is deliberately naive (direct sums, enumeration, Monte Carlo) and
// shares no numerical kernel with the solver modules; this library links
// against holoform_spaces only.

namespace holoform::oracles {

struct OracleResult {
  double value = 0.0;
  std::string method;
  double cost = 0.0;  // rough work estimate (elementary evaluations)
};

// log sum_i e^{c(i)} p(i), evaluated directly (log-sum-exp form).
OracleResult singleton_pressure(const VectorXd& c, const ProbMeasure& alpha);

// sum_i q(i) log(q(i)/p(i)) with 0 log 0 = 0; SupportError when q charges a
// point outside supp(p).
OracleResult kl_divergence(const ProbMeasure& q, const ProbMeasure& p);

struct ChaosGameEstimate {
  double m1 = 0.0;   // estimate of integral z   d rho
  double m2 = 0.0;   // estimate of integral z^2 d rho
  double se1 = 0.0;  // batch-means standard errors
  double se2 = 0.0;
  long samples = 0;
  long burn_in = 0;
};

// Random-trajectory estimate of the invariant measure's first two moments.
// cbar must be a normalized cost: the branch x is drawn at each step with
// probability alpha(x) e^{cbar(x, z)}, which sums to one for normalized
// costs. Grid fibers only. Deterministic given the seed.
ChaosGameEstimate chaos_game_measure(const CostFunction& cbar,
                                     const ProbMeasure& alpha,
                                     const ContractiveIFS& ifs, long samples,
                                     long burn_in, std::uint64_t seed);

// Exact transport optimum sup <c, pi> over the polytope with the given
// marginals, by enumerating basic solutions (candidate vertices). Throws
// OracleScaleError when the subset count exceeds the enumeration cap.
OracleResult transport_bruteforce(const MatrixXd& c, const ProbMeasure& mu,
                                  const ProbMeasure& nu);

// Central finite difference (P(c + eps g) - P(c - eps g)) / (2 eps).
// The pressure functional is passed in by the caller, keeping this module
// independent of any particular pressure implementation.
using PressureFn = std::function<double(const CostFunction&)>;
OracleResult fd_pressure_gradient(const PressureFn& pressure,
                                  const CostFunction& c, const CostFunction& g,
                                  double epsilon);

}  // namespace holoform::oracles
