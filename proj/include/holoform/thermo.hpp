#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "holoform/transfer.hpp"

namespace holoform {

struct EntropyReport {
  double H = 0.0;  // <= 0: the zero cost is normalized and feasible
  double I = 0.0;  // sign-flipped variant, >= 0
  std::string method;  // equilibrium-formula | variational-lower-bound |
                       // singleton-closed-form
  std::optional<CostFunction> certificate;  // normalized cost achieving the sup
  int candidates = 0;
};

struct PressureReport {
  double P = 0.0;  // log lambda
  double lambda = 0.0;
  double log_lambda = 0.0;
  NormalizedCost normalized;
  HolonomicPlan equilibrium;
  EntropyReport entropy;  // of the equilibrium plan
  double gap = 0.0;       // |P - (int c dpi + H(pi))|
};

// Pressure through the transfer spectrum: P = log lambda, with the
// equilibrium plan of the normalized cost as witness and the closed
// variational identity re-checked as `gap`.
PressureReport pressure(const CostFunction& c, const ProbMeasure& alpha,
                        const ContractiveIFS& ifs, double tol = 1e-10,
                        int max_iter = 0);

// H = -int cbar d pi for plans carrying their generating normalized cost;
// MissingCertificateError otherwise (use the variational route instead).
EntropyReport entropy_equilibrium(const HolonomicPlan& pi);

// Lower bound on I (upper bound on H) over sampled normalized costs: random
// Lipschitz draws pushed through normalize_cost, the zero cost, and the
// plan's own certificate when present.
EntropyReport entropy_variational(const HolonomicPlan& pi,
                                  const ProbMeasure& alpha,
                                  const ContractiveIFS& ifs, int candidates,
                                  std::uint64_t seed, double tol = 1e-10);

// Max over the fiber test basis of |int g(tau_x z) d pi - int g d pi|.
double holonomy_residual(const HolonomicPlan& pi, const ContractiveIFS& ifs,
                         int test_functions = 10);

}  // namespace holoform
