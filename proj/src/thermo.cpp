#include "holoform/thermo.hpp"

#include <algorithm>
#include <cmath>

namespace holoform {

PressureReport pressure(const CostFunction& c, const ProbMeasure& alpha,
                        const ContractiveIFS& ifs, double tol, int max_iter) {
  NormalizedCost nc = normalize_cost(c, alpha, ifs, tol, max_iter);
  InvariantMeasure inv = invariant_measure(nc, alpha, ifs, tol, max_iter);
  HolonomicPlan plan = holonomic_plan(nc, alpha, inv.rho, ifs);
  EntropyReport ent = entropy_equilibrium(plan);
  const double integral_c = plan.integrate(c.values());
  PressureReport rep{
      .P = nc.log_lambda(),
      .lambda = nc.eigenpair().lambda,
      .log_lambda = nc.log_lambda(),
      .normalized = nc,
      .equilibrium = std::move(plan),
      .entropy = std::move(ent),
      .gap = 0.0,
  };
  rep.gap = std::abs(rep.P - (integral_c + rep.entropy.H));
  return rep;
}

EntropyReport entropy_equilibrium(const HolonomicPlan& pi) {
  if (!pi.generator()) {
    throw MissingCertificateError(
        "entropy_equilibrium: plan carries no generating normalized cost; "
        "use entropy_variational");
  }
  const CostFunction& cbar = pi.generator()->cost();
  EntropyReport rep;
  rep.H = -pi.integrate(cbar.values());
  rep.I = -rep.H;
  rep.method = cbar.fiber_size() == 1 ? "singleton-closed-form"
                                      : "equilibrium-formula";
  rep.certificate = cbar;
  return rep;
}

EntropyReport entropy_variational(const HolonomicPlan& pi,
                                  const ProbMeasure& alpha,
                                  const ContractiveIFS& ifs, int candidates,
                                  std::uint64_t seed, double tol) {
  if (candidates < 0) {
    throw ValidationError("entropy_variational: candidates >= 0 required");
  }
  // I = sup over normalized c of int c d pi; every candidate below is
  // normalized, so the max is a certified lower bound.
  double best = 0.0;  // the zero cost
  CostFunction best_cert = CostFunction::zero(ifs.base(), ifs.fiber());
  CostFunction best_raw = best_cert;
  int used = 1;

  auto consider = [&](const CostFunction& raw, const CostFunction& normalized) {
    const double v = pi.integrate(normalized.values());
    ++used;
    if (v > best) {
      best = v;
      best_cert = normalized;
      best_raw = raw;
    }
  };

  if (pi.generator()) {
    consider(pi.generator()->cost(), pi.generator()->cost());
  }
  for (int k = 0; k < candidates; ++k) {
    CostFunction draw = random_lipschitz_cost(ifs.base(), ifs.fiber(),
                                              seed + 0x9e3779b97f4a7c15ULL * k,
                                              1.0, 3);
    consider(draw, normalize_cost(draw, alpha, ifs, tol).cost());
  }

  // Sharpen the pool winner by ascent on the equivalent unconstrained form
  // sup_c [int c d pi - P(c)], whose gradient is pi minus the equilibrium
  // plan of c. Each iterate is re-certified through normalize_cost, so the
  // reported value stays a genuine lower bound.
  const int ascent_steps = std::max(100, candidates);
  MatrixXd c = best_raw.values();
  std::optional<VectorXd> warm_h, warm_rho;
  for (int k = 1; k <= ascent_steps; ++k) {
    CostFunction cf = best_raw.with_values(c);
    try {
      Eigenpair eig = power_eigenpair(cf, alpha, ifs, tol, 0, warm_h);
      warm_h = eig.h.values();
      NormalizedCost nc = normalize_with(cf, alpha, ifs, eig);
      InvariantMeasure inv = invariant_measure(nc, alpha, ifs, tol, 0, warm_rho);
      warm_rho = inv.rho.weights();

      MatrixXd eq(c.rows(), c.cols());
      for (int x = 0; x < c.rows(); ++x) {
        eq.row(x) = alpha.weight(x) *
                    (nc.cost().values().row(x).array().exp() *
                     inv.rho.weights().transpose().array()).matrix();
      }
      consider(cf, nc.cost());
      c += (1.0 / std::sqrt(static_cast<double>(k))) * (pi.weights() - eq);
    } catch (const ConvergenceError&) {
      // Plans far from any equilibrium (or not quite holonomic) drive the
      // iterates toward singular costs; the bound found so far stands.
      break;
    }
  }

  EntropyReport rep;
  rep.I = best;
  rep.H = -best;
  rep.method = "variational-lower-bound";
  rep.certificate = std::move(best_cert);
  rep.candidates = used;
  return rep;
}

double holonomy_residual(const HolonomicPlan& pi, const ContractiveIFS& ifs,
                         int test_functions) {
  return holonomy_residual_of(pi.weights(), ifs, test_functions);
}

}  // namespace holoform
