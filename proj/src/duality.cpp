#include "holoform/duality.hpp"

#include <algorithm>
#include <cmath>

#include "holoform/simplex.hpp"

namespace holoform {

namespace {

double tv_distance(const VectorXd& a, const VectorXd& b) {
  return 0.5 * (a - b).cwiseAbs().sum();
}

CostFunction shift_cost(const CostFunction& c, const VectorXd& phi) {
  MatrixXd v = c.values();
  for (int x = 0; x < c.base_size(); ++x) v.row(x).array() -= phi(x);
  return c.with_values(std::move(v));
}

// One equilibrium solve (eigenpair -> normalization -> invariant measure)
// with persistent warm starts; the x-marginal comes out for free.
struct EquilibriumPipeline {
  std::optional<VectorXd> h;
  std::optional<VectorXd> rho;

  struct Out {
    NormalizedCost nc;
    ProbMeasure rho;
    MatrixXd plan;  // alpha(x) e^{cbar(x,j)} rho(j), renormalized
  };

  Out run(const CostFunction& c, const ProbMeasure& alpha,
          const ContractiveIFS& ifs, double tol) {
    Eigenpair eig = power_eigenpair(c, alpha, ifs, tol, 0, h);
    h = eig.h.values();
    NormalizedCost nc = normalize_with(c, alpha, ifs, eig);
    InvariantMeasure inv = invariant_measure(nc, alpha, ifs, tol, 0, rho);
    rho = inv.rho.weights();
    MatrixXd w(c.base_size(), c.fiber_size());
    for (int x = 0; x < c.base_size(); ++x) {
      w.row(x) = alpha.weight(x) *
                 (nc.cost().values().row(x).array().exp() *
                  inv.rho.weights().transpose().array()).matrix();
    }
    w /= w.sum();
    return Out{std::move(nc), std::move(inv.rho), std::move(w)};
  }
};

}  // namespace

// ---------------------------------------------------------------------------
// Cost4 / TransportPlan

Cost4::Cost4(int nx, int ny, int nz, int nw, VectorXd values)
    : nx_(nx), ny_(ny), nz_(nz), nw_(nw), v_(std::move(values)) {
  if (nx < 1 || ny < 1 || nz < 1 || nw < 1) {
    throw DimensionError("Cost4: all dimensions must be positive");
  }
  if (v_.size() != static_cast<long>(nx) * ny * nz * nw) {
    throw DimensionError("Cost4: value count does not match dimensions");
  }
  if (!v_.allFinite()) throw ValidationError("Cost4: entries must be finite");
}

Cost4 Cost4::zeros(int nx, int ny, int nz, int nw) {
  return Cost4(nx, ny, nz, nw,
               VectorXd::Zero(static_cast<long>(nx) * ny * nz * nw));
}

Cost4 Cost4::constant(int nx, int ny, int nz, int nw, double value) {
  return Cost4(nx, ny, nz, nw,
               VectorXd::Constant(static_cast<long>(nx) * ny * nz * nw, value));
}

Cost4 Cost4::separable(const CostFunction& b, const CostFunction& d) {
  Cost4 c = zeros(b.base_size(), d.base_size(), b.fiber_size(), d.fiber_size());
  for (int x = 0; x < c.nx_; ++x)
    for (int y = 0; y < c.ny_; ++y)
      for (int z = 0; z < c.nz_; ++z)
        for (int w = 0; w < c.nw_; ++w)
          c.at(x, y, z, w) = b(x, z) + d(y, w);
  return c;
}

Cost4 Cost4::shifted(const VectorXd& phi, const VectorXd& psi) const {
  if (phi.size() != nx_ || psi.size() != ny_) {
    throw DimensionError("Cost4::shifted: potential sizes mismatch");
  }
  Cost4 out = *this;
  for (int x = 0; x < nx_; ++x)
    for (int y = 0; y < ny_; ++y)
      for (int z = 0; z < nz_; ++z)
        for (int w = 0; w < nw_; ++w)
          out.at(x, y, z, w) -= phi(x) + psi(y);
  return out;
}

TransportPlan::TransportPlan(int nx, int ny, int nz, int nw, VectorXd weights)
    : nx_(nx), ny_(ny), nz_(nz), nw_(nw), w_(std::move(weights)) {
  if (w_.size() != static_cast<long>(nx) * ny * nz * nw) {
    throw DimensionError("TransportPlan: weight count does not match dimensions");
  }
  if (w_.minCoeff() < -1e-12) {
    throw ValidationError("TransportPlan: negative weight");
  }
  if (std::abs(w_.sum() - 1.0) > 1e-9) {
    throw ValidationError("TransportPlan: weights must sum to 1");
  }
}

VectorXd TransportPlan::x_marginal() const {
  VectorXd out = VectorXd::Zero(nx_);
  for (int x = 0; x < nx_; ++x)
    for (int y = 0; y < ny_; ++y)
      for (int z = 0; z < nz_; ++z)
        for (int w = 0; w < nw_; ++w) out(x) += at(x, y, z, w);
  return out;
}

VectorXd TransportPlan::y_marginal() const {
  VectorXd out = VectorXd::Zero(ny_);
  for (int x = 0; x < nx_; ++x)
    for (int y = 0; y < ny_; ++y)
      for (int z = 0; z < nz_; ++z)
        for (int w = 0; w < nw_; ++w) out(y) += at(x, y, z, w);
  return out;
}

MatrixXd TransportPlan::xz_marginal() const {
  MatrixXd out = MatrixXd::Zero(nx_, nz_);
  for (int x = 0; x < nx_; ++x)
    for (int y = 0; y < ny_; ++y)
      for (int z = 0; z < nz_; ++z)
        for (int w = 0; w < nw_; ++w) out(x, z) += at(x, y, z, w);
  return out;
}

MatrixXd TransportPlan::yw_marginal() const {
  MatrixXd out = MatrixXd::Zero(ny_, nw_);
  for (int x = 0; x < nx_; ++x)
    for (int y = 0; y < ny_; ++y)
      for (int z = 0; z < nz_; ++z)
        for (int w = 0; w < nw_; ++w) out(y, w) += at(x, y, z, w);
  return out;
}

MatrixXd TransportPlan::xy_marginal() const {
  MatrixXd out = MatrixXd::Zero(nx_, ny_);
  for (int x = 0; x < nx_; ++x)
    for (int y = 0; y < ny_; ++y)
      for (int z = 0; z < nz_; ++z)
        for (int w = 0; w < nw_; ++w) out(x, y) += at(x, y, z, w);
  return out;
}

double TransportPlan::integrate(const Cost4& c) const {
  if (c.nx() != nx_ || c.ny() != ny_ || c.nz() != nz_ || c.nw() != nw_) {
    throw DimensionError("TransportPlan::integrate: cost dimensions mismatch");
  }
  return w_.dot(c.values());
}

// ---------------------------------------------------------------------------
// product_plan

namespace {

// Mass split of the branch fixed point onto the fiber nodes.
std::vector<std::pair<int, double>> fixed_point_atoms(const ContractiveIFS& ifs,
                                                      int x) {
  if (!ifs.fiber().is_grid()) {
    return {{ifs.fixed_point_index(x), 1.0}};
  }
  const int n = ifs.fiber().size();
  const double p = std::clamp(ifs.fixed_point(x), 0.0, 1.0);
  const double t = p * (n - 1);
  const int lo = std::min(static_cast<int>(t), n - 2);
  const double w = t - lo;
  if (w == 0.0) return {{lo, 1.0}};
  return {{lo, 1.0 - w}, {lo + 1, w}};
}

}  // namespace

TransportPlan product_plan(const ProbMeasure& mu, const ProbMeasure& nu,
                           const ContractiveIFS& ifs_x,
                           const ContractiveIFS& ifs_y) {
  const int nx = ifs_x.base().size(), ny = ifs_y.base().size();
  const int nz = ifs_x.fiber().size(), nw = ifs_y.fiber().size();
  if (mu.size() != nx || nu.size() != ny) {
    throw DimensionError("product_plan: marginals do not match base spaces");
  }
  VectorXd w = VectorXd::Zero(static_cast<long>(nx) * ny * nz * nw);
  auto idx = [&](int x, int y, int z, int wi) {
    return ((static_cast<long>(x) * ny + y) * nz + z) * nw + wi;
  };
  for (int x = 0; x < nx; ++x) {
    const auto az = fixed_point_atoms(ifs_x, x);
    for (int y = 0; y < ny; ++y) {
      const auto aw = fixed_point_atoms(ifs_y, y);
      for (const auto& [zi, zm] : az) {
        for (const auto& [wi, wm] : aw) {
          w(idx(x, y, zi, wi)) += mu.weight(x) * nu.weight(y) * zm * wm;
        }
      }
    }
  }
  TransportPlan plan(nx, ny, nz, nw, std::move(w));
  plan.marginal_residual_mu = tv_distance(plan.x_marginal(), mu.weights());
  plan.marginal_residual_nu = tv_distance(plan.y_marginal(), nu.weights());
  plan.holonomy_residual_x = holonomy_residual_of(plan.xz_marginal(), ifs_x, 10);
  plan.holonomy_residual_y = holonomy_residual_of(plan.yw_marginal(), ifs_y, 10);
  return plan;
}

// ---------------------------------------------------------------------------
// single_marginal_dual

SingleMarginalResult single_marginal_dual(const CostFunction& c,
                                          const ProbMeasure& mu,
                                          const ProbMeasure& alpha,
                                          const ContractiveIFS& ifs,
                                          const DescentOptions& opt) {
  if (mu.size() != ifs.base().size()) {
    throw DimensionError("single_marginal_dual: mu does not match base space");
  }
  alpha.require_full_support("single_marginal_dual");

  const int nx = ifs.base().size();
  VectorXd phi = VectorXd::Zero(nx);
  EquilibriumPipeline pipe;

  double tv = 1.0;
  int used = 0;
  std::optional<EquilibriumPipeline::Out> cur;
  for (int it = 1; it <= opt.max_iter; ++it) {
    used = it;
    cur = pipe.run(shift_cost(c, phi), alpha, ifs, opt.solver_tol);
    const VectorXd xmarg = cur->plan.rowwise().sum();
    tv = tv_distance(xmarg, mu.weights());
    if (tv < opt.tol) break;
    const double eta = opt.step0 / std::sqrt(static_cast<double>(it));
    phi -= eta * (mu.weights() - xmarg);
  }
  if (tv >= opt.tol && opt.throw_on_stall) {
    throw ConvergenceError("single_marginal_dual: marginal match stalled", tv,
                           used);
  }

  // Constrained form: P(c - phi - t) = P(c - phi) - t picks t exactly.
  const double log_lambda = cur->nc.log_lambda();
  VectorXd phi_hat = phi.array() + log_lambda;

  HolonomicPlan plan = holonomic_plan(cur->nc, alpha, cur->rho, ifs);
  const double H = -plan.integrate(cur->nc.cost().values());
  const double primal = plan.integrate(c.values()) + H;
  const double objective = mu.weights().dot(phi_hat);

  // Honest residual: one extra solve at the shifted potential.
  Eigenpair verify = power_eigenpair(shift_cost(c, phi_hat), alpha, ifs,
                                     opt.solver_tol, 0, cur->nc.eigenpair().h.values());

  SingleMarginalResult out{
      .potentials = DualPotentials{.phi = std::move(phi_hat),
                                   .psi = std::nullopt,
                                   .objective = objective,
                                   .pressure_residual = std::abs(verify.log_lambda)},
      .plan = std::move(plan),
      .marginal_tv = tv,
      .primal_value = primal,
      .gap = objective - primal,
      .iterations = used,
  };
  return out;
}

// ---------------------------------------------------------------------------
// marginal_pressure

namespace {

// Exact reduction when one pair of spaces degenerates to points: plans on
// X x {y0} x Z x {w0} are holonomic plans on X x Z and the second entropy
// vanishes, so P^m is the plain pressure of the X x Z restriction.
MarginalPressureResult marginal_pressure_degenerate_y(
    const Cost4& c, const ProbMeasure& alpha, const ProbMeasure& beta,
    const ContractiveIFS& ifs_x, const ContractiveIFS& ifs_y, double tol) {
  const int nx = c.nx(), nz = c.nz();
  MatrixXd cxz(nx, nz);
  for (int x = 0; x < nx; ++x)
    for (int z = 0; z < nz; ++z) cxz(x, z) = c.at(x, 0, z, 0);
  CostFunction cf(nx, ifs_x.fiber(), cxz);

  EquilibriumPipeline pipe;
  auto out = pipe.run(cf, alpha, ifs_x, tol);
  const double P = out.nc.log_lambda();

  CostFunction b = cf.with_values((cxz.array() - P).matrix());
  CostFunction d(c.ny(), ifs_y.fiber(), MatrixXd::Zero(c.ny(), c.nw()));

  const double Hb = -(out.plan.array() * out.nc.cost().values().array()).sum();
  double lower = Hb;
  for (int x = 0; x < nx; ++x)
    for (int z = 0; z < nz; ++z) lower += out.plan(x, z) * cxz(x, z);

  const double res_b = std::abs(power_eigenpair(b, alpha, ifs_x, tol).log_lambda);

  MarginalPressureResult res{
      .value = P,
      .certificate = SeparableBound{.b = b,
                                    .d = d,
                                    .lambda = P,
                                    .max_violation = 0.0,
                                    .pressure_residual_b = res_b,
                                    .pressure_residual_d = 0.0},
      .lower_bound = lower,
      .gap = P - lower,
      .iterations = 1,
      .plan_b = out.plan,
      .plan_d = MatrixXd::Constant(c.ny(), c.nw(), 1.0),
      .raw_b = b.values(),
      .raw_d = d.values(),
  };
  (void)beta;
  return res;
}

Cost4 transpose_cost(const Cost4& c) {
  Cost4 t = Cost4::zeros(c.ny(), c.nx(), c.nw(), c.nz());
  for (int x = 0; x < c.nx(); ++x)
    for (int y = 0; y < c.ny(); ++y)
      for (int z = 0; z < c.nz(); ++z)
        for (int w = 0; w < c.nw(); ++w) t.at(y, x, w, z) = c.at(x, y, z, w);
  return t;
}

MarginalPressureResult swap_sides(MarginalPressureResult r) {
  std::swap(r.certificate.b, r.certificate.d);
  std::swap(r.certificate.pressure_residual_b, r.certificate.pressure_residual_d);
  std::swap(r.plan_b, r.plan_d);
  std::swap(r.raw_b, r.raw_d);
  return r;
}

}  // namespace

MarginalPressureResult marginal_pressure(const Cost4& c,
                                         const ProbMeasure& alpha,
                                         const ProbMeasure& beta,
                                         const ContractiveIFS& ifs_x,
                                         const ContractiveIFS& ifs_y,
                                         const MarginalPressureOptions& opt) {
  if (c.nx() != ifs_x.base().size() || c.nz() != ifs_x.fiber().size() ||
      c.ny() != ifs_y.base().size() || c.nw() != ifs_y.fiber().size()) {
    throw DimensionError("marginal_pressure: cost does not match the two IFS");
  }
  if (c.ny() == 1 && c.nw() == 1) {
    return marginal_pressure_degenerate_y(c, alpha, beta, ifs_x, ifs_y,
                                          opt.solver_tol);
  }
  if (c.nx() == 1 && c.nz() == 1) {
    return swap_sides(marginal_pressure_degenerate_y(
        transpose_cost(c), beta, alpha, ifs_y, ifs_x, opt.solver_tol));
  }

  const int nx = c.nx(), ny = c.ny(), nz = c.nz(), nw = c.nw();

  // Exact block minimization: for fixed d the best b is the partial max of
  // c - d (pressure is monotone in the cost), and symmetrically; each sweep
  // can only lower the objective. Sweeps land exactly on separable optima
  // and pin drifting iterates back to the canonical c-transform pair.
  auto sweep = [&](MatrixXd& bb, MatrixXd& dd) {
    for (int x = 0; x < nx; ++x)
      for (int z = 0; z < nz; ++z) {
        double m = -std::numeric_limits<double>::infinity();
        for (int y = 0; y < ny; ++y)
          for (int w = 0; w < nw; ++w)
            m = std::max(m, c.at(x, y, z, w) - dd(y, w));
        bb(x, z) = m;
      }
    bb.array() -= power_eigenpair(CostFunction(nx, ifs_x.fiber(), bb), alpha,
                                  ifs_x, opt.solver_tol).log_lambda;
    for (int y = 0; y < ny; ++y)
      for (int w = 0; w < nw; ++w) {
        double m = -std::numeric_limits<double>::infinity();
        for (int x = 0; x < nx; ++x)
          for (int z = 0; z < nz; ++z)
            m = std::max(m, c.at(x, y, z, w) - bb(x, z));
        dd(y, w) = m;
      }
    dd.array() -= power_eigenpair(CostFunction(ny, ifs_y.fiber(), dd), beta,
                                  ifs_y, opt.solver_tol).log_lambda;
  };

  MatrixXd b, d;
  if (opt.init_b && opt.init_d) {
    b = *opt.init_b;
    d = *opt.init_d;
    if (b.rows() != nx || b.cols() != nz || d.rows() != ny || d.cols() != nw) {
      throw DimensionError("marginal_pressure: warm-start shapes mismatch");
    }
  } else {
    b = MatrixXd::Zero(nx, nz);
    d = MatrixXd::Zero(ny, nw);
    for (int s = 0; s < 3; ++s) sweep(b, d);
  }

  struct Snapshot {
    double lambda_hat = std::numeric_limits<double>::infinity();
    MatrixXd b, d, plan_b, plan_d;
    double Pb = 0.0, Pd = 0.0, Hb = 0.0, Hd = 0.0;
  };
  EquilibriumPipeline pipe_b, pipe_d;
  Snapshot best;
  VectorXd m(c.size());

  // Evaluates the current pair, updating the incumbent; returns the softmax
  // marginals so the caller can take a subgradient step. `slack` loosens the
  // adoption test so a canonicalized pair can displace a tied incumbent.
  auto evaluate = [&](const MatrixXd& bb, const MatrixXd& dd,
                      MatrixXd* plan_bb, MatrixXd* plan_dd, double slack) {
    auto ob = pipe_b.run(CostFunction(nx, ifs_x.fiber(), bb), alpha, ifs_x,
                         opt.solver_tol);
    auto od = pipe_d.run(CostFunction(ny, ifs_y.fiber(), dd), beta, ifs_y,
                         opt.solver_tol);
    for (int x = 0; x < nx; ++x)
      for (int y = 0; y < ny; ++y)
        for (int z = 0; z < nz; ++z)
          for (int w = 0; w < nw; ++w)
            m(c.index(x, y, z, w)) = c.at(x, y, z, w) - bb(x, z) - dd(y, w);
    const double M = m.maxCoeff();
    const double lambda_hat = M + ob.nc.log_lambda() + od.nc.log_lambda();
    if (lambda_hat < best.lambda_hat + slack) {
      best = Snapshot{lambda_hat, bb, dd, ob.plan, od.plan,
                      ob.nc.log_lambda(), od.nc.log_lambda(),
                      -(ob.plan.array() * ob.nc.cost().values().array()).sum(),
                      -(od.plan.array() * od.nc.cost().values().array()).sum()};
    }
    if (plan_bb) *plan_bb = ob.plan;
    if (plan_dd) *plan_dd = od.plan;
    return M;
  };

  const double range = std::max(1e-12, c.max() - c.min());
  double temp = opt.init_temp.value_or(std::max(1e-14, opt.temp_factor * range));
  int total = 0;
  MatrixXd plan_b_now, plan_d_now;
  for (int r = 0; r < opt.restarts; ++r, temp *= 0.5) {
    for (int i = 0; i < opt.iters_per_restart; ++i) {
      ++total;
      const double M = evaluate(b, d, &plan_b_now, &plan_d_now, 0.0);

      VectorXd soft = ((m.array() - M) / temp).exp();
      soft /= soft.sum();
      MatrixXd sig_xz = MatrixXd::Zero(nx, nz), sig_yw = MatrixXd::Zero(ny, nw);
      for (int x = 0; x < nx; ++x)
        for (int y = 0; y < ny; ++y)
          for (int z = 0; z < nz; ++z)
            for (int w = 0; w < nw; ++w) {
              const double s = soft(c.index(x, y, z, w));
              sig_xz(x, z) += s;
              sig_yw(y, w) += s;
            }

      const double eta = opt.step0 / std::sqrt(static_cast<double>(total));
      b -= eta * (plan_b_now - sig_xz);
      d -= eta * (plan_d_now - sig_yw);
    }
  }

  // Canonicalize the incumbent: extra sweeps never raise the objective, and
  // they resolve argmax ties so the reported equilibrium marginals are the
  // canonical ones rather than a drifted face point.
  {
    MatrixXd bc = best.b, dc = best.d;
    sweep(bc, dc);
    sweep(bc, dc);
    evaluate(bc, dc, nullptr, nullptr, 1e-9);
    total += 2;
  }

  // Certificate: shift the best iterates to zero pressure; the bound
  // c - best <= b' + d' then holds with equality at the arg max.
  CostFunction bp(nx, ifs_x.fiber(), (best.b.array() - best.Pb).matrix());
  CostFunction dp(ny, ifs_y.fiber(), (best.d.array() - best.Pd).matrix());
  double viol = -std::numeric_limits<double>::infinity();
  for (int x = 0; x < nx; ++x)
    for (int y = 0; y < ny; ++y)
      for (int z = 0; z < nz; ++z)
        for (int w = 0; w < nw; ++w)
          viol = std::max(viol, c.at(x, y, z, w) - best.lambda_hat -
                                    bp(x, z) - dp(y, w));

  const double res_b =
      std::abs(power_eigenpair(bp, alpha, ifs_x, opt.solver_tol).log_lambda);
  const double res_d =
      std::abs(power_eigenpair(dp, beta, ifs_y, opt.solver_tol).log_lambda);

  // Feasible primal witness: product of the two equilibria.
  double cross = 0.0;
  for (int x = 0; x < nx; ++x)
    for (int y = 0; y < ny; ++y)
      for (int z = 0; z < nz; ++z)
        for (int w = 0; w < nw; ++w)
          cross += best.plan_b(x, z) * best.plan_d(y, w) * c.at(x, y, z, w);
  const double lower = cross + best.Hb + best.Hd;

  return MarginalPressureResult{
      .value = best.lambda_hat,
      .certificate = SeparableBound{.b = std::move(bp),
                                    .d = std::move(dp),
                                    .lambda = best.lambda_hat,
                                    .max_violation = viol,
                                    .pressure_residual_b = res_b,
                                    .pressure_residual_d = res_d},
      .lower_bound = lower,
      .gap = best.lambda_hat - lower,
      .iterations = total,
      .plan_b = std::move(best.plan_b),
      .plan_d = std::move(best.plan_d),
      .raw_b = std::move(best.b),
      .raw_d = std::move(best.d),
  };
}

// ---------------------------------------------------------------------------
// two_marginal_dual

TwoMarginalResult two_marginal_dual(const Cost4& c, const ProbMeasure& mu,
                                    const ProbMeasure& nu,
                                    const ProbMeasure& alpha,
                                    const ProbMeasure& beta,
                                    const ContractiveIFS& ifs_x,
                                    const ContractiveIFS& ifs_y,
                                    const TwoMarginalOptions& opt) {
  if (mu.size() != c.nx() || nu.size() != c.ny()) {
    throw DimensionError("two_marginal_dual: marginals do not match cost");
  }
  VectorXd phi = VectorXd::Zero(c.nx());
  VectorXd psi = VectorXd::Zero(c.ny());

  MarginalPressureOptions warm = opt.inner;
  std::optional<MarginalPressureResult> mp;
  double tvx = 1.0, tvy = 1.0;
  int used = 0;

  // Track the best iterate; the descent direction stays useful only while
  // the inner solves resolve the marginals, so stop on a long plateau.
  double best_tv = std::numeric_limits<double>::infinity();
  VectorXd best_phi = phi, best_psi = psi;
  int since_improvement = 0;

  for (int it = 1; it <= opt.max_iter; ++it) {
    used = it;
    mp = marginal_pressure(c.shifted(phi, psi), alpha, beta, ifs_x, ifs_y, warm);
    // After the first solve, reuse the separable pair and cool less.
    warm.init_b = mp->raw_b;
    warm.init_d = mp->raw_d;
    warm.restarts = std::max(2, opt.inner.restarts / 4);
    warm.iters_per_restart = std::max(40, opt.inner.iters_per_restart / 4);

    const VectorXd xmarg = mp->plan_b.rowwise().sum();
    const VectorXd ymarg = mp->plan_d.rowwise().sum();
    tvx = tv_distance(xmarg, mu.weights());
    tvy = tv_distance(ymarg, nu.weights());
    if (std::max(tvx, tvy) < best_tv) {
      best_tv = std::max(tvx, tvy);
      best_phi = phi;
      best_psi = psi;
      since_improvement = 0;
    } else if (++since_improvement > 150) {
      break;  // inner resolution exhausted
    }
    if (std::max(tvx, tvy) < opt.tol) break;
    if (std::max(tvx, tvy) < 1e-2) {
      // Near the optimum the Gibbs response is well conditioned in log
      // coordinates; matching log-marginals is a diagonally preconditioned
      // step that closes the quadratic tail much faster than eta/sqrt(k).
      // Damped and clipped so inner noise cannot fling the iterate.
      auto damped = [](double ratio) {
        return std::clamp(0.7 * std::log(ratio), -0.3, 0.3);
      };
      for (int x = 0; x < phi.size(); ++x) {
        phi(x) -= damped(std::max(mu.weight(x), 1e-300) /
                         std::max(xmarg(x), 1e-300));
      }
      for (int y = 0; y < psi.size(); ++y) {
        psi(y) -= damped(std::max(nu.weight(y), 1e-300) /
                         std::max(ymarg(y), 1e-300));
      }
    } else {
      const double eta = opt.step0 / std::sqrt(static_cast<double>(it));
      phi -= eta * (mu.weights() - xmarg);
      psi -= eta * (nu.weights() - ymarg);
    }
  }
  if (best_tv >= opt.tol && opt.throw_on_stall) {
    throw ConvergenceError("two_marginal_dual: marginal match stalled", best_tv,
                           used);
  }
  phi = best_phi;
  psi = best_psi;

  // Full-accuracy inner solves at the returned potentials: the objective is
  // first-order flat in (phi, psi), so its error is dominated by the P^m
  // estimate. Every solve yields a valid upper bound, so an ensemble's
  // minimum is the tightest certified value.
  {
    const Cost4 shifted = c.shifted(phi, psi);
    MarginalPressureOptions f1 = opt.inner;
    f1.init_b = mp->raw_b;
    f1.init_d = mp->raw_d;
    f1.restarts = opt.inner.restarts + 2;
    MarginalPressureOptions f2 = opt.inner;
    f2.restarts = opt.inner.restarts + 4;
    MarginalPressureOptions f3 = opt.inner;
    f3.restarts = opt.inner.restarts + 6;
    f3.iters_per_restart = 2 * opt.inner.iters_per_restart;
    mp = marginal_pressure(shifted, alpha, beta, ifs_x, ifs_y, f1);
    for (const auto& fo : {f2, f3}) {
      auto trial = marginal_pressure(shifted, alpha, beta, ifs_x, ifs_y, fo);
      if (trial.value < mp->value) mp = std::move(trial);
    }
    const VectorXd xmarg = mp->plan_b.rowwise().sum();
    const VectorXd ymarg = mp->plan_d.rowwise().sum();
    tvx = tv_distance(xmarg, mu.weights());
    tvy = tv_distance(ymarg, nu.weights());
  }

  // Shift psi by the final inner value so P^m(c - phi - psi_hat) = 0.
  VectorXd psi_hat = psi.array() + mp->value;
  const double objective = mu.weights().dot(phi) + nu.weights().dot(psi_hat);

  // Witness: product of the two inner equilibria.
  const int nx = c.nx(), ny = c.ny(), nz = c.nz(), nw = c.nw();
  VectorXd wts(static_cast<long>(nx) * ny * nz * nw);
  for (int x = 0; x < nx; ++x)
    for (int y = 0; y < ny; ++y)
      for (int z = 0; z < nz; ++z)
        for (int w = 0; w < nw; ++w)
          wts(c.index(x, y, z, w)) = mp->plan_b(x, z) * mp->plan_d(y, w);
  wts /= wts.sum();
  TransportPlan witness(nx, ny, nz, nw, std::move(wts));
  witness.marginal_residual_mu = tvx;
  witness.marginal_residual_nu = tvy;
  witness.holonomy_residual_x = holonomy_residual_of(mp->plan_b, ifs_x, 10);
  witness.holonomy_residual_y = holonomy_residual_of(mp->plan_d, ifs_y, 10);

  // Entropies of the witness factors, from their normalized generating costs.
  EquilibriumPipeline pb, pd;
  auto ob = pb.run(CostFunction(nx, ifs_x.fiber(), mp->raw_b), alpha, ifs_x,
                   opt.inner.solver_tol);
  auto od = pd.run(CostFunction(ny, ifs_y.fiber(), mp->raw_d), beta, ifs_y,
                   opt.inner.solver_tol);
  const double H_alpha = -(ob.plan.array() * ob.nc.cost().values().array()).sum();
  const double H_beta = -(od.plan.array() * od.nc.cost().values().array()).sum();

  const double primal = witness.integrate(c) + H_alpha + H_beta;

  // Residual of the constrained form at the shifted potentials.
  MarginalPressureOptions verify = warm;
  verify.init_b = mp->raw_b;
  verify.init_d = mp->raw_d;
  auto check = marginal_pressure(c.shifted(phi, psi_hat), alpha, beta, ifs_x,
                                 ifs_y, verify);

  return TwoMarginalResult{
      .potentials = DualPotentials{.phi = std::move(phi),
                                   .psi = std::move(psi_hat),
                                   .objective = objective,
                                   .pressure_residual = std::abs(check.value)},
      .witness = std::move(witness),
      .primal_value = primal,
      .gap = objective - primal,
      .marginal_tv_mu = tvx,
      .marginal_tv_nu = tvy,
      .iterations = used,
  };
}

// ---------------------------------------------------------------------------
// kantorovich_solve

KantorovichResult kantorovich_solve(const MatrixXd& c, const ProbMeasure& mu,
                                    const ProbMeasure& nu) {
  const int n = static_cast<int>(c.rows());
  const int m = static_cast<int>(c.cols());
  if (mu.size() != n || nu.size() != m) {
    throw DimensionError("kantorovich_solve: marginal sizes do not match cost");
  }
  if (std::abs(mu.weights().sum() - nu.weights().sum()) > 1e-9) {
    throw InfeasibleMarginalsError("kantorovich_solve: marginal masses differ");
  }

  const int rows = n + m - 1;  // last column constraint is redundant
  const int cols = n * m;
  MatrixXd A = MatrixXd::Zero(rows, cols);
  VectorXd bvec(rows), cvec(cols);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < m; ++j) {
      const int col = i * m + j;
      A(i, col) = 1.0;
      if (j + 1 < m) A(n + j, col) = 1.0;
      cvec(col) = c(i, j);
    }
  }
  for (int i = 0; i < n; ++i) bvec(i) = mu.weight(i);
  for (int j = 0; j + 1 < m; ++j) bvec(n + j) = nu.weight(j);

  // Northwest-corner start: n + m - 1 cells forming a spanning tree.
  std::vector<int> basis;
  {
    VectorXd a = mu.weights(), bb = nu.weights();
    int i = 0, j = 0;
    while (true) {
      basis.push_back(i * m + j);
      const double move = std::min(a(i), bb(j));
      a(i) -= move;
      bb(j) -= move;
      if (i == n - 1 && j == m - 1) break;
      if (i == n - 1) {
        ++j;
      } else if (j == m - 1) {
        ++i;
      } else if (a(i) <= bb(j)) {
        ++i;
      } else {
        ++j;
      }
    }
  }

  SimplexResult lp = simplex_maximize(A, bvec, cvec, std::move(basis));

  VectorXd phi(n), psi(m);
  for (int i = 0; i < n; ++i) phi(i) = lp.y(i);
  for (int j = 0; j + 1 < m; ++j) psi(j) = lp.y(n + j);
  psi(m - 1) = 0.0;

  TransportPlan plan(n, m, 1, 1, lp.x);
  plan.marginal_residual_mu = tv_distance(plan.x_marginal(), mu.weights());
  plan.marginal_residual_nu = tv_distance(plan.y_marginal(), nu.weights());

  double slack = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) slack = std::max(slack, c(i, j) - phi(i) - psi(j));

  return KantorovichResult{
      .plan = std::move(plan),
      .potentials = DualPotentials{.phi = std::move(phi),
                                   .psi = std::move(psi),
                                   .objective = 0.0,
                                   .pressure_residual = std::max(0.0, slack)},
      .value = lp.value,
      .pivots = lp.pivots,
  };
}

// ---------------------------------------------------------------------------
// coboundary_feasibility

CoboundaryCheck coboundary_feasibility(const Cost4& c, const VectorXd& phi,
                                       const VectorXd& psi,
                                       const CoboundaryPair& pair,
                                       const CostFunction& b,
                                       const CostFunction& d,
                                       const ContractiveIFS& ifs_x,
                                       const ContractiveIFS& ifs_y,
                                       double tol) {
  if (phi.size() != c.nx() || psi.size() != c.ny()) {
    throw DimensionError("coboundary_feasibility: potential sizes mismatch");
  }
  if (pair.g.size() != c.nz() || pair.f.size() != c.nw()) {
    throw DimensionError("coboundary_feasibility: coboundary sizes mismatch");
  }
  TransferOperator ox(ifs_x, ProbMeasure::uniform(c.nx()));
  TransferOperator oy(ifs_y, ProbMeasure::uniform(c.ny()));
  MatrixXd g_tau(c.nx(), c.nz()), f_tau(c.ny(), c.nw());
  for (int x = 0; x < c.nx(); ++x)
    g_tau.row(x) = ox.compose(x, pair.g.values()).transpose();
  for (int y = 0; y < c.ny(); ++y)
    f_tau.row(y) = oy.compose(y, pair.f.values()).transpose();

  double worst = -std::numeric_limits<double>::infinity();
  for (int x = 0; x < c.nx(); ++x)
    for (int y = 0; y < c.ny(); ++y)
      for (int z = 0; z < c.nz(); ++z)
        for (int w = 0; w < c.nw(); ++w) {
          const double lhs = c.at(x, y, z, w) - phi(x) - psi(y) +
                             g_tau(x, z) - pair.g.value(z) +
                             f_tau(y, w) - pair.f.value(w);
          worst = std::max(worst, lhs - b(x, z) - d(y, w));
        }
  return CoboundaryCheck{worst <= tol, worst};
}

// ---------------------------------------------------------------------------
// slackness_check

SlacknessReport slackness_check(const CostFunction& c, const VectorXd& phi,
                                const ProbMeasure& alpha,
                                const ContractiveIFS& ifs,
                                const std::optional<ProbMeasure>& mu,
                                double tol, double pressure_tol) {
  if (phi.size() != ifs.base().size()) {
    throw DimensionError("slackness_check: phi does not match base space");
  }
  EquilibriumPipeline pipe;
  auto out = pipe.run(shift_cost(c, phi), alpha, ifs, 1e-10);
  const double P = out.nc.log_lambda();
  if (std::abs(P) > pressure_tol) {
    throw PressureNonzeroError("slackness_check: P(c - phi) is not zero", P);
  }
  const VectorXd xmarg = out.plan.rowwise().sum();
  const VectorXd muv = mu ? mu->weights() : xmarg;

  const double H = -(out.plan.array() * out.nc.cost().values().array()).sum();
  double int_c = 0.0;
  for (int x = 0; x < c.base_size(); ++x)
    int_c += out.plan.row(x).dot(c.values().row(x));

  SlacknessReport rep;
  rep.pressure_residual = std::abs(P);
  rep.dual_value = muv.dot(phi);
  rep.primal_value = int_c + H;
  rep.gap = std::abs(rep.dual_value - rep.primal_value);
  rep.marginal_tv = tv_distance(muv, xmarg);
  rep.optimal = rep.gap <= tol;
  return rep;
}

}  // namespace holoform
