#include "holoform/transfer.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace holoform {

namespace {
constexpr double kGeomTol = 1e-12;
}

// ---------------------------------------------------------------------------
// TransferOperator

TransferOperator::TransferOperator(const ContractiveIFS& ifs,
                                   const ProbMeasure& alpha)
    : alpha_(alpha.weights()) {
  alpha.require_full_support("TransferOperator");
  if (alpha.size() != ifs.base().size()) {
    throw DimensionError("TransferOperator: alpha does not match base space");
  }
  const FiberSpace& fiber = ifs.fiber();
  const int nx = ifs.base().size();
  const int nz = fiber.size();
  lo_.resize(nx, nz);
  wt_.resize(nx, nz);
  if (fiber.is_grid()) {
    for (int x = 0; x < nx; ++x) {
      for (int j = 0; j < nz; ++j) {
        double p = ifs.apply(x, fiber.node(j));
        if (p < -kGeomTol || p > 1.0 + kGeomTol) {
          throw MapRangeError("TransferOperator: branch image outside [0,1]");
        }
        p = std::clamp(p, 0.0, 1.0);
        const double t = p * (nz - 1);
        const int lo = std::min(static_cast<int>(t), nz - 2);
        lo_(x, j) = lo;
        wt_(x, j) = t - lo;
      }
    }
  } else {
    for (int x = 0; x < nx; ++x) {
      for (int j = 0; j < nz; ++j) {
        lo_(x, j) = ifs.apply_index(x, j);
        wt_(x, j) = 0.0;
      }
    }
  }
}

MatrixXd TransferOperator::weights(const MatrixXd& cost_values) const {
  if (cost_values.rows() != base_size() || cost_values.cols() != fiber_size()) {
    throw DimensionError("TransferOperator::weights: cost shape mismatch");
  }
  MatrixXd E = cost_values.array().exp().matrix();
  for (int x = 0; x < base_size(); ++x) E.row(x) *= alpha_(x);
  return E;
}

VectorXd TransferOperator::compose(int x, const VectorXd& psi) const {
  const int nz = fiber_size();
  VectorXd out(nz);
  for (int j = 0; j < nz; ++j) {
    const int lo = lo_(x, j);
    const double w = wt_(x, j);
    out(j) = (w == 0.0) ? psi(lo) : (1.0 - w) * psi(lo) + w * psi(lo + 1);
  }
  return out;
}

VectorXd TransferOperator::apply(const MatrixXd& E, const VectorXd& psi) const {
  if (psi.size() != fiber_size()) {
    throw DimensionError("TransferOperator::apply: psi size mismatch");
  }
  VectorXd out = VectorXd::Zero(fiber_size());
  for (int x = 0; x < base_size(); ++x) {
    for (int j = 0; j < fiber_size(); ++j) {
      const int lo = lo_(x, j);
      const double w = wt_(x, j);
      const double v = (w == 0.0) ? psi(lo) : (1.0 - w) * psi(lo) + w * psi(lo + 1);
      out(j) += E(x, j) * v;
    }
  }
  return out;
}

VectorXd TransferOperator::apply_hat(const MatrixXd& E, const MatrixXd& g) const {
  if (g.rows() != base_size() || g.cols() != fiber_size()) {
    throw DimensionError("TransferOperator::apply_hat: g shape mismatch");
  }
  return (E.array() * g.array()).colwise().sum().matrix().transpose();
}

VectorXd TransferOperator::apply_adjoint(const MatrixXd& E,
                                         const VectorXd& rho) const {
  if (rho.size() != fiber_size()) {
    throw DimensionError("TransferOperator::apply_adjoint: rho size mismatch");
  }
  VectorXd out = VectorXd::Zero(fiber_size());
  for (int x = 0; x < base_size(); ++x) {
    for (int j = 0; j < fiber_size(); ++j) {
      const double mass = E(x, j) * rho(j);
      if (mass == 0.0) continue;
      const int lo = lo_(x, j);
      const double w = wt_(x, j);
      out(lo) += (1.0 - w) * mass;
      if (w != 0.0) out(lo + 1) += w * mass;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// apply_transfer / apply_hat

int default_max_iter(double tol, double gamma) {
  const double steps = std::log(tol) / std::log(gamma);
  return 10 * static_cast<int>(std::ceil(std::max(1.0, steps)));
}

namespace {

void check_cost_shape(const CostFunction& c, const ProbMeasure& alpha,
                      const ContractiveIFS& ifs, const std::string& who) {
  if (c.base_size() != ifs.base().size() ||
      c.fiber_size() != ifs.fiber().size()) {
    throw DimensionError(who + ": cost shape does not match the IFS");
  }
  if (alpha.size() != ifs.base().size()) {
    throw DimensionError(who + ": alpha does not match base space");
  }
}

// Discrete Lipschitz constant of e^{c(x,.)}, uniform over x.
double exp_cost_lip(const CostFunction& c) {
  double lip = 0.0;
  const FiberSpace& fiber = c.fiber();
  for (int x = 0; x < c.base_size(); ++x) {
    VectorXd row = c.values().row(x).array().exp().matrix().transpose();
    lip = std::max(lip, measured_lip(fiber, row));
  }
  return lip;
}

}  // namespace

GridFunction apply_transfer(const CostFunction& c, const ProbMeasure& alpha,
                            const GridFunction& psi, const ContractiveIFS& ifs) {
  check_cost_shape(c, alpha, ifs, "apply_transfer");
  if (psi.size() != ifs.fiber().size()) {
    throw DimensionError("apply_transfer: psi does not match fiber");
  }
  TransferOperator op(ifs, alpha);
  const MatrixXd E = op.weights(c.values());
  VectorXd out = op.apply(E, psi.values());
  // Lipschitz propagation: lip(L psi) <= lip(e^c) sup|psi| + gamma M lip(psi)
  // with M = sup L_c 1; exact for normalized costs where M = 1.
  const double M = op.apply(E, VectorXd::Ones(psi.size())).maxCoeff();
  const double bound = exp_cost_lip(c) * psi.values().cwiseAbs().maxCoeff() +
                       ifs.gamma() * M * psi.lip();
  return GridFunction(ifs.fiber(), std::move(out), bound);
}

GridFunction apply_hat(const CostFunction& c, const ProbMeasure& alpha,
                       const CostFunction& g, const ContractiveIFS& ifs) {
  check_cost_shape(c, alpha, ifs, "apply_hat");
  if (g.base_size() != c.base_size() || g.fiber_size() != c.fiber_size()) {
    throw DimensionError("apply_hat: g shape does not match cost");
  }
  TransferOperator op(ifs, alpha);
  return GridFunction(ifs.fiber(), op.apply_hat(op.weights(c.values()), g.values()));
}

// ---------------------------------------------------------------------------
// power_eigenpair

Eigenpair power_eigenpair(const CostFunction& c, const ProbMeasure& alpha,
                          const ContractiveIFS& ifs, double tol, int max_iter,
                          const std::optional<VectorXd>& initial) {
  check_cost_shape(c, alpha, ifs, "power_eigenpair");
  if (max_iter <= 0) max_iter = default_max_iter(tol, ifs.gamma());
  TransferOperator op(ifs, alpha);

  // Shift so the weights cannot overflow; eigenfunctions are unchanged and
  // log lambda picks the shift back up.
  const double shift = c.values().maxCoeff();
  const MatrixXd E = op.weights((c.values().array() - shift).matrix());

  const int n = ifs.fiber().size();
  VectorXd psi = VectorXd::Ones(n);
  if (initial) {
    if (initial->size() != n || initial->minCoeff() <= 0.0) {
      throw ValidationError("power_eigenpair: initial guess must be strictly positive");
    }
    psi = *initial / initial->maxCoeff();
  }

  double lambda = 0.0, res = 0.0;
  for (int it = 1; it <= max_iter; ++it) {
    VectorXd next = op.apply(E, psi);
    lambda = next.maxCoeff();
    if (!(lambda > 0.0) || !next.allFinite()) {
      throw ConvergenceError("power_eigenpair: iteration left the positive cone",
                             std::numeric_limits<double>::quiet_NaN(), it);
    }
    res = (next - lambda * psi).cwiseAbs().maxCoeff();
    if (res < tol * std::max(1.0, lambda)) {
      Eigenpair eig{.lambda = 0.0,
                    .log_lambda = std::log(lambda) + shift,
                    .h = GridFunction(ifs.fiber(), psi),
                    .residual = res,
                    .iterations = it};
      eig.lambda = std::exp(eig.log_lambda);
      if (eig.h.min() <= 0.0) {
        throw ConvergenceError("power_eigenpair: eigenfunction not strictly positive",
                               res, it);
      }
      return eig;
    }
    psi = next / lambda;
  }
  throw ConvergenceError("power_eigenpair: no convergence", res, max_iter);
}

// ---------------------------------------------------------------------------
// Bousch discounted scheme

GridFunction bousch_fixpoint(const CostFunction& c, const ProbMeasure& alpha,
                             const ContractiveIFS& ifs, double s, double tol) {
  check_cost_shape(c, alpha, ifs, "bousch_fixpoint");
  if (!(s > 0.0 && s < 1.0)) {
    throw ValidationError("bousch_fixpoint: discount s must lie in (0,1)");
  }
  TransferOperator op(ifs, alpha);
  const int n = ifs.fiber().size();
  const int nx = ifs.base().size();
  VectorXd u = VectorXd::Zero(n);
  MatrixXd expo(nx, n);

  // |u_m - u_s| <= s/(1-s) |u_m - u_{m-1}|, so this threshold certifies a
  // sup-norm error below tol.
  const double stop = tol * (1.0 - s) / s;
  const double scale = std::max(1.0, c.values().cwiseAbs().maxCoeff());
  const long cap = 200 +
      static_cast<long>(std::ceil(std::log(std::max(1e-300, stop / (4.0 * scale))) /
                                  std::log(s)));

  for (long it = 0; it < cap; ++it) {
    for (int x = 0; x < nx; ++x) {
      expo.row(x) = (c.values().row(x).transpose() + s * op.compose(x, u)).transpose();
    }
    VectorXd next(n);
    for (int j = 0; j < n; ++j) {
      double m = expo.col(j).maxCoeff();
      double acc = 0.0;
      for (int x = 0; x < nx; ++x) {
        acc += alpha.weight(x) * std::exp(expo(x, j) - m);
      }
      next(j) = m + std::log(acc);
    }
    const double delta = (next - u).cwiseAbs().maxCoeff();
    u = next;
    if (delta <= stop) break;
  }
  return GridFunction(ifs.fiber(), u);
}

namespace {

// Polynomial extrapolation to h = 0 through the points (h_i, k_i).
double neville_at_zero(const std::vector<double>& h, std::vector<double> k) {
  const size_t n = h.size();
  for (size_t level = 1; level < n; ++level) {
    for (size_t i = 0; i + level < n; ++i) {
      k[i] = k[i + 1] + h[i + level] * (k[i] - k[i + 1]) / (h[i + level] - h[i]);
    }
  }
  return k[0];
}

}  // namespace

BouschSweep bousch_sweep(const CostFunction& c, const ProbMeasure& alpha,
                         const ContractiveIFS& ifs,
                         const std::vector<double>& s_values, double tol) {
  if (s_values.empty()) throw ValidationError("bousch_sweep: empty s grid");
  BouschSweep sweep;
  std::vector<double> hs, ks;
  for (double s : s_values) {
    GridFunction u = bousch_fixpoint(c, alpha, ifs, s, tol);
    BouschSweepPoint p;
    p.s = s;
    p.value = (1.0 - s) * u.max();
    p.lip = u.lip();
    sweep.points.push_back(p);
    hs.push_back(1.0 - s);
    ks.push_back(p.value);
  }
  sweep.extrapolated = neville_at_zero(hs, ks);
  return sweep;
}

// ---------------------------------------------------------------------------
// Normalization

NormalizedCost::NormalizedCost(CostFunction cbar, CostFunction original,
                               Eigenpair eigenpair,
                               double normalization_residual)
    : cbar_(std::move(cbar)),
      original_(std::move(original)),
      eig_(std::move(eigenpair)),
      norm_residual_(normalization_residual) {}

NormalizedCost normalize_with(const CostFunction& c, const ProbMeasure& alpha,
                              const ContractiveIFS& ifs, const Eigenpair& eig) {
  check_cost_shape(c, alpha, ifs, "normalize_cost");
  TransferOperator op(ifs, alpha);
  const int nx = ifs.base().size();
  const int nz = ifs.fiber().size();
  const VectorXd log_h = eig.h.values().array().log().matrix();
  MatrixXd cbar(nx, nz);
  for (int x = 0; x < nx; ++x) {
    // log of the interpolated h, evaluated at the branch images; this keeps
    // L_cbar 1 = 1 exact up to the eigen residual.
    const VectorXd h_tau = op.compose(x, eig.h.values());
    cbar.row(x) = c.values().row(x) +
                  (h_tau.array().log().matrix() - log_h).transpose() -
                  VectorXd::Constant(nz, eig.log_lambda).transpose();
  }
  CostFunction cbar_fn = c.with_values(std::move(cbar));
  const VectorXd check =
      op.apply(op.weights(cbar_fn.values()), VectorXd::Ones(nz));
  const double resid = (check - VectorXd::Ones(nz)).cwiseAbs().maxCoeff();
  if (resid > 1e-6) {
    throw ConvergenceError("normalize_cost: normalization residual too large",
                           resid, eig.iterations);
  }
  return NormalizedCost(std::move(cbar_fn), c, eig, resid);
}

NormalizedCost normalize_cost(const CostFunction& c, const ProbMeasure& alpha,
                              const ContractiveIFS& ifs, double tol,
                              int max_iter) {
  return normalize_with(c, alpha, ifs,
                        power_eigenpair(c, alpha, ifs, tol, max_iter));
}

// ---------------------------------------------------------------------------
// Invariant measure

InvariantMeasure invariant_measure(const NormalizedCost& cbar,
                                   const ProbMeasure& alpha,
                                   const ContractiveIFS& ifs, double tol,
                                   int max_iter,
                                   const std::optional<VectorXd>& initial) {
  check_cost_shape(cbar.cost(), alpha, ifs, "invariant_measure");
  if (max_iter <= 0) max_iter = default_max_iter(tol, ifs.gamma());
  TransferOperator op(ifs, alpha);
  const MatrixXd E = op.weights(cbar.cost().values());
  const int n = ifs.fiber().size();

  VectorXd rho = initial ? *initial : VectorXd::Constant(n, 1.0 / n);
  if (rho.size() != n || rho.minCoeff() < 0.0) {
    throw ValidationError("invariant_measure: invalid initial measure");
  }
  rho /= rho.sum();

  double tv = 0.0;
  int used = max_iter;
  bool converged = false;
  for (int it = 1; it <= max_iter; ++it) {
    VectorXd next = op.apply_adjoint(E, rho);
    next /= next.sum();  // kill the O(residual) mass drift per step
    tv = 0.5 * (next - rho).cwiseAbs().sum();
    rho = next;
    if (tv < tol) {
      used = it;
      converged = true;
      break;
    }
  }
  if (!converged) {
    throw ConvergenceError("invariant_measure: no total-variation convergence",
                           tv, max_iter);
  }

  InvariantMeasure out{ProbMeasure::normalized(rho), tv, used, 0.0, 0.0};

  // Proposition-style diagnostic: iterate L^n u for a Lipschitz u until the
  // values flatten; the limit constant must match <rho, u>.
  VectorXd u(n);
  if (ifs.fiber().is_grid()) {
    u = ifs.fiber().nodes();
  } else {
    u.setZero();
    u(0) = 1.0;
  }
  const double target = out.rho.weights().dot(u);
  const int flat_steps = default_max_iter(tol, ifs.gamma()) / 5;
  for (int it = 0; it < flat_steps; ++it) u = op.apply(E, u);
  out.flatness_gap = u.maxCoeff() - u.minCoeff();
  out.flatness_error = std::abs(0.5 * (u.maxCoeff() + u.minCoeff()) - target);
  return out;
}

// ---------------------------------------------------------------------------
// Test basis and holonomic plans

std::vector<GridFunction> fiber_test_basis(const FiberSpace& fiber, int count) {
  if (count < 1) throw ValidationError("fiber_test_basis: count >= 1 required");
  std::vector<GridFunction> basis;
  if (fiber.is_grid()) {
    const int n = fiber.size();
    for (int k = 1; k <= count; ++k) {
      VectorXd v(n);
      for (int j = 0; j < n; ++j) {
        v(j) = std::cos(k * std::acos(std::clamp(2.0 * fiber.node(j) - 1.0, -1.0, 1.0)));
      }
      basis.emplace_back(fiber, std::move(v));
    }
  } else {
    const int m = std::min(count, fiber.size());
    for (int i = 0; i < m; ++i) {
      VectorXd v = VectorXd::Zero(fiber.size());
      v(i) = 1.0;
      basis.emplace_back(fiber, std::move(v));
    }
  }
  return basis;
}

double holonomy_residual_of(const MatrixXd& plan_weights,
                            const ContractiveIFS& ifs, int test_functions) {
  if (plan_weights.rows() != ifs.base().size() ||
      plan_weights.cols() != ifs.fiber().size()) {
    throw DimensionError("holonomy_residual_of: plan shape mismatch");
  }
  TransferOperator op(ifs, ProbMeasure::uniform(ifs.base().size()));
  const VectorXd zmarg = plan_weights.colwise().sum().transpose();
  double worst = 0.0;
  for (const GridFunction& g : fiber_test_basis(ifs.fiber(), test_functions)) {
    double composed = 0.0;
    for (int x = 0; x < ifs.base().size(); ++x) {
      composed += plan_weights.row(x).dot(op.compose(x, g.values()));
    }
    worst = std::max(worst, std::abs(composed - zmarg.dot(g.values())));
  }
  return worst;
}

HolonomicPlan::HolonomicPlan(MatrixXd weights, ContractiveIFS ifs,
                             std::optional<NormalizedCost> generator,
                             int test_functions)
    : w_(std::move(weights)), ifs_(std::move(ifs)),
      generator_(std::move(generator)) {
  if (w_.rows() != ifs_.base().size() || w_.cols() != ifs_.fiber().size()) {
    throw DimensionError("HolonomicPlan: weight shape mismatch");
  }
  if (w_.minCoeff() < -kGeomTol) {
    throw ValidationError("HolonomicPlan: negative weight");
  }
  if (std::abs(w_.sum() - 1.0) > 1e-12) {
    throw ValidationError("HolonomicPlan: weights must sum to 1 within 1e-12");
  }
  holonomy_residual_ = holonomy_residual_of(w_, ifs_, test_functions);
}

double HolonomicPlan::integrate(const MatrixXd& f_values) const {
  if (f_values.rows() != w_.rows() || f_values.cols() != w_.cols()) {
    throw DimensionError("HolonomicPlan::integrate: shape mismatch");
  }
  return (w_.array() * f_values.array()).sum();
}

double HolonomicPlan::integrate_fiber(const GridFunction& g) const {
  return z_marginal().dot(g.values());
}

double HolonomicPlan::integrate_composed(const GridFunction& g) const {
  TransferOperator op(ifs_, ProbMeasure::uniform(ifs_.base().size()));
  double acc = 0.0;
  for (int x = 0; x < ifs_.base().size(); ++x) {
    acc += w_.row(x).dot(op.compose(x, g.values()));
  }
  return acc;
}

HolonomicPlan holonomic_plan(const NormalizedCost& cbar,
                             const ProbMeasure& alpha, const ProbMeasure& rho,
                             const ContractiveIFS& ifs, double tol,
                             int test_functions) {
  check_cost_shape(cbar.cost(), alpha, ifs, "holonomic_plan");
  if (rho.size() != ifs.fiber().size()) {
    throw DimensionError("holonomic_plan: rho does not match fiber");
  }
  const int nx = ifs.base().size();
  MatrixXd w(nx, ifs.fiber().size());
  for (int x = 0; x < nx; ++x) {
    w.row(x) = alpha.weight(x) *
               (cbar.cost().values().row(x).array().exp() *
                rho.weights().transpose().array()).matrix();
  }
  w /= w.sum();  // total is 1 up to the normalization residual
  HolonomicPlan plan(std::move(w), ifs, cbar, test_functions);
  if (plan.holonomy_residual() > tol) {
    throw HolonomyError("holonomic_plan: holonomy residual above tolerance",
                        plan.holonomy_residual());
  }
  return plan;
}

// ---------------------------------------------------------------------------
// Attractor cover

bool AttractorCover::covers(double z, double pad) const {
  for (const Interval& iv : intervals) {
    if (z >= iv.lo - pad && z <= iv.hi + pad) return true;
  }
  return false;
}

bool AttractorCover::covers_index(int j) const {
  return std::binary_search(points.begin(), points.end(), j);
}

double AttractorCover::total_length() const {
  double s = 0.0;
  for (const Interval& iv : intervals) s += iv.length();
  return s;
}

AttractorCover attractor_cover(const ContractiveIFS& ifs, int depth) {
  if (depth < 0) throw ValidationError("attractor_cover: depth >= 0 required");
  AttractorCover cover;
  cover.depth = depth;
  if (ifs.fiber().is_grid()) {
    std::vector<Interval> cur{{0.0, 1.0}};
    for (int d = 0; d < depth; ++d) {
      std::vector<Interval> next;
      next.reserve(cur.size() * ifs.base().size());
      for (int x = 0; x < ifs.base().size(); ++x) {
        for (const Interval& iv : cur) {
          double a = ifs.apply(x, iv.lo), b = ifs.apply(x, iv.hi);
          if (a > b) std::swap(a, b);
          next.push_back({a, b});
        }
      }
      std::sort(next.begin(), next.end(),
                [](const Interval& p, const Interval& q) { return p.lo < q.lo; });
      std::vector<Interval> merged;
      for (const Interval& iv : next) {
        if (!merged.empty() && iv.lo <= merged.back().hi + kGeomTol) {
          merged.back().hi = std::max(merged.back().hi, iv.hi);
        } else {
          merged.push_back(iv);
        }
      }
      cur = std::move(merged);
    }
    cover.intervals = std::move(cur);
  } else {
    std::vector<int> cur(ifs.fiber().size());
    for (int j = 0; j < ifs.fiber().size(); ++j) cur[j] = j;
    for (int d = 0; d < depth; ++d) {
      std::vector<int> next;
      for (int x = 0; x < ifs.base().size(); ++x) {
        for (int j : cur) next.push_back(ifs.apply_index(x, j));
      }
      std::sort(next.begin(), next.end());
      next.erase(std::unique(next.begin(), next.end()), next.end());
      cur = std::move(next);
    }
    cover.points = std::move(cur);
  }
  return cover;
}

double measure_outside(const ProbMeasure& rho, const AttractorCover& cover,
                       const FiberSpace& fiber, double pad) {
  if (rho.size() != fiber.size()) {
    throw DimensionError("measure_outside: measure does not match fiber");
  }
  double outside = 0.0;
  if (fiber.is_grid()) {
    for (int j = 0; j < fiber.size(); ++j) {
      if (!cover.covers(fiber.node(j), pad)) outside += rho.weight(j);
    }
  } else {
    for (int j = 0; j < fiber.size(); ++j) {
      if (!cover.covers_index(j)) outside += rho.weight(j);
    }
  }
  return outside;
}

}  // namespace holoform
