#include "holoform/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace holoform::oracles {

OracleResult singleton_pressure(const VectorXd& c, const ProbMeasure& alpha) {
  if (c.size() != alpha.size()) {
    throw DimensionError("singleton_pressure: cost and measure sizes differ");
  }
  const double cmax = c.maxCoeff();
  double s = 0.0;
  for (Eigen::Index i = 0; i < c.size(); ++i) {
    s += std::exp(c(i) - cmax) * alpha.weight(i);
  }
  return {cmax + std::log(s), "direct log-sum-exp", static_cast<double>(c.size())};
}

OracleResult kl_divergence(const ProbMeasure& q, const ProbMeasure& p) {
  if (q.size() != p.size()) {
    throw DimensionError("kl_divergence: measure sizes differ");
  }
  double kl = 0.0;
  for (int i = 0; i < q.size(); ++i) {
    const double qi = q.weight(i);
    if (qi == 0.0) continue;  // 0 log 0 = 0
    if (p.weight(i) == 0.0) {
      throw SupportError("kl_divergence: q charges a point outside supp(p)");
    }
    kl += qi * std::log(qi / p.weight(i));
  }
  return {kl, "direct sum", static_cast<double>(q.size())};
}

ChaosGameEstimate chaos_game_measure(const CostFunction& cbar,
                                     const ProbMeasure& alpha,
                                     const ContractiveIFS& ifs, long samples,
                                     long burn_in, std::uint64_t seed) {
  const FiberSpace& fiber = ifs.fiber();
  if (!fiber.is_grid()) {
    throw DomainError("chaos_game_measure: grid fibers only");
  }
  if (cbar.base_size() != ifs.base().size() ||
      cbar.fiber_size() != fiber.size() || alpha.size() != ifs.base().size()) {
    throw DimensionError("chaos_game_measure: shape mismatch");
  }
  if (samples < 1) throw ValidationError("chaos_game_measure: samples >= 1");
  alpha.require_full_support("chaos_game_measure");

  const int nx = ifs.base().size();
  std::vector<GridFunction> rows;
  rows.reserve(nx);
  for (int x = 0; x < nx; ++x) {
    rows.emplace_back(fiber, cbar.values().row(x).transpose());
  }

  Rng rng(seed);
  double z = 0.5;
  std::vector<double> p(nx);
  auto step = [&]() {
    double total = 0.0;
    for (int x = 0; x < nx; ++x) {
      p[x] = alpha.weight(x) * std::exp(rows[x](z));
      total += p[x];
    }
    // total = (L 1)(z) = 1 up to the normalization residual
    double u = rng.uniform() * total;
    int pick = nx - 1;
    for (int x = 0; x < nx; ++x) {
      u -= p[x];
      if (u <= 0.0) {
        pick = x;
        break;
      }
    }
    z = ifs.apply(pick, z);
  };

  for (long t = 0; t < burn_in; ++t) step();

  // Batch means to account for trajectory autocorrelation.
  const long nbatch = std::max(2L, static_cast<long>(std::sqrt(static_cast<double>(samples))));
  const long batch_len = samples / nbatch;
  const long used = nbatch * batch_len;
  std::vector<double> b1(nbatch, 0.0), b2(nbatch, 0.0);
  for (long b = 0; b < nbatch; ++b) {
    for (long t = 0; t < batch_len; ++t) {
      step();
      b1[b] += z;
      b2[b] += z * z;
    }
    b1[b] /= batch_len;
    b2[b] /= batch_len;
  }

  ChaosGameEstimate est;
  est.samples = used;
  est.burn_in = burn_in;
  est.m1 = std::accumulate(b1.begin(), b1.end(), 0.0) / nbatch;
  est.m2 = std::accumulate(b2.begin(), b2.end(), 0.0) / nbatch;
  double v1 = 0.0, v2 = 0.0;
  for (long b = 0; b < nbatch; ++b) {
    v1 += (b1[b] - est.m1) * (b1[b] - est.m1);
    v2 += (b2[b] - est.m2) * (b2[b] - est.m2);
  }
  est.se1 = std::sqrt(v1 / (nbatch - 1) / nbatch);
  est.se2 = std::sqrt(v2 / (nbatch - 1) / nbatch);
  return est;
}

namespace {

// Number of k-subsets, capped; returns false when it exceeds `cap`.
bool count_subsets_within(int n, int k, double cap) {
  double c = 1.0;
  for (int i = 0; i < k; ++i) {
    c *= static_cast<double>(n - i) / (i + 1);
    if (c > cap) return false;
  }
  return true;
}

}  // namespace

OracleResult transport_bruteforce(const MatrixXd& c, const ProbMeasure& mu,
                                  const ProbMeasure& nu) {
  const int n = static_cast<int>(c.rows());
  const int m = static_cast<int>(c.cols());
  if (mu.size() != n || nu.size() != m) {
    throw DimensionError("transport_bruteforce: marginal sizes do not match cost");
  }
  if (std::abs(mu.weights().sum() - nu.weights().sum()) > 1e-9) {
    throw InfeasibleMarginalsError("transport_bruteforce: marginal masses differ");
  }
  const int cells = n * m;
  const int k = n + m - 1;
  constexpr double kSubsetCap = 2.0e6;
  if (!count_subsets_within(cells, k, kSubsetCap)) {
    throw OracleScaleError("transport_bruteforce: instance too large to enumerate");
  }

  // Equality system with the redundant last column constraint dropped.
  const int rows = n + m - 1;
  VectorXd rhs(rows);
  for (int i = 0; i < n; ++i) rhs(i) = mu.weight(i);
  for (int j = 0; j + 1 < m; ++j) rhs(n + j) = nu.weight(j);

  auto column = [&](int cell, VectorXd& col) {
    col.setZero();
    const int i = cell / m, j = cell % m;
    col(i) = 1.0;
    if (j + 1 < m) col(n + j) = 1.0;
  };

  std::vector<int> pick(k);
  std::iota(pick.begin(), pick.end(), 0);
  double best = -std::numeric_limits<double>::infinity();
  double work = 0.0;

  MatrixXd B(rows, k);
  VectorXd col(rows);
  while (true) {
    for (int t = 0; t < k; ++t) {
      column(pick[t], col);
      B.col(t) = col;
    }
    work += 1.0;
    Eigen::FullPivLU<MatrixXd> lu(B);
    if (lu.rank() == k) {
      VectorXd x = lu.solve(rhs);
      if ((B * x - rhs).lpNorm<Eigen::Infinity>() < 1e-9 &&
          x.minCoeff() > -1e-12) {
        double v = 0.0;
        for (int t = 0; t < k; ++t) {
          v += c(pick[t] / m, pick[t] % m) * std::max(x(t), 0.0);
        }
        best = std::max(best, v);
      }
    }
    // next k-combination of {0..cells-1}
    int t = k - 1;
    while (t >= 0 && pick[t] == cells - k + t) --t;
    if (t < 0) break;
    ++pick[t];
    for (int s = t + 1; s < k; ++s) pick[s] = pick[s - 1] + 1;
  }
  if (!std::isfinite(best)) {
    throw InfeasibleMarginalsError("transport_bruteforce: no feasible vertex found");
  }
  return {best, "basic-solution enumeration", work};
}

OracleResult fd_pressure_gradient(const PressureFn& pressure,
                                  const CostFunction& c, const CostFunction& g,
                                  double epsilon) {
  if (!(epsilon > 0.0)) {
    throw ValidationError("fd_pressure_gradient: epsilon must be positive");
  }
  if (c.values().rows() != g.values().rows() ||
      c.values().cols() != g.values().cols()) {
    throw DimensionError("fd_pressure_gradient: cost and direction shapes differ");
  }
  const double pp = pressure(c.with_values(c.values() + epsilon * g.values()));
  const double pm = pressure(c.with_values(c.values() - epsilon * g.values()));
  return {(pp - pm) / (2.0 * epsilon), "central difference", 2.0};
}

}  // namespace holoform::oracles
