#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "fixtures.hpp"
#include "holoform/duality.hpp"
#include "holoform/oracles.hpp"

using namespace holoform;

namespace {

// Closed form for x-only costs: <mu, a> - KL(mu || alpha).
double bernoulli_objective(const VectorXd& a, const ProbMeasure& mu,
                           const ProbMeasure& alpha) {
  return mu.weights().dot(a) -
         oracles::kl_divergence(mu, alpha).value;
}

CostFunction xcost(const ContractiveIFS& ifs, const VectorXd& a) {
  MatrixXd v(ifs.base().size(), ifs.fiber().size());
  for (int x = 0; x < ifs.base().size(); ++x) v.row(x).setConstant(a(x));
  return CostFunction(ifs.base(), ifs.fiber(), v);
}

}  // namespace

TEST_CASE("product_plan") {
  SUBCASE("point marginals give a single atom at the fixed points") {
    auto ix = testing::halfmap(17);   // fixed point 0
    auto iy = testing::halfmap(17);
    auto plan = product_plan(ProbMeasure::delta(1, 0), ProbMeasure::delta(1, 0),
                             ix, iy);
    CHECK(plan.at(0, 0, 0, 0) == doctest::Approx(1.0));
    CHECK(plan.holonomy_residual_x < 1e-12);
    CHECK(plan.holonomy_residual_y < 1e-12);
  }
  SUBCASE("doubling x doubling: four atoms at {0,1}^2") {
    auto ix = testing::doubling(33);
    auto iy = testing::doubling(33);
    auto plan = product_plan(ProbMeasure::uniform(2), ProbMeasure::uniform(2),
                             ix, iy);
    CHECK(plan.at(0, 0, 0, 0) == doctest::Approx(0.25));
    CHECK(plan.at(0, 1, 0, 32) == doctest::Approx(0.25));
    CHECK(plan.at(1, 0, 32, 0) == doctest::Approx(0.25));
    CHECK(plan.at(1, 1, 32, 32) == doctest::Approx(0.25));
    CHECK(plan.marginal_residual_mu < 1e-12);
    CHECK(plan.marginal_residual_nu < 1e-12);
    CHECK(plan.holonomy_residual_x < 1e-12);
    CHECK(plan.holonomy_residual_y < 1e-12);
  }
  SUBCASE("word fibers use exact fixed-point indices") {
    auto ix = testing::word_shift(3);
    auto iy = testing::word_shift(2);
    VectorXd m(2);
    m << 0.3, 0.7;
    auto plan = product_plan(ProbMeasure(m), ProbMeasure::uniform(2), ix, iy);
    CHECK(plan.holonomy_residual_x < 1e-14);
    CHECK(plan.holonomy_residual_y < 1e-14);
    CHECK(plan.at(0, 0, 0, 0) == doctest::Approx(0.15));
    CHECK(plan.at(1, 1, 7, 3) == doctest::Approx(0.35));
  }
}

TEST_CASE("kantorovich_solve") {
  SUBCASE("point marginals") {
    MatrixXd c(1, 1);
    c << -2.5;
    auto res = kantorovich_solve(c, ProbMeasure::uniform(1), ProbMeasure::uniform(1));
    CHECK(res.value == doctest::Approx(-2.5));
  }
  SUBCASE("2x2 identity, diagonal coupling") {
    MatrixXd c = MatrixXd::Identity(2, 2);
    auto res = kantorovich_solve(c, ProbMeasure::uniform(2), ProbMeasure::uniform(2));
    CHECK(res.value == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(res.plan.at(0, 0, 0, 0) == doctest::Approx(0.5));
    CHECK(res.plan.at(1, 1, 0, 0) == doctest::Approx(0.5));
  }
  SUBCASE("random instances match the brute-force oracle") {
    Rng rng(13131);
    for (int trial = 0; trial < 10; ++trial) {
      const int n = 2 + rng.uniform_int(3), m = 2 + rng.uniform_int(3);
      MatrixXd c(n, m);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j) c(i, j) = rng.uniform(-1.0, 1.0);
      VectorXd mw(n), nw(m);
      for (int i = 0; i < n; ++i) mw(i) = 0.1 + rng.uniform();
      for (int j = 0; j < m; ++j) nw(j) = 0.1 + rng.uniform();
      auto mu = ProbMeasure::normalized(mw);
      auto nu = ProbMeasure::normalized(nw);
      auto res = kantorovich_solve(c, mu, nu);
      const double oracle = oracles::transport_bruteforce(c, mu, nu).value;
      CHECK(res.value == doctest::Approx(oracle).epsilon(1e-9));
      // primal-dual agreement and dual feasibility
      const double dual = mu.weights().dot(res.potentials.phi) +
                          nu.weights().dot(*res.potentials.psi);
      CHECK(dual == doctest::Approx(res.value).epsilon(1e-9));
      CHECK(res.potentials.pressure_residual < 1e-9);
      CHECK(res.plan.marginal_residual_mu < 1e-12);
      CHECK(res.plan.marginal_residual_nu < 1e-12);
    }
  }
}

TEST_CASE("single_marginal_dual") {
  SUBCASE("singleton X forces phi = P(c)") {
    auto ifs = testing::halfmap(65);
    auto c = random_lipschitz_cost(ifs.base(), ifs.fiber(), 21, 0.8);
    auto res = single_marginal_dual(c, ProbMeasure::uniform(1),
                                    ProbMeasure::uniform(1), ifs);
    auto rep = pressure(c, ProbMeasure::uniform(1), ifs);
    CHECK(res.potentials.phi(0) == doctest::Approx(rep.P).epsilon(1e-9));
    CHECK(res.potentials.objective == doctest::Approx(rep.P).epsilon(1e-9));
    CHECK(res.iterations == 1);
  }
  SUBCASE("Bernoulli closed form, the quarter/three-quarter case") {
    auto ifs = testing::doubling(257);
    auto alpha = ProbMeasure::uniform(2);
    VectorXd q(2);
    q << 0.25, 0.75;
    auto mu = ProbMeasure(q);
    auto res = single_marginal_dual(CostFunction::zero(ifs.base(), ifs.fiber()),
                                    mu, alpha, ifs);
    CHECK(res.potentials.objective ==
          doctest::Approx(-0.130812035941137).epsilon(1e-4));
    CHECK(res.marginal_tv < 1e-6);
    CHECK(std::abs(res.gap) < 1e-4);
    CHECK(res.potentials.pressure_residual < 1e-9);
  }
  SUBCASE("Bernoulli with cost a = (1, 0) and uniform mu") {
    auto ifs = testing::doubling(257);
    auto alpha = ProbMeasure::uniform(2);
    VectorXd a(2);
    a << 1.0, 0.0;
    auto res = single_marginal_dual(xcost(ifs, a), ProbMeasure::uniform(2),
                                    alpha, ifs);
    CHECK(res.potentials.objective == doctest::Approx(0.5).epsilon(1e-4));
  }
  SUBCASE("general Bernoulli instances against the closed form") {
    auto ifs = testing::doubling(129);
    Rng rng(31415);
    for (int trial = 0; trial < 4; ++trial) {
      VectorXd a(2), mw(2), aw(2);
      a << rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0);
      mw << 0.1 + rng.uniform(), 0.1 + rng.uniform();
      aw << 0.1 + rng.uniform(), 0.1 + rng.uniform();
      auto mu = ProbMeasure::normalized(mw);
      auto alpha = ProbMeasure::normalized(aw);
      auto res = single_marginal_dual(xcost(ifs, a), mu, alpha, ifs);
      CHECK(res.potentials.objective ==
            doctest::Approx(bernoulli_objective(a, mu, alpha)).epsilon(1e-4));
      CHECK(res.marginal_tv < 1e-6);
    }
  }
  SUBCASE("shift equivariance: objective(c + k) = objective(c) + k") {
    auto ifs = testing::doubling(129);
    auto alpha = ProbMeasure::uniform(2);
    VectorXd q(2);
    q << 0.35, 0.65;
    auto mu = ProbMeasure(q);
    auto c = random_lipschitz_cost(ifs.base(), ifs.fiber(), 62, 0.5);
    const double base =
        single_marginal_dual(c, mu, alpha, ifs).potentials.objective;
    auto ck = c.with_values((c.values().array() + 0.8).matrix());
    CHECK(single_marginal_dual(ck, mu, alpha, ifs).potentials.objective ==
          doctest::Approx(base + 0.8).epsilon(1e-6));
  }
  SUBCASE("weak duality against exactly feasible plans") {
    // Feasible plan with certified entropy: the equilibrium pi0 of a random
    // normalized cost; its own x-marginal defines the constraint, so pi0 is
    // exactly feasible and <mu, phi> >= int c dpi0 + H(pi0) must hold for
    // the solver's certificate phi.
    auto ifs = testing::doubling(129);
    auto alpha = ProbMeasure::uniform(2);
    auto c = random_lipschitz_cost(ifs.base(), ifs.fiber(), 17, 0.8);
    for (int k = 0; k < 3; ++k) {
      auto nc0 = normalize_cost(
          random_lipschitz_cost(ifs.base(), ifs.fiber(), 300 + k, 0.9), alpha, ifs);
      auto inv0 = invariant_measure(nc0, alpha, ifs);
      auto pi0 = holonomic_plan(nc0, alpha, inv0.rho, ifs);
      auto mu = ProbMeasure::normalized(pi0.x_marginal());
      DescentOptions tight;
      tight.tol = 1e-8;
      tight.max_iter = 20000;
      auto res = single_marginal_dual(c, mu, alpha, ifs, tight);
      const double primal0 =
          pi0.integrate(c.values()) - pi0.integrate(nc0.cost().values());
      CHECK(res.potentials.objective >= primal0 - 1e-6);
    }
  }
  SUBCASE("general z-dependent cost still matches mu") {
    auto ifs = testing::doubling(129);
    auto alpha = ProbMeasure::uniform(2);
    VectorXd q(2);
    q << 0.6, 0.4;
    auto c = random_lipschitz_cost(ifs.base(), ifs.fiber(), 2024, 1.0);
    auto res = single_marginal_dual(c, ProbMeasure(q), alpha, ifs);
    CHECK(res.marginal_tv < 1e-6);
    CHECK(std::abs(res.gap) < 1e-4);
    CHECK(res.potentials.pressure_residual < 1e-8);
  }
}

TEST_CASE("marginal_pressure") {
  auto ifs_x = testing::word_shift(3);
  auto ifs_y = testing::word_shift(2);
  auto alpha = ProbMeasure::uniform(2);
  auto beta = ProbMeasure::uniform(2);
  SUBCASE("constant cost") {
    auto c = Cost4::constant(2, 2, 8, 4, 0.9);
    auto res = marginal_pressure(c, alpha, beta, ifs_x, ifs_y);
    CHECK(std::abs(res.value - 0.9) < 1e-3);
    CHECK(res.certificate.max_violation < 1e-9);
    CHECK(res.certificate.pressure_residual_b < 1e-8);
    CHECK(res.certificate.pressure_residual_d < 1e-8);
  }
  SUBCASE("zero cost") {
    auto c = Cost4::zeros(2, 2, 8, 4);
    auto res = marginal_pressure(c, alpha, beta, ifs_x, ifs_y);
    CHECK(std::abs(res.value) < 1e-3);
  }
  SUBCASE("separable costs decouple") {
    Rng rng(515);
    for (int trial = 0; trial < 3; ++trial) {
      auto b0 = random_lipschitz_cost(ifs_x.base(), ifs_x.fiber(),
                                      100 + trial, 0.7);
      auto d0 = random_lipschitz_cost(ifs_y.base(), ifs_y.fiber(),
                                      200 + trial, 0.7);
      const double pb = pressure(b0, alpha, ifs_x).P;
      const double pd = pressure(d0, beta, ifs_y).P;
      auto res = marginal_pressure(Cost4::separable(b0, d0), alpha, beta,
                                   ifs_x, ifs_y);
      CHECK(std::abs(res.value - pb - pd) < 1e-3);
      CHECK(res.gap < 5e-3);
    }
  }
  SUBCASE("degenerate Y, W reduces to the plain pressure") {
    auto sy = testing::singleton_fiber(1);
    auto b0 = random_lipschitz_cost(ifs_x.base(), ifs_x.fiber(), 47, 0.8);
    Cost4 c = Cost4::separable(b0, CostFunction::zero(sy.base(), sy.fiber()));
    auto res = marginal_pressure(c, alpha, ProbMeasure::uniform(1), ifs_x, sy);
    CHECK(res.value == doctest::Approx(pressure(b0, alpha, ifs_x).P).epsilon(1e-10));
  }
}

TEST_CASE("two_marginal_dual") {
  SUBCASE("singleton Y and W reduce exactly to the single-marginal dual") {
    auto ifs_x = testing::doubling(129);
    auto sy = testing::singleton_fiber(1);
    auto alpha = ProbMeasure::uniform(2);
    VectorXd q(2);
    q << 0.25, 0.75;
    auto mu = ProbMeasure(q);
    auto c2 = CostFunction::zero(ifs_x.base(), ifs_x.fiber());
    Cost4 c = Cost4::separable(c2, CostFunction::zero(sy.base(), sy.fiber()));

    TwoMarginalOptions tight;  // the degenerate inner solve is exact
    tight.tol = 1e-6;
    tight.max_iter = 20000;
    auto two = two_marginal_dual(c, mu, ProbMeasure::uniform(1), alpha,
                                 ProbMeasure::uniform(1), ifs_x, sy, tight);
    auto one = single_marginal_dual(c2, mu, alpha, ifs_x);
    CHECK(two.potentials.objective ==
          doctest::Approx(one.potentials.objective).epsilon(1e-6));
  }
  SUBCASE("constant cost at matching marginals gives objective k") {
    auto ifs_x = testing::word_shift(2);
    auto ifs_y = testing::word_shift(2);
    auto res = two_marginal_dual(Cost4::constant(2, 2, 4, 4, 1.3),
                                 ProbMeasure::uniform(2), ProbMeasure::uniform(2),
                                 ProbMeasure::uniform(2), ProbMeasure::uniform(2),
                                 ifs_x, ifs_y);
    CHECK(std::abs(res.potentials.objective - 1.3) < 2e-3);
  }
  SUBCASE("constant cost pays both relative-entropy penalties") {
    // sup over the constrained plans of k + H_alpha + H_beta is
    // k - KL(mu||alpha) - KL(nu||beta): the mu-weighted branch plan is the
    // entropy maximizer on each side.
    auto ifs_x = testing::word_shift(2);
    auto ifs_y = testing::word_shift(2);
    VectorXd mw(2), nw(2);
    mw << 0.3, 0.7;
    nw << 0.6, 0.4;
    auto mu = ProbMeasure(mw), nu = ProbMeasure(nw);
    auto alpha = ProbMeasure::uniform(2), beta = ProbMeasure::uniform(2);
    auto res = two_marginal_dual(Cost4::constant(2, 2, 4, 4, 1.3), mu, nu,
                                 alpha, beta, ifs_x, ifs_y);
    const double expect = 1.3 - oracles::kl_divergence(mu, alpha).value -
                          oracles::kl_divergence(nu, beta).value;
    CHECK(std::abs(res.potentials.objective - expect) < 2e-3);
  }
  SUBCASE("separable costs split into two single-marginal objectives") {
    auto ifs_x = testing::word_shift(2);
    auto ifs_y = testing::word_shift(2);
    auto alpha = ProbMeasure::uniform(2), beta = ProbMeasure::uniform(2);
    VectorXd mw(2), nw(2);
    mw << 0.35, 0.65;
    nw << 0.55, 0.45;
    auto mu = ProbMeasure(mw), nu = ProbMeasure(nw);
    auto b0 = random_lipschitz_cost(ifs_x.base(), ifs_x.fiber(), 71, 0.6);
    auto d0 = random_lipschitz_cost(ifs_y.base(), ifs_y.fiber(), 72, 0.6);
    auto res = two_marginal_dual(Cost4::separable(b0, d0), mu, nu, alpha, beta,
                                 ifs_x, ifs_y);
    const double expect =
        single_marginal_dual(b0, mu, alpha, ifs_x).potentials.objective +
        single_marginal_dual(d0, nu, beta, ifs_y).potentials.objective;
    CHECK(std::abs(res.potentials.objective - expect) < 1e-3);
  }
  SUBCASE("zero temperature: matches Kantorovich after adding the KL terms") {
    auto sx = testing::singleton_fiber(3);
    auto sy = testing::singleton_fiber(3);
    auto alpha = ProbMeasure::uniform(3), beta = ProbMeasure::uniform(3);
    Rng rng(888);
    for (int trial = 0; trial < 2; ++trial) {
      MatrixXd cm(3, 3);
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) cm(i, j) = rng.uniform(-1.0, 1.0);
      VectorXd mw(3), nw(3);
      for (int i = 0; i < 3; ++i) mw(i) = 0.15 + rng.uniform();
      for (int j = 0; j < 3; ++j) nw(j) = 0.15 + rng.uniform();
      auto mu = ProbMeasure::normalized(mw), nu = ProbMeasure::normalized(nw);

      VectorXd flat(9);
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) flat(i * 3 + j) = cm(i, j);
      Cost4 c(3, 3, 1, 1, flat);
      auto res = two_marginal_dual(c, mu, nu, alpha, beta, sx, sy);
      const double kant = kantorovich_solve(cm, mu, nu).value;
      const double entropic_offset =
          oracles::kl_divergence(mu, alpha).value +
          oracles::kl_divergence(nu, beta).value;
      CHECK(std::abs(res.potentials.objective + entropic_offset - kant) < 1e-4);
    }
  }
}

TEST_CASE("coboundary_feasibility") {
  auto ifs_x = testing::doubling(17);
  auto ifs_y = testing::halfmap(9);
  auto zeroes_z = GridFunction::constant(ifs_x.fiber(), 0.0);
  auto zeroes_w = GridFunction::constant(ifs_y.fiber(), 0.0);
  CoboundaryPair none{zeroes_z, zeroes_w};
  auto b0 = CostFunction::zero(ifs_x.base(), ifs_x.fiber());
  auto d0 = CostFunction::zero(ifs_y.base(), ifs_y.fiber());

  SUBCASE("nonpositive cost with zero witnesses is feasible") {
    auto c = Cost4::constant(2, 1, 17, 9, -0.25);
    auto chk = coboundary_feasibility(c, VectorXd::Zero(2), VectorXd::Zero(1),
                                      none, b0, d0, ifs_x, ifs_y);
    CHECK(chk.feasible);
    CHECK(chk.max_violation == doctest::Approx(-0.25));
  }
  SUBCASE("unit cost violates by one") {
    auto c = Cost4::constant(2, 1, 17, 9, 1.0);
    auto chk = coboundary_feasibility(c, VectorXd::Zero(2), VectorXd::Zero(1),
                                      none, b0, d0, ifs_x, ifs_y);
    CHECK_FALSE(chk.feasible);
    CHECK(chk.max_violation == doctest::Approx(1.0));
  }
  SUBCASE("marginal-pressure certificates replay feasibly") {
    auto wx = testing::word_shift(2);
    auto wy = testing::word_shift(2);
    auto alpha = ProbMeasure::uniform(2), beta = ProbMeasure::uniform(2);
    auto b0r = random_lipschitz_cost(wx.base(), wx.fiber(), 4, 0.5);
    auto d0r = random_lipschitz_cost(wy.base(), wy.fiber(), 5, 0.5);
    auto c = Cost4::separable(b0r, d0r);
    auto res = marginal_pressure(c, alpha, beta, wx, wy);
    // lambda-shifted separable bound: c - lambda <= b + d pointwise
    Cost4 shifted = c;
    VectorXd lam = VectorXd::Constant(2, res.value);
    shifted = c.shifted(lam, VectorXd::Zero(2));
    CoboundaryPair trivial{GridFunction::constant(wx.fiber(), 0.0),
                           GridFunction::constant(wy.fiber(), 0.0)};
    auto chk = coboundary_feasibility(shifted, VectorXd::Zero(2),
                                      VectorXd::Zero(2), trivial,
                                      res.certificate.b, res.certificate.d,
                                      wx, wy, 1e-8);
    CHECK(chk.feasible);
  }
}

TEST_CASE("slackness_check") {
  SUBCASE("singleton X with phi = P(c)") {
    auto ifs = testing::halfmap(33);
    auto c = random_lipschitz_cost(ifs.base(), ifs.fiber(), 3, 0.7);
    const double P = pressure(c, ProbMeasure::uniform(1), ifs).P;
    auto rep = slackness_check(c, VectorXd::Constant(1, P),
                               ProbMeasure::uniform(1), ifs, std::nullopt);
    CHECK(rep.optimal);
    CHECK(rep.gap < 1e-9);
  }
  SUBCASE("solver certificates pass; perturbed ones fail") {
    auto ifs = testing::doubling(129);
    auto alpha = ProbMeasure::uniform(2);
    VectorXd q(2);
    q << 0.3, 0.7;
    auto mu = ProbMeasure(q);
    auto c = random_lipschitz_cost(ifs.base(), ifs.fiber(), 15, 0.8);
    auto res = single_marginal_dual(c, mu, alpha, ifs);

    auto good = slackness_check(c, res.potentials.phi, alpha, ifs, mu, 1e-5);
    CHECK(good.optimal);

    // Perturb one coordinate, re-shift to zero pressure, check against the
    // *original* mu: the identity must now fail.
    VectorXd bad_phi = res.potentials.phi;
    bad_phi(0) += 0.1;
    auto eig = power_eigenpair(
        CostFunction(ifs.base(), ifs.fiber(),
                     [&] {
                       MatrixXd v = c.values();
                       for (int x = 0; x < 2; ++x) v.row(x).array() -= bad_phi(x);
                       return v;
                     }()),
        alpha, ifs);
    bad_phi.array() += eig.log_lambda;
    auto badrep = slackness_check(c, bad_phi, alpha, ifs, mu, 1e-5);
    CHECK_FALSE(badrep.optimal);
    CHECK(badrep.gap > 1e-3);
  }
  SUBCASE("nonzero pressure is rejected") {
    auto ifs = testing::doubling(65);
    auto c = CostFunction::constant(ifs.base(), ifs.fiber(), 1.0);
    CHECK_THROWS_AS(slackness_check(c, VectorXd::Zero(2),
                                    ProbMeasure::uniform(2), ifs, std::nullopt),
                    PressureNonzeroError);
  }
}
