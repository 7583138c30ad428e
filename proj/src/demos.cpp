#include "holoform/scenario.hpp"

// Built-in demo scenarios. Each runs end-to-end in seconds at default
// tolerances; `holoform demos show <name>` prints the JSON for editing.

namespace holoform::cli {

namespace {

const DemoEntry kDemos[] = {
    {"paper-ex-halfmap",
     "Singleton base, tau(z) = z/2, zero cost: lambda = 1, h = 1, rho = "
     "delta at the fixed point 0. Try: eigen, invariant-measure, pressure.",
     R"json({
  "name": "paper-ex-halfmap",
  "description": "Half map with zero cost on a 257-node grid",
  "spaces": {"X": {"discrete": 1}, "Z": {"grid": 257}},
  "ifs": {"x": {"affine": [{"a": 0.5, "b": 0.0}], "gamma": 0.5}},
  "measures": {"alpha": [1.0]},
  "cost": {"type": "zero"}
})json"},

    {"paper-ex-singleton-kl",
     "Two-point base over a one-point fiber with the log-ratio cost: "
     "entropy is minus the Kullback-Leibler divergence (-0.130812...). "
     "Try: entropy, pressure, oracle-kl.",
     R"json({
  "name": "paper-ex-singleton-kl",
  "description": "Singleton fiber, c(x) = log(q_x/p_x), q = (1/4, 3/4)",
  "spaces": {"X": {"discrete": 2},
             "Z": {"points": ["z0"], "metric": [[0.0]]}},
  "ifs": {"x": {"table": [[0], [0]], "gamma": 0.5}},
  "measures": {"alpha": [0.5, 0.5], "mu": [0.25, 0.75]},
  "cost": {"type": "log-ratio", "q": [0.25, 0.75]}
})json"},

    {"paper-ex-bernoulli-dual",
     "Doubling branches, zero cost, target marginal mu = (1/4, 3/4): the "
     "single-marginal dual objective is -KL(mu||alpha) = -0.130812. "
     "Try: dual-single.",
     R"json({
  "name": "paper-ex-bernoulli-dual",
  "description": "Single-marginal duality on the doubling system",
  "spaces": {"X": {"discrete": 2}, "Z": {"grid": 257}},
  "ifs": {"x": {"affine": [{"a": 0.5, "b": 0.0}, {"a": 0.5, "b": 0.5}],
                "gamma": 0.5}},
  "measures": {"alpha": [0.5, 0.5], "mu": [0.25, 0.75]},
  "cost": {"type": "zero"}
})json"},

    {"paper-ex-product-plan",
     "Two doubling systems; the product of fixed-point plans is the "
     "feasibility witness with all residuals at zero. "
     "Try: dual-product-plan.",
     R"json({
  "name": "paper-ex-product-plan",
  "description": "Product-plan feasibility witness on two doubling systems",
  "spaces": {"X": {"discrete": 2}, "Z": {"grid": 65},
             "Y": {"discrete": 2}, "W": {"grid": 65}},
  "ifs": {"x": {"affine": [{"a": 0.5, "b": 0.0}, {"a": 0.5, "b": 0.5}],
                "gamma": 0.5},
          "y": {"affine": [{"a": 0.5, "b": 0.0}, {"a": 0.5, "b": 0.5}],
                "gamma": 0.5}},
  "measures": {"alpha": [0.5, 0.5], "beta": [0.5, 0.5],
               "mu": [0.5, 0.5], "nu": [0.5, 0.5]},
  "cost4": {"type": "constant", "value": 0.0}
})json"},

    {"doubling-zero-cost",
     "Fair doubling branches with zero cost: P = 0, lambda = 1, rho is "
     "Lebesgue on the grid. Try: pressure, invariant-measure, "
     "oracle-chaos-game.",
     R"json({
  "name": "doubling-zero-cost",
  "description": "Doubling system, zero cost, 513-node grid",
  "spaces": {"X": {"discrete": 2}, "Z": {"grid": 513}},
  "ifs": {"x": {"affine": [{"a": 0.5, "b": 0.0}, {"a": 0.5, "b": 0.5}],
                "gamma": 0.5}},
  "measures": {"alpha": [0.5, 0.5]},
  "cost": {"type": "zero"}
})json"},

    {"cantor-support",
     "Middle-third branches: the invariant measure charges only the "
     "attractor cover. Try: invariant-measure (inspect attractor_cover).",
     R"json({
  "name": "cantor-support",
  "description": "Middle-third Cantor IFS, zero cost, depth-6 cover",
  "spaces": {"X": {"discrete": 2}, "Z": {"grid": 513}},
  "ifs": {"x": {"affine": [{"a": 0.3333333333333333, "b": 0.0},
                           {"a": 0.3333333333333333, "b": 0.6666666666666666}],
                "gamma": 0.3333333333333333}},
  "measures": {"alpha": [0.5, 0.5]},
  "cost": {"type": "zero"},
  "solver": {"depth": 6}
})json"},

    {"k2x2",
     "2x2 identity-cost transport with uniform marginals: optimal value 1 "
     "on the diagonal coupling. Try: dual-kantorovich, "
     "oracle-transport-bruteforce.",
     R"json({
  "name": "k2x2",
  "description": "Tiny exact transport instance",
  "measures": {"mu": [0.5, 0.5], "nu": [0.5, 0.5]},
  "cost_xy": {"values": [[1.0, 0.0], [0.0, 1.0]]}
})json"},

    {"word-separable",
     "Separable cost on two truncated-shift word fibers: the marginal "
     "pressure splits into the two factor pressures. "
     "Try: dual-marginal-pressure, dual-two-marginal.",
     R"json({
  "name": "word-separable",
  "description": "Separable marginal-pressure instance on word fibers",
  "spaces": {"X": {"discrete": 2},
             "Z": {"points": ["00", "01", "10", "11"],
                    "metric": [[0.0, 0.25, 0.5, 0.5],
                               [0.25, 0.0, 0.5, 0.5],
                               [0.5, 0.5, 0.0, 0.25],
                               [0.5, 0.5, 0.25, 0.0]]},
             "Y": {"discrete": 2},
             "W": {"points": ["00", "01", "10", "11"],
                    "metric": [[0.0, 0.25, 0.5, 0.5],
                               [0.25, 0.0, 0.5, 0.5],
                               [0.5, 0.5, 0.0, 0.25],
                               [0.5, 0.5, 0.25, 0.0]]}},
  "ifs": {"x": {"table": [[0, 0, 1, 1], [2, 2, 3, 3]], "gamma": 0.5},
          "y": {"table": [[0, 0, 1, 1], [2, 2, 3, 3]], "gamma": 0.5}},
  "measures": {"alpha": [0.5, 0.5], "beta": [0.5, 0.5],
               "mu": [0.35, 0.65], "nu": [0.55, 0.45]},
  "cost4": {"type": "separable",
            "b": {"type": "random", "seed": 11, "amplitude": 0.6},
            "d": {"type": "random", "seed": 12, "amplitude": 0.6}}
})json"},
};

}  // namespace

std::span<const DemoEntry> demo_catalog() { return kDemos; }

}  // namespace holoform::cli
