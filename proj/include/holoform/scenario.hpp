#pragma once

#include <nlohmann/json.hpp>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "holoform/duality.hpp"
#include "holoform/oracles.hpp"

// Scenario-driven front end: everything the CLI can run is also callable
// in-process through this header, which keeps the command surface testable.

namespace holoform::cli {

using json = nlohmann::json;

struct SolverSettings {
  double tol = 1e-10;
  int max_iter = 0;  // 0: derive from tol and gamma
  std::uint64_t seed = 1234;
  int candidates = 64;        // entropy_variational pool
  long samples = 100000;      // chaos game
  long burn_in = 1000;
  int depth = 6;              // attractor cover
  int test_functions = 10;
  double fd_epsilon = 1e-4;
  std::vector<double> s_values{0.9, 0.99, 0.999};
  DescentOptions descent;
  TwoMarginalOptions two_marginal;
  int contraction_samples = 1000;
};

struct Scenario {
  std::string name;
  std::string description;
  std::optional<ContractiveIFS> ifs_x;
  std::optional<ContractiveIFS> ifs_y;
  std::optional<ProbMeasure> alpha, beta, mu, nu;
  std::optional<CostFunction> cost;    // on X x Z
  std::optional<CostFunction> cost_d;  // on Y x W (separable second factor)
  std::optional<Cost4> cost4;
  std::optional<MatrixXd> cost_xy;     // zero-temperature transport cost
  SolverSettings solver;
  json raw;
};

// Thrown with every validation failure collected, one per line.
class ScenarioError : public ValidationError {
 public:
  ScenarioError(const std::string& what, std::vector<std::string> failures)
      : ValidationError(what), failures(std::move(failures)) {}
  std::vector<std::string> failures;
};

Scenario parse_scenario(const json& doc);

// Accepts a filesystem path or "demo:<name>".
Scenario load_scenario(const std::string& path_or_demo);

struct RunResult {
  std::string command;
  std::string scenario_hash;  // FNV-1a of the scenario document
  double wall_ms = 0.0;
  std::vector<std::string> warnings;
  json payload;

  json to_json() const;
  // Flat dump of the payload's numeric arrays: field,index,value lines.
  std::string to_csv() const;
};

// Verbs: check | eigen | normalize | invariant-measure | pressure | entropy |
// dual-single | dual-two-marginal | dual-marginal-pressure |
// dual-kantorovich | dual-product-plan | oracle-singleton-pressure |
// oracle-kl | oracle-chaos-game | oracle-transport-bruteforce |
// oracle-fd-gradient.
RunResult run_command(const std::string& verb, const Scenario& scenario);

struct DemoEntry {
  const char* name;
  const char* description;
  const char* text;  // scenario JSON
};

std::span<const DemoEntry> demo_catalog();

}  // namespace holoform::cli
