// holoform: transfer-operator thermodynamics and transport duality for
// uniformly contractive IFS, driven by JSON scenarios.

#include <CLI11.hpp>
#include <fstream>
#include <iostream>

#include "holoform/scenario.hpp"

namespace {

using holoform::cli::RunResult;
using holoform::cli::Scenario;

struct CommonArgs {
  std::string scenario;
  std::string out;
  std::string format = "json";
  bool quiet = false;
  // overrides
  double tol = -1.0;
  int max_iter = -1;
  std::uint64_t seed = 0;
  bool has_seed = false;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--scenario", args.scenario,
                  "Scenario JSON path or demo:<name>")
      ->required();
  cmd->add_option("--out", args.out, "Write the result to this path");
  cmd->add_option("--format", args.format, "Output format: json or csv")
      ->check(CLI::IsMember({"json", "csv"}));
  cmd->add_flag("--quiet", args.quiet, "Suppress stdout payload");
  cmd->add_option("--tol", args.tol, "Override solver tolerance");
  cmd->add_option("--max-iter", args.max_iter, "Override iteration cap");
  cmd->add_option("--seed", args.seed, "Override random seed")
      ->each([&args](const std::string&) { args.has_seed = true; });
}

int emit(const RunResult& result, const CommonArgs& args) {
  const std::string text = args.format == "csv"
                               ? result.to_csv()
                               : result.to_json().dump(2) + "\n";
  if (!args.out.empty()) {
    std::ofstream out(args.out);
    if (!out) {
      std::cerr << "error: cannot write " << args.out << "\n";
      return 2;
    }
    out << text;
  }
  if (!args.quiet) std::cout << text;
  return 0;
}

int execute(const std::string& verb, const CommonArgs& args) {
  Scenario scenario = holoform::cli::load_scenario(args.scenario);
  if (args.tol > 0.0) scenario.solver.tol = args.tol;
  if (args.max_iter >= 0) scenario.solver.max_iter = args.max_iter;
  if (args.has_seed) scenario.solver.seed = args.seed;
  return emit(holoform::cli::run_command(verb, scenario), args);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "holoform: thermodynamic formalism for contractive IFS - transfer "
      "operators, invariant measures, entropy, pressure, and transport "
      "duality"};
  app.require_subcommand(1);

  // verb name -> internal command id
  const std::vector<std::pair<std::string, std::string>> verbs = {
      {"check", "check"},
      {"eigen", "eigen"},
      {"normalize", "normalize"},
      {"invariant-measure", "invariant-measure"},
      {"pressure", "pressure"},
      {"entropy", "entropy"},
  };

  std::vector<std::unique_ptr<CommonArgs>> arg_blocks;
  std::string pending_verb;

  auto wire = [&](CLI::App* cmd, const std::string& verb) {
    arg_blocks.push_back(std::make_unique<CommonArgs>());
    CommonArgs* args = arg_blocks.back().get();
    add_common(cmd, *args);
    cmd->callback([&pending_verb, verb, args, cmd]() {
      pending_verb = verb;
      cmd->parse_order();
      (void)args;
    });
    return args;
  };

  std::map<std::string, CommonArgs*> verb_args;
  for (const auto& [name, id] : verbs) {
    auto* cmd = app.add_subcommand(name, "Run the " + name + " pipeline");
    verb_args[id] = wire(cmd, id);
  }
  {
    auto* cmd = app.add_subcommand(
        "eigen-validated", "Eigenpair plus the discounted-scheme sweep");
    verb_args["eigen-validated"] = wire(cmd, "eigen-validated");
  }

  auto* dual = app.add_subcommand("dual", "Duality solvers");
  dual->require_subcommand(1);
  for (const std::string sub :
       {"single", "two-marginal", "marginal-pressure", "kantorovich",
        "product-plan"}) {
    auto* cmd = dual->add_subcommand(sub, "dual " + sub);
    verb_args["dual-" + sub] = wire(cmd, "dual-" + sub);
  }

  auto* oracle = app.add_subcommand("oracle", "Independent ground-truth checks");
  oracle->require_subcommand(1);
  for (const std::string sub :
       {"singleton-pressure", "kl", "chaos-game", "transport-bruteforce",
        "fd-gradient"}) {
    auto* cmd = oracle->add_subcommand(sub, "oracle " + sub);
    verb_args["oracle-" + sub] = wire(cmd, "oracle-" + sub);
  }

  // run <verb> <scenario> : spec-style wrapper around the verb subcommands.
  std::string run_verb, run_scenario;
  CommonArgs run_args;
  auto* runcmd = app.add_subcommand("run", "Run a named pipeline on a scenario");
  runcmd->add_option("verb", run_verb, "Pipeline verb (e.g. pressure, dual-single)")
      ->required();
  runcmd->add_option("scenario", run_scenario, "Scenario path or demo:<name>")
      ->required();
  runcmd->add_option("--out", run_args.out, "Write the result to this path");
  runcmd->add_option("--format", run_args.format, "json or csv")
      ->check(CLI::IsMember({"json", "csv"}));
  runcmd->add_flag("--quiet", run_args.quiet, "Suppress stdout payload");
  runcmd->add_option("--tol", run_args.tol, "Override solver tolerance");
  runcmd->add_option("--max-iter", run_args.max_iter, "Override iteration cap");
  runcmd->add_option("--seed", run_args.seed, "Override random seed")
      ->each([&run_args](const std::string&) { run_args.has_seed = true; });

  auto* demos = app.add_subcommand("demos", "Built-in demo scenarios");
  demos->require_subcommand(1);
  demos->add_subcommand("list", "List demo names and descriptions");
  std::string show_name;
  auto* show = demos->add_subcommand("show", "Print a demo scenario JSON");
  show->add_option("name", show_name, "Demo name")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (demos->parsed()) {
      if (show->parsed()) {
        for (const auto& d : holoform::cli::demo_catalog()) {
          if (show_name == d.name) {
            std::cout << d.text << "\n";
            return 0;
          }
        }
        std::cerr << "error: unknown demo '" << show_name << "'\n";
        return 2;
      }
      for (const auto& d : holoform::cli::demo_catalog()) {
        std::cout << d.name << "\n    " << d.description << "\n";
      }
      return 0;
    }

    if (runcmd->parsed()) {
      // accept both "dual-single" and "dual single" spellings
      std::string verb = run_verb;
      for (auto& ch : verb) {
        if (ch == ' ') ch = '-';
      }
      run_args.scenario = run_scenario;
      return execute(verb, run_args);
    }

    for (const auto& [id, args] : verb_args) {
      // find which subcommand actually parsed
      (void)args;
      if (!pending_verb.empty()) break;
    }
    if (!pending_verb.empty()) {
      return execute(pending_verb, *verb_args.at(pending_verb));
    }
    std::cerr << "error: no command given\n";
    return 2;
  } catch (const holoform::cli::ScenarioError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 2;
  } catch (const holoform::ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 2;
  } catch (const holoform::OracleScaleError& e) {
    std::cerr << "oracle scale exceeded: " << e.what() << "\n";
    return 4;
  } catch (const holoform::ConvergenceError& e) {
    std::cerr << "solver did not converge: " << e.what()
              << " (last residual " << e.last_residual << ")\n";
    return 3;
  } catch (const holoform::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
