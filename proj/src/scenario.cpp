#include "holoform/scenario.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

namespace holoform::cli {

namespace {

// -- parsing helpers ---------------------------------------------------------

struct Collector {
  std::vector<std::string> failures;
  void add(const std::string& msg) { failures.push_back(msg); }
  bool ok() const { return failures.empty(); }
};

VectorXd parse_vector(const json& j) {
  VectorXd v(j.size());
  for (size_t i = 0; i < j.size(); ++i) v(i) = j.at(i).get<double>();
  return v;
}

MatrixXd parse_matrix(const json& j) {
  const size_t rows = j.size();
  const size_t cols = rows ? j.at(0).size() : 0;
  MatrixXd m(rows, cols);
  for (size_t i = 0; i < rows; ++i) {
    if (j.at(i).size() != cols) {
      throw ValidationError("matrix rows have different lengths");
    }
    for (size_t k = 0; k < cols; ++k) m(i, k) = j.at(i).at(k).get<double>();
  }
  return m;
}

std::optional<BaseSpace> parse_base(const json& spaces, const std::string& key,
                                    Collector& errs) {
  if (!spaces.contains(key)) return std::nullopt;
  const json& s = spaces.at(key);
  try {
    if (s.contains("discrete")) {
      return BaseSpace::discrete(s.at("discrete").get<int>());
    }
    std::vector<std::string> labels;
    for (const auto& p : s.at("points")) labels.push_back(p.get<std::string>());
    return BaseSpace(labels, parse_matrix(s.at("metric")));
  } catch (const std::exception& e) {
    errs.add("spaces." + key + ": " + e.what());
    return std::nullopt;
  }
}

std::optional<FiberSpace> parse_fiber(const json& spaces, const std::string& key,
                                      Collector& errs) {
  if (!spaces.contains(key)) return std::nullopt;
  const json& s = spaces.at(key);
  try {
    if (s.contains("grid")) return FiberSpace::grid(s.at("grid").get<int>());
    std::vector<std::string> labels;
    for (const auto& p : s.at("points")) labels.push_back(p.get<std::string>());
    return FiberSpace::finite(labels, parse_matrix(s.at("metric")));
  } catch (const std::exception& e) {
    errs.add("spaces." + key + ": " + e.what());
    return std::nullopt;
  }
}

std::optional<ContractiveIFS> parse_ifs(const json& doc, const std::string& key,
                                        std::optional<BaseSpace> base,
                                        std::optional<FiberSpace> fiber,
                                        Collector& errs) {
  if (!doc.contains("ifs") || !doc.at("ifs").contains(key)) return std::nullopt;
  if (!base || !fiber) {
    errs.add("ifs." + key + ": spaces missing for this IFS");
    return std::nullopt;
  }
  const json& s = doc.at("ifs").at(key);
  try {
    const double gamma = s.at("gamma").get<double>();
    if (s.contains("affine")) {
      std::vector<AffineMap> maps;
      for (const auto& m : s.at("affine")) {
        maps.push_back({m.at("a").get<double>(), m.at("b").get<double>()});
      }
      return ContractiveIFS::affine(*base, *fiber, std::move(maps), gamma);
    }
    if (s.contains("table")) {
      std::vector<std::vector<int>> tables;
      for (const auto& t : s.at("table")) {
        tables.push_back(t.get<std::vector<int>>());
      }
      return ContractiveIFS::table(*base, *fiber, std::move(tables), gamma);
    }
    errs.add("ifs." + key + ": need either 'affine' or 'table'");
  } catch (const std::exception& e) {
    errs.add("ifs." + key + ": " + e.what());
  }
  return std::nullopt;
}

std::optional<ProbMeasure> parse_measure(const json& doc, const std::string& key,
                                         Collector& errs) {
  if (!doc.contains("measures") || !doc.at("measures").contains(key)) {
    return std::nullopt;
  }
  try {
    return ProbMeasure(parse_vector(doc.at("measures").at(key)));
  } catch (const std::exception& e) {
    errs.add("measures." + key + ": " + e.what());
    return std::nullopt;
  }
}

std::optional<CostFunction> parse_cost_spec(const json& spec,
                                            const ContractiveIFS& ifs,
                                            const std::optional<ProbMeasure>& alpha,
                                            std::uint64_t seed, Collector& errs,
                                            const std::string& where) {
  try {
    const std::string type = spec.value("type", "dense");
    const BaseSpace& base = ifs.base();
    const FiberSpace& fiber = ifs.fiber();
    if (type == "zero") return CostFunction::zero(base, fiber);
    if (type == "constant") {
      return CostFunction::constant(base, fiber, spec.at("value").get<double>());
    }
    if (type == "dense") {
      return CostFunction(base, fiber, parse_matrix(spec.at("values")));
    }
    if (type == "x-table") {
      const VectorXd a = parse_vector(spec.at("x_values"));
      MatrixXd m(base.size(), fiber.size());
      for (int x = 0; x < base.size(); ++x) m.row(x).setConstant(a(x));
      return CostFunction(base, fiber, std::move(m));
    }
    if (type == "log-ratio") {
      // c(x) = log(q_x / alpha_x): the normalized finite-example cost.
      if (!alpha) {
        errs.add(where + ": log-ratio cost needs measures.alpha");
        return std::nullopt;
      }
      const VectorXd q = parse_vector(spec.at("q"));
      MatrixXd m(base.size(), fiber.size());
      for (int x = 0; x < base.size(); ++x) {
        m.row(x).setConstant(std::log(q(x) / alpha->weight(x)));
      }
      return CostFunction(base, fiber, std::move(m));
    }
    if (type == "random") {
      return random_lipschitz_cost(base, fiber, spec.value("seed", seed),
                                   spec.value("amplitude", 1.0),
                                   spec.value("modes", 3));
    }
    errs.add(where + ": unknown cost type '" + type + "'");
  } catch (const std::exception& e) {
    errs.add(where + ": " + std::string(e.what()));
  }
  return std::nullopt;
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hash_hex(const json& doc) {
  std::ostringstream os;
  os << std::hex << fnv1a(doc.dump());
  return os.str();
}

json vector_json(const VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

json matrix_json(const MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    rows.push_back(vector_json(m.row(i).transpose()));
  }
  return rows;
}

json eigenpair_json(const Eigenpair& eig) {
  return json{{"lambda", eig.lambda},
              {"log_lambda", eig.log_lambda},
              {"residual", eig.residual},
              {"iterations", eig.iterations},
              {"h", vector_json(eig.h.values())}};
}

json entropy_json(const EntropyReport& rep) {
  json j{{"H", rep.H}, {"I", rep.I}, {"method", rep.method}};
  if (rep.candidates > 0) j["candidates"] = rep.candidates;
  return j;
}

// -- per-verb requirements ---------------------------------------------------

const ContractiveIFS& need_ifs_x(const Scenario& s, const std::string& verb) {
  if (!s.ifs_x) throw ValidationError(verb + ": scenario needs spaces X, Z and ifs.x");
  return *s.ifs_x;
}

const ProbMeasure& need_alpha(const Scenario& s, const std::string& verb) {
  if (!s.alpha) throw ValidationError(verb + ": scenario needs measures.alpha");
  return *s.alpha;
}

const CostFunction& need_cost(const Scenario& s, const std::string& verb) {
  if (!s.cost) throw ValidationError(verb + ": scenario needs a cost");
  return *s.cost;
}

}  // namespace

// ---------------------------------------------------------------------------

Scenario parse_scenario(const json& doc) {
  Collector errs;
  Scenario s;
  s.raw = doc;
  s.name = doc.value("name", "");
  s.description = doc.value("description", "");

  const json spaces = doc.value("spaces", json::object());
  auto X = parse_base(spaces, "X", errs);
  auto Y = parse_base(spaces, "Y", errs);
  auto Z = parse_fiber(spaces, "Z", errs);
  auto W = parse_fiber(spaces, "W", errs);

  s.ifs_x = parse_ifs(doc, "x", X, Z, errs);
  s.ifs_y = parse_ifs(doc, "y", Y, W, errs);

  s.alpha = parse_measure(doc, "alpha", errs);
  s.beta = parse_measure(doc, "beta", errs);
  s.mu = parse_measure(doc, "mu", errs);
  s.nu = parse_measure(doc, "nu", errs);

  if (doc.contains("solver")) {
    const json& so = doc.at("solver");
    s.solver.tol = so.value("tol", s.solver.tol);
    s.solver.max_iter = so.value("max_iter", s.solver.max_iter);
    s.solver.seed = so.value("seed", s.solver.seed);
    s.solver.candidates = so.value("candidates", s.solver.candidates);
    s.solver.samples = so.value("samples", s.solver.samples);
    s.solver.burn_in = so.value("burn_in", s.solver.burn_in);
    s.solver.depth = so.value("depth", s.solver.depth);
    s.solver.test_functions = so.value("test_functions", s.solver.test_functions);
    s.solver.fd_epsilon = so.value("fd_epsilon", s.solver.fd_epsilon);
    s.solver.contraction_samples =
        so.value("contraction_samples", s.solver.contraction_samples);
    if (so.contains("s_values")) {
      s.solver.s_values = so.at("s_values").get<std::vector<double>>();
    }
    if (so.contains("descent")) {
      const json& de = so.at("descent");
      s.solver.descent.tol = de.value("tol", s.solver.descent.tol);
      s.solver.descent.max_iter = de.value("max_iter", s.solver.descent.max_iter);
      s.solver.descent.step0 = de.value("step0", s.solver.descent.step0);
    }
    if (so.contains("two_marginal")) {
      const json& tm = so.at("two_marginal");
      s.solver.two_marginal.tol = tm.value("tol", s.solver.two_marginal.tol);
      s.solver.two_marginal.max_iter =
          tm.value("max_iter", s.solver.two_marginal.max_iter);
      s.solver.two_marginal.step0 = tm.value("step0", s.solver.two_marginal.step0);
    }
  }

  if (doc.contains("cost")) {
    if (s.ifs_x) {
      s.cost = parse_cost_spec(doc.at("cost"), *s.ifs_x, s.alpha, s.solver.seed,
                               errs, "cost");
    } else {
      errs.add("cost: needs spaces X, Z and ifs.x");
    }
  }
  if (doc.contains("cost_d")) {
    if (s.ifs_y) {
      s.cost_d = parse_cost_spec(doc.at("cost_d"), *s.ifs_y, s.beta,
                                 s.solver.seed, errs, "cost_d");
    } else {
      errs.add("cost_d: needs spaces Y, W and ifs.y");
    }
  }
  if (doc.contains("cost4")) {
    const json& c4 = doc.at("cost4");
    const std::string type = c4.value("type", "dense");
    try {
      if (!s.ifs_x || !s.ifs_y) {
        errs.add("cost4: needs both IFS definitions");
      } else if (type == "separable") {
        auto b = parse_cost_spec(c4.at("b"), *s.ifs_x, s.alpha, s.solver.seed,
                                 errs, "cost4.b");
        auto d = parse_cost_spec(c4.at("d"), *s.ifs_y, s.beta, s.solver.seed,
                                 errs, "cost4.d");
        if (b && d) s.cost4 = Cost4::separable(*b, *d);
      } else if (type == "constant") {
        s.cost4 = Cost4::constant(s.ifs_x->base().size(), s.ifs_y->base().size(),
                                  s.ifs_x->fiber().size(), s.ifs_y->fiber().size(),
                                  c4.at("value").get<double>());
      } else if (type == "dense") {
        s.cost4 = Cost4(s.ifs_x->base().size(), s.ifs_y->base().size(),
                        s.ifs_x->fiber().size(), s.ifs_y->fiber().size(),
                        parse_vector(c4.at("values")));
      } else {
        errs.add("cost4: unknown type '" + type + "'");
      }
    } catch (const std::exception& e) {
      errs.add("cost4: " + std::string(e.what()));
    }
  }
  if (doc.contains("cost_xy")) {
    try {
      s.cost_xy = parse_matrix(doc.at("cost_xy").at("values"));
    } catch (const std::exception& e) {
      errs.add("cost_xy: " + std::string(e.what()));
    }
  }

  // Cross-checks that need several pieces together.
  if (s.ifs_x && s.alpha && s.alpha->size() != s.ifs_x->base().size()) {
    errs.add("measures.alpha: size does not match spaces.X");
  }
  if (s.ifs_x && s.mu && s.mu->size() != s.ifs_x->base().size()) {
    errs.add("measures.mu: size does not match spaces.X");
  }
  if (s.ifs_y && s.beta && s.beta->size() != s.ifs_y->base().size()) {
    errs.add("measures.beta: size does not match spaces.Y");
  }
  if (s.ifs_y && s.nu && s.nu->size() != s.ifs_y->base().size()) {
    errs.add("measures.nu: size does not match spaces.Y");
  }
  if (s.cost_xy && s.mu && s.nu &&
      (s.cost_xy->rows() != s.mu->size() || s.cost_xy->cols() != s.nu->size())) {
    errs.add("cost_xy: shape does not match mu, nu");
  }
  if (s.cost_xy && s.mu && s.nu &&
      std::abs(s.mu->weights().sum() - s.nu->weights().sum()) > 1e-9) {
    errs.add("cost_xy: marginal masses differ (infeasible transport)");
  }
  if (s.ifs_x && s.alpha) {
    auto rep = verify_contraction(*s.ifs_x, s.solver.contraction_samples,
                                  s.solver.seed);
    if (!rep.pass) {
      errs.add("ifs.x: contraction certification failed (max ratio " +
               std::to_string(rep.max_ratio) + " > gamma)");
    }
  }
  if (s.ifs_y && s.beta) {
    auto rep = verify_contraction(*s.ifs_y, s.solver.contraction_samples,
                                  s.solver.seed);
    if (!rep.pass) {
      errs.add("ifs.y: contraction certification failed (max ratio " +
               std::to_string(rep.max_ratio) + " > gamma)");
    }
  }

  if (!errs.ok()) {
    std::string what = "scenario validation failed:";
    for (const auto& f : errs.failures) what += "\n  - " + f;
    throw ScenarioError(what, errs.failures);
  }
  return s;
}

Scenario load_scenario(const std::string& path_or_demo) {
  if (path_or_demo.rfind("demo:", 0) == 0) {
    const std::string name = path_or_demo.substr(5);
    for (const DemoEntry& d : demo_catalog()) {
      if (name == d.name) return parse_scenario(json::parse(d.text));
    }
    throw ValidationError("unknown demo '" + name + "'; see `holoform demos list`");
  }
  std::ifstream in(path_or_demo);
  if (!in) throw ValidationError("cannot open scenario file: " + path_or_demo);
  json doc;
  try {
    in >> doc;
  } catch (const json::parse_error& e) {
    throw ValidationError("scenario is not valid JSON: " + std::string(e.what()));
  }
  return parse_scenario(doc);
}

json RunResult::to_json() const {
  return json{{"command", command},
              {"scenario_hash", scenario_hash},
              {"wall_time_ms", wall_ms},
              {"warnings", warnings},
              {"payload", payload}};
}

std::string RunResult::to_csv() const {
  std::ostringstream os;
  os << "field,index,value\n";
  os.precision(17);
  for (const auto& [key, value] : payload.items()) {
    if (value.is_array()) {
      for (size_t i = 0; i < value.size(); ++i) {
        if (value.at(i).is_number()) {
          os << key << ',' << i << ',' << value.at(i).get<double>() << '\n';
        }
      }
    } else if (value.is_number()) {
      os << key << ",," << value.get<double>() << '\n';
    }
  }
  return os.str();
}

// ---------------------------------------------------------------------------

namespace {

json run_check(const Scenario& s) {
  json out;
  for (const auto& [label, ifs] : {std::pair{"x", &s.ifs_x}, {"y", &s.ifs_y}}) {
    if (!ifs->has_value()) continue;
    auto rep = verify_contraction(**ifs, s.solver.contraction_samples,
                                  s.solver.seed);
    json r{{"pass", rep.pass},
           {"max_ratio", rep.max_ratio},
           {"pairs_checked", rep.pairs_checked},
           {"gamma", (*ifs)->gamma()}};
    if (rep.witness) {
      r["witness"] = json{{"x1", rep.witness->x1},
                          {"x2", rep.witness->x2},
                          {"z1", rep.witness->z1},
                          {"z2", rep.witness->z2},
                          {"lhs", rep.witness->lhs},
                          {"rhs", rep.witness->rhs}};
    }
    out[std::string("ifs_") + label] = std::move(r);
  }
  if (out.empty()) throw ValidationError("check: scenario defines no IFS");
  return out;
}

json run_eigen(const Scenario& s, bool with_sweep) {
  const auto& ifs = need_ifs_x(s, "eigen");
  const auto& alpha = need_alpha(s, "eigen");
  const auto& c = need_cost(s, "eigen");
  Eigenpair eig = power_eigenpair(c, alpha, ifs, s.solver.tol, s.solver.max_iter);
  json out = eigenpair_json(eig);
  if (with_sweep) {
    BouschSweep sweep = bousch_sweep(c, alpha, ifs, s.solver.s_values,
                                     std::min(s.solver.tol, 1e-9));
    json pts = json::array();
    for (const auto& p : sweep.points) {
      pts.push_back(json{{"s", p.s}, {"value", p.value}, {"lip", p.lip}});
    }
    out["bousch_sweep"] = json{{"points", pts},
                               {"extrapolated", sweep.extrapolated},
                               {"power_gap",
                                std::abs(sweep.extrapolated - eig.log_lambda)}};
  }
  return out;
}

json run_normalize(const Scenario& s) {
  const auto& ifs = need_ifs_x(s, "normalize");
  NormalizedCost nc = normalize_cost(need_cost(s, "normalize"),
                                     need_alpha(s, "normalize"), ifs,
                                     s.solver.tol, s.solver.max_iter);
  return json{{"log_lambda", nc.log_lambda()},
              {"lambda", nc.eigenpair().lambda},
              {"normalization_residual", nc.normalization_residual()},
              {"cbar", matrix_json(nc.cost().values())},
              {"h", vector_json(nc.eigenpair().h.values())}};
}

json run_invariant(const Scenario& s) {
  const auto& ifs = need_ifs_x(s, "invariant-measure");
  const auto& alpha = need_alpha(s, "invariant-measure");
  NormalizedCost nc = normalize_cost(need_cost(s, "invariant-measure"), alpha,
                                     ifs, s.solver.tol, s.solver.max_iter);
  InvariantMeasure inv = invariant_measure(nc, alpha, ifs, s.solver.tol,
                                           s.solver.max_iter);
  json out{{"rho", vector_json(inv.rho.weights())},
           {"tv_residual", inv.tv_residual},
           {"iterations", inv.iterations},
           {"flatness_gap", inv.flatness_gap},
           {"flatness_error", inv.flatness_error}};
  if (ifs.fiber().is_grid()) {
    const VectorXd z = ifs.fiber().nodes();
    out["moment1"] = inv.rho.weights().dot(z);
    out["moment2"] = inv.rho.weights().dot(z.cwiseProduct(z));
    auto cover = attractor_cover(ifs, s.solver.depth);
    json ivals = json::array();
    for (const auto& iv : cover.intervals) {
      ivals.push_back(json{{"lo", iv.lo}, {"hi", iv.hi}});
    }
    const double pad = ifs.fiber().spacing() / (1.0 - ifs.gamma());
    out["attractor_cover"] =
        json{{"depth", cover.depth},
             {"intervals", ivals},
             {"total_length", cover.total_length()},
             {"mass_outside", measure_outside(inv.rho, cover, ifs.fiber(), pad)},
             {"pad", pad}};
  }
  return out;
}

json run_pressure(const Scenario& s) {
  const auto& ifs = need_ifs_x(s, "pressure");
  PressureReport rep = pressure(need_cost(s, "pressure"),
                                need_alpha(s, "pressure"), ifs, s.solver.tol,
                                s.solver.max_iter);
  return json{{"P", rep.P},
              {"lambda", rep.lambda},
              {"log_lambda", rep.log_lambda},
              {"gap", rep.gap},
              {"entropy", entropy_json(rep.entropy)},
              {"holonomy_residual", rep.equilibrium.holonomy_residual()},
              {"x_marginal", vector_json(rep.equilibrium.x_marginal())},
              {"eigen", eigenpair_json(rep.normalized.eigenpair())}};
}

json run_entropy(const Scenario& s) {
  const auto& ifs = need_ifs_x(s, "entropy");
  const auto& alpha = need_alpha(s, "entropy");
  PressureReport rep = pressure(need_cost(s, "entropy"), alpha, ifs,
                                s.solver.tol, s.solver.max_iter);
  json out{{"equilibrium", entropy_json(rep.entropy)}};
  if (s.solver.candidates > 0) {
    EntropyReport var = entropy_variational(rep.equilibrium, alpha, ifs,
                                            s.solver.candidates, s.solver.seed,
                                            s.solver.tol);
    out["variational"] = entropy_json(var);
    out["agreement_gap"] = std::abs(var.H - rep.entropy.H);
  }
  out["H"] = rep.entropy.H;
  out["I"] = rep.entropy.I;
  return out;
}

json dual_potentials_json(const DualPotentials& p) {
  json out{{"phi", vector_json(p.phi)},
           {"objective", p.objective},
           {"pressure_residual", p.pressure_residual}};
  if (p.psi) out["psi"] = vector_json(*p.psi);
  return out;
}

json run_dual_single(const Scenario& s) {
  const auto& ifs = need_ifs_x(s, "dual-single");
  if (!s.mu) throw ValidationError("dual-single: scenario needs measures.mu");
  DescentOptions opt = s.solver.descent;
  opt.solver_tol = s.solver.tol;
  SingleMarginalResult res = single_marginal_dual(
      need_cost(s, "dual-single"), *s.mu, need_alpha(s, "dual-single"), ifs, opt);
  return json{{"potentials", dual_potentials_json(res.potentials)},
              {"objective", res.potentials.objective},
              {"primal_value", res.primal_value},
              {"gap", res.gap},
              {"marginal_tv", res.marginal_tv},
              {"iterations", res.iterations},
              {"holonomy_residual", res.plan.holonomy_residual()}};
}

json run_dual_marginal_pressure(const Scenario& s) {
  if (!s.ifs_x || !s.ifs_y) {
    throw ValidationError("dual-marginal-pressure: needs both IFS definitions");
  }
  if (!s.cost4) throw ValidationError("dual-marginal-pressure: needs cost4");
  if (!s.alpha || !s.beta) {
    throw ValidationError("dual-marginal-pressure: needs alpha and beta");
  }
  auto res = marginal_pressure(*s.cost4, *s.alpha, *s.beta, *s.ifs_x, *s.ifs_y);
  return json{{"value", res.value},
              {"lower_bound", res.lower_bound},
              {"gap", res.gap},
              {"iterations", res.iterations},
              {"certificate",
               json{{"lambda", res.certificate.lambda},
                    {"max_violation", res.certificate.max_violation},
                    {"pressure_residual_b", res.certificate.pressure_residual_b},
                    {"pressure_residual_d", res.certificate.pressure_residual_d},
                    {"b", matrix_json(res.certificate.b.values())},
                    {"d", matrix_json(res.certificate.d.values())}}}};
}

json run_dual_two_marginal(const Scenario& s) {
  if (!s.ifs_x || !s.ifs_y) {
    throw ValidationError("dual-two-marginal: needs both IFS definitions");
  }
  if (!s.cost4) throw ValidationError("dual-two-marginal: needs cost4");
  if (!s.alpha || !s.beta || !s.mu || !s.nu) {
    throw ValidationError("dual-two-marginal: needs alpha, beta, mu, nu");
  }
  auto res = two_marginal_dual(*s.cost4, *s.mu, *s.nu, *s.alpha, *s.beta,
                               *s.ifs_x, *s.ifs_y, s.solver.two_marginal);
  return json{{"potentials", dual_potentials_json(res.potentials)},
              {"objective", res.potentials.objective},
              {"primal_value", res.primal_value},
              {"gap", res.gap},
              {"marginal_tv_mu", res.marginal_tv_mu},
              {"marginal_tv_nu", res.marginal_tv_nu},
              {"holonomy_residual_x", res.witness.holonomy_residual_x},
              {"holonomy_residual_y", res.witness.holonomy_residual_y},
              {"iterations", res.iterations}};
}

json run_dual_kantorovich(const Scenario& s) {
  if (!s.cost_xy) throw ValidationError("dual-kantorovich: needs cost_xy");
  if (!s.mu || !s.nu) throw ValidationError("dual-kantorovich: needs mu and nu");
  auto res = kantorovich_solve(*s.cost_xy, *s.mu, *s.nu);
  return json{{"value", res.value},
              {"pivots", res.pivots},
              {"potentials", dual_potentials_json(res.potentials)},
              {"plan", matrix_json(res.plan.xy_marginal())},
              {"marginal_residual_mu", res.plan.marginal_residual_mu},
              {"marginal_residual_nu", res.plan.marginal_residual_nu}};
}

json run_dual_product_plan(const Scenario& s) {
  if (!s.ifs_x || !s.ifs_y) {
    throw ValidationError("dual-product-plan: needs both IFS definitions");
  }
  if (!s.mu || !s.nu) throw ValidationError("dual-product-plan: needs mu and nu");
  auto plan = product_plan(*s.mu, *s.nu, *s.ifs_x, *s.ifs_y);
  json out{{"marginal_residual_mu", plan.marginal_residual_mu},
           {"marginal_residual_nu", plan.marginal_residual_nu},
           {"holonomy_residual_x", plan.holonomy_residual_x},
           {"holonomy_residual_y", plan.holonomy_residual_y}};
  if (s.cost4) out["cost_integral"] = plan.integrate(*s.cost4);
  return out;
}

json run_oracle(const std::string& verb, const Scenario& s) {
  if (verb == "oracle-singleton-pressure") {
    const auto& c = need_cost(s, verb);
    if (c.fiber_size() != 1) {
      throw ValidationError(verb + ": fiber Z must be a single point");
    }
    auto r = oracles::singleton_pressure(c.values().col(0), need_alpha(s, verb));
    return json{{"value", r.value}, {"method", r.method}};
  }
  if (verb == "oracle-kl") {
    if (!s.mu) throw ValidationError(verb + ": needs measures.mu (the q side)");
    auto r = oracles::kl_divergence(*s.mu, need_alpha(s, verb));
    return json{{"value", r.value}, {"method", r.method}};
  }
  if (verb == "oracle-chaos-game") {
    const auto& ifs = need_ifs_x(s, verb);
    const auto& alpha = need_alpha(s, verb);
    NormalizedCost nc = normalize_cost(need_cost(s, verb), alpha, ifs,
                                       s.solver.tol, s.solver.max_iter);
    auto est = oracles::chaos_game_measure(nc.cost(), alpha, ifs,
                                           s.solver.samples, s.solver.burn_in,
                                           s.solver.seed);
    return json{{"moment1", est.m1},
                {"moment2", est.m2},
                {"se1", est.se1},
                {"se2", est.se2},
                {"samples", est.samples},
                {"burn_in", est.burn_in}};
  }
  if (verb == "oracle-transport-bruteforce") {
    if (!s.cost_xy) throw ValidationError(verb + ": needs cost_xy");
    if (!s.mu || !s.nu) throw ValidationError(verb + ": needs mu and nu");
    auto r = oracles::transport_bruteforce(*s.cost_xy, *s.mu, *s.nu);
    return json{{"value", r.value}, {"method", r.method}, {"work", r.cost}};
  }
  if (verb == "oracle-fd-gradient") {
    const auto& ifs = need_ifs_x(s, verb);
    const auto& alpha = need_alpha(s, verb);
    const auto& c = need_cost(s, verb);
    CostFunction g = random_lipschitz_cost(ifs.base(), ifs.fiber(),
                                           s.solver.seed + 1, 0.5, 3);
    auto pressure_fn = [&](const CostFunction& cc) {
      return pressure(cc, alpha, ifs, s.solver.tol, s.solver.max_iter).P;
    };
    auto fd = oracles::fd_pressure_gradient(pressure_fn, c, g,
                                            s.solver.fd_epsilon);
    PressureReport rep = pressure(c, alpha, ifs, s.solver.tol, s.solver.max_iter);
    const double integral = rep.equilibrium.integrate(g.values());
    return json{{"fd_value", fd.value},
                {"equilibrium_integral", integral},
                {"difference", std::abs(fd.value - integral)},
                {"epsilon", s.solver.fd_epsilon}};
  }
  throw ValidationError("unknown oracle verb '" + verb + "'");
}

}  // namespace

RunResult run_command(const std::string& verb, const Scenario& scenario) {
  RunResult result;
  result.command = verb;
  result.scenario_hash = hash_hex(scenario.raw);
  const auto t0 = std::chrono::steady_clock::now();

  if (verb == "check") {
    result.payload = run_check(scenario);
  } else if (verb == "eigen") {
    result.payload = run_eigen(scenario, false);
  } else if (verb == "eigen-validated") {
    result.payload = run_eigen(scenario, true);
  } else if (verb == "normalize") {
    result.payload = run_normalize(scenario);
  } else if (verb == "invariant-measure") {
    result.payload = run_invariant(scenario);
  } else if (verb == "pressure") {
    result.payload = run_pressure(scenario);
  } else if (verb == "entropy") {
    result.payload = run_entropy(scenario);
  } else if (verb == "dual-single") {
    result.payload = run_dual_single(scenario);
  } else if (verb == "dual-marginal-pressure") {
    result.payload = run_dual_marginal_pressure(scenario);
  } else if (verb == "dual-two-marginal") {
    result.payload = run_dual_two_marginal(scenario);
  } else if (verb == "dual-kantorovich") {
    result.payload = run_dual_kantorovich(scenario);
  } else if (verb == "dual-product-plan") {
    result.payload = run_dual_product_plan(scenario);
  } else if (verb.rfind("oracle-", 0) == 0) {
    result.payload = run_oracle(verb, scenario);
  } else {
    throw ValidationError("unknown command verb '" + verb + "'");
  }

  const auto t1 = std::chrono::steady_clock::now();
  result.wall_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
  return result;
}

}  // namespace holoform::cli
