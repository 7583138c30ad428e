#include "holoform/spaces.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace holoform {

namespace {

constexpr double kMassTol = 1e-12;
constexpr double kGeomTol = 1e-12;

void check_metric(const MatrixXd& m, const std::string& who) {
  const auto n = m.rows();
  if (n < 1 || m.cols() != n) {
    throw DimensionError(who + ": metric must be a square matrix with n >= 1");
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (std::abs(m(i, i)) > kGeomTol) {
      throw ValidationError(who + ": metric diagonal must be zero");
    }
    for (Eigen::Index j = 0; j < n; ++j) {
      if (!std::isfinite(m(i, j)) || m(i, j) < 0.0) {
        throw ValidationError(who + ": metric entries must be finite and nonnegative");
      }
      if (std::abs(m(i, j) - m(j, i)) > kGeomTol) {
        throw ValidationError(who + ": metric must be symmetric");
      }
    }
  }
  // Exhaustive triangle check; spaces are small by construction.
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      for (Eigen::Index k = 0; k < n; ++k) {
        if (m(i, j) > m(i, k) + m(k, j) + kGeomTol) {
          std::ostringstream os;
          os << who << ": triangle inequality fails at (" << i << "," << j
             << "," << k << ")";
          throw ValidationError(os.str());
        }
      }
    }
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// BaseSpace

BaseSpace::BaseSpace(std::vector<std::string> labels, MatrixXd metric)
    : labels_(std::move(labels)), metric_(std::move(metric)) {
  if (labels_.empty()) {
    throw DimensionError("BaseSpace: at least one point required");
  }
  if (metric_.rows() != static_cast<Eigen::Index>(labels_.size())) {
    throw DimensionError("BaseSpace: metric size does not match label count");
  }
  check_metric(metric_, "BaseSpace");
}

BaseSpace BaseSpace::discrete(int n) {
  if (n < 1) throw DimensionError("BaseSpace::discrete: n >= 1 required");
  std::vector<std::string> labels(n);
  MatrixXd m = MatrixXd::Ones(n, n) - MatrixXd::Identity(n, n);
  for (int i = 0; i < n; ++i) labels[i] = std::to_string(i);
  return BaseSpace(std::move(labels), std::move(m));
}

BaseSpace BaseSpace::singleton(const std::string& label) {
  return BaseSpace({label}, MatrixXd::Zero(1, 1));
}

double BaseSpace::diameter() const { return metric_.maxCoeff(); }

// ---------------------------------------------------------------------------
// FiberSpace

FiberSpace FiberSpace::grid(int node_count) {
  if (node_count < 2) {
    throw DimensionError("FiberSpace::grid: at least 2 nodes required");
  }
  FiberSpace f;
  f.kind_ = Kind::Grid;
  f.nodes_ = VectorXd::LinSpaced(node_count, 0.0, 1.0);
  return f;
}

FiberSpace FiberSpace::finite(std::vector<std::string> labels, MatrixXd metric) {
  if (labels.empty()) {
    throw DimensionError("FiberSpace::finite: at least one point required");
  }
  if (metric.rows() != static_cast<Eigen::Index>(labels.size())) {
    throw DimensionError("FiberSpace::finite: metric size mismatch");
  }
  check_metric(metric, "FiberSpace");
  FiberSpace f;
  f.kind_ = Kind::Finite;
  f.labels_ = std::move(labels);
  f.metric_ = std::move(metric);
  return f;
}

FiberSpace FiberSpace::singleton(const std::string& label) {
  return finite({label}, MatrixXd::Zero(1, 1));
}

int FiberSpace::size() const {
  return is_grid() ? static_cast<int>(nodes_.size())
                   : static_cast<int>(labels_.size());
}

double FiberSpace::spacing() const {
  if (!is_grid()) throw DomainError("FiberSpace::spacing: grid fibers only");
  return 1.0 / (static_cast<double>(nodes_.size()) - 1.0);
}

double FiberSpace::node(int j) const {
  if (!is_grid()) throw DomainError("FiberSpace::node: grid fibers only");
  return nodes_(j);
}

const VectorXd& FiberSpace::nodes() const {
  if (!is_grid()) throw DomainError("FiberSpace::nodes: grid fibers only");
  return nodes_;
}

double FiberSpace::distance(int i, int j) const {
  return is_grid() ? std::abs(nodes_(i) - nodes_(j)) : metric_(i, j);
}

double FiberSpace::diameter() const {
  return is_grid() ? 1.0 : (size() > 1 ? metric_.maxCoeff() : 0.0);
}

const std::string& FiberSpace::label(int i) const {
  if (is_grid()) throw DomainError("FiberSpace::label: finite fibers only");
  return labels_.at(i);
}

FiberSpace build_grid(int node_count) { return FiberSpace::grid(node_count); }

// ---------------------------------------------------------------------------
// ContractiveIFS

ContractiveIFS ContractiveIFS::affine(BaseSpace base, FiberSpace fiber,
                                      std::vector<AffineMap> maps,
                                      double gamma) {
  if (!fiber.is_grid()) {
    throw ValidationError("ContractiveIFS::affine: affine branches need a grid fiber");
  }
  if (static_cast<int>(maps.size()) != base.size()) {
    throw DimensionError("ContractiveIFS::affine: one map per base point required");
  }
  if (!(gamma > 0.0 && gamma < 1.0)) {
    throw ValidationError("ContractiveIFS::affine: gamma must lie in (0,1)");
  }
  // Only the range is validated here; the gamma inequality is certified
  // separately by verify_contraction so violations surface as reports.
  for (const auto& m : maps) {
    const double at0 = m(0.0), at1 = m(1.0);
    if (std::min(at0, at1) < -kGeomTol || std::max(at0, at1) > 1.0 + kGeomTol) {
      throw MapRangeError("ContractiveIFS::affine: branch image leaves [0,1]");
    }
  }
  ContractiveIFS ifs;
  ifs.base_ = std::move(base);
  ifs.fiber_ = std::move(fiber);
  ifs.affine_ = std::move(maps);
  ifs.gamma_ = gamma;
  return ifs;
}

ContractiveIFS ContractiveIFS::table(BaseSpace base, FiberSpace fiber,
                                     std::vector<std::vector<int>> tables,
                                     double gamma) {
  if (fiber.is_grid()) {
    throw ValidationError("ContractiveIFS::table: table branches need a finite fiber");
  }
  if (static_cast<int>(tables.size()) != base.size()) {
    throw DimensionError("ContractiveIFS::table: one table per base point required");
  }
  if (!(gamma > 0.0 && gamma < 1.0)) {
    throw ValidationError("ContractiveIFS::table: gamma must lie in (0,1)");
  }
  const int nz = fiber.size();
  for (const auto& t : tables) {
    if (static_cast<int>(t.size()) != nz) {
      throw DimensionError("ContractiveIFS::table: table length must match fiber size");
    }
    for (int v : t) {
      if (v < 0 || v >= nz) {
        throw MapRangeError("ContractiveIFS::table: image index out of range");
      }
    }
  }
  ContractiveIFS ifs;
  ifs.base_ = std::move(base);
  ifs.fiber_ = std::move(fiber);
  ifs.tables_ = std::move(tables);
  ifs.gamma_ = gamma;
  return ifs;
}

double ContractiveIFS::apply(int x, double z) const {
  if (!is_affine()) {
    throw DomainError("ContractiveIFS::apply: coordinate form needs affine branches");
  }
  return affine_.at(x)(z);
}

int ContractiveIFS::apply_index(int x, int j) const {
  if (is_affine()) {
    throw DomainError("ContractiveIFS::apply_index: index form needs table branches");
  }
  return tables_.at(x).at(j);
}

double ContractiveIFS::fixed_point(int x) const {
  if (!is_affine()) {
    throw DomainError("ContractiveIFS::fixed_point: affine branches only");
  }
  return affine_.at(x).fixed_point();
}

int ContractiveIFS::fixed_point_index(int x) const {
  if (is_affine()) {
    throw DomainError("ContractiveIFS::fixed_point_index: table branches only");
  }
  // A contraction on a finite metric space has no cycle of length > 1, so
  // iterating from any point reaches the unique fixed point within |Z| steps.
  const auto& t = tables_.at(x);
  int j = 0;
  for (size_t step = 0; step <= t.size(); ++step) {
    int next = t[j];
    if (next == j) return j;
    j = next;
  }
  throw ValidationError("ContractiveIFS::fixed_point_index: branch has no fixed point (not a contraction)");
}

// ---------------------------------------------------------------------------
// ProbMeasure

ProbMeasure::ProbMeasure(VectorXd weights) : w_(std::move(weights)) {
  if (w_.size() < 1) throw DimensionError("ProbMeasure: empty weight vector");
  for (Eigen::Index i = 0; i < w_.size(); ++i) {
    if (!std::isfinite(w_(i)) || w_(i) < -kMassTol) {
      throw ValidationError("ProbMeasure: weights must be finite and nonnegative");
    }
    if (w_(i) < 0.0) w_(i) = 0.0;
  }
  if (std::abs(w_.sum() - 1.0) > kMassTol) {
    throw ValidationError("ProbMeasure: weights must sum to 1 within 1e-12");
  }
}

ProbMeasure ProbMeasure::uniform(int n) {
  return ProbMeasure(VectorXd::Constant(n, 1.0 / n));
}

ProbMeasure ProbMeasure::delta(int n, int at) {
  VectorXd w = VectorXd::Zero(n);
  w(at) = 1.0;
  return ProbMeasure(std::move(w));
}

ProbMeasure ProbMeasure::normalized(VectorXd weights) {
  const double s = weights.sum();
  if (!(s > 0.0)) throw ValidationError("ProbMeasure::normalized: total mass must be positive");
  return ProbMeasure(weights / s);
}

void ProbMeasure::require_full_support(const std::string& who) const {
  if (!full_support()) {
    throw SupportError(who + ": measure must have full support");
  }
}

// ---------------------------------------------------------------------------
// GridFunction

double measured_lip(const FiberSpace& fiber, const VectorXd& values) {
  if (fiber.size() != values.size()) {
    throw DimensionError("measured_lip: value count does not match fiber");
  }
  double lip = 0.0;
  if (fiber.is_grid()) {
    const double dz = fiber.spacing();
    for (Eigen::Index j = 0; j + 1 < values.size(); ++j) {
      lip = std::max(lip, std::abs(values(j + 1) - values(j)) / dz);
    }
  } else {
    for (int i = 0; i < fiber.size(); ++i) {
      for (int j = i + 1; j < fiber.size(); ++j) {
        const double d = fiber.distance(i, j);
        if (d > 0.0) {
          lip = std::max(lip, std::abs(values(i) - values(j)) / d);
        }
      }
    }
  }
  return lip;
}

GridFunction::GridFunction(FiberSpace fiber, VectorXd values)
    : fiber_(std::move(fiber)), values_(std::move(values)) {
  if (!values_.allFinite()) throw ValidationError("GridFunction: values must be finite");
  if (fiber_.size() != values_.size()) {
    throw DimensionError("GridFunction: value count does not match fiber");
  }
  lip_ = measured_lip(fiber_, values_);
}

GridFunction::GridFunction(FiberSpace fiber, VectorXd values, double lip_bound)
    : GridFunction(std::move(fiber), std::move(values)) {
  lip_ = std::max(lip_, lip_bound);
}

GridFunction GridFunction::constant(const FiberSpace& fiber, double value) {
  return GridFunction(fiber, VectorXd::Constant(fiber.size(), value));
}

double GridFunction::operator()(double z) const { return eval_function(*this, z); }

double eval_function(const GridFunction& f, double z) {
  const FiberSpace& fiber = f.fiber();
  if (!fiber.is_grid()) {
    throw DomainError("eval_function: grid fibers only; use value(j) on finite fibers");
  }
  if (z < -kGeomTol || z > 1.0 + kGeomTol) {
    throw DomainError("eval_function: argument outside [0,1]");
  }
  z = std::clamp(z, 0.0, 1.0);
  const int n = fiber.size();
  const double t = z * (n - 1);
  int j = std::min(static_cast<int>(t), n - 2);
  const double w = t - j;
  return (1.0 - w) * f.value(j) + w * f.value(j + 1);
}

// ---------------------------------------------------------------------------
// CostFunction

CostFunction::CostFunction(int base_size, FiberSpace fiber, MatrixXd values)
    : fiber_(std::move(fiber)), values_(std::move(values)) {
  if (values_.rows() != base_size || values_.cols() != fiber_.size()) {
    throw DimensionError("CostFunction: values must be base_size x fiber_size");
  }
  if (!values_.allFinite()) {
    throw ValidationError("CostFunction: entries must be finite");
  }
  for (int x = 0; x < base_size; ++x) {
    fiber_lip_ = std::max(fiber_lip_, measured_lip(fiber_, values_.row(x).transpose()));
  }
}

CostFunction::CostFunction(const BaseSpace& base, FiberSpace fiber,
                           MatrixXd values)
    : CostFunction(base.size(), std::move(fiber), std::move(values)) {}

CostFunction CostFunction::with_values(MatrixXd values) const {
  return CostFunction(base_size(), fiber_, std::move(values));
}

GridFunction CostFunction::slice(int x) const {
  return GridFunction(fiber_, values_.row(x).transpose());
}

CostFunction CostFunction::zero(const BaseSpace& base, const FiberSpace& fiber) {
  return CostFunction(base, fiber, MatrixXd::Zero(base.size(), fiber.size()));
}

CostFunction CostFunction::constant(const BaseSpace& base,
                                    const FiberSpace& fiber, double value) {
  return CostFunction(base, fiber,
                      MatrixXd::Constant(base.size(), fiber.size(), value));
}

CostFunction random_lipschitz_cost(const BaseSpace& base,
                                   const FiberSpace& fiber, std::uint64_t seed,
                                   double amplitude, int modes) {
  Rng rng(seed);
  MatrixXd v(base.size(), fiber.size());
  if (fiber.is_grid()) {
    for (int x = 0; x < base.size(); ++x) {
      std::vector<double> coeff(modes + 1);
      for (int k = 0; k <= modes; ++k) {
        coeff[k] = rng.uniform(-amplitude, amplitude) / (1.0 + k * k);
      }
      for (int j = 0; j < fiber.size(); ++j) {
        double s = 0.0;
        for (int k = 0; k <= modes; ++k) {
          s += coeff[k] * std::cos(k * std::numbers::pi * fiber.node(j));
        }
        v(x, j) = s;
      }
    }
  } else {
    for (int x = 0; x < base.size(); ++x) {
      for (int j = 0; j < fiber.size(); ++j) {
        v(x, j) = rng.uniform(-amplitude, amplitude);
      }
    }
  }
  return CostFunction(base, fiber, std::move(v));
}

// ---------------------------------------------------------------------------
// Contraction certification

namespace {

// Updates the report with one candidate pair; returns false on violation.
bool check_pair(const ContractiveIFS& ifs, int x1, int x2, double z1, double z2,
                double image_dist, ContractionReport& rep) {
  const double denom = ifs.base().distance(x1, x2) + std::abs(z1 - z2);
  rep.pairs_checked += 1;
  if (denom <= 0.0) return true;  // same pair twice; inequality trivial
  rep.max_ratio = std::max(rep.max_ratio, image_dist / denom);
  if (image_dist > ifs.gamma() * denom + kGeomTol) {
    rep.pass = false;
    if (!rep.witness) {
      rep.witness = ContractionWitness{x1, x2, z1, z2, image_dist,
                                       ifs.gamma() * denom};
    }
    return false;
  }
  return true;
}

}  // namespace

ContractionReport verify_contraction(const ContractiveIFS& ifs, int samples,
                                     std::uint64_t seed) {
  if (samples < 1) throw ValidationError("verify_contraction: samples >= 1 required");
  ContractionReport rep;
  rep.pass = true;
  const int nx = ifs.base().size();

  if (ifs.is_affine()) {
    // Corner pairs are exact for affine branches: on each triangle of the
    // unit square cut by the diagonal, the defect is convex, so its maximum
    // sits at a square corner.
    const double corners[2] = {0.0, 1.0};
    for (int x1 = 0; x1 < nx; ++x1) {
      for (int x2 = 0; x2 < nx; ++x2) {
        for (double z1 : corners) {
          for (double z2 : corners) {
            const double d = std::abs(ifs.apply(x1, z1) - ifs.apply(x2, z2));
            check_pair(ifs, x1, x2, z1, z2, d, rep);
          }
        }
      }
    }
    Rng rng(seed);
    for (int s = 0; s < samples; ++s) {
      const int x1 = rng.uniform_int(nx), x2 = rng.uniform_int(nx);
      const double z1 = rng.uniform(), z2 = rng.uniform();
      const double d = std::abs(ifs.apply(x1, z1) - ifs.apply(x2, z2));
      check_pair(ifs, x1, x2, z1, z2, d, rep);
    }
  } else {
    const int nz = ifs.fiber().size();
    for (int x1 = 0; x1 < nx; ++x1) {
      for (int x2 = 0; x2 < nx; ++x2) {
        for (int j1 = 0; j1 < nz; ++j1) {
          for (int j2 = 0; j2 < nz; ++j2) {
            const double d = ifs.fiber().distance(ifs.apply_index(x1, j1),
                                                  ifs.apply_index(x2, j2));
            const double denom = ifs.base().distance(x1, x2) +
                                 ifs.fiber().distance(j1, j2);
            rep.pairs_checked += 1;
            if (denom <= 0.0) continue;
            rep.max_ratio = std::max(rep.max_ratio, d / denom);
            if (d > ifs.gamma() * denom + kGeomTol) {
              rep.pass = false;
              if (!rep.witness) {
                rep.witness = ContractionWitness{
                    x1, x2, static_cast<double>(j1), static_cast<double>(j2),
                    d, ifs.gamma() * denom};
              }
            }
          }
        }
      }
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Pushforward

ProbMeasure pushforward_measure(const ContractiveIFS& ifs, int x,
                                const ProbMeasure& m) {
  const FiberSpace& fiber = ifs.fiber();
  if (m.size() != fiber.size()) {
    throw DimensionError("pushforward_measure: measure does not match fiber");
  }
  VectorXd out = VectorXd::Zero(fiber.size());
  if (fiber.is_grid()) {
    const int n = fiber.size();
    for (int j = 0; j < n; ++j) {
      const double mass = m.weight(j);
      if (mass == 0.0) continue;
      double p = ifs.apply(x, fiber.node(j));
      if (p < -kGeomTol || p > 1.0 + kGeomTol) {
        throw MapRangeError("pushforward_measure: image outside [0,1]");
      }
      p = std::clamp(p, 0.0, 1.0);
      const double t = p * (n - 1);
      const int lo = std::min(static_cast<int>(t), n - 2);
      const double w = t - lo;
      out(lo) += (1.0 - w) * mass;
      out(lo + 1) += w * mass;
    }
  } else {
    for (int j = 0; j < fiber.size(); ++j) {
      out(ifs.apply_index(x, j)) += m.weight(j);
    }
  }
  return ProbMeasure(std::move(out));
}

}  // namespace holoform
