#ifndef STAGECCD_GEOMETRY_GEOMETRY_OPTIMIZER_HPP
#define STAGECCD_GEOMETRY_GEOMETRY_OPTIMIZER_HPP

#include <array>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "stageccd/errors.hpp"
#include "stageccd/optim/cobyla.hpp"
#include "stageccd/structural/assembly.hpp"
#include "stageccd/structural/mesh.hpp"
#include "stageccd/structural/modal.hpp"
#include "stageccd/structural/stage_params.hpp"

namespace stageccd {

/// Frequency requirements of the geometry problem. The first `n_controlled`
/// flexible modes must stay at or below `omega_low`; flexible modes
/// `n_controlled + 1 .. m_total` must reach `omega_high`. Both in rad/s.
struct FrequencySpec {
  int n_controlled{0};
  int m_total{4};
  double omega_low{0.0};
  double omega_high{0.0};

  FrequencySpec() = default;
  FrequencySpec(int n, int m, double low, double high)
      : n_controlled(n), m_total(m), omega_low(low), omega_high(high) {
    validate();
  }

  static FrequencySpec from_hz(int n, int m, double low_hz, double high_hz) {
    return FrequencySpec(n, m, hz_to_rad(low_hz), hz_to_rad(high_hz));
  }

  void validate() const {
    if (n_controlled < 0 || n_controlled >= m_total) {
      throw InvalidArgument("FrequencySpec: require 0 <= n_controlled < m_total");
    }
    if (!(omega_high > 0) || !(omega_low >= 0)) {
      throw InvalidArgument("FrequencySpec: frequency bounds must be positive");
    }
    if (!(omega_low < omega_high)) throw InvalidArgument("FrequencySpec: require omega_low < omega_high");
    if (n_controlled > 0 && !(omega_low > 0)) {
      throw InvalidArgument("FrequencySpec: omega_low must be positive when modes are controlled");
    }
  }

  /// Dimensionless constraint values (>= 0 when satisfied) for the flexible
  /// frequencies `omega` (at least m_total entries, rad/s).
  Eigen::VectorXd constraint_values(const Eigen::VectorXd& omega) const {
    Eigen::VectorXd c(m_total);
    for (int i = 0; i < m_total; ++i) {
      c[i] = i < n_controlled ? 1.0 - omega[i] / omega_low : omega[i] / omega_high - 1.0;
    }
    return c;
  }
};

/// Everything besides θ_p that defines the structural model of a design.
struct DesignContext {
  double stage_edge{0.3};
  MaterialSpec material{};
  std::vector<LumpedAttachment> attachments{};
  int resolution{30};
  double damping_ratio{0.005};
  /// Modes solved beyond the 6 rigid and m_total constrained ones.
  int extra_modes{4};
  MeshOptions mesh{false};
  AssemblyOptions assembly{};
  ModalSolveOptions solve{};

  static DesignContext reference() {
    DesignContext c;
    c.attachments = corner_magnet_arrays(c.stage_edge);
    return c;
  }
};

struct DesignEvaluation {
  StageParams params{};
  double mass{0.0};
  /// First m_total flexible frequencies, rad/s.
  Eigen::VectorXd flexible_frequencies;
  std::shared_ptr<const ModalModel> model;
};

namespace detail {

template <class E>
[[noreturn]] void rethrow_with_params(const E& e, const StageParams& p) {
  throw E(std::string(e.what()) + " [design " + p.to_string() + "]");
}

}  // namespace detail

/// Structural evaluation of candidate designs, cached by the exact parameter
/// vector. Safe to share between threads.
class DesignEvaluator {
 public:
  DesignEvaluator(DesignContext context, int m_total) : context_(std::move(context)), m_total_(m_total) {
    if (m_total_ < 1) throw InvalidArgument("DesignEvaluator: m_total must be >= 1");
    context_.material.validate();
    if (!(context_.damping_ratio > 0 && context_.damping_ratio < 1)) {
      throw InvalidArgument("DesignEvaluator: damping ratio must lie in (0, 1)");
    }
  }

  const DesignContext& context() const { return context_; }
  int m_total() const { return m_total_; }

  const DesignEvaluation& evaluate(const StageParams& params) {
    const auto key = params.to_vector();
    const Key k{key[0], key[1], key[2], key[3], key[4]};
    std::lock_guard<std::mutex> lock(mutex_);
    if (auto it = cache_.find(k); it != cache_.end()) return *it->second;
    auto eval = std::make_unique<DesignEvaluation>(compute(params));
    ++fe_solves_;
    return *cache_.emplace(k, std::move(eval)).first->second;
  }

  int fe_solves() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return fe_solves_;
  }

 private:
  using Key = std::array<double, StageParams::kSize>;

  DesignEvaluation compute(const StageParams& params) const {
    try {
      auto mesh = std::make_shared<const FEMesh>(
          build_mesh(params, context_.stage_edge, context_.resolution, context_.mesh));
      const int n_modes = 6 + m_total_ + std::max(context_.extra_modes, 2);
      auto model = std::make_shared<ModalModel>(modal_analysis(mesh, context_.material, context_.attachments,
                                                               n_modes, context_.damping_ratio,
                                                               context_.assembly, context_.solve));
      if (model->n_rigid != 6) {
        std::ostringstream os;
        os << "expected 6 rigid-body modes, found " << model->n_rigid;
        throw ConvergenceError(os.str());
      }
      if (model->flexible_count() < m_total_) {
        throw ConvergenceError("fewer flexible modes than constrained modes");
      }
      DesignEvaluation out;
      out.params = params;
      out.mass = stage_mass(*mesh, context_.material, context_.attachments);
      out.flexible_frequencies = model->frequencies.segment(model->n_rigid, m_total_);
      out.model = std::move(model);
      return out;
    } catch (const MeshResolutionError& e) {
      detail::rethrow_with_params(e, params);
    } catch (const AssemblyError& e) {
      detail::rethrow_with_params(e, params);
    } catch (const FactorizationError& e) {
      detail::rethrow_with_params(e, params);
    } catch (const ConvergenceError& e) {
      detail::rethrow_with_params(e, params);
    } catch (const DomainError& e) {
      detail::rethrow_with_params(e, params);
    } catch (const InvalidArgument& e) {
      detail::rethrow_with_params(e, params);
    }
  }

  DesignContext context_;
  int m_total_;
  mutable std::mutex mutex_;
  std::map<Key, std::unique_ptr<DesignEvaluation>> cache_;
  int fe_solves_{0};
};

/// Mass and first m_total flexible frequencies of one design.
inline DesignEvaluation evaluate_design(const StageParams& params, const DesignContext& context,
                                        const FrequencySpec& spec) {
  spec.validate();
  DesignEvaluator evaluator(context, spec.m_total);
  return evaluator.evaluate(params);
}

/// Checks that every point of the box is a valid, manufacturable design.
inline void validate_geometry_bounds(const BoxBounds& bounds, double stage_edge) {
  bounds.validate(StageParams::kSize);
  const auto lo = StageParams::from_vector(bounds.lower);
  const auto hi = StageParams::from_vector(bounds.upper);
  if (lo.base_thickness < kMinBaseThickness * (1 - 1e-12)) {
    throw InvalidArgument("geometry bounds: base_thickness lower bound below the 0.635 mm floor");
  }
  if (lo.rib_width < kMinRibWidth * (1 - 1e-12)) {
    throw InvalidArgument("geometry bounds: rib_width lower bound below the 1.0 mm floor");
  }
  if (lo.rib_height < 0 || lo.rib_pitch <= 0 || lo.frame_width <= 0) {
    throw InvalidArgument("geometry bounds: lower bounds must be positive");
  }
  if (!(lo.rib_pitch > hi.rib_width)) {
    throw InvalidArgument("geometry bounds: rib_pitch lower bound must exceed rib_width upper bound");
  }
  if (!(hi.frame_width < 0.5 * stage_edge)) {
    throw InvalidArgument("geometry bounds: frame_width upper bound must be below half the stage edge");
  }
}

struct GeometryResult {
  /// Optimizer output in physical units (θ_p, kg, dimensionless constraints).
  OptimizationResult optimization;
  StageParams best{};
  double mass{0.0};
  Eigen::VectorXd flexible_frequencies;  // rad/s
  Eigen::VectorXd constraint_values;
  bool feasible{false};
  int fe_solves{0};
  std::shared_ptr<const ModalModel> model;
};

/// Mass minimization under the frequency constraints over the box, with
/// variables scaled to [0, 1].
inline GeometryResult optimize_geometry(const StageParams& initial, const BoxBounds& bounds,
                                        const FrequencySpec& spec, const CobylaSettings& settings,
                                        DesignEvaluator& evaluator) {
  spec.validate();
  if (evaluator.m_total() < spec.m_total) {
    throw InvalidArgument("optimize_geometry: evaluator solves fewer modes than spec.m_total");
  }
  validate_geometry_bounds(bounds, evaluator.context().stage_edge);
  const Eigen::VectorXd x0 = initial.to_vector();
  if (!bounds.contains(x0)) throw InvalidArgument("optimize_geometry: initial design outside bounds");

  const Eigen::VectorXd span = bounds.upper - bounds.lower;
  auto to_physical = [&](const Eigen::VectorXd& u) {
    Eigen::VectorXd x = bounds.lower + span.cwiseProduct(u);
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      if (span[i] == 0) x[i] = bounds.lower[i];
    }
    return x;
  };
  Eigen::VectorXd u0(x0.size());
  BoxBounds unit{Eigen::VectorXd::Zero(x0.size()), Eigen::VectorXd::Ones(x0.size())};
  for (Eigen::Index i = 0; i < x0.size(); ++i) {
    if (span[i] == 0) {
      u0[i] = 0;
      unit.upper[i] = 0;
    } else {
      u0[i] = (x0[i] - bounds.lower[i]) / span[i];
    }
  }

  auto eval = [&](const Eigen::VectorXd& u) -> const DesignEvaluation& {
    return evaluator.evaluate(StageParams::from_vector(to_physical(u)));
  };
  std::vector<ScalarFunction> constraints;
  for (int i = 0; i < spec.m_total; ++i) {
    constraints.emplace_back([&, i](const Eigen::VectorXd& u) {
      return spec.constraint_values(eval(u).flexible_frequencies)[i];
    });
  }
  OptimizationResult opt = cobyla_minimize([&](const Eigen::VectorXd& u) { return eval(u).mass; },
                                           constraints, u0, unit, settings);
  opt.best_point = to_physical(opt.best_point);
  for (auto& rec : opt.history) rec.point = to_physical(rec.point);

  GeometryResult out;
  out.best = StageParams::from_vector(opt.best_point);
  const DesignEvaluation& final_eval = evaluator.evaluate(out.best);
  out.mass = final_eval.mass;
  out.flexible_frequencies = final_eval.flexible_frequencies.head(spec.m_total);
  out.constraint_values = spec.constraint_values(out.flexible_frequencies);
  out.feasible = out.constraint_values.minCoeff() >= -settings.feasibility_tolerance;
  out.model = final_eval.model;
  out.optimization = std::move(opt);
  out.fe_solves = evaluator.fe_solves();
  return out;
}

/// eval_index, θ_p components, mass_kg, min_constraint.
inline void write_history_csv(std::ostream& os, const OptimizationResult& result) {
  os << "eval_index";
  for (const char* name : StageParams::kNames) os << ',' << name;
  os << ",mass_kg,min_constraint\n";
  os.precision(17);
  for (std::size_t e = 0; e < result.history.size(); ++e) {
    const auto& rec = result.history[e];
    os << e + 1;
    for (Eigen::Index i = 0; i < rec.point.size(); ++i) os << ',' << rec.point[i];
    const double cmin = rec.constraints.size() ? rec.constraints.minCoeff() : 0.0;
    os << ',' << rec.objective << ',' << cmin << '\n';
  }
}

}  // namespace stageccd

#endif  // STAGECCD_GEOMETRY_GEOMETRY_OPTIMIZER_HPP
