#ifndef STAGECCD_PLACEMENT_PLACEMENT_HPP
#define STAGECCD_PLACEMENT_PLACEMENT_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "stageccd/errors.hpp"
#include "stageccd/geometry/geometry_optimizer.hpp"
#include "stageccd/structural/mode_shape.hpp"
#include "stageccd/structural/modal.hpp"

namespace stageccd {

enum class DeviceKind { kActuator, kSensor };

/// One actuator or sensor channel. Its position is `offset + map * theta`
/// for the placement parameter theta, so a single 2-vector can drive a
/// symmetric multi-device layout. Devices with a zero map are fixed.
struct Device {
  Eigen::Vector2d offset{0.0, 0.0};
  Eigen::Matrix2d map{Eigen::Matrix2d::Zero()};
  Direction direction{Direction::kZ};
  double gain{1.0};
  std::string label;

  Eigen::Vector2d position(const Eigen::Vector2d& theta) const { return offset + map * theta; }
};

struct DevicePattern {
  DeviceKind kind{DeviceKind::kSensor};
  std::vector<Device> devices;

  std::size_t size() const { return devices.size(); }

  std::vector<Eigen::Vector2d> positions(const Eigen::Vector2d& theta) const {
    std::vector<Eigen::Vector2d> out;
    out.reserve(devices.size());
    for (const auto& d : devices) out.push_back(d.position(theta));
    return out;
  }

  /// Four devices mirrored about both centre lines of a square stage; theta
  /// is the position of the first device.
  static DevicePattern symmetric_four(DeviceKind kind, double stage_edge, Direction direction,
                                      const std::string& prefix) {
    DevicePattern p;
    p.kind = kind;
    const std::array<std::array<double, 2>, 4> signs = {{{1, 1}, {-1, 1}, {-1, -1}, {1, -1}}};
    for (std::size_t k = 0; k < 4; ++k) {
      Device d;
      d.map = Eigen::Vector2d(signs[k][0], signs[k][1]).asDiagonal();
      d.offset = Eigen::Vector2d(signs[k][0] > 0 ? 0.0 : stage_edge, signs[k][1] > 0 ? 0.0 : stage_edge);
      d.direction = direction;
      d.label = prefix + std::to_string(k + 1);
      p.devices.push_back(d);
    }
    return p;
  }

  /// Devices at fixed positions, unaffected by theta.
  static DevicePattern fixed(DeviceKind kind, const std::vector<Eigen::Vector2d>& positions,
                             const std::vector<Direction>& directions, const std::vector<std::string>& labels = {}) {
    if (positions.size() != directions.size()) {
      throw InvalidArgument("DevicePattern::fixed: positions and directions differ in length");
    }
    DevicePattern p;
    p.kind = kind;
    for (std::size_t k = 0; k < positions.size(); ++k) {
      Device d;
      d.offset = positions[k];
      d.direction = directions[k];
      d.label = k < labels.size() ? labels[k] : std::string(to_string(directions[k])) + std::to_string(k + 1);
      p.devices.push_back(d);
    }
    return p;
  }

  /// Concatenation of two patterns of the same kind.
  DevicePattern operator+(const DevicePattern& other) const {
    if (other.kind != kind) throw InvalidArgument("DevicePattern: cannot join actuators and sensors");
    DevicePattern p = *this;
    p.devices.insert(p.devices.end(), other.devices.begin(), other.devices.end());
    return p;
  }
};

/// Rectangle of admissible placement parameters, sampled on a grid.
struct PlacementDomain {
  Eigen::Vector2d lower{0.0, 0.0};
  Eigen::Vector2d upper{0.0, 0.0};
  int grid_resolution{21};

  void validate() const {
    if (!(lower.array() <= upper.array()).all()) {
      throw InvalidArgument("PlacementDomain: lower corner must not exceed upper corner");
    }
    if (grid_resolution < 5) throw InvalidArgument("PlacementDomain: grid_resolution must be >= 5");
  }

  std::array<Eigen::Vector2d, 4> corners() const {
    return {lower, Eigen::Vector2d(upper.x(), lower.y()), upper, Eigen::Vector2d(lower.x(), upper.y())};
  }

  /// Distinct samples along one axis (a single sample when the extent is zero).
  std::vector<double> axis_samples(int axis) const {
    const double a = lower[axis];
    const double b = upper[axis];
    if (a == b) return {a};
    std::vector<double> s(static_cast<std::size_t>(grid_resolution));
    for (int k = 0; k < grid_resolution; ++k) {
      s[static_cast<std::size_t>(k)] = k == grid_resolution - 1 ? b : a + (b - a) * k / (grid_resolution - 1);
    }
    return s;
  }
};

namespace detail {

inline void check_positions(const FEMesh& mesh, const DevicePattern& pattern, const Eigen::Vector2d& theta) {
  for (const auto& d : pattern.devices) {
    const Eigen::Vector2d p = d.position(theta);
    if (!mesh.contains(p)) {
      std::ostringstream os;
      os << "device '" << d.label << "' at (" << p.x() << ", " << p.y() << ") lies outside the stage";
      throw DomainError(os.str());
    }
  }
}

}  // namespace detail

/// Checks that every device stays on the stage for every theta in the
/// domain (positions are affine in theta, so the corners suffice).
inline void validate_pattern(const FEMesh& mesh, const DevicePattern& pattern, const PlacementDomain& domain) {
  if (pattern.devices.empty()) throw InvalidArgument("DevicePattern: no devices");
  domain.validate();
  for (const auto& c : domain.corners()) detail::check_positions(mesh, pattern, c);
}

/// Force assembling matrix: one column per actuator channel over the mesh
/// degrees of freedom.
inline Eigen::MatrixXd input_matrix(const FEMesh& mesh, const DevicePattern& pattern, const Eigen::Vector2d& theta) {
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(mesh.dof_count()),
                                            static_cast<Eigen::Index>(pattern.size()));
  for (std::size_t k = 0; k < pattern.size(); ++k) {
    const Device& d = pattern.devices[k];
    b.col(static_cast<Eigen::Index>(k)) = d.gain * point_extractor(mesh, d.position(theta), d.direction);
  }
  return b;
}

inline Eigen::MatrixXd input_matrix(const ModalModel& model, const DevicePattern& pattern, const Eigen::Vector2d& theta) {
  if (!model.mesh) throw InvalidArgument("input_matrix: model carries no mesh");
  return input_matrix(*model.mesh, pattern, theta);
}

/// Measurement assembling matrix: one row per sensor channel.
inline Eigen::MatrixXd output_matrix(const FEMesh& mesh, const DevicePattern& pattern, const Eigen::Vector2d& theta) {
  return input_matrix(mesh, pattern, theta).transpose();
}

inline Eigen::MatrixXd output_matrix(const ModalModel& model, const DevicePattern& pattern, const Eigen::Vector2d& theta) {
  return input_matrix(model, pattern, theta).transpose();
}

/// ‖contraction‖² / (4 ζ ω), the light-damping modal grammian.
inline double modal_grammian(double contraction_norm_sq, double damping_ratio, double omega) {
  if (!(omega > 0)) throw InvalidArgument("modal grammian undefined for a rigid mode (omega = 0)");
  if (!(damping_ratio > 0)) throw InvalidArgument("modal grammian requires a positive damping ratio");
  return contraction_norm_sq / (4.0 * damping_ratio * omega);
}

namespace detail {

inline void require_flexible(const ModalModel& model, int mode) {
  if (mode < 0 || mode >= model.mode_count()) throw InvalidArgument("grammian: mode index out of range");
  if (model.is_rigid(mode)) {
    std::ostringstream os;
    os << "grammian: mode " << mode << " is a rigid-body mode";
    throw InvalidArgument(os.str());
  }
}

}  // namespace detail

/// W_p for mode `mode` (index into the model, rigid modes first).
inline double controllability_grammian(const ModalModel& model, const Eigen::MatrixXd& b_a, int mode) {
  detail::require_flexible(model, mode);
  const double nsq = (model.mode_shapes.col(mode).transpose() * b_a).squaredNorm();
  return modal_grammian(nsq, model.damping[mode], model.frequencies[mode]);
}

/// W_o for mode `mode`; `c_s` has one row per sensor channel.
inline double observability_grammian(const ModalModel& model, const Eigen::MatrixXd& c_s, int mode) {
  detail::require_flexible(model, mode);
  const double nsq = (c_s * model.mode_shapes.col(mode)).squaredNorm();
  return modal_grammian(nsq, model.damping[mode], model.frequencies[mode]);
}

struct GrammianReport {
  /// Per flexible mode 1..m_total; only the list matching the pattern kind is filled.
  std::vector<double> per_mode_controllability;
  std::vector<double> per_mode_observability;
  double objective_value{0.0};
};

/// Σ_{controlled} W − γ Σ_{uncontrolled} W from raw per-mode grammians.
inline double weighted_grammian_sum(const std::vector<double>& w, int n_controlled, double gamma) {
  double controlled = 0;
  double uncontrolled = 0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    (static_cast<int>(i) < n_controlled ? controlled : uncontrolled) += w[i];
  }
  return controlled - gamma * uncontrolled;
}

/// Grammians of flexible modes 1..m_total for the pattern at theta, and the
/// weighted placement objective.
inline GrammianReport placement_objective(const ModalModel& model, const DevicePattern& pattern,
                                          const Eigen::Vector2d& theta, const FrequencySpec& spec, double gamma) {
  if (!(gamma >= 0)) throw InvalidArgument("placement_objective: gamma must be non-negative");
  spec.validate();
  if (!model.mesh) throw InvalidArgument("placement_objective: model carries no mesh");
  if (model.flexible_count() < spec.m_total) {
    throw InvalidArgument("placement_objective: model has fewer flexible modes than m_total");
  }
  detail::check_positions(*model.mesh, pattern, theta);
  Eigen::VectorXd nsq = Eigen::VectorXd::Zero(model.mode_count());
  for (const auto& d : pattern.devices) {
    const Eigen::VectorXd v = d.gain * mode_shape_at(model, d.position(theta), d.direction);
    nsq += v.cwiseAbs2();
  }
  std::vector<double> w(static_cast<std::size_t>(spec.m_total));
  for (int k = 0; k < spec.m_total; ++k) {
    const int i = model.flexible_index(k);
    w[static_cast<std::size_t>(k)] = modal_grammian(nsq[i], model.damping[i], model.frequencies[i]);
  }
  GrammianReport r;
  r.objective_value = weighted_grammian_sum(w, spec.n_controlled, gamma);
  (pattern.kind == DeviceKind::kActuator ? r.per_mode_controllability : r.per_mode_observability) = std::move(w);
  return r;
}

struct PlacementSample {
  Eigen::Vector2d theta;
  double objective{0.0};
};

struct PlacementOptions {
  /// Pattern search stops once both step lengths fall below this (m).
  double refine_tolerance{1e-5};
  bool refine{true};
  int max_refine_iterations{10000};
};

struct PlacementResult {
  Eigen::Vector2d theta{0.0, 0.0};
  GrammianReport report;
  PlacementSample best_grid;
  std::vector<PlacementSample> grid;
  int evaluations{0};
};

/// Grid search followed by compass pattern search. Ties go to the smallest
/// (x, y) in lexicographic order.
inline PlacementResult optimize_placement(const ModalModel& model, const DevicePattern& pattern,
                                          const PlacementDomain& domain, const FrequencySpec& spec, double gamma,
                                          const PlacementOptions& options = {}) {
  if (!model.mesh) throw InvalidArgument("optimize_placement: model carries no mesh");
  domain.validate();
  if (pattern.devices.empty()) throw InvalidArgument("optimize_placement: empty device pattern");

  PlacementResult out;
  auto objective = [&](const Eigen::Vector2d& t) {
    ++out.evaluations;
    return placement_objective(model, pattern, t, spec, gamma).objective_value;
  };
  auto lex_less = [](const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  };
  auto better = [&](double ja, const Eigen::Vector2d& a, double jb, const Eigen::Vector2d& b) {
    return ja > jb || (ja == jb && lex_less(a, b));
  };

  const auto xs = domain.axis_samples(0);
  const auto ys = domain.axis_samples(1);
  bool found = false;
  for (double x : xs) {
    for (double y : ys) {
      const Eigen::Vector2d t(x, y);
      try {
        detail::check_positions(*model.mesh, pattern, t);
      } catch (const DomainError&) {
        continue;
      }
      const double j = objective(t);
      out.grid.push_back({t, j});
      if (!found || better(j, t, out.best_grid.objective, out.best_grid.theta)) {
        out.best_grid = {t, j};
        found = true;
      }
    }
  }
  if (!found) throw DomainError("optimize_placement: every grid point places a device off the stage");

  Eigen::Vector2d best = out.best_grid.theta;
  double jbest = out.best_grid.objective;
  if (options.refine) {
    Eigen::Vector2d step;
    for (int a = 0; a < 2; ++a) {
      const double span = domain.upper[a] - domain.lower[a];
      step[a] = span > 0 ? span / std::max(1, domain.grid_resolution - 1) : 0.0;
    }
    const std::array<Eigen::Vector2d, 4> dirs = {Eigen::Vector2d(1, 0), Eigen::Vector2d(-1, 0),
                                                 Eigen::Vector2d(0, 1), Eigen::Vector2d(0, -1)};
    for (int it = 0; it < options.max_refine_iterations && step.maxCoeff() >= options.refine_tolerance; ++it) {
      bool moved = false;
      for (const auto& d : dirs) {
        const Eigen::Vector2d delta = d.cwiseProduct(step);
        if (delta.isZero()) continue;
        const Eigen::Vector2d t = (best + delta).cwiseMax(domain.lower).cwiseMin(domain.upper);
        if (t == best) continue;
        try {
          detail::check_positions(*model.mesh, pattern, t);
        } catch (const DomainError&) {
          continue;
        }
        const double j = objective(t);
        if (j > jbest) {
          best = t;
          jbest = j;
          moved = true;
          break;
        }
      }
      if (!moved) step *= 0.5;
    }
  }
  out.theta = best;
  out.report = placement_objective(model, pattern, best, spec, gamma);
  return out;
}

/// x, y, J rows of the grid evaluation.
inline void write_placement_map_csv(std::ostream& os, const PlacementResult& result) {
  os << "x,y,J\n";
  os.precision(17);
  for (const auto& s : result.grid) os << s.theta.x() << ',' << s.theta.y() << ',' << s.objective << '\n';
}

}  // namespace stageccd

#endif  // STAGECCD_PLACEMENT_PLACEMENT_HPP
