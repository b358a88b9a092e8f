#ifndef STAGECCD_PLANT_PLANT_HPP
#define STAGECCD_PLANT_PLANT_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/LU>
#include <Eigen/SVD>

#include "stageccd/errors.hpp"
#include "stageccd/plant/frequency_response.hpp"
#include "stageccd/structural/assembly.hpp"
#include "stageccd/structural/modal.hpp"

namespace stageccd {

/// Continuous-time linear system x' = A x + B u, y = C x + D u.
struct StateSpace {
  Eigen::MatrixXd a;
  Eigen::MatrixXd b;
  Eigen::MatrixXd c;
  Eigen::MatrixXd d;

  Eigen::Index states() const { return a.rows(); }
  Eigen::Index inputs() const { return b.cols(); }
  Eigen::Index outputs() const { return c.rows(); }

  Eigen::MatrixXcd response(double w) const {
    const Eigen::Index n = states();
    Eigen::MatrixXcd out = d.cast<Complex>();
    if (n == 0) return out;
    Eigen::MatrixXcd m = -a.cast<Complex>();
    m.diagonal().array() += Complex(0.0, w);
    out += c.cast<Complex>() * m.partialPivLu().solve(b.cast<Complex>());
    return out;
  }
};

/// Modal superposition model of the stage between actuator channels and
/// sensor channels.
///
/// Mode i obeys q_i'' + 2 ζ_i ω_i q_i' + ω_i² q_i = input.row(i) u and the
/// sensors read y = output q. Rigid-body modes carry ω = ζ = 0 exactly.
struct ModalStateSpace {
  std::vector<int> modes;  // indices into the modal model
  Eigen::VectorXd omega;
  Eigen::VectorXd zeta;
  int n_rigid{0};
  Eigen::MatrixXd input;   // modes x actuators, φ_iᵀ B_a
  Eigen::MatrixXd output;  // sensors x modes, C_s φ_i

  Eigen::Index mode_count() const { return omega.size(); }
  Eigen::Index state_dim() const { return 2 * omega.size(); }

  Complex modal_factor(Eigen::Index i, double w) const {
    return 1.0 / Complex(omega[i] * omega[i] - w * w, 2.0 * zeta[i] * omega[i] * w);
  }

  Eigen::MatrixXcd response(double w) const {
    Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(output.rows(), input.cols());
    for (Eigen::Index i = 0; i < mode_count(); ++i) {
      h += modal_factor(i, w) * (output.col(i) * input.row(i)).cast<Complex>();
    }
    return h;
  }

  /// Block-diagonal realization with state ordering (q_1, q_1', q_2, ...).
  StateSpace realization() const {
    const Eigen::Index n = mode_count();
    StateSpace ss;
    ss.a = Eigen::MatrixXd::Zero(2 * n, 2 * n);
    ss.b = Eigen::MatrixXd::Zero(2 * n, input.cols());
    ss.c = Eigen::MatrixXd::Zero(output.rows(), 2 * n);
    ss.d = Eigen::MatrixXd::Zero(output.rows(), input.cols());
    for (Eigen::Index i = 0; i < n; ++i) {
      ss.a(2 * i, 2 * i + 1) = 1.0;
      ss.a(2 * i + 1, 2 * i) = -omega[i] * omega[i];
      ss.a(2 * i + 1, 2 * i + 1) = -2.0 * zeta[i] * omega[i];
      ss.b.row(2 * i + 1) = input.row(i);
      ss.c.col(2 * i) = output.col(i);
    }
    return ss;
  }
};

/// Modal plant over the selected modes, which must include every rigid mode.
inline ModalStateSpace build_plant(const ModalModel& model, const Eigen::MatrixXd& b_a, const Eigen::MatrixXd& c_s,
                                   std::vector<int> modes) {
  if (b_a.rows() != model.mode_shapes.rows() || c_s.cols() != model.mode_shapes.rows()) {
    throw InvalidArgument("build_plant: device matrices do not match the model's degrees of freedom");
  }
  std::sort(modes.begin(), modes.end());
  modes.erase(std::unique(modes.begin(), modes.end()), modes.end());
  for (int i : modes) {
    if (i < 0 || i >= model.mode_count()) throw InvalidArgument("build_plant: mode index out of range");
  }
  for (int r = 0; r < model.n_rigid; ++r) {
    if (!std::binary_search(modes.begin(), modes.end(), r)) {
      std::ostringstream os;
      os << "build_plant: mode selection omits rigid-body mode " << r << "; rigid-body control is mandatory";
      throw InvalidArgument(os.str());
    }
  }
  ModalStateSpace p;
  p.modes = modes;
  p.n_rigid = model.n_rigid;
  const auto n = static_cast<Eigen::Index>(modes.size());
  p.omega.resize(n);
  p.zeta.resize(n);
  p.input.resize(n, b_a.cols());
  p.output.resize(c_s.rows(), n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const int i = modes[static_cast<std::size_t>(k)];
    const bool rigid = model.is_rigid(i);
    p.omega[k] = rigid ? 0.0 : model.frequencies[i];
    p.zeta[k] = rigid ? 0.0 : model.damping[i];
    p.input.row(k) = model.mode_shapes.col(i).transpose() * b_a;
    p.output.col(k) = c_s * model.mode_shapes.col(i);
  }
  return p;
}

/// Every mode the model carries.
inline ModalStateSpace build_plant(const ModalModel& model, const Eigen::MatrixXd& b_a, const Eigen::MatrixXd& c_s) {
  std::vector<int> all(static_cast<std::size_t>(model.mode_count()));
  for (int i = 0; i < model.mode_count(); ++i) all[static_cast<std::size_t>(i)] = i;
  return build_plant(model, b_a, c_s, all);
}

inline constexpr std::array<const char*, 6> kRigidCoordinateNames = {"x", "y", "z", "rx", "ry", "rz"};

/// Names of the generalized coordinates: six rigid-body ones, then q1..qn.
inline std::vector<std::string> generalized_labels(int n_controlled) {
  std::vector<std::string> l(kRigidCoordinateNames.begin(), kRigidCoordinateNames.end());
  for (int k = 0; k < n_controlled; ++k) l.push_back("q" + std::to_string(k + 1));
  return l;
}

struct PseudoInverse {
  Eigen::MatrixXd inverse;
  double condition_number{0.0};
};

namespace detail {

/// Moore-Penrose inverse of a full-column-rank (or full-row-rank) matrix,
/// with a rank check that names the least identifiable coordinate.
inline PseudoInverse checked_pinv(const Eigen::MatrixXd& m, bool coordinates_are_columns,
                                  const std::vector<std::string>& names, const char* what) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd s = svd.singularValues();
  const Eigen::Index need = coordinates_are_columns ? m.cols() : m.rows();
  const double tol = std::max(m.rows(), m.cols()) * s[0] * 1e-10;
  Eigen::Index rank = 0;
  while (rank < s.size() && s[rank] > tol) ++rank;
  if (rank < need) {
    const Eigen::VectorXd v = coordinates_are_columns ? Eigen::VectorXd(svd.matrixV().col(s.size() - 1))
                                                      : Eigen::VectorXd(svd.matrixU().col(s.size() - 1));
    Eigen::Index worst = 0;
    v.cwiseAbs().maxCoeff(&worst);
    std::ostringstream os;
    os << what << " has rank " << rank << " < " << need << "; coordinate '"
       << (worst < static_cast<Eigen::Index>(names.size()) ? names[static_cast<std::size_t>(worst)] : "?")
       << "' cannot be separated";
    throw RankDeficiencyError(os.str());
  }
  Eigen::MatrixXd sinv = Eigen::MatrixXd::Zero(s.size(), s.size());
  for (Eigen::Index k = 0; k < rank; ++k) sinv(k, k) = 1.0 / s[k];
  PseudoInverse out;
  out.inverse = svd.matrixV() * sinv * svd.matrixU().transpose();
  out.condition_number = s[0] / s[rank - 1];
  return out;
}

inline Eigen::MatrixXd generalized_fields(const ModalModel& model, const Eigen::Vector2d& pivot,
                                          const std::vector<int>& controlled) {
  if (!model.mesh) throw InvalidArgument("decoupling: model carries no mesh");
  const Eigen::MatrixXd r = rigid_body_fields(*model.mesh, pivot);
  Eigen::MatrixXd g(r.rows(), 6 + static_cast<Eigen::Index>(controlled.size()));
  g.leftCols(6) = r;
  for (std::size_t k = 0; k < controlled.size(); ++k) {
    const int i = controlled[k];
    if (i < 0 || i >= model.mode_count() || model.is_rigid(i)) {
      throw InvalidArgument("decoupling: controlled modes must be flexible modes of the model");
    }
    g.col(6 + static_cast<Eigen::Index>(k)) = model.mode_shapes.col(i);
  }
  return g;
}

}  // namespace detail

/// Static decoupling transforms around the plant.
struct DecouplingPair {
  Eigen::MatrixXd t_meas;  // generalized coordinates x sensors
  Eigen::MatrixXd t_act;   // actuators x generalized forces
  Eigen::MatrixXd sensor_map;      // A_y: sensors x generalized coordinates
  Eigen::MatrixXd allocation_map;  // A_u: generalized forces x actuators
  double meas_condition{0.0};
  double act_condition{0.0};
  std::vector<std::string> labels;
};

/// T_meas = pinv(A_y) where A_y holds the sensor readings for unit rigid-body
/// motions about `pivot` and for unit controlled-mode coordinates.
inline Eigen::MatrixXd measurement_decoupling(const ModalModel& model, const Eigen::MatrixXd& c_s,
                                              const Eigen::Vector2d& pivot, const std::vector<int>& controlled,
                                              Eigen::MatrixXd* sensor_map = nullptr, double* condition = nullptr) {
  const Eigen::MatrixXd ay = c_s * detail::generalized_fields(model, pivot, controlled);
  if (ay.rows() < ay.cols()) {
    std::ostringstream os;
    os << "measurement decoupling needs at least " << ay.cols() << " sensor channels, got " << ay.rows();
    throw RankDeficiencyError(os.str());
  }
  const auto names = generalized_labels(static_cast<int>(controlled.size()));
  PseudoInverse p = detail::checked_pinv(ay, true, names, "sensor map");
  if (sensor_map) *sensor_map = ay;
  if (condition) *condition = p.condition_number;
  return p.inverse;
}

/// T_act = pinv(A_u) where A_u maps actuator forces to the rigid-body
/// resultants about `pivot` and to the controlled-mode forces.
inline Eigen::MatrixXd actuation_recoupling(const ModalModel& model, const Eigen::MatrixXd& b_a,
                                            const Eigen::Vector2d& pivot, const std::vector<int>& controlled,
                                            Eigen::MatrixXd* allocation_map = nullptr, double* condition = nullptr) {
  const Eigen::MatrixXd au = detail::generalized_fields(model, pivot, controlled).transpose() * b_a;
  if (au.cols() < au.rows()) {
    std::ostringstream os;
    os << "actuation recoupling needs at least " << au.rows() << " actuator channels, got " << au.cols();
    throw RankDeficiencyError(os.str());
  }
  const auto names = generalized_labels(static_cast<int>(controlled.size()));
  PseudoInverse p = detail::checked_pinv(au, false, names, "allocation map");
  if (allocation_map) *allocation_map = au;
  if (condition) *condition = p.condition_number;
  return p.inverse;
}

inline DecouplingPair make_decoupling(const ModalModel& model, const Eigen::MatrixXd& b_a, const Eigen::MatrixXd& c_s,
                                      const Eigen::Vector2d& pivot, const std::vector<int>& controlled) {
  DecouplingPair d;
  d.t_meas = measurement_decoupling(model, c_s, pivot, controlled, &d.sensor_map, &d.meas_condition);
  d.t_act = actuation_recoupling(model, b_a, pivot, controlled, &d.allocation_map, &d.act_condition);
  d.labels = generalized_labels(static_cast<int>(controlled.size()));
  return d;
}

/// SISO modal residue model G(s) = Σ r_i / (s² + 2 ζ_i ω_i s + ω_i²). All
/// rigid-body contributions share ω = 0 and are merged into the first term.
struct ModalChannel {
  Eigen::VectorXd residues;
  Eigen::VectorXd omega;
  Eigen::VectorXd zeta;
  std::string label;

  Complex operator()(double w) const {
    Complex g = 0.0;
    for (Eigen::Index i = 0; i < omega.size(); ++i) {
      g += residues[i] / Complex(omega[i] * omega[i] - w * w, 2.0 * zeta[i] * omega[i] * w);
    }
    return g;
  }

  FrequencyResponse sample(const Eigen::VectorXd& grid) const {
    FrequencyResponse fr;
    fr.grid = grid;
    fr.values.resize(grid.size(), 1);
    for (Eigen::Index k = 0; k < grid.size(); ++k) fr.values(k, 0) = (*this)(grid[k]);
    fr.labels = {label};
    return fr;
  }

  /// Block-diagonal realization, two states per term, y = Σ r_i q_i. Terms
  /// whose residue is below `relative_cutoff` times the largest one are left
  /// out, so a channel that does not see the rigid body has no poles at 0.
  StateSpace realization(double relative_cutoff = 1e-10) const {
    const double rmax = residues.size() ? residues.cwiseAbs().maxCoeff() : 0.0;
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < omega.size(); ++i) {
      if (std::abs(residues[i]) > relative_cutoff * rmax) keep.push_back(i);
    }
    const auto n = static_cast<Eigen::Index>(keep.size());
    StateSpace ss;
    ss.a = Eigen::MatrixXd::Zero(2 * n, 2 * n);
    ss.b = Eigen::MatrixXd::Zero(2 * n, 1);
    ss.c = Eigen::MatrixXd::Zero(1, 2 * n);
    ss.d = Eigen::MatrixXd::Zero(1, 1);
    for (Eigen::Index j = 0; j < n; ++j) {
      const Eigen::Index i = keep[static_cast<std::size_t>(j)];
      ss.a(2 * j, 2 * j + 1) = 1.0;
      ss.a(2 * j + 1, 2 * j) = -omega[i] * omega[i];
      ss.a(2 * j + 1, 2 * j + 1) = -2.0 * zeta[i] * omega[i];
      ss.b(2 * j + 1, 0) = 1.0;
      ss.c(0, 2 * j) = residues[i];
    }
    return ss;
  }
};

/// The plant seen through the decoupling transforms: generalized forces in,
/// generalized coordinates out.
struct DecoupledPlant {
  ModalStateSpace plant;
  DecouplingPair decoupling;
  Eigen::MatrixXd left;   // coordinates x modes
  Eigen::MatrixXd right;  // modes x generalized forces

  Eigen::Index channels() const { return left.rows(); }

  Eigen::MatrixXcd response(double w) const {
    Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(left.rows(), right.cols());
    for (Eigen::Index i = 0; i < plant.mode_count(); ++i) {
      h += plant.modal_factor(i, w) * (left.col(i) * right.row(i)).cast<Complex>();
    }
    return h;
  }

  ModalChannel channel(Eigen::Index k) const {
    if (k < 0 || k >= channels()) throw InvalidArgument("DecoupledPlant::channel: index out of range");
    const Eigen::Index nf = plant.mode_count() - plant.n_rigid;
    ModalChannel ch;
    ch.residues.resize(nf + 1);
    ch.omega.resize(nf + 1);
    ch.zeta.resize(nf + 1);
    ch.residues[0] = 0.0;
    ch.omega[0] = 0.0;
    ch.zeta[0] = 0.0;
    for (Eigen::Index i = 0; i < plant.n_rigid; ++i) ch.residues[0] += left(k, i) * right(i, k);
    for (Eigen::Index i = plant.n_rigid; i < plant.mode_count(); ++i) {
      const Eigen::Index j = i - plant.n_rigid + 1;
      ch.residues[j] = left(k, i) * right(i, k);
      ch.omega[j] = plant.omega[i];
      ch.zeta[j] = plant.zeta[i];
    }
    ch.label = k < static_cast<Eigen::Index>(decoupling.labels.size())
                   ? decoupling.labels[static_cast<std::size_t>(k)]
                   : "ch" + std::to_string(k + 1);
    return ch;
  }

  /// Multivariable realization of T_meas P T_act.
  StateSpace realization() const {
    StateSpace ss = plant.realization();
    ss.b = ss.b * decoupling.t_act;
    ss.c = decoupling.t_meas * ss.c;
    ss.d = Eigen::MatrixXd::Zero(ss.c.rows(), ss.b.cols());
    return ss;
  }
};

inline DecoupledPlant decouple(const ModalStateSpace& plant, const DecouplingPair& pair) {
  if (pair.t_meas.cols() != plant.output.rows() || pair.t_act.rows() != plant.input.cols()) {
    throw InvalidArgument("decouple: transform sizes do not match the plant");
  }
  DecoupledPlant d;
  d.plant = plant;
  d.decoupling = pair;
  d.left = pair.t_meas * plant.output;
  d.right = plant.input * pair.t_act;
  return d;
}

/// Sampled diagonal entry k of T_meas P T_act.
inline FrequencyResponse decoupled_channel_response(const ModalStateSpace& plant, const Eigen::MatrixXd& t_meas,
                                                    const Eigen::MatrixXd& t_act, Eigen::Index k,
                                                    const Eigen::VectorXd& grid,
                                                    const std::vector<std::string>& labels = {}) {
  DecouplingPair pair;
  pair.t_meas = t_meas;
  pair.t_act = t_act;
  pair.labels = labels.empty() ? generalized_labels(static_cast<int>(t_meas.rows()) - 6) : labels;
  const DecoupledPlant d = decouple(plant, pair);
  FrequencyResponse fr = d.channel(k).sample(grid);
  fr.validate();
  return fr;
}

/// Full sampled matrix T_meas P T_act, columns ordered row-major (k, l).
inline FrequencyResponse decoupled_matrix_response(const DecoupledPlant& d, const Eigen::VectorXd& grid) {
  const Eigen::Index n = d.channels();
  FrequencyResponse fr;
  fr.grid = grid;
  fr.values.resize(grid.size(), n * n);
  for (Eigen::Index g = 0; g < grid.size(); ++g) {
    const Eigen::MatrixXcd h = d.response(grid[g]);
    for (Eigen::Index k = 0; k < n; ++k) {
      for (Eigen::Index l = 0; l < n; ++l) fr.values(g, k * n + l) = h(k, l);
    }
  }
  const auto& names = d.decoupling.labels;
  for (Eigen::Index k = 0; k < n; ++k) {
    for (Eigen::Index l = 0; l < n; ++l) {
      fr.labels.push_back(names[static_cast<std::size_t>(k)] + "_" + names[static_cast<std::size_t>(l)]);
    }
  }
  return fr;
}

}  // namespace stageccd

#endif  // STAGECCD_PLANT_PLANT_HPP
