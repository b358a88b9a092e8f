#ifndef STAGECCD_CONTROL_CONTROLLER_HPP
#define STAGECCD_CONTROL_CONTROLLER_HPP

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <ostream>
#include <sstream>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include "stageccd/errors.hpp"
#include "stageccd/plant/frequency_response.hpp"
#include "stageccd/plant/plant.hpp"

namespace stageccd {

/// PID with second-order lowpass,
///   C(s) = K_p ((s + ω_int)/s) (s/ω_diff + 1) ω_lp² / (s² + 2 z_lp ω_lp s + ω_lp²),
/// with ω_int = ω_bw/α², ω_diff = ω_bw/α and ω_lp = α ω_bw.
struct ControllerParams {
  double kp{1.0};
  double omega_bw{0.0};
  double alpha{3.0};
  double omega_int{0.0};
  double omega_diff{0.0};
  double omega_lp{0.0};
  double z_lp{0.7};

  void validate() const {
    if (!(omega_bw > 0) || !(omega_int > 0) || !(omega_diff > 0) || !(omega_lp > 0)) {
      throw InvalidArgument("ControllerParams: frequencies must be positive");
    }
    if (!(alpha > 1)) throw InvalidArgument("ControllerParams: alpha must exceed 1");
    if (!(z_lp > 0)) throw InvalidArgument("ControllerParams: z_lp must be positive");
    if (!(kp >= 0) || !std::isfinite(kp)) throw InvalidArgument("ControllerParams: kp must be finite and >= 0");
  }
};

inline ControllerParams controller_params(double omega_bw, double alpha = 3.0, double z_lp = 0.7) {
  if (!(omega_bw > 0) || !std::isfinite(omega_bw)) throw InvalidArgument("controller_params: omega_bw must be > 0");
  if (!(alpha > 1)) throw InvalidArgument("controller_params: alpha must exceed 1");
  if (!(z_lp > 0)) throw InvalidArgument("controller_params: z_lp must be positive");
  ControllerParams p;
  p.omega_bw = omega_bw;
  p.alpha = alpha;
  p.omega_int = omega_bw / (alpha * alpha);
  p.omega_diff = omega_bw / alpha;
  p.omega_lp = alpha * omega_bw;
  p.z_lp = z_lp;
  return p;
}

inline Complex integrator_factor(const ControllerParams& p, double w) {
  const Complex s(0.0, w);
  return (s + p.omega_int) / s;
}

inline Complex lead_factor(const ControllerParams& p, double w) { return Complex(1.0, w / p.omega_diff); }

inline Complex lowpass_factor(const ControllerParams& p, double w) {
  const double wl = p.omega_lp;
  return wl * wl / Complex(wl * wl - w * w, 2.0 * p.z_lp * wl * w);
}

/// C(jw) with K_p = 1.
inline Complex unit_controller_value(const ControllerParams& p, double w) {
  if (!(w > 0)) throw InvalidArgument("controller: frequency must be positive");
  return integrator_factor(p, w) * lead_factor(p, w) * lowpass_factor(p, w);
}

inline Complex controller_value(const ControllerParams& p, double w) { return p.kp * unit_controller_value(p, w); }

inline FrequencyResponse controller_response(const ControllerParams& p, const Eigen::VectorXd& grid) {
  p.validate();
  FrequencyResponse fr;
  fr.grid = grid;
  fr.values.resize(grid.size(), 1);
  for (Eigen::Index k = 0; k < grid.size(); ++k) fr.values(k, 0) = controller_value(p, grid[k]);
  fr.labels = {"C"};
  fr.validate();
  return fr;
}

/// Three-state realization: lowpass states (x1, x2) and the integral of x1.
inline StateSpace controller_realization(const ControllerParams& p) {
  p.validate();
  const double wl = p.omega_lp;
  StateSpace ss;
  ss.a = Eigen::MatrixXd::Zero(3, 3);
  ss.a(0, 1) = wl;
  ss.a(1, 0) = -wl;
  ss.a(1, 1) = -2.0 * p.z_lp * wl;
  ss.a(2, 0) = 1.0;
  ss.b = Eigen::MatrixXd::Zero(3, 1);
  ss.b(1, 0) = wl;
  ss.c = Eigen::MatrixXd::Zero(1, 3);
  const double g = p.kp / p.omega_diff;
  ss.c(0, 0) = g * (p.omega_int + p.omega_diff);
  ss.c(0, 1) = g * wl;
  ss.c(0, 2) = g * p.omega_int * p.omega_diff;
  ss.d = Eigen::MatrixXd::Zero(1, 1);
  return ss;
}

/// Block-diagonal controller, channel k driven by plant output k.
inline StateSpace diagonal_controller(const std::vector<ControllerParams>& channels) {
  const auto n = static_cast<Eigen::Index>(channels.size());
  StateSpace ss;
  ss.a = Eigen::MatrixXd::Zero(3 * n, 3 * n);
  ss.b = Eigen::MatrixXd::Zero(3 * n, n);
  ss.c = Eigen::MatrixXd::Zero(n, 3 * n);
  ss.d = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const StateSpace c = controller_realization(channels[static_cast<std::size_t>(k)]);
    ss.a.block(3 * k, 3 * k, 3, 3) = c.a;
    ss.b.block(3 * k, k, 3, 1) = c.b;
    ss.c.block(k, 3 * k, 1, 3) = c.c;
  }
  return ss;
}

using ResponseFunction = std::function<Complex(double)>;

/// K_p placing the gain crossover at params.omega_bw.
inline double tune_gain(const ResponseFunction& g, const ControllerParams& params) {
  const double mag = std::abs(g(params.omega_bw));
  if (!(mag > 0) || !std::isfinite(mag)) {
    throw DomainError("tune_gain: plant magnitude at omega_bw must be positive and finite");
  }
  return 1.0 / (mag * std::abs(unit_controller_value(params, params.omega_bw)));
}

inline double tune_gain(const FrequencyResponse& g, const ControllerParams& params, Eigen::Index channel = 0) {
  return tune_gain([&](double w) { return g.at(w, channel); }, params);
}

struct SensitivityPeak {
  double peak{1.0};
  double omega{0.0};
  bool singular{false};
};

namespace detail {

inline double sensitivity_magnitude(const ResponseFunction& loop, double w, bool& singular) {
  const double d = std::abs(1.0 + loop(w));
  if (!(d >= 1e-12)) {
    singular = true;
    return std::numeric_limits<double>::infinity();
  }
  return 1.0 / d;
}

/// Zooms on a local maximum bracketed by (a, b) until the peak moves < 0.1%.
inline SensitivityPeak refine_peak(const ResponseFunction& loop, double a, double b, double start) {
  SensitivityPeak best{start, 0.5 * (a + b), false};
  for (int iter = 0; iter < 60; ++iter) {
    constexpr int n = 21;
    const double la = std::log(a);
    const double lb = std::log(b);
    int arg = 0;
    double val = -1;
    for (int i = 0; i < n; ++i) {
      const double w = std::exp(la + (lb - la) * i / (n - 1));
      const double s = sensitivity_magnitude(loop, w, best.singular);
      if (best.singular) {
        best.peak = s;
        best.omega = w;
        return best;
      }
      if (s > val) {
        val = s;
        arg = i;
      }
    }
    const double prev = best.peak;
    if (val > best.peak) {
      best.peak = val;
    }
    best.omega = std::exp(la + (lb - la) * arg / (n - 1));
    const int lo = std::max(arg - 1, 0);
    const int hi = std::min(arg + 1, n - 1);
    const double na = std::exp(la + (lb - la) * lo / (n - 1));
    const double nb = std::exp(la + (lb - la) * hi / (n - 1));
    a = na;
    b = nb;
    if (iter > 0 && std::abs(best.peak - prev) <= 1e-3 * prev && b / a - 1 < 1e-4) break;
  }
  return best;
}

}  // namespace detail

/// max |1/(1 + L)| over the grid, each local maximum refined until it moves
/// by less than 0.1%.
inline SensitivityPeak sensitivity_peak(const ResponseFunction& loop, const Eigen::VectorXd& grid) {
  if (grid.size() < 3 || !(grid[0] > 0)) throw InvalidArgument("sensitivity_peak: grid must be positive, >= 3 points");
  const Eigen::Index n = grid.size();
  Eigen::VectorXd s(n);
  SensitivityPeak out{0.0, grid[0], false};
  for (Eigen::Index k = 0; k < n; ++k) {
    s[k] = detail::sensitivity_magnitude(loop, grid[k], out.singular);
    if (out.singular) {
      out.peak = s[k];
      out.omega = grid[k];
      return out;
    }
    if (s[k] > out.peak) {
      out.peak = s[k];
      out.omega = grid[k];
    }
  }
  for (Eigen::Index k = 1; k + 1 < n; ++k) {
    if (s[k] >= s[k - 1] && s[k] >= s[k + 1] && s[k] > 0.5 * out.peak) {
      const SensitivityPeak r = detail::refine_peak(loop, grid[k - 1], grid[k + 1], s[k]);
      if (r.singular || r.peak > out.peak) out = r;
      if (out.singular) return out;
    }
  }
  return out;
}

inline SensitivityPeak sensitivity_peak(const ResponseFunction& g, const ControllerParams& c,
                                        const Eigen::VectorXd& grid) {
  return sensitivity_peak([&](double w) { return g(w) * controller_value(c, w); }, grid);
}

/// Sampled-plant form; refinement interpolates between the plant samples.
inline SensitivityPeak sensitivity_peak(const FrequencyResponse& g, const ControllerParams& c,
                                        Eigen::Index channel = 0) {
  g.validate();
  return sensitivity_peak([&](double w) { return g.at(w, channel) * controller_value(c, w); }, g.grid);
}

/// Negative-feedback interconnection u = -K y of two strictly proper systems;
/// true when every closed-loop eigenvalue has a strictly negative real part.
inline bool closed_loop_stable(const StateSpace& plant, const StateSpace& controller) {
  if (controller.inputs() != plant.outputs() || controller.outputs() != plant.inputs()) {
    throw InvalidArgument("closed_loop_stable: controller wiring does not match the plant");
  }
  if (plant.d.size() && plant.d.cwiseAbs().maxCoeff() != 0.0) {
    throw InvalidArgument("closed_loop_stable: plant must be strictly proper");
  }
  const Eigen::Index np = plant.states();
  const Eigen::Index nc = controller.states();
  Eigen::MatrixXd a(np + nc, np + nc);
  a.topLeftCorner(np, np) = plant.a - plant.b * controller.d * plant.c;
  a.topRightCorner(np, nc) = plant.b * controller.c;
  a.bottomLeftCorner(nc, np) = -controller.b * plant.c;
  a.bottomRightCorner(nc, nc) = controller.a;
  if (a.size() == 0) return true;
  if (!a.allFinite()) return false;
  Eigen::EigenSolver<Eigen::MatrixXd> es(a, false);
  if (es.info() != Eigen::Success) return false;
  return (es.eigenvalues().real().array() < 0).all();
}

inline constexpr double kSynthesisPointsPerDecade = 200.0;

/// Logarithmic grid over [w0, w1] with at least `per_decade` points per decade.
inline Eigen::VectorXd dense_log_grid(double w0, double w1, double per_decade = kSynthesisPointsPerDecade) {
  const int n = std::max(3, static_cast<int>(std::ceil(std::log10(w1 / w0) * per_decade)) + 1);
  return log_grid(w0, w1, n);
}

struct LoopMetrics {
  double bandwidth_hz{0.0};
  double max_sensitivity{1.0};
  double peak_frequency_hz{0.0};
  /// +inf when the phase never crosses -180 degrees.
  double gain_margin_db{std::numeric_limits<double>::infinity()};
  double phase_margin_deg{std::numeric_limits<double>::infinity()};
  bool stable{false};
};

namespace detail {

inline double bisect_root(const std::function<double(double)>& f, double a, double b) {
  double fa = f(a);
  for (int i = 0; i < 100 && b / a - 1 > 1e-12; ++i) {
    const double m = std::sqrt(a * b);
    const double fm = f(m);
    if ((fm > 0) == (fa > 0)) {
      a = m;
      fa = fm;
    } else {
      b = m;
    }
  }
  return std::sqrt(a * b);
}

inline double wrap_deg(double d) {
  while (d > 180.0) d -= 360.0;
  while (d <= -180.0) d += 360.0;
  return d;
}

}  // namespace detail

/// Crossovers and margins of the loop L on `grid`; the sensitivity peak and
/// stability flag are filled by the caller.
inline void loop_crossings(const ResponseFunction& loop, const Eigen::VectorXd& grid, LoopMetrics& m) {
  auto logmag = [&](double w) { return std::log(std::abs(loop(w))); };
  double last_down = 0.0;
  double pm = std::numeric_limits<double>::infinity();
  double gm = std::numeric_limits<double>::infinity();
  double best_gm_distance = std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 1; k < grid.size(); ++k) {
    const double a = grid[k - 1];
    const double b = grid[k];
    const Complex la = loop(a);
    const Complex lb = loop(b);
    const double ma = std::log(std::abs(la));
    const double mb = std::log(std::abs(lb));
    if ((ma > 0) != (mb > 0)) {
      const double wc = detail::bisect_root(logmag, a, b);
      if (ma > 0) last_down = wc;
      pm = std::min(pm, std::abs(detail::wrap_deg(phase_deg(loop(wc)) + 180.0)));
    }
    if ((la.imag() > 0) != (lb.imag() > 0) && la.real() < 0 && lb.real() < 0) {
      const double wp = detail::bisect_root([&](double w) { return loop(w).imag(); }, a, b);
      const double g = -magnitude_db(loop(wp));
      if (std::abs(g) < best_gm_distance) {
        best_gm_distance = std::abs(g);
        gm = g;
      }
    }
  }
  m.bandwidth_hz = rad_to_hz(last_down);
  m.phase_margin_deg = pm;
  m.gain_margin_db = gm;
}

/// One bisection candidate.
struct BandwidthTrial {
  double omega_bw{0.0};
  double kp{0.0};
  double max_sensitivity{0.0};
  bool stable{false};
  bool feasible{false};
};

struct SynthesisSettings {
  double alpha{3.0};
  double z_lp{0.7};
  double robustness_bound{2.0};
  double omega_min{hz_to_rad(1.0)};
  double omega_max{hz_to_rad(1000.0)};
  double relative_tolerance{0.01};

  void validate() const {
    if (!(alpha > 1)) throw InvalidArgument("SynthesisSettings: alpha must exceed 1");
    if (!(z_lp > 0)) throw InvalidArgument("SynthesisSettings: z_lp must be positive");
    if (!(robustness_bound > 1)) throw InvalidArgument("SynthesisSettings: robustness bound must exceed 1");
    if (!(omega_min > 0 && omega_max > omega_min)) {
      throw InvalidArgument("SynthesisSettings: need 0 < omega_min < omega_max");
    }
    if (!(relative_tolerance > 0)) throw InvalidArgument("SynthesisSettings: tolerance must be positive");
  }

  /// Evaluation grid spanning two decades beyond the search range.
  Eigen::VectorXd grid() const { return dense_log_grid(omega_min / 100.0, omega_max * 100.0); }
};

struct ChannelDesign {
  ControllerParams params{};
  LoopMetrics metrics{};
  std::vector<BandwidthTrial> trace;
};

/// Full metrics of the loop formed by `channel` and `params`.
inline LoopMetrics loop_metrics(const ModalChannel& channel, const ControllerParams& params,
                                const Eigen::VectorXd& grid) {
  const ResponseFunction loop = [&](double w) { return channel(w) * controller_value(params, w); };
  LoopMetrics m;
  const SensitivityPeak s = sensitivity_peak(loop, grid);
  m.max_sensitivity = s.peak;
  m.peak_frequency_hz = rad_to_hz(s.omega);
  m.stable = closed_loop_stable(channel.realization(), controller_realization(params));
  loop_crossings(loop, grid, m);
  return m;
}

namespace detail {

inline BandwidthTrial try_bandwidth(const ModalChannel& channel, const SynthesisSettings& st, double wbw,
                                    const Eigen::VectorXd& grid, const StateSpace& plant_ss) {
  BandwidthTrial t;
  t.omega_bw = wbw;
  ControllerParams p = controller_params(wbw, st.alpha, st.z_lp);
  const double mag = std::abs(channel(wbw));
  if (!(mag > 0) || !std::isfinite(mag)) return t;
  p.kp = tune_gain(channel, p);
  t.kp = p.kp;
  t.stable = closed_loop_stable(plant_ss, controller_realization(p));
  const SensitivityPeak s = sensitivity_peak(channel, p, grid);
  t.max_sensitivity = s.singular ? std::numeric_limits<double>::infinity() : s.peak;
  t.feasible = t.stable && !s.singular && s.peak <= st.robustness_bound;
  return t;
}

}  // namespace detail

/// Largest ω_bw in [omega_min, omega_max] (to the relative tolerance) whose
/// tuned loop is stable with sensitivity peak within the bound.
inline ChannelDesign maximize_bandwidth(const ModalChannel& channel, const SynthesisSettings& settings) {
  settings.validate();
  const Eigen::VectorXd grid = settings.grid();
  const StateSpace plant_ss = channel.realization();
  ChannelDesign out;
  auto trial = [&](double w) {
    out.trace.push_back(detail::try_bandwidth(channel, settings, w, grid, plant_ss));
    return out.trace.back();
  };
  const BandwidthTrial first = trial(settings.omega_min);
  if (!first.feasible) {
    std::ostringstream os;
    os << "channel " << channel.label << ": infeasible at the lower search bound " << rad_to_hz(settings.omega_min)
       << " Hz (" << (first.stable ? "sensitivity peak " : "closed loop unstable, peak ") << first.max_sensitivity
       << " vs bound " << settings.robustness_bound << ")";
    throw SynthesisError(os.str());
  }
  double lo = settings.omega_min;
  if (trial(settings.omega_max).feasible) {
    lo = settings.omega_max;
  } else {
    double hi = settings.omega_max;
    while (hi / lo > 1.0 + settings.relative_tolerance) {
      const double mid = std::sqrt(lo * hi);
      if (trial(mid).feasible) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
  }
  out.params = controller_params(lo, settings.alpha, settings.z_lp);
  out.params.kp = tune_gain(channel, out.params);
  out.metrics = loop_metrics(channel, out.params, grid);
  return out;
}

/// freq_hz, mag_db, phase_deg of L = G C.
inline FrequencyResponse loop_response(const ModalChannel& channel, const ControllerParams& params,
                                       const Eigen::VectorXd& grid) {
  FrequencyResponse fr;
  fr.grid = grid;
  fr.values.resize(grid.size(), 1);
  for (Eigen::Index k = 0; k < grid.size(); ++k) fr.values(k, 0) = channel(grid[k]) * controller_value(params, grid[k]);
  fr.labels = {channel.label};
  return fr;
}

inline FrequencyResponse sensitivity_response(const ModalChannel& channel, const ControllerParams& params,
                                              const Eigen::VectorXd& grid) {
  FrequencyResponse fr = loop_response(channel, params, grid);
  for (Eigen::Index k = 0; k < grid.size(); ++k) fr.values(k, 0) = 1.0 / (1.0 + fr.values(k, 0));
  return fr;
}

/// Check of the diagonal controller on the full decoupled plant.
struct MultivariableReport {
  double max_singular_sensitivity{0.0};
  double max_offdiagonal_sensitivity{0.0};
  bool stable{false};
};

inline MultivariableReport multivariable_check(const DecoupledPlant& plant, const std::vector<ControllerParams>& c,
                                               const Eigen::VectorXd& grid) {
  const Eigen::Index n = plant.channels();
  if (static_cast<Eigen::Index>(c.size()) != n) throw InvalidArgument("multivariable_check: one controller per channel");
  MultivariableReport r;
  for (Eigen::Index g = 0; g < grid.size(); ++g) {
    const double w = grid[g];
    Eigen::MatrixXcd l = plant.response(w);
    for (Eigen::Index k = 0; k < n; ++k) l.col(k) *= controller_value(c[static_cast<std::size_t>(k)], w);
    Eigen::MatrixXcd ipl = Eigen::MatrixXcd::Identity(n, n) + l;
    const Eigen::MatrixXcd s = ipl.inverse();
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(s);
    r.max_singular_sensitivity = std::max(r.max_singular_sensitivity, svd.singularValues()[0]);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        if (i != j) r.max_offdiagonal_sensitivity = std::max(r.max_offdiagonal_sensitivity, std::abs(s(i, j)));
      }
    }
  }
  r.stable = closed_loop_stable(plant.realization(), diagonal_controller(c));
  return r;
}

}  // namespace stageccd

#endif  // STAGECCD_CONTROL_CONTROLLER_HPP
