#include <gtest/gtest.h>

#include <numbers>

#include "test_support.hpp"

using namespace stageccd;

namespace {

constexpr double kPi = std::numbers::pi;

ModalChannel double_integrator(double mass = 1.0, double sign = 1.0) {
  ModalChannel ch;
  ch.residues = Eigen::VectorXd::Constant(1, sign / mass);
  ch.omega = Eigen::VectorXd::Zero(1);
  ch.zeta = Eigen::VectorXd::Zero(1);
  ch.label = "di";
  return ch;
}

ModalChannel rigid_plus_mode(double mode_hz, double residue) {
  ModalChannel ch;
  ch.residues = (Eigen::VectorXd(2) << 1.0, residue).finished();
  ch.omega = (Eigen::VectorXd(2) << 0.0, hz_to_rad(mode_hz)).finished();
  ch.zeta = (Eigen::VectorXd(2) << 0.0, 0.005).finished();
  ch.label = "flex";
  return ch;
}

ControllerParams tuned(const ModalChannel& ch, double w) {
  ControllerParams p = controller_params(w);
  p.kp = tune_gain(ch, p);
  return p;
}

const DecoupledPlant& proposed_plant() {
  static const DecoupledPlant d = [] {
    const ModalModel& m = stageccd::testing::proposed_model();
    const PipelineConfig cfg = stageccd::testing::reference_config();
    const Eigen::MatrixXd b = input_matrix(m, cfg.actuators(), stageccd::testing::kProposedTheta);
    const Eigen::MatrixXd c = output_matrix(m, cfg.sensors(), stageccd::testing::kProposedTheta);
    const Eigen::Vector2d pivot = mass_center(*m.mesh, assemble(*m.mesh, MaterialSpec{}, corner_magnet_arrays(0.3)).mass);
    return decouple(build_plant(m, b, c), make_decoupling(m, b, c, pivot, {m.flexible_index(0)}));
  }();
  return d;
}

}  // namespace

TEST(ControllerParams, DerivedFrequencies) {
  const double w = 2 * kPi * 100;
  const ControllerParams p = controller_params(w, 3.0);
  EXPECT_DOUBLE_EQ(p.omega_int, 2 * kPi * 100 / 9);
  EXPECT_DOUBLE_EQ(p.omega_diff, 2 * kPi * 100 / 3);
  EXPECT_DOUBLE_EQ(p.omega_lp, 2 * kPi * 300);
  EXPECT_EQ(p.z_lp, 0.7);
  EXPECT_EQ(p.kp, 1.0);
  for (double wb : {1.0, 123.4, 2 * kPi * 1000}) {
    const ControllerParams q = controller_params(wb);
    EXPECT_NEAR(q.omega_lp / q.omega_int, 27.0, 1e-13);
    EXPECT_NEAR(q.omega_lp / q.omega_bw, 3.0, 1e-15);
    EXPECT_NEAR(q.omega_bw / q.omega_diff, 3.0, 1e-15);
  }
}

TEST(ControllerParams, RegeneratingFromBandwidthIsExact) {
  const ControllerParams p = controller_params(777.7, 2.5, 0.6);
  const ControllerParams q = controller_params(p.omega_bw, p.alpha, p.z_lp);
  EXPECT_EQ(p.omega_int, q.omega_int);
  EXPECT_EQ(p.omega_diff, q.omega_diff);
  EXPECT_EQ(p.omega_lp, q.omega_lp);
}

TEST(ControllerParams, InvalidInputsRejected) {
  EXPECT_THROW(controller_params(100.0, 1.0), InvalidArgument);
  EXPECT_THROW(controller_params(100.0, 0.5), InvalidArgument);
  EXPECT_THROW(controller_params(0.0), InvalidArgument);
  EXPECT_THROW(controller_params(100.0, 3.0, 0.0), InvalidArgument);
}

TEST(ControllerResponse, MagnitudeAtBandwidthByHand) {
  ControllerParams p = controller_params(2 * kPi * 100);
  p.kp = 2.5;
  const double f1 = std::sqrt(1.0 + 1.0 / 81.0);
  const double f2 = std::sqrt(10.0);
  const double f3 = 9.0 / std::sqrt(64.0 + 4.2 * 4.2);
  const double hand = f1 * f2 * f3;
  EXPECT_NEAR(f1, 1.00615, 1e-5);
  EXPECT_NEAR(f2, 3.16228, 1e-5);
  EXPECT_NEAR(f3, 0.99607, 1e-5);
  EXPECT_NEAR(std::abs(controller_value(p, p.omega_bw)), hand * p.kp, 1e-4 * hand * p.kp);
  EXPECT_NEAR(std::abs(controller_value(p, p.omega_bw)) / p.kp, 3.169, 1e-3);
}

TEST(ControllerResponse, FactorProductIdentity) {
  ControllerParams p = controller_params(2 * kPi * 37);
  p.kp = 12.5;
  const Eigen::VectorXd grid = log_grid(0.1, 1e6, 300);
  const FrequencyResponse fr = controller_response(p, grid);
  EXPECT_EQ(fr.labels[0], "C");
  for (Eigen::Index k = 0; k < grid.size(); ++k) {
    const Complex s(0.0, grid[k]);
    const Complex integ = (s + p.omega_int) / s;
    const Complex lead = s / p.omega_diff + 1.0;
    const Complex lp = p.omega_lp * p.omega_lp / (s * s + 2.0 * p.z_lp * p.omega_lp * s + p.omega_lp * p.omega_lp);
    const Complex expect = p.kp * integ * lead * lp;
    EXPECT_LE(std::abs(fr.values(k, 0) - expect), 1e-12 * std::abs(expect));
    const Complex factors = p.kp * integrator_factor(p, grid[k]) * lead_factor(p, grid[k]) * lowpass_factor(p, grid[k]);
    EXPECT_LE(std::abs(fr.values(k, 0) - factors), 1e-12 * std::abs(expect));
  }
}

TEST(ControllerResponse, RolloffAndZeroGain) {
  ControllerParams p = controller_params(100.0);
  p.kp = 3.0;
  const double a = std::abs(controller_value(p, 1e5));
  const double b = std::abs(controller_value(p, 1e6));
  EXPECT_LT(b, a);
  EXPECT_NEAR(a / b, 10.0, 0.1);
  EXPECT_LT(std::abs(controller_value(p, 1e9)), 1e-3);
  p.kp = 0.0;
  const FrequencyResponse fr = controller_response(p, log_grid(1.0, 1e4, 20));
  EXPECT_EQ(fr.values.cwiseAbs().maxCoeff(), 0.0);
}

TEST(ControllerRealization, MatchesTransferFunction) {
  ControllerParams p = controller_params(321.0, 3.0, 0.7);
  p.kp = 4.2;
  const StateSpace ss = controller_realization(p);
  EXPECT_EQ(ss.states(), 3);
  for (double w : {1.0, 30.0, 321.0, 5000.0}) {
    const Complex expect = controller_value(p, w);
    EXPECT_LE(std::abs(ss.response(w)(0, 0) - expect), 1e-10 * std::abs(expect)) << w;
  }
}

TEST(TuneGain, DoubleIntegratorByHand) {
  const ModalChannel g = double_integrator(1.0);
  const ControllerParams p = controller_params(2 * kPi * 100);
  const double w = p.omega_bw;
  const double kp = tune_gain(g, p);
  EXPECT_NEAR(kp, w * w / std::abs(unit_controller_value(p, w)), 1e-9 * kp);
  EXPECT_NEAR(kp, 394784.176 / 3.169242, 1e-4 * kp);
  EXPECT_NEAR(kp, 1.2457e5, 5.0);

  const ModalChannel g2 = double_integrator(0.5);
  EXPECT_NEAR(tune_gain(g2, p), 0.5 * kp, 1e-15 * kp);

  ControllerParams q = p;
  q.kp = kp;
  EXPECT_NEAR(std::abs(g(w) * controller_value(q, w)), 1.0, 1e-9);
}

TEST(TuneGain, SampledPlantOutsideGridRejected) {
  const FrequencyResponse fr = double_integrator().sample(log_grid(1.0, 100.0, 50));
  EXPECT_THROW(tune_gain(fr, controller_params(500.0)), DomainError);
  EXPECT_NO_THROW(tune_gain(fr, controller_params(50.0)));
}

TEST(SensitivityPeak, TrivialLoops) {
  const Eigen::VectorXd grid = log_grid(1.0, 1e4, 100);
  EXPECT_DOUBLE_EQ(sensitivity_peak([](double) { return Complex(0.0); }, grid).peak, 1.0);
  EXPECT_DOUBLE_EQ(sensitivity_peak([](double) { return Complex(-0.5); }, grid).peak, 2.0);
  EXPECT_TRUE(sensitivity_peak([](double) { return Complex(-1.0); }, grid).singular);
  ControllerParams off = controller_params(100.0);
  off.kp = 0.0;
  EXPECT_DOUBLE_EQ(sensitivity_peak(double_integrator(), off, grid).peak, 1.0);
}

TEST(SensitivityPeak, ReferenceVerticalLoopMatchesFineGrid) {
  const ModalChannel z = proposed_plant().channel(2);
  ASSERT_EQ(z.label, "z");
  SynthesisSettings st;
  const ChannelDesign d = maximize_bandwidth(z, st);
  const Eigen::VectorXd fine = dense_log_grid(st.omega_min / 100, st.omega_max * 100, 10 * kSynthesisPointsPerDecade);
  double brute = 0;
  for (Eigen::Index k = 0; k < fine.size(); ++k) {
    brute = std::max(brute, 1.0 / std::abs(1.0 + z(fine[k]) * controller_value(d.params, fine[k])));
  }
  EXPECT_NEAR(d.metrics.max_sensitivity, brute, 0.005 * brute);
  EXPECT_TRUE(d.metrics.stable);
}

TEST(ClosedLoopStable, OpenRigidBodyIsNotAsymptoticallyStable) {
  ControllerParams p = controller_params(100.0);
  p.kp = 0.0;
  EXPECT_FALSE(closed_loop_stable(double_integrator().realization(), controller_realization(p)));
  EXPECT_FALSE(closed_loop_stable(rigid_plus_mode(50, 0.5).realization(), controller_realization(p)));
}

TEST(ClosedLoopStable, FilteredPdStabilizesDoubleIntegrator) {
  // C(s) = kp + kd N s / (s + N)
  const double kp = 1.0, kd = 2.0, n = 100.0;
  StateSpace c;
  c.a = Eigen::MatrixXd::Constant(1, 1, -n);
  c.b = Eigen::MatrixXd::Constant(1, 1, 1.0);
  c.c = Eigen::MatrixXd::Constant(1, 1, -kd * n * n);
  c.d = Eigen::MatrixXd::Constant(1, 1, kp + kd * n);
  EXPECT_TRUE(closed_loop_stable(double_integrator().realization(), c));
  StateSpace neg = c;
  neg.c *= -1.0;
  neg.d *= -1.0;
  EXPECT_FALSE(closed_loop_stable(double_integrator().realization(), neg));
}

TEST(ClosedLoopStable, TunedLoopAgreesWithFinitePeak) {
  const ModalChannel g = double_integrator();
  const ControllerParams p = tuned(g, 200.0);
  EXPECT_TRUE(closed_loop_stable(g.realization(), controller_realization(p)));
  const SensitivityPeak s = sensitivity_peak(g, p, dense_log_grid(1.0, 1e5));
  EXPECT_FALSE(s.singular);
  EXPECT_LT(s.peak, 2.0);
}

TEST(LoopMetrics, CrossoverAtTargetBandwidth) {
  const ModalChannel g = double_integrator();
  const ControllerParams p = tuned(g, 2 * kPi * 100);
  const LoopMetrics m = loop_metrics(g, p, dense_log_grid(1.0, 1e6));
  EXPECT_NEAR(m.bandwidth_hz, 100.0, 1e-6);
  EXPECT_GT(m.phase_margin_deg, 30.0);
  EXPECT_LT(m.phase_margin_deg, 90.0);
  EXPECT_GT(m.gain_margin_db, 0.0);
  EXPECT_TRUE(m.stable);
}

TEST(MaximizeBandwidth, DoubleIntegratorReachesUpperBound) {
  SynthesisSettings st;
  st.omega_min = hz_to_rad(1);
  st.omega_max = hz_to_rad(500);
  const ChannelDesign d = maximize_bandwidth(double_integrator(3.0), st);
  EXPECT_EQ(d.params.omega_bw, st.omega_max);
  EXPECT_NEAR(d.metrics.bandwidth_hz, 500.0, 1e-6);
  EXPECT_LE(d.metrics.max_sensitivity, 2.0 + 1e-6);
  EXPECT_GE(d.metrics.max_sensitivity, 0.99);
  EXPECT_TRUE(d.metrics.stable);
  EXPECT_EQ(d.trace.size(), 2u);
}

TEST(MaximizeBandwidth, ResonanceLimitsBandwidth) {
  const ModalChannel g = rigid_plus_mode(200.0, 4.0);
  SynthesisSettings st;
  const ChannelDesign d = maximize_bandwidth(g, st);
  EXPECT_LT(d.params.omega_bw, st.omega_max);
  EXPECT_GT(d.params.omega_bw, st.omega_min);
  EXPECT_LT(rad_to_hz(d.params.omega_bw), 200.0);
  EXPECT_LE(d.metrics.max_sensitivity, 2.0 + 1e-6);
  EXPECT_GE(d.metrics.max_sensitivity, 0.99);
  EXPECT_TRUE(d.metrics.stable);

  // Bracket closed to the tolerance: some infeasible trial lies within 1%.
  double lowest_infeasible = st.omega_max;
  for (const auto& t : d.trace) {
    if (!t.feasible) lowest_infeasible = std::min(lowest_infeasible, t.omega_bw);
  }
  EXPECT_LE(lowest_infeasible / d.params.omega_bw, 1.0 + st.relative_tolerance + 1e-12);

  // Feasible set is downward closed along the trace (checked, not assumed).
  const Eigen::VectorXd grid = st.grid();
  const StateSpace ss = g.realization();
  for (const auto& t : d.trace) {
    if (!t.feasible) continue;
    EXPECT_TRUE(detail::try_bandwidth(g, st, 0.9 * t.omega_bw, grid, ss).feasible) << t.omega_bw;
  }
  for (const auto& t : d.trace) {
    if (t.stable) {
      EXPECT_TRUE(std::isfinite(t.max_sensitivity));
    }
  }
}

TEST(MaximizeBandwidth, InfeasibleLowerBoundRaises) {
  SynthesisSettings st;
  EXPECT_THROW(maximize_bandwidth(double_integrator(1.0, -1.0), st), SynthesisError);
  st.omega_max = st.omega_min;
  EXPECT_THROW(maximize_bandwidth(double_integrator(), st), InvalidArgument);
}

TEST(MaximizeBandwidth, ReferenceChannelsRespectBound) {
  const DecoupledPlant& d = proposed_plant();
  const ModalModel& m = stageccd::testing::proposed_model();
  for (Eigen::Index k = 0; k < d.channels(); ++k) {
    SynthesisSettings st;
    if (k >= 6) st.omega_min = 2.0 * m.frequencies[m.flexible_index(static_cast<int>(k) - 6)];
    const ChannelDesign c = maximize_bandwidth(d.channel(k), st);
    EXPECT_LE(c.metrics.max_sensitivity, 2.0 + 1e-6) << d.channel(k).label;
    EXPECT_GE(c.metrics.max_sensitivity, 1.0 - 1e-2) << d.channel(k).label;
    EXPECT_TRUE(c.metrics.stable) << d.channel(k).label;
  }
}

TEST(Multivariable, DiagonalLoopOnReferencePlant) {
  const DecoupledPlant& d = proposed_plant();
  const ModalModel& m = stageccd::testing::proposed_model();
  std::vector<ControllerParams> cs;
  for (Eigen::Index k = 0; k < d.channels(); ++k) {
    SynthesisSettings st;
    if (k >= 6) st.omega_min = 2.0 * m.frequencies[m.flexible_index(static_cast<int>(k) - 6)];
    cs.push_back(maximize_bandwidth(d.channel(k), st).params);
  }
  const MultivariableReport r = multivariable_check(d, cs, log_grid(hz_to_rad(0.1), hz_to_rad(5000), 400));
  EXPECT_TRUE(r.stable);
  EXPECT_GE(r.max_singular_sensitivity, 1.0);
  EXPECT_TRUE(std::isfinite(r.max_offdiagonal_sensitivity));
  cs.pop_back();
  EXPECT_THROW(multivariable_check(d, cs, log_grid(1, 10, 5)), InvalidArgument);
}
