#include <gtest/gtest.h>

#include <numbers>

#include "test_support.hpp"

using namespace stageccd;
using stageccd::testing::kProposedTheta;
using stageccd::testing::proposed_model;

namespace {

ModalModel scalar_model(double omega, double shape, int n_rigid) {
  ModalModel m;
  m.frequencies = Eigen::VectorXd::Constant(1, omega);
  m.mode_shapes = Eigen::MatrixXd::Constant(1, 1, shape);
  m.damping = Eigen::VectorXd::Constant(1, 0.01);
  m.n_rigid = n_rigid;
  return m;
}

struct ReferencePlant {
  PipelineConfig cfg;
  Eigen::MatrixXd b;
  Eigen::MatrixXd c;
  Eigen::Vector2d pivot;
  ModalStateSpace plant;
};

ReferencePlant reference_plant(const ModalModel& m, const Eigen::Vector2d& theta) {
  ReferencePlant r;
  r.cfg = stageccd::testing::reference_config();
  r.b = input_matrix(m, r.cfg.actuators(), theta);
  r.c = output_matrix(m, r.cfg.sensors(), theta);
  r.pivot = mass_center(*m.mesh, assemble(*m.mesh, MaterialSpec{}, corner_magnet_arrays(0.3)).mass);
  r.plant = build_plant(m, r.b, r.c);
  return r;
}

std::vector<int> first_flexible(const ModalModel& m, int n) {
  std::vector<int> v;
  for (int k = 0; k < n; ++k) v.push_back(m.flexible_index(k));
  return v;
}

}  // namespace

TEST(BuildPlant, RigidDoubleIntegratorByHand) {
  const double mass = 2.0;
  const ModalModel m = scalar_model(0.0, 1.0 / std::sqrt(mass), 1);
  const Eigen::MatrixXd one = Eigen::MatrixXd::Ones(1, 1);
  const ModalStateSpace p = build_plant(m, one, one);
  const double w = 2 * std::numbers::pi * 10;
  EXPECT_NEAR(std::abs(p.response(w)(0, 0)), 1.0 / (mass * w * w), 1e-15);
  EXPECT_NEAR(std::abs(p.response(w)(0, 0)), 1.2665e-4, 1e-8);
  EXPECT_NEAR(std::abs(p.realization().response(w)(0, 0)), 1.0 / (mass * w * w), 1e-15);
}

TEST(BuildPlant, ResonanceMagnitude) {
  const double w = 100.0;
  const ModalModel m = scalar_model(w, 1.0, 0);
  const ModalStateSpace p = build_plant(m, Eigen::MatrixXd::Constant(1, 1, 2.0), Eigen::MatrixXd::Constant(1, 1, 3.0));
  EXPECT_NEAR(std::abs(p.response(w)(0, 0)), 6.0 / (2 * 0.01 * w * w), 1e-12);
}

TEST(BuildPlant, ZeroInputGivesZeroResponse) {
  const ModalModel& m = proposed_model();
  const Eigen::MatrixXd b = Eigen::MatrixXd::Zero(m.mode_shapes.rows(), 3);
  const Eigen::MatrixXd c = output_matrix(m, stageccd::testing::reference_config().sensors(), kProposedTheta);
  const ModalStateSpace p = build_plant(m, b, c);
  for (double w : {1.0, 200.0, 4000.0}) EXPECT_EQ(p.response(w).cwiseAbs().maxCoeff(), 0.0);
}

TEST(BuildPlant, OmittingRigidModeRejected) {
  const ModalModel& m = proposed_model();
  const ReferencePlant r = reference_plant(m, kProposedTheta);
  try {
    build_plant(m, r.b, r.c, {0, 1, 2, 3, 4, 6, 7});
    FAIL() << "expected InvalidArgument";
  } catch (const InvalidArgument& e) {
    EXPECT_NE(std::string(e.what()).find("rigid-body control is mandatory"), std::string::npos);
  }
  EXPECT_THROW(build_plant(m, r.b, r.c, {0, 1, 2, 3, 4, 5, 99}), InvalidArgument);
}

TEST(BuildPlant, PolesAreStableOrAtOrigin) {
  const ReferencePlant r = reference_plant(proposed_model(), kProposedTheta);
  Eigen::EigenSolver<Eigen::MatrixXd> es(r.plant.realization().a);
  int origin = 0;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    const auto l = es.eigenvalues()[i];
    if (std::abs(l) < 1e-9) {
      ++origin;
    } else {
      EXPECT_LT(l.real(), 0.0);
    }
  }
  EXPECT_EQ(origin, 12);
}

TEST(BuildPlant, ReciprocityOfCollocatedSets) {
  const ModalModel& m = proposed_model();
  const PipelineConfig cfg = stageccd::testing::reference_config();
  const Eigen::MatrixXd b = input_matrix(m, cfg.actuators(), {0, 0});
  const ModalStateSpace p = build_plant(m, b, b.transpose());
  for (double hz : {0.5, 34.0, 150.0, 600.0, 2000.0}) {
    const Eigen::MatrixXcd h = p.response(hz_to_rad(hz));
    EXPECT_LE((h - h.transpose()).norm(), 1e-9 * h.norm()) << hz;
  }
}

TEST(BuildPlant, TruncatedModeBarelyMattersADecadeBelow) {
  const ModalModel& m = proposed_model();
  const ReferencePlant r = reference_plant(m, kProposedTheta);
  const int last = m.flexible_index(4);
  std::vector<int> without;
  for (int i = 0; i < last; ++i) without.push_back(i);
  std::vector<int> with = without;
  with.push_back(last);
  const ModalStateSpace a = build_plant(m, r.b, r.c, without);
  const ModalStateSpace b = build_plant(m, r.b, r.c, with);
  const double w = m.frequencies[last] / 10.0;
  EXPECT_LT((b.response(w) - a.response(w)).norm(), 0.01 * a.response(w).norm());
}

TEST(MeasurementDecoupling, SquareInverseAndRigidFieldRecovery) {
  const ModalModel& m = proposed_model();
  const ReferencePlant r = reference_plant(m, kProposedTheta);
  ASSERT_EQ(r.c.rows(), 7);
  Eigen::MatrixXd ay;
  double cond = 0;
  const Eigen::MatrixXd t = measurement_decoupling(m, r.c, r.pivot, first_flexible(m, 1), &ay, &cond);
  ASSERT_EQ(t.rows(), 7);
  ASSERT_EQ(t.cols(), 7);
  EXPECT_LE((t * ay - Eigen::MatrixXd::Identity(7, 7)).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_GE(cond, 1.0);

  const Eigen::MatrixXd fields = rigid_body_fields(*m.mesh, r.pivot);
  for (int g = 0; g < 6; ++g) {
    const Eigen::VectorXd q = t * (r.c * fields.col(g));
    for (int k = 0; k < 7; ++k) EXPECT_NEAR(q[k], k == g ? 1.0 : 0.0, 1e-10) << "field " << g << " coord " << k;
  }
}

TEST(MeasurementDecoupling, CoincidentSensorsAreRankDeficient) {
  const ModalModel& m = proposed_model();
  const PipelineConfig cfg = stageccd::testing::reference_config();
  DevicePattern p = DevicePattern::fixed(DeviceKind::kSensor, std::vector<Eigen::Vector2d>(4, {0.1, 0.1}),
                                         std::vector<Direction>(4, Direction::kZ));
  std::vector<Eigen::Vector2d> pos;
  std::vector<Direction> dir;
  for (const auto& d : cfg.lateral_sensors) {
    pos.push_back(d.position);
    dir.push_back(d.direction);
  }
  p = p + DevicePattern::fixed(DeviceKind::kSensor, pos, dir);
  const Eigen::MatrixXd c = output_matrix(m, p, {0, 0});
  EXPECT_THROW(measurement_decoupling(m, c, {0.15, 0.15}, first_flexible(m, 1)), RankDeficiencyError);
  EXPECT_THROW(measurement_decoupling(m, c.topRows(5), {0.15, 0.15}, {}), RankDeficiencyError);
}

TEST(ActuationRecoupling, SymmetricSplitOfVerticalForce) {
  const ModalModel& m = proposed_model();
  const ReferencePlant r = reference_plant(m, kProposedTheta);
  const auto labels = r.cfg.actuators();
  const Eigen::MatrixXd t = actuation_recoupling(m, r.b, r.pivot, {});
  ASSERT_EQ(t.rows(), 12);
  for (Eigen::Index a = 0; a < 12; ++a) {
    const bool vertical = labels.devices[static_cast<std::size_t>(a)].direction == Direction::kZ;
    EXPECT_NEAR(t(a, 2), vertical ? 0.25 : 0.0, 1e-10) << labels.devices[static_cast<std::size_t>(a)].label;
  }
}

TEST(ActuationRecoupling, YawTorqueUsesTangentialInPlaneForces) {
  const ModalModel& m = proposed_model();
  const ReferencePlant r = reference_plant(m, kProposedTheta);
  const auto act = r.cfg.actuators();
  const Eigen::MatrixXd t = actuation_recoupling(m, r.b, r.pivot, {});
  double mag = -1;
  for (Eigen::Index a = 0; a < 12; ++a) {
    const Device& d = act.devices[static_cast<std::size_t>(a)];
    const Eigen::Vector2d rel = d.offset - r.pivot;
    const double v = t(a, 5);
    if (d.direction == Direction::kZ) {
      EXPECT_NEAR(v, 0.0, 1e-10);
      continue;
    }
    if (mag < 0) mag = std::abs(v);
    EXPECT_NEAR(std::abs(v), mag, 1e-10 * mag);
    const double tangential = d.direction == Direction::kX ? -rel.y() : rel.x();
    EXPECT_GT(v * tangential, 0.0) << d.label;
  }
  EXPECT_GT(mag, 0.0);
}

TEST(ActuationRecoupling, RightInverseOnReferenceCase) {
  const ModalModel& m = proposed_model();
  const ReferencePlant r = reference_plant(m, kProposedTheta);
  Eigen::MatrixXd au;
  const Eigen::MatrixXd t = actuation_recoupling(m, r.b, r.pivot, first_flexible(m, 1), &au);
  EXPECT_LE((au * t - Eigen::MatrixXd::Identity(7, 7)).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_THROW(actuation_recoupling(m, r.b.leftCols(5), r.pivot, {}), RankDeficiencyError);
}

TEST(DecoupledPlant, RigidVerticalChannelAtLowFrequency) {
  const ModalModel& m = proposed_model();
  const ReferencePlant r = reference_plant(m, kProposedTheta);
  const DecoupledPlant d = decouple(r.plant, make_decoupling(m, r.b, r.c, r.pivot, first_flexible(m, 1)));
  const double mass = stage_mass(*m.mesh, MaterialSpec{}, corner_magnet_arrays(0.3));
  const double w = 2 * std::numbers::pi * 1.0;
  const FrequencyResponse fr =
      decoupled_channel_response(r.plant, d.decoupling.t_meas, d.decoupling.t_act, 2, Eigen::Vector2d(w, 2 * w));
  EXPECT_EQ(fr.labels[0], "z");
  EXPECT_NEAR(std::abs(fr.values(0, 0)), 1.0 / (mass * w * w), 0.01 / (mass * w * w));
}

TEST(DecoupledPlant, ExactlyDiagonalOnDecoupledModes) {
  const ModalModel& m = proposed_model();
  const ReferencePlant r = reference_plant(m, kProposedTheta);
  std::vector<int> keep = {0, 1, 2, 3, 4, 5, m.flexible_index(0)};
  const ModalStateSpace p = build_plant(m, r.b, r.c, keep);
  const DecoupledPlant d = decouple(p, make_decoupling(m, r.b, r.c, r.pivot, first_flexible(m, 1)));
  for (double w : log_grid(hz_to_rad(0.1), hz_to_rad(5000), 50)) {
    Eigen::MatrixXcd h = d.response(w);
    const double scale = h.diagonal().cwiseAbs().maxCoeff();
    h.diagonal().setZero();
    EXPECT_LE(h.cwiseAbs().maxCoeff(), 1e-8 * scale) << w;
  }
}

TEST(DecoupledPlant, OffDiagonalSmallAtControlledMode) {
  const ModalModel& m = proposed_model();
  const ReferencePlant r = reference_plant(m, kProposedTheta);
  const DecoupledPlant d = decouple(r.plant, make_decoupling(m, r.b, r.c, r.pivot, first_flexible(m, 1)));
  const Eigen::MatrixXcd h = d.response(m.frequencies[m.flexible_index(0)]);
  for (Eigen::Index k = 0; k < h.rows(); ++k) {
    for (Eigen::Index l = 0; l < h.cols(); ++l) {
      if (k == l) continue;
      EXPECT_LE(std::abs(h(k, l)), 0.1 * std::abs(h(k, k))) << d.decoupling.labels[k] << "/" << d.decoupling.labels[l];
    }
  }
}

TEST(DecoupledPlant, BaselineVerticalChannelResonatesAtFirstCoupledMode) {
  const ModalModel& m = stageccd::testing::baseline_model();
  const Eigen::Vector2d theta = stageccd::testing::reference_config().magnet_center_theta();
  const ReferencePlant r = reference_plant(m, theta);
  const DecoupledPlant d = decouple(r.plant, make_decoupling(m, r.b, r.c, r.pivot, {}));
  const ModalChannel z = d.channel(2);
  ASSERT_EQ(z.label, "z");
  const double rigid = std::abs(z.residues[0]);
  ASSERT_GT(rigid, 0.0);

  // The first flexible mode is a twist: by symmetry it does not reach the z channel.
  EXPECT_LT(std::abs(z.residues[1]), 1e-10 * rigid);
  Eigen::Index first = -1;
  for (Eigen::Index j = 1; j < z.residues.size(); ++j) {
    if (std::abs(z.residues[j]) > 1e-6 * rigid) {
      first = j;
      break;
    }
  }
  ASSERT_GT(first, 1);
  const double wr = z.omega[first];
  EXPECT_EQ(wr, m.frequencies[m.flexible_index(static_cast<int>(first) - 1)]);

  const Eigen::VectorXd g = log_grid(0.97 * wr, 1.03 * wr, 601);
  Eigen::Index peak = 0;
  double best = 0;
  for (Eigen::Index k = 0; k < g.size(); ++k) {
    if (std::abs(z(g[k])) > best) {
      best = std::abs(z(g[k]));
      peak = k;
    }
  }
  EXPECT_GT(peak, 0);
  EXPECT_LT(peak, g.size() - 1);
  EXPECT_NEAR(g[peak], wr, 0.005 * wr);
  EXPECT_GT(best, 10.0 * rigid / (wr * wr));
}
