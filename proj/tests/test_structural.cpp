#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "test_support.hpp"

using namespace stageccd;
using stageccd::testing::plain_plate;

namespace {

double sparse_norm(const SparseMatrix& a) { return a.norm(); }

Eigen::MatrixXd dense(const SparseMatrix& a) { return Eigen::MatrixXd(a); }

ModalModel plate_modes(const StageParams& p, int res, const std::vector<LumpedAttachment>& att, int n = 10,
                       const MaterialSpec& mat = {}, ModalSolveOptions solve = {}) {
  auto mesh = std::make_shared<const FEMesh>(build_mesh(p, 0.3, res, MeshOptions{false}));
  return modal_analysis(mesh, mat, att, n, 0.005, {}, solve);
}

}  // namespace

TEST(Mesh, StructuredCounts) {
  const FEMesh m = build_mesh(plain_plate(), 0.3, 20);
  EXPECT_EQ(m.element_count(), 400u);
  EXPECT_EQ(m.node_count(), 441u);
  EXPECT_EQ(m.dof_count(), 2205u);
}

TEST(Mesh, ZeroRibHeightGivesUniformThickness) {
  StageParams p = plain_plate(2e-3);
  const FEMesh m = build_mesh(p, 0.3, 24);
  for (double t : m.element_thickness) EXPECT_DOUBLE_EQ(t, 2e-3);
}

TEST(Mesh, RibPatternMatchesPointSampling) {
  StageParams p{2e-3, 10e-3, 5e-3, 0.075, 10e-3};
  const int res = 60;
  const double edge = 0.3;
  const FEMesh m = build_mesh(p, edge, res);

  // Strips written out by hand: frame plus centre lines at 75, 150 and 225 mm.
  const std::vector<std::pair<double, double>> strips = {
      {0.0, 0.010}, {0.0725, 0.0775}, {0.1475, 0.1525}, {0.2225, 0.2275}, {0.290, 0.300}};
  const double h = edge / res;
  std::vector<double> cover(res);
  const int samples = 2000;
  for (int i = 0; i < res; ++i) {
    int hit = 0;
    for (int s = 0; s < samples; ++s) {
      const double x = (i + (s + 0.5) / samples) * h;
      for (const auto& [a, b] : strips) {
        if (x >= a && x <= b) {
          ++hit;
          break;
        }
      }
    }
    cover[i] = static_cast<double>(hit) / samples;
  }
  for (int j = 0; j < res; ++j) {
    for (int i = 0; i < res; ++i) {
      const std::size_t e = static_cast<std::size_t>(j * res + i);
      EXPECT_NEAR(m.coverage_y[e], cover[i], 1e-3);
      EXPECT_NEAR(m.coverage_x[e], cover[j], 1e-3);
    }
  }

  // Interior rib lines: maximal runs of covered columns away from the frame.
  int lines = 0;
  bool in_run = false;
  for (int i = 0; i < res; ++i) {
    const double x = (i + 0.5) * h;
    const bool covered = m.coverage_y[static_cast<std::size_t>(i)] > 0 && x > 0.010 && x < 0.290;
    if (covered && !in_run) ++lines;
    in_run = covered;
  }
  EXPECT_EQ(lines, 3);
  EXPECT_DOUBLE_EQ(m.element_thickness[0], p.base_thickness + p.rib_height);
}

TEST(Mesh, RejectsUnresolvedRibs) {
  StageParams p{2e-3, 10e-3, 2e-3, 0.075, 10e-3};
  EXPECT_THROW(build_mesh(p, 0.3, 30), MeshResolutionError);
  EXPECT_NO_THROW(build_mesh(p, 0.3, 30, MeshOptions{false}));
  EXPECT_THROW(build_mesh(p, 0.3, 7, MeshOptions{false}), InvalidArgument);
}

TEST(Mesh, RejectsInvalidParams) {
  StageParams p = plain_plate();
  p.base_thickness = 0.5e-3;
  EXPECT_THROW(build_mesh(p, 0.3, 20), InvalidArgument);
  p = plain_plate();
  p.rib_width = 0.8e-3;
  EXPECT_THROW(build_mesh(p, 0.3, 20), InvalidArgument);
  p = plain_plate();
  p.rib_pitch = p.rib_width;
  EXPECT_THROW(build_mesh(p, 0.3, 20), InvalidArgument);
}

TEST(StageMass, PlateAndMagnetByHand) {
  const FEMesh m = build_mesh(plain_plate(3e-3), 0.3, 20);
  EXPECT_NEAR(stage_mass(m, MaterialSpec{}, {}), 0.3 * 0.3 * 0.003 * 2810.0, 1e-12);
  EXPECT_NEAR(stage_mass(m, MaterialSpec{}, {}), 0.7587, 1e-4);
  const auto magnet = LumpedAttachment::magnet_array({0.1, 0.1});
  EXPECT_NEAR(magnet.mass, 0.06985 * 0.06985 * 0.00635 * 7500.0, 1e-12);
  EXPECT_NEAR(magnet.mass, 0.2324, 1e-4);
  EXPECT_NEAR(stage_mass(m, MaterialSpec{}, {magnet}) - stage_mass(m, MaterialSpec{}, {}), magnet.mass, 1e-12);
}

TEST(Assembly, SymmetryAndRigidNullity) {
  const FEMesh m = build_mesh(stageccd::testing::proposed_params(), 0.3, 16, MeshOptions{false});
  const StructuralMatrices mk = assemble(m, MaterialSpec{}, corner_magnet_arrays(0.3));
  const SparseMatrix mt = mk.mass.transpose();
  const SparseMatrix kt = mk.stiffness.transpose();
  EXPECT_EQ(sparse_norm(mk.mass - mt), 0.0);
  EXPECT_LE(sparse_norm(mk.stiffness - kt), 1e-9 * sparse_norm(mk.stiffness));

  const Eigen::MatrixXd r = rigid_body_fields(m, Eigen::Vector2d(0.13, 0.17));
  for (Eigen::Index c = 0; c < r.cols(); ++c) {
    const Eigen::VectorXd kr = mk.stiffness * r.col(c);
    EXPECT_LE(kr.norm(), 1e-8 * sparse_norm(mk.stiffness) * r.col(c).norm()) << "rigid field " << c;
  }
}

TEST(Assembly, TranslationalMassMatchesStageMass) {
  const FEMesh m = build_mesh(stageccd::testing::proposed_params(), 0.3, 20, MeshOptions{false});
  const auto att = corner_magnet_arrays(0.3);
  const StructuralMatrices mk = assemble(m, MaterialSpec{}, att);
  for (NodeDof d : {NodeDof::kU, NodeDof::kV, NodeDof::kW}) {
    Eigen::VectorXd one = Eigen::VectorXd::Zero(mk.mass.rows());
    for (std::size_t n = 0; n < m.node_count(); ++n) one[FEMesh::dof(static_cast<int>(n), d)] = 1.0;
    const double total = one.dot(mk.mass * one);
    const double expect = stage_mass(m, MaterialSpec{}, att);
    EXPECT_NEAR(total, expect, 1e-10 * expect);
  }
  const Eigen::Vector2d c = mass_center(m, mk.mass);
  EXPECT_NEAR(c.x(), 0.15, 1e-12);
  EXPECT_NEAR(c.y(), 0.15, 1e-12);
}

TEST(Assembly, MassIsPositiveDefinite) {
  const FEMesh m = build_mesh(plain_plate(), 0.3, 8);
  const StructuralMatrices mk = assemble(m, MaterialSpec{}, {});
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(dense(mk.mass));
  EXPECT_GT(es.eigenvalues().minCoeff(), 0.0);
}

TEST(Assembly, DegenerateElementIsNamed) {
  FEMesh m = build_mesh(plain_plate(), 0.3, 8);
  // Node 10 is the far corner of element 0; moving it past node 0 folds the element.
  m.nodes[10] = m.nodes[0] - Eigen::Vector2d(0.01, 0.01);
  try {
    assemble(m, MaterialSpec{}, {});
    FAIL() << "expected AssemblyError";
  } catch (const AssemblyError& e) {
    EXPECT_NE(std::string(e.what()).find("element"), std::string::npos);
  }
}

TEST(Assembly, AttachmentOutsideEnvelopeRejected) {
  const FEMesh m = build_mesh(plain_plate(), 0.3, 8);
  EXPECT_THROW(assemble(m, MaterialSpec{}, {LumpedAttachment::magnet_array({0.01, 0.15})}), DomainError);
}

TEST(Modal, FreePlateHasSixRigidModes) {
  const ModalModel mm = plate_modes(plain_plate(), 16, {});
  EXPECT_EQ(mm.n_rigid, 6);
  for (int i = 0; i < 6; ++i) EXPECT_LT(mm.frequency_hz(i), 1e-3 * mm.frequency_hz(6));
  EXPECT_GT(mm.frequency_hz(6), 10.0);
}

TEST(Modal, OrthonormalityOfModes) {
  const FEMesh m = build_mesh(stageccd::testing::proposed_params(), 0.3, 16, MeshOptions{false});
  const StructuralMatrices mk = assemble(m, MaterialSpec{}, corner_magnet_arrays(0.3));
  const ModalModel mm = solve_modes(mk.mass, mk.stiffness, 12, 0.005);
  const Eigen::MatrixXd& phi = mm.mode_shapes;
  const Eigen::MatrixXd mtm = phi.transpose() * (mk.mass * phi);
  EXPECT_LE((mtm - Eigen::MatrixXd::Identity(12, 12)).cwiseAbs().maxCoeff(), 1e-8);
  const Eigen::MatrixXd ktk = phi.transpose() * (mk.stiffness * phi);
  const double scale = mm.frequencies.maxCoeff() * mm.frequencies.maxCoeff();
  for (int i = 0; i < 12; ++i) {
    for (int j = 0; j < 12; ++j) {
      const double expect = i == j ? mm.frequencies[i] * mm.frequencies[i] : 0.0;
      if (i == j && i >= mm.n_rigid) {
        EXPECT_NEAR(ktk(i, j), expect, 1e-6 * expect);
      } else {
        EXPECT_NEAR(ktk(i, j), expect, 1e-6 * scale);
      }
    }
  }
  for (int i = 1; i < 12; ++i) EXPECT_LE(mm.frequencies[i - 1], mm.frequencies[i]);
}

TEST(Modal, FreeSquarePlateConvergesAndMatchesThinPlateCoefficient) {
  MaterialSpec mat{71.7e9, 0.3, 2810.0};
  const StageParams p = plain_plate(3e-3);
  double f[3];
  const int res[3] = {16, 32, 64};
  for (int k = 0; k < 3; ++k) f[k] = plate_modes(p, res[k], {}, 8, mat).frequency_hz(6);
  const double richardson = f[2] + (f[2] - f[1]) / 3.0;
  EXPECT_NEAR(f[0], richardson, 0.02 * richardson);
  EXPECT_NEAR(f[1], richardson, 0.02 * richardson);

  // Free square plate, nu = 0.3: lambda = omega a^2 sqrt(rho h / D) = 13.47.
  const double h = 3e-3;
  const double d = mat.young_modulus * h * h * h / (12.0 * (1 - 0.09));
  const double f_thin = 13.47 / (2 * std::numbers::pi * 0.09) * std::sqrt(d / (mat.density * h));
  EXPECT_NEAR(richardson, f_thin, 0.02 * f_thin);
}

TEST(Modal, CornerMassesLowerEveryFlexibleFrequency) {
  const StageParams p = plain_plate(3e-3);
  const ModalModel bare = plate_modes(p, 20, {});
  const ModalModel loaded = plate_modes(p, 20, corner_magnet_arrays(0.3));
  for (int k = 0; k < 4; ++k) {
    EXPECT_LT(loaded.frequencies[loaded.flexible_index(k)], bare.frequencies[bare.flexible_index(k)]) << k;
  }
}

TEST(Modal, RibHeightNeverLowersFlexibleFrequencies) {
  StageParams p{1e-3, 0.0, 5e-3, 0.075, 10e-3};
  std::vector<double> prev;
  for (double hr : {0.0, 2e-3, 5e-3, 10e-3, 20e-3}) {
    p.rib_height = hr;
    const ModalModel mm = plate_modes(p, 20, {});
    std::vector<double> f;
    for (int k = 0; k < 4; ++k) f.push_back(mm.frequencies[mm.flexible_index(k)]);
    if (!prev.empty()) {
      for (int k = 0; k < 4; ++k) EXPECT_GE(f[k], prev[k]) << "rib height " << hr << " mode " << k;
    }
    prev = f;
  }
}

TEST(Modal, DeterministicRepeatSolve) {
  const ModalModel a = plate_modes(stageccd::testing::proposed_params(), 20, corner_magnet_arrays(0.3));
  const ModalModel b = plate_modes(stageccd::testing::proposed_params(), 20, corner_magnet_arrays(0.3));
  EXPECT_EQ(a.frequencies, b.frequencies);
  EXPECT_EQ(a.mode_shapes, b.mode_shapes);
}

TEST(Modal, DenseAndSubspaceAgree) {
  ModalSolveOptions dense_opt;
  dense_opt.method = EigenMethod::kDense;
  ModalSolveOptions sub_opt;
  sub_opt.method = EigenMethod::kSubspace;
  const auto p = stageccd::testing::proposed_params();
  const ModalModel a = plate_modes(p, 12, corner_magnet_arrays(0.3), 12, {}, dense_opt);
  const ModalModel b = plate_modes(p, 12, corner_magnet_arrays(0.3), 12, {}, sub_opt);
  ASSERT_EQ(a.n_rigid, b.n_rigid);
  for (int i = a.n_rigid; i < 12; ++i) EXPECT_NEAR(a.frequencies[i], b.frequencies[i], 1e-8 * a.frequencies[i]);
  EXPECT_GT(b.iterations, 0);
}

TEST(Modal, InputErrors) {
  const FEMesh m = build_mesh(plain_plate(), 0.3, 8);
  const StructuralMatrices mk = assemble(m, MaterialSpec{}, {});
  EXPECT_THROW(solve_modes(mk.mass, mk.stiffness, 7, 0.005), InvalidArgument);
  EXPECT_THROW(solve_modes(mk.mass, mk.stiffness, 10, 0.0), InvalidArgument);
  SparseMatrix neg = -mk.mass;
  ModalSolveOptions o;
  o.method = EigenMethod::kDense;
  EXPECT_THROW(solve_modes(neg, mk.stiffness, 10, 0.005, o), FactorizationError);
  o.method = EigenMethod::kSubspace;
  EXPECT_THROW(solve_modes(neg, mk.stiffness, 10, 0.005, o), FactorizationError);
}

TEST(ModeShape, NodalValueIsReproduced) {
  const ModalModel& mm = stageccd::testing::proposed_model();
  const FEMesh& mesh = *mm.mesh;
  for (int node : {0, 17, 500, static_cast<int>(mesh.node_count()) - 1}) {
    const Eigen::VectorXd v = mode_shape_at(mm, mesh.nodes[static_cast<std::size_t>(node)], Direction::kZ);
    for (int i = 0; i < mm.mode_count(); ++i) {
      EXPECT_EQ(v[i], mm.mode_shapes(FEMesh::dof(node, NodeDof::kW), i));
    }
  }
}

TEST(ModeShape, MidEdgeOfLinearFieldIsNodeMean) {
  auto mesh = std::make_shared<const FEMesh>(build_mesh(plain_plate(), 0.3, 10));
  ModalModel mm;
  mm.mesh = mesh;
  mm.frequencies = Eigen::VectorXd::Zero(1);
  mm.damping = Eigen::VectorXd::Constant(1, 0.01);
  mm.mode_shapes = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(mesh->dof_count()), 1);
  for (std::size_t n = 0; n < mesh->node_count(); ++n) {
    const auto& p = mesh->nodes[n];
    mm.mode_shapes(FEMesh::dof(static_cast<int>(n), NodeDof::kU), 0) = 0.3 - 2.0 * p.x() + 5.0 * p.y();
  }
  const int a = 12, b = 13;
  const Eigen::Vector2d mid = 0.5 * (mesh->nodes[a] + mesh->nodes[b]);
  const double expect = 0.5 * (mm.mode_shapes(FEMesh::dof(a, NodeDof::kU), 0) + mm.mode_shapes(FEMesh::dof(b, NodeDof::kU), 0));
  EXPECT_NEAR(mode_shape_at(mm, mid, Direction::kX)[0], expect, 1e-15);
  const Eigen::Vector2d q(0.1234, 0.2345);
  EXPECT_NEAR(mode_shape_at(mm, q, Direction::kX)[0], 0.3 - 2.0 * q.x() + 5.0 * q.y(), 1e-14);
  EXPECT_EQ(mode_shape_at(mm, q, Direction::kZ)[0], 0.0);
}

TEST(ModeShape, TwistModeVanishesAtCentre) {
  const ModalModel mm = plate_modes(plain_plate(3e-3), 20, corner_magnet_arrays(0.3));
  const int i = mm.flexible_index(0);
  const Eigen::VectorXd w = mode_shape_at(mm, {0.15, 0.15}, Direction::kZ);
  double amp = 0;
  for (std::size_t n = 0; n < mm.mesh->node_count(); ++n) {
    amp = std::max(amp, std::abs(mm.mode_shapes(FEMesh::dof(static_cast<int>(n), NodeDof::kW), i)));
  }
  EXPECT_LT(std::abs(w[i]), 1e-6 * amp);
}

TEST(ModeShape, OutsidePointRejected) {
  const ModalModel& mm = stageccd::testing::proposed_model();
  EXPECT_THROW(mode_shape_at(mm, {0.31, 0.1}, Direction::kZ), DomainError);
  EXPECT_THROW(point_extractor(*mm.mesh, {-0.01, 0.1}, Direction::kZ), DomainError);
}

TEST(ModalExport, JsonCarriesMeshAndModes) {
  const ModalModel mm = plate_modes(plain_plate(), 8, {}, 9);
  const auto j = modal_to_json(mm);
  EXPECT_EQ(j["mesh"]["nodes"].size(), 81u);
  EXPECT_EQ(j["mesh"]["elements"].size(), 64u);
  EXPECT_EQ(j["mesh"]["element_thickness_m"].size(), 64u);
  ASSERT_EQ(j["frequencies_hz"].size(), 9u);
  EXPECT_DOUBLE_EQ(j["frequencies_hz"][8].get<double>(), mm.frequency_hz(8));
  ASSERT_EQ(j["mode_shapes"].size(), 9u);
  EXPECT_EQ(j["mode_shapes"][0].size(), 405u);
  EXPECT_EQ(j["mode_shapes"][7][3].get<double>(), mm.mode_shapes(3, 7));
  EXPECT_EQ(j["n_rigid"].get<int>(), 6);
}
