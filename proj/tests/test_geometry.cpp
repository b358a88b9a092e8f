#include <gtest/gtest.h>

#include <sstream>

#include "test_support.hpp"

using namespace stageccd;

namespace {

DesignContext coarse_context() {
  DesignContext c = DesignContext::reference();
  c.resolution = 12;
  return c;
}

BoxBounds reference_bounds() {
  BoxBounds b;
  b.lower.resize(5);
  b.upper.resize(5);
  b.lower << 0.635e-3, 0.0, 1e-3, 37.5e-3, 5e-3;
  b.upper << 8e-3, 40e-3, 20e-3, 150e-3, 40e-3;
  return b;
}

StageParams midpoint(const BoxBounds& b) { return StageParams::from_vector(0.5 * (b.lower + b.upper)); }

}  // namespace

TEST(FrequencySpec, ConstraintFormIsDimensionless) {
  const auto spec = FrequencySpec::from_hz(1, 4, 50.0, 600.0);
  Eigen::VectorXd w(4);
  w << hz_to_rad(40), hz_to_rad(600), hz_to_rad(700), hz_to_rad(800);
  const Eigen::VectorXd c = spec.constraint_values(w);
  EXPECT_NEAR(c[0], 1.0 - 40.0 / 50.0, 1e-15);
  EXPECT_NEAR(c[1], 0.0, 1e-15);
  EXPECT_NEAR(c[2], 700.0 / 600.0 - 1.0, 1e-15);
  EXPECT_NEAR(c[3], 800.0 / 600.0 - 1.0, 1e-15);
}

TEST(FrequencySpec, InvariantViolationsRejected) {
  EXPECT_THROW(FrequencySpec::from_hz(1, 4, 700.0, 600.0), InvalidArgument);
  EXPECT_THROW(FrequencySpec::from_hz(4, 4, 50.0, 600.0), InvalidArgument);
  EXPECT_THROW(FrequencySpec::from_hz(-1, 4, 50.0, 600.0), InvalidArgument);
  EXPECT_THROW(FrequencySpec::from_hz(1, 4, 0.0, 600.0), InvalidArgument);
  EXPECT_NO_THROW(FrequencySpec::from_hz(0, 4, 0.0, 250.0));
}

TEST(DesignEvaluator, RepeatedCallHitsCache) {
  DesignEvaluator ev(coarse_context(), 4);
  const auto p = midpoint(reference_bounds());
  const DesignEvaluation& a = ev.evaluate(p);
  const DesignEvaluation& b = ev.evaluate(p);
  EXPECT_EQ(&a, &b);
  EXPECT_EQ(ev.fe_solves(), 1);
  EXPECT_EQ(a.flexible_frequencies, b.flexible_frequencies);
}

TEST(DesignEvaluator, MassIncreasesWithBaseThickness) {
  DesignEvaluator ev(coarse_context(), 4);
  StageParams p = midpoint(reference_bounds());
  double prev = 0;
  for (double t : {1e-3, 2e-3, 3e-3, 5e-3}) {
    p.base_thickness = t;
    const double m = ev.evaluate(p).mass;
    EXPECT_GT(m, prev);
    prev = m;
  }
}

TEST(DesignEvaluator, FirstFlexibleFrequencyIndexing) {
  const auto spec = FrequencySpec::from_hz(1, 4, 50.0, 600.0);
  const DesignEvaluation e = evaluate_design(midpoint(reference_bounds()), coarse_context(), spec);
  ASSERT_EQ(e.flexible_frequencies.size(), 4);
  EXPECT_EQ(e.model->n_rigid, 6);
  for (int k = 0; k < 4; ++k) EXPECT_EQ(e.flexible_frequencies[k], e.model->frequencies[e.model->n_rigid + k]);
}

TEST(DesignEvaluator, ErrorsNameTheDesign) {
  DesignContext c = coarse_context();
  c.mesh.require_resolved_ribs = true;
  StageParams p = midpoint(reference_bounds());
  p.rib_width = 2e-3;
  DesignEvaluator ev(c, 4);
  try {
    ev.evaluate(p);
    FAIL() << "expected MeshResolutionError";
  } catch (const MeshResolutionError& e) {
    EXPECT_NE(std::string(e.what()).find("rib_width=0.002"), std::string::npos) << e.what();
  }
}

TEST(GeometryBounds, FloorsEnforced) {
  BoxBounds b = reference_bounds();
  EXPECT_NO_THROW(validate_geometry_bounds(b, 0.3));
  b.lower[0] = 0.5e-3;
  EXPECT_THROW(validate_geometry_bounds(b, 0.3), InvalidArgument);
  b = reference_bounds();
  b.lower[2] = 0.9e-3;
  EXPECT_THROW(validate_geometry_bounds(b, 0.3), InvalidArgument);
}

TEST(OptimizeGeometry, ProposedSpecOnCoarseMesh) {
  const auto spec = FrequencySpec::from_hz(1, 4, 50.0, 600.0);
  const BoxBounds b = reference_bounds();
  CobylaSettings st;
  st.max_evaluations = 120;
  DesignEvaluator ev(coarse_context(), 4);
  const GeometryResult r = optimize_geometry(midpoint(b), b, spec, st, ev);
  EXPECT_TRUE(r.feasible);
  EXPECT_LE(rad_to_hz(r.flexible_frequencies[0]), 50.0 * (1 + 1e-9));
  EXPECT_GE(rad_to_hz(r.flexible_frequencies[1]), 600.0 * (1 - 1e-9));
  EXPECT_LT(r.mass, ev.evaluate(midpoint(b)).mass);
  EXPECT_TRUE(b.contains(r.best.to_vector()));
  EXPECT_EQ(r.constraint_values, spec.constraint_values(r.flexible_frequencies));
  EXPECT_LE(r.fe_solves, r.optimization.evaluations_used + 1);

  std::ostringstream os;
  write_history_csv(os, r.optimization);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "eval_index,base_thickness,rib_height,rib_width,rib_pitch,frame_width,mass_kg,min_constraint");
  int rows = 0;
  while (std::getline(is, line)) ++rows;
  EXPECT_EQ(rows, r.optimization.evaluations_used);
}

TEST(OptimizeGeometry, BaselineSpecOnCoarseMesh) {
  const auto spec = FrequencySpec::from_hz(0, 4, 0.0, 250.0);
  const BoxBounds b = reference_bounds();
  CobylaSettings st;
  st.max_evaluations = 120;
  DesignEvaluator ev(coarse_context(), 4);
  const GeometryResult r = optimize_geometry(midpoint(b), b, spec, st, ev);
  EXPECT_TRUE(r.feasible);
  EXPECT_GE(rad_to_hz(r.flexible_frequencies[0]), 250.0 * (1 - 1e-9));
}

TEST(OptimizeGeometry, InitialOutsideBoundsRejected) {
  const auto spec = FrequencySpec::from_hz(1, 4, 50.0, 600.0);
  const BoxBounds b = reference_bounds();
  StageParams p = midpoint(b);
  p.rib_height = 50e-3;
  DesignEvaluator ev(coarse_context(), 4);
  EXPECT_THROW(optimize_geometry(p, b, spec, CobylaSettings{}, ev), InvalidArgument);
}
