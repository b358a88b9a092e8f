#ifndef STAGECCD_STRUCTURAL_STAGE_PARAMS_HPP
#define STAGECCD_STRUCTURAL_STAGE_PARAMS_HPP

#include <array>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "stageccd/errors.hpp"

namespace stageccd {

inline constexpr double kMinRibWidth = 1.0e-3;        // m
inline constexpr double kMinBaseThickness = 0.635e-3;  // m

/// Geometric design vector of the ribbed stage plate. All lengths in metres.
///
/// The plate is a square base sheet of `base_thickness`, stiffened by an outer
/// frame of width `frame_width` and an interior orthogonal rib grid with
/// centre-line spacing `rib_pitch` and rib width `rib_width`. Frame and ribs
/// extend `rib_height` beyond the base sheet.
struct StageParams {
  static constexpr int kSize = 5;
  static constexpr std::array<const char*, kSize> kNames = {
      "base_thickness", "rib_height", "rib_width", "rib_pitch", "frame_width"};

  double base_thickness{3e-3};
  double rib_height{0.0};
  double rib_width{5e-3};
  double rib_pitch{0.075};
  double frame_width{10e-3};

  Eigen::Matrix<double, kSize, 1> to_vector() const {
    Eigen::Matrix<double, kSize, 1> v;
    v << base_thickness, rib_height, rib_width, rib_pitch, frame_width;
    return v;
  }

  static StageParams from_vector(const Eigen::Ref<const Eigen::VectorXd>& v) {
    if (v.size() != kSize) {
      throw InvalidArgument("StageParams::from_vector: expected 5 components");
    }
    return StageParams{v[0], v[1], v[2], v[3], v[4]};
  }

  /// Throws InvalidArgument when an invariant fails. `rib_height` may be zero,
  /// which describes an unstiffened plate.
  void validate(double stage_edge) const {
    const auto fail = [&](const std::string& what) {
      std::ostringstream os;
      os << "invalid StageParams (" << to_string() << "): " << what;
      throw InvalidArgument(os.str());
    };
    for (double v : {base_thickness, rib_height, rib_width, rib_pitch, frame_width}) {
      if (!std::isfinite(v)) fail("non-finite component");
    }
    if (base_thickness <= 0 || rib_width <= 0 || rib_pitch <= 0 || frame_width <= 0) {
      fail("lengths must be strictly positive");
    }
    if (rib_height < 0) fail("rib_height must be non-negative");
    if (rib_width < kMinRibWidth * (1 - 1e-12)) fail("rib_width below the 1.0 mm floor");
    if (base_thickness < kMinBaseThickness * (1 - 1e-12)) {
      fail("base_thickness below the 0.635 mm floor");
    }
    if (rib_pitch <= rib_width) fail("rib_pitch must exceed rib_width");
    if (stage_edge <= 0) fail("stage edge must be positive");
    if (frame_width >= 0.5 * stage_edge) fail("frame_width must be below half the stage edge");
  }

  std::string to_string() const {
    std::ostringstream os;
    os.precision(6);
    os << "base_thickness=" << base_thickness << " rib_height=" << rib_height
       << " rib_width=" << rib_width << " rib_pitch=" << rib_pitch
       << " frame_width=" << frame_width;
    return os.str();
  }

  friend bool operator==(const StageParams&, const StageParams&) = default;
};

/// Isotropic linear-elastic material.
struct MaterialSpec {
  double young_modulus{71.7e9};  // Pa
  double poisson_ratio{0.33};
  double density{2810.0};  // kg/m^3

  void validate() const {
    if (!(young_modulus > 0)) throw InvalidArgument("MaterialSpec: young_modulus must be > 0");
    if (!(poisson_ratio >= 0 && poisson_ratio < 0.5)) {
      throw InvalidArgument("MaterialSpec: poisson_ratio must lie in [0, 0.5)");
    }
    if (!(density > 0)) throw InvalidArgument("MaterialSpec: density must be > 0");
  }

  static MaterialSpec aluminum_7075_t6() { return {71.7e9, 0.33, 2810.0}; }
};

inline constexpr double kMagnetDensity = 7500.0;      // kg/m^3, sintered NdFeB
inline constexpr double kMagnetArrayEdge = 69.85e-3;  // m
inline constexpr double kMagnetArrayThickness = 6.35e-3;

/// A rigid mass (e.g. a magnet array) bonded to the plate over a square
/// footprint. Its mass is spread with uniform areal density over the
/// footprint. `rotary_inertia` (about the x and y axes) is the part of the
/// body's own inertia that the areal spread does not already represent, and is
/// applied to the bending-rotation degrees of freedom. Inertia about the
/// vertical axis is carried entirely by the in-plane spread of the mass.
struct LumpedAttachment {
  Eigen::Vector2d center{0.0, 0.0};
  double mass{0.0};
  Eigen::Vector2d rotary_inertia{0.0, 0.0};
  double footprint{0.0};

  void validate(double stage_edge) const {
    if (!(mass > 0)) throw InvalidArgument("LumpedAttachment: mass must be > 0");
    if (!(footprint > 0)) throw InvalidArgument("LumpedAttachment: footprint must be > 0");
    if (rotary_inertia.minCoeff() < 0) {
      throw InvalidArgument("LumpedAttachment: rotary inertia must be non-negative");
    }
    const double h = 0.5 * footprint;
    const double tol = 1e-12 * stage_edge;
    if (center.x() - h < -tol || center.y() - h < -tol || center.x() + h > stage_edge + tol ||
        center.y() + h > stage_edge + tol) {
      throw DomainError("LumpedAttachment: footprint leaves the stage envelope");
    }
  }

  /// Square magnet array of the given edge and thickness. The rotary term is
  /// the thickness contribution m t^2 / 12.
  static LumpedAttachment magnet_array(Eigen::Vector2d center, double edge = kMagnetArrayEdge,
                                       double thickness = kMagnetArrayThickness,
                                       double density = kMagnetDensity) {
    const double m = edge * edge * thickness * density;
    const double rot = m * thickness * thickness / 12.0;
    return {center, m, Eigen::Vector2d(rot, rot), edge};
  }
};

/// Four magnet arrays tucked into the corners of a square stage.
inline std::vector<LumpedAttachment> corner_magnet_arrays(double stage_edge,
                                                          double edge = kMagnetArrayEdge,
                                                          double thickness = kMagnetArrayThickness,
                                                          double density = kMagnetDensity) {
  const double c0 = 0.5 * edge;
  const double c1 = stage_edge - 0.5 * edge;
  std::vector<LumpedAttachment> out;
  for (const auto& c : {Eigen::Vector2d(c0, c0), Eigen::Vector2d(c1, c0), Eigen::Vector2d(c1, c1),
                        Eigen::Vector2d(c0, c1)}) {
    out.push_back(LumpedAttachment::magnet_array(c, edge, thickness, density));
  }
  return out;
}

}  // namespace stageccd

#endif  // STAGECCD_STRUCTURAL_STAGE_PARAMS_HPP
