#ifndef STAGECCD_STRUCTURAL_SHELL_ELEMENT_HPP
#define STAGECCD_STRUCTURAL_SHELL_ELEMENT_HPP

#include <array>
#include <cmath>
#include <optional>

#include <Eigen/Core>
#include <Eigen/LU>

#include "stageccd/structural/mesh.hpp"
#include "stageccd/structural/stage_params.hpp"

namespace stageccd {

/// How frame and rib material enters the section stiffness.
enum class RibModel {
  /// Ribs thicken the plate isotropically about the midplane.
  kThickenedPlate,
  /// Ribs act as smeared open-section stiffeners: bending and axial
  /// stiffness along the rib direction, Saint-Venant torsion across it.
  kStiffener,
};

/// Transverse-shear treatment of the 4-node Mindlin element.
enum class ShearTreatment {
  /// Assumed covariant shear strains tied at the edge midpoints (MITC4).
  kMitc4,
  /// One-point quadrature of the shear energy. Admits the w-hourglass
  /// mechanism in free plates; kept for comparison.
  kReducedIntegration,
};

/// Resultant-level section properties of one element.
struct SectionProperties {
  Eigen::Matrix3d membrane = Eigen::Matrix3d::Zero();  // N = A eps
  Eigen::Matrix3d bending = Eigen::Matrix3d::Zero();   // M = D kappa
  Eigen::Matrix2d shear = Eigen::Matrix2d::Zero();     // Q = S gamma
  double mass_per_area{0.0};
  double rotary_per_area{0.0};
};

inline constexpr double kShearCorrection = 5.0 / 6.0;

namespace detail {

inline Eigen::Matrix3d plane_stress(const MaterialSpec& mat) {
  const double nu = mat.poisson_ratio;
  const double c = mat.young_modulus / (1 - nu * nu);
  Eigen::Matrix3d q;
  q << c, c * nu, 0, c * nu, c, 0, 0, 0, c * (1 - nu) / 2;
  return q;
}

inline double shear_modulus(const MaterialSpec& mat) {
  return mat.young_modulus / (2 * (1 + mat.poisson_ratio));
}

/// Saint-Venant torsion constant of a solid a x b rectangle.
inline double rectangle_torsion_constant(double a, double b) {
  const double lo = std::min(a, b);
  const double hi = std::max(a, b);
  if (lo <= 0) return 0.0;
  const double r = lo / hi;
  return hi * lo * lo * lo * (1.0 / 3.0 - 0.21 * r * (1 - std::pow(r, 4) / 12));
}

}  // namespace detail

/// Section properties for a plate element with the given rib coverage.
inline SectionProperties section_properties(const MaterialSpec& mat, const StageParams& p,
                                            double coverage_x, double coverage_y, RibModel model) {
  const Eigen::Matrix3d q = detail::plane_stress(mat);
  const double g = detail::shear_modulus(mat);
  const double tb = p.base_thickness;
  const double hr = p.rib_height;
  const double full = tb + hr;
  const double tb3 = tb * tb * tb;
  const double full3 = full * full * full;
  const double cover = coverage_x + coverage_y - coverage_x * coverage_y;

  SectionProperties s;
  s.mass_per_area = mat.density * (tb + cover * hr);
  s.rotary_per_area = mat.density * (tb3 + cover * (full3 - tb3)) / 12.0;

  if (model == RibModel::kThickenedPlate || hr == 0.0) {
    s.membrane = q * (tb + cover * hr);
    s.bending = q * (tb3 + cover * (full3 - tb3)) / 12.0;
    s.shear = Eigen::Matrix2d::Identity() * kShearCorrection * g * (tb + cover * hr);
    return s;
  }

  s.membrane = q * tb;
  s.bending = q * tb3 / 12.0;
  s.shear = Eigen::Matrix2d::Identity() * kShearCorrection * g * tb;
  const double e = mat.young_modulus;
  const double w = p.rib_width;
  // Torsion of the full rib section beyond what the base strip under it
  // already provides as plate twist.
  const double dj = std::max(0.0, detail::rectangle_torsion_constant(w, full) - w * tb3 / 3.0);
  const double twist = g * dj / (4.0 * w);
  const std::array<double, 2> cov = {coverage_x, coverage_y};
  for (int d = 0; d < 2; ++d) {
    const double c = cov[static_cast<std::size_t>(d)];
    if (c == 0.0) continue;
    s.membrane(d, d) += e * c * hr;
    s.bending(d, d) += e * c * (full3 - tb3) / 12.0;
    s.bending(2, 2) += c * twist;
    s.shear(d, d) += kShearCorrection * g * c * hr;
  }
  return s;
}

using ElementMatrix = Eigen::Matrix<double, 20, 20>;
using ElementCoords = Eigen::Matrix<double, 4, 2>;  // row per node, counterclockwise

struct ShapeDerivatives {
  Eigen::Vector4d n;
  Eigen::Matrix<double, 2, 4> dnat;  // d/dxi, d/deta
  Eigen::Matrix2d jac;               // rows: (x_xi, y_xi), (x_eta, y_eta)
  double det{0.0};
  Eigen::Matrix<double, 2, 4> dxy;  // d/dx, d/dy
};

inline constexpr std::array<double, 4> kNodeXi = {-1, 1, 1, -1};
inline constexpr std::array<double, 4> kNodeEta = {-1, -1, 1, 1};

/// Bilinear shape functions and their Cartesian derivatives. Returns nullopt
/// when the Jacobian is not positive.
inline std::optional<ShapeDerivatives> shape_at(const ElementCoords& xy, double xi, double eta) {
  ShapeDerivatives s;
  for (int a = 0; a < 4; ++a) {
    const double xa = kNodeXi[static_cast<std::size_t>(a)];
    const double ea = kNodeEta[static_cast<std::size_t>(a)];
    s.n[a] = 0.25 * (1 + xa * xi) * (1 + ea * eta);
    s.dnat(0, a) = 0.25 * xa * (1 + ea * eta);
    s.dnat(1, a) = 0.25 * ea * (1 + xa * xi);
  }
  s.jac = s.dnat * xy;
  s.det = s.jac.determinant();
  if (!(s.det > 0)) return std::nullopt;
  s.dxy = s.jac.inverse() * s.dnat;
  return s;
}

namespace detail {

inline constexpr double kGauss = 0.57735026918962576;  // 1/sqrt(3)

inline int ldof(int node, NodeDof d) { return kDofsPerNode * node + static_cast<int>(d); }

/// Covariant transverse shear strains (gamma_xi, gamma_eta) at a point.
inline Eigen::Matrix<double, 2, 20> covariant_shear(const ShapeDerivatives& s) {
  Eigen::Matrix<double, 2, 20> b = Eigen::Matrix<double, 2, 20>::Zero();
  for (int r = 0; r < 2; ++r) {
    for (int a = 0; a < 4; ++a) {
      b(r, ldof(a, NodeDof::kW)) = s.dnat(r, a);
      b(r, ldof(a, NodeDof::kRotX)) = -s.n[a] * s.jac(r, 0);
      b(r, ldof(a, NodeDof::kRotY)) = -s.n[a] * s.jac(r, 1);
    }
  }
  return b;
}

}  // namespace detail

/// Stiffness of the flat-shell element: bilinear membrane plus Mindlin
/// bending. Returns nullopt for degenerate geometry.
inline std::optional<ElementMatrix> element_stiffness(const ElementCoords& xy,
                                                      const SectionProperties& sec,
                                                      ShearTreatment shear) {
  using detail::ldof;
  ElementMatrix k = ElementMatrix::Zero();
  for (double gx : {-detail::kGauss, detail::kGauss}) {
    for (double gy : {-detail::kGauss, detail::kGauss}) {
      const auto s = shape_at(xy, gx, gy);
      if (!s) return std::nullopt;
      Eigen::Matrix<double, 3, 20> bm = Eigen::Matrix<double, 3, 20>::Zero();
      Eigen::Matrix<double, 3, 20> bb = Eigen::Matrix<double, 3, 20>::Zero();
      for (int a = 0; a < 4; ++a) {
        const double dx = s->dxy(0, a);
        const double dy = s->dxy(1, a);
        bm(0, ldof(a, NodeDof::kU)) = dx;
        bm(1, ldof(a, NodeDof::kV)) = dy;
        bm(2, ldof(a, NodeDof::kU)) = dy;
        bm(2, ldof(a, NodeDof::kV)) = dx;
        bb(0, ldof(a, NodeDof::kRotX)) = dx;
        bb(1, ldof(a, NodeDof::kRotY)) = dy;
        bb(2, ldof(a, NodeDof::kRotX)) = dy;
        bb(2, ldof(a, NodeDof::kRotY)) = dx;
      }
      k.noalias() += (bm.transpose() * sec.membrane * bm) * s->det;
      k.noalias() += (bb.transpose() * sec.bending * bb) * s->det;
    }
  }

  if (shear == ShearTreatment::kReducedIntegration) {
    const auto s = shape_at(xy, 0.0, 0.0);
    if (!s) return std::nullopt;
    Eigen::Matrix<double, 2, 20> bs = s->jac.inverse() * detail::covariant_shear(*s);
    k.noalias() += (bs.transpose() * sec.shear * bs) * (4.0 * s->det);
  } else {
    // Tying points: gamma_xi at (0, -1) and (0, 1); gamma_eta at (-1, 0) and (1, 0).
    const auto sb = shape_at(xy, 0.0, -1.0);
    const auto sd = shape_at(xy, 0.0, 1.0);
    const auto sa = shape_at(xy, -1.0, 0.0);
    const auto sc = shape_at(xy, 1.0, 0.0);
    if (!sb || !sd || !sa || !sc) return std::nullopt;
    const Eigen::Matrix<double, 1, 20> gxi_b = detail::covariant_shear(*sb).row(0);
    const Eigen::Matrix<double, 1, 20> gxi_d = detail::covariant_shear(*sd).row(0);
    const Eigen::Matrix<double, 1, 20> geta_a = detail::covariant_shear(*sa).row(1);
    const Eigen::Matrix<double, 1, 20> geta_c = detail::covariant_shear(*sc).row(1);
    for (double gx : {-detail::kGauss, detail::kGauss}) {
      for (double gy : {-detail::kGauss, detail::kGauss}) {
        const auto s = shape_at(xy, gx, gy);
        if (!s) return std::nullopt;
        Eigen::Matrix<double, 2, 20> cov;
        cov.row(0) = 0.5 * (1 - gy) * gxi_b + 0.5 * (1 + gy) * gxi_d;
        cov.row(1) = 0.5 * (1 - gx) * geta_a + 0.5 * (1 + gx) * geta_c;
        const Eigen::Matrix<double, 2, 20> bs = s->jac.inverse() * cov;
        k.noalias() += (bs.transpose() * sec.shear * bs) * s->det;
      }
    }
  }
  return ElementMatrix(0.5 * (k + k.transpose()));
}

/// Consistent mass: translational inertia on u, v, w; rotary on the rotations.
inline std::optional<ElementMatrix> element_mass(const ElementCoords& xy, const SectionProperties& sec) {
  using detail::ldof;
  ElementMatrix m = ElementMatrix::Zero();
  for (double gx : {-detail::kGauss, detail::kGauss}) {
    for (double gy : {-detail::kGauss, detail::kGauss}) {
      const auto s = shape_at(xy, gx, gy);
      if (!s) return std::nullopt;
      const Eigen::Matrix4d nn = s->n * s->n.transpose() * s->det;
      for (int a = 0; a < 4; ++a) {
        for (int b = 0; b < 4; ++b) {
          for (NodeDof d : {NodeDof::kU, NodeDof::kV, NodeDof::kW}) {
            m(ldof(a, d), ldof(b, d)) += sec.mass_per_area * nn(a, b);
          }
          for (NodeDof d : {NodeDof::kRotX, NodeDof::kRotY}) {
            m(ldof(a, d), ldof(b, d)) += sec.rotary_per_area * nn(a, b);
          }
        }
      }
    }
  }
  return ElementMatrix(0.5 * (m + m.transpose()));
}

}  // namespace stageccd

#endif  // STAGECCD_STRUCTURAL_SHELL_ELEMENT_HPP
