#ifndef STAGECCD_STRUCTURAL_ASSEMBLY_HPP
#define STAGECCD_STRUCTURAL_ASSEMBLY_HPP

#include <algorithm>
#include <cstddef>
#include <sstream>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "stageccd/errors.hpp"
#include "stageccd/structural/mesh.hpp"
#include "stageccd/structural/shell_element.hpp"
#include "stageccd/structural/stage_params.hpp"

namespace stageccd {

using SparseMatrix = Eigen::SparseMatrix<double>;

struct AssemblyOptions {
  RibModel rib_model{RibModel::kStiffener};
  ShearTreatment shear{ShearTreatment::kMitc4};
  bool attachment_rotary_inertia{true};
};

struct StructuralMatrices {
  SparseMatrix mass;
  SparseMatrix stiffness;
};

inline ElementCoords element_coords(const FEMesh& mesh, int e) {
  ElementCoords xy;
  const auto& conn = mesh.elements[static_cast<std::size_t>(e)];
  for (int a = 0; a < 4; ++a) {
    xy.row(a) = mesh.nodes[static_cast<std::size_t>(conn[static_cast<std::size_t>(a)])].transpose();
  }
  return xy;
}

namespace detail {

/// Integral of the 1D hat factor 0.5 (1 + s xi(x)) over [a, b] for an element
/// spanning [lo, hi].
inline double hat_integral(double lo, double hi, double a, double b, double side) {
  const double len = b - a;
  if (len <= 0) return 0.0;
  const double xi_mid = 2.0 * (0.5 * (a + b) - lo) / (hi - lo) - 1.0;
  return 0.5 * len * (1.0 + side * xi_mid);
}

/// Nodal shares of a uniform areal load over the footprint of `att`, as
/// (node, weight) pairs with weights summing to the footprint area.
inline std::vector<std::pair<int, double>> footprint_weights(const FEMesh& mesh,
                                                             const LumpedAttachment& att) {
  std::vector<double> w(mesh.node_count(), 0.0);
  const double half = 0.5 * att.footprint;
  const double fx0 = att.center.x() - half;
  const double fx1 = att.center.x() + half;
  const double fy0 = att.center.y() - half;
  const double fy1 = att.center.y() + half;
  for (std::size_t e = 0; e < mesh.element_count(); ++e) {
    const auto& conn = mesh.elements[e];
    const auto& p0 = mesh.nodes[static_cast<std::size_t>(conn[0])];
    const auto& p2 = mesh.nodes[static_cast<std::size_t>(conn[2])];
    const double ax = std::max(p0.x(), fx0);
    const double bx = std::min(p2.x(), fx1);
    const double ay = std::max(p0.y(), fy0);
    const double by = std::min(p2.y(), fy1);
    if (bx <= ax || by <= ay) continue;
    for (int a = 0; a < 4; ++a) {
      const double ix = hat_integral(p0.x(), p2.x(), ax, bx, kNodeXi[static_cast<std::size_t>(a)]);
      const double iy = hat_integral(p0.y(), p2.y(), ay, by, kNodeEta[static_cast<std::size_t>(a)]);
      w[static_cast<std::size_t>(conn[static_cast<std::size_t>(a)])] += ix * iy;
    }
  }
  std::vector<std::pair<int, double>> out;
  for (std::size_t n = 0; n < w.size(); ++n) {
    if (w[n] != 0.0) out.emplace_back(static_cast<int>(n), w[n]);
  }
  return out;
}

inline void throw_degenerate(int e) {
  std::ostringstream os;
  os << "degenerate geometry in element " << e << " (non-positive Jacobian)";
  throw AssemblyError(os.str());
}

}  // namespace detail

/// Assembles the free-free mass and stiffness matrices of the stage.
inline StructuralMatrices assemble(const FEMesh& mesh, const MaterialSpec& material,
                                   const std::vector<LumpedAttachment>& attachments,
                                   const AssemblyOptions& options = {}) {
  material.validate();
  for (const auto& att : attachments) att.validate(mesh.edge);

  const auto ndof = static_cast<Eigen::Index>(mesh.dof_count());
  std::vector<Eigen::Triplet<double>> kt;
  std::vector<Eigen::Triplet<double>> mt;
  kt.reserve(mesh.element_count() * 400);
  mt.reserve(mesh.element_count() * 400 / 4 + attachments.size() * 500);

  for (std::size_t e = 0; e < mesh.element_count(); ++e) {
    const int ei = static_cast<int>(e);
    if (!(mesh.element_area(ei) > 0)) detail::throw_degenerate(ei);
    const ElementCoords xy = element_coords(mesh, ei);
    const SectionProperties sec = section_properties(material, mesh.params, mesh.coverage_x[e],
                                                     mesh.coverage_y[e], options.rib_model);
    const auto ke = element_stiffness(xy, sec, options.shear);
    const auto me = element_mass(xy, sec);
    if (!ke || !me) detail::throw_degenerate(ei);
    const auto& conn = mesh.elements[e];
    for (int a = 0; a < 4; ++a) {
      for (int da = 0; da < kDofsPerNode; ++da) {
        const int row = kDofsPerNode * conn[static_cast<std::size_t>(a)] + da;
        for (int b = 0; b < 4; ++b) {
          for (int db = 0; db < kDofsPerNode; ++db) {
            const int col = kDofsPerNode * conn[static_cast<std::size_t>(b)] + db;
            const double kv = (*ke)(kDofsPerNode * a + da, kDofsPerNode * b + db);
            const double mv = (*me)(kDofsPerNode * a + da, kDofsPerNode * b + db);
            if (kv != 0.0) kt.emplace_back(row, col, kv);
            if (mv != 0.0) mt.emplace_back(row, col, mv);
          }
        }
      }
    }
  }

  for (const auto& att : attachments) {
    const double area = att.footprint * att.footprint;
    for (const auto& [node, weight] : detail::footprint_weights(mesh, att)) {
      const double share = weight / area;
      for (NodeDof d : {NodeDof::kU, NodeDof::kV, NodeDof::kW}) {
        const int i = FEMesh::dof(node, d);
        mt.emplace_back(i, i, att.mass * share);
      }
      if (options.attachment_rotary_inertia) {
        // Inertia about x resists rot_y (= dw/dy); inertia about y resists rot_x.
        const int rx = FEMesh::dof(node, NodeDof::kRotX);
        const int ry = FEMesh::dof(node, NodeDof::kRotY);
        mt.emplace_back(ry, ry, att.rotary_inertia.x() * share);
        mt.emplace_back(rx, rx, att.rotary_inertia.y() * share);
      }
    }
  }

  StructuralMatrices out;
  out.stiffness.resize(ndof, ndof);
  out.mass.resize(ndof, ndof);
  out.stiffness.setFromTriplets(kt.begin(), kt.end());
  out.mass.setFromTriplets(mt.begin(), mt.end());
  out.stiffness.makeCompressed();
  out.mass.makeCompressed();
  return out;
}

/// Structure mass (area x effective thickness x density) plus attachments.
inline double stage_mass(const FEMesh& mesh, const MaterialSpec& material,
                         const std::vector<LumpedAttachment>& attachments) {
  material.validate();
  double m = 0;
  for (std::size_t e = 0; e < mesh.element_count(); ++e) {
    m += mesh.element_area(static_cast<int>(e)) * mesh.element_thickness[e] * material.density;
  }
  for (const auto& att : attachments) m += att.mass;
  return m;
}

/// Rigid-body displacement fields about `pivot`, one column per generalized
/// coordinate in the order x, y, z, theta_x, theta_y, theta_z.
inline Eigen::MatrixXd rigid_body_fields(const FEMesh& mesh, const Eigen::Vector2d& pivot) {
  Eigen::MatrixXd r = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(mesh.dof_count()), 6);
  for (std::size_t n = 0; n < mesh.node_count(); ++n) {
    const int node = static_cast<int>(n);
    const double dx = mesh.nodes[n].x() - pivot.x();
    const double dy = mesh.nodes[n].y() - pivot.y();
    r(FEMesh::dof(node, NodeDof::kU), 0) = 1.0;
    r(FEMesh::dof(node, NodeDof::kV), 1) = 1.0;
    r(FEMesh::dof(node, NodeDof::kW), 2) = 1.0;
    // Rotation about x lifts points with positive y.
    r(FEMesh::dof(node, NodeDof::kW), 3) = dy;
    r(FEMesh::dof(node, NodeDof::kRotY), 3) = 1.0;
    // Rotation about y lowers points with positive x.
    r(FEMesh::dof(node, NodeDof::kW), 4) = -dx;
    r(FEMesh::dof(node, NodeDof::kRotX), 4) = -1.0;
    r(FEMesh::dof(node, NodeDof::kU), 5) = -dy;
    r(FEMesh::dof(node, NodeDof::kV), 5) = dx;
  }
  return r;
}

/// Planar mass centre computed from the assembled mass matrix.
inline Eigen::Vector2d mass_center(const FEMesh& mesh, const SparseMatrix& mass) {
  Eigen::VectorXd ones = Eigen::VectorXd::Zero(mass.rows());
  Eigen::VectorXd xs = ones;
  Eigen::VectorXd ys = ones;
  for (std::size_t n = 0; n < mesh.node_count(); ++n) {
    const int i = FEMesh::dof(static_cast<int>(n), NodeDof::kW);
    ones[i] = 1.0;
    xs[i] = mesh.nodes[n].x();
    ys[i] = mesh.nodes[n].y();
  }
  const Eigen::VectorXd mo = mass * ones;
  const double m = ones.dot(mo);
  return {xs.dot(mo) / m, ys.dot(mo) / m};
}

}  // namespace stageccd

#endif  // STAGECCD_STRUCTURAL_ASSEMBLY_HPP
