#ifndef STAGECCD_STRUCTURAL_MODE_SHAPE_HPP
#define STAGECCD_STRUCTURAL_MODE_SHAPE_HPP

#include <array>
#include <utility>

#include <Eigen/Core>

#include "stageccd/errors.hpp"
#include "stageccd/structural/mesh.hpp"
#include "stageccd/structural/modal.hpp"
#include "stageccd/structural/shell_element.hpp"

namespace stageccd {

/// Bilinear interpolation weights of `p`: the four element nodes and their
/// shape-function values. Throws DomainError outside the stage.
inline std::array<std::pair<int, double>, 4> interpolation_weights(const FEMesh& mesh,
                                                                    const Eigen::Vector2d& p) {
  const MeshLocation loc = mesh.locate(p);
  const auto& conn = mesh.elements[static_cast<std::size_t>(loc.element)];
  std::array<std::pair<int, double>, 4> w;
  for (std::size_t a = 0; a < 4; ++a) {
    w[a] = {conn[a], 0.25 * (1 + kNodeXi[a] * loc.xi) * (1 + kNodeEta[a] * loc.eta)};
  }
  return w;
}

/// Sparse row vector that extracts the `direction` displacement at `p` from a
/// full dof vector.
inline Eigen::VectorXd point_extractor(const FEMesh& mesh, const Eigen::Vector2d& p, Direction direction) {
  Eigen::VectorXd e = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(mesh.dof_count()));
  for (const auto& [node, w] : interpolation_weights(mesh, p)) {
    e[FEMesh::dof(node, translation_dof(direction))] += w;
  }
  return e;
}

/// Displacement component of every mode at `p` (one entry per mode).
inline Eigen::VectorXd mode_shape_at(const ModalModel& model, const Eigen::Vector2d& p, Direction direction) {
  if (!model.mesh) throw InvalidArgument("mode_shape_at: model carries no mesh");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(model.mode_count());
  for (const auto& [node, w] : interpolation_weights(*model.mesh, p)) {
    if (w == 0.0) continue;
    out += w * model.mode_shapes.row(FEMesh::dof(node, translation_dof(direction))).transpose();
  }
  return out;
}

}  // namespace stageccd

#endif  // STAGECCD_STRUCTURAL_MODE_SHAPE_HPP
