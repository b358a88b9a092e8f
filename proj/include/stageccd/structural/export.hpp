#ifndef STAGECCD_STRUCTURAL_EXPORT_HPP
#define STAGECCD_STRUCTURAL_EXPORT_HPP

#include <nlohmann/json.hpp>

#include "stageccd/errors.hpp"
#include "stageccd/structural/mesh.hpp"
#include "stageccd/structural/modal.hpp"

namespace stageccd {

/// Nodes (m), counterclockwise connectivity and the thickness field.
inline nlohmann::ordered_json mesh_to_json(const FEMesh& mesh) {
  using nlohmann::ordered_json;
  ordered_json nodes = ordered_json::array();
  for (const auto& p : mesh.nodes) nodes.push_back({p.x(), p.y()});
  ordered_json elements = ordered_json::array();
  for (const auto& e : mesh.elements) elements.push_back({e[0], e[1], e[2], e[3]});
  ordered_json j;
  j["edge_m"] = mesh.edge;
  j["resolution"] = mesh.resolution;
  j["dofs_per_node"] = kDofsPerNode;
  j["dof_order"] = {"u", "v", "w", "rot_x", "rot_y"};
  j["nodes"] = nodes;
  j["elements"] = elements;
  j["element_thickness_m"] = mesh.element_thickness;
  return j;
}

/// Mesh plus frequencies (Hz) and one flat shape array per mode, in dof order.
inline nlohmann::ordered_json modal_to_json(const ModalModel& model) {
  using nlohmann::ordered_json;
  if (!model.mesh) throw InvalidArgument("modal_to_json: model carries no mesh");
  ordered_json j;
  j["mesh"] = mesh_to_json(*model.mesh);
  ordered_json f = ordered_json::array();
  ordered_json shapes = ordered_json::array();
  for (int i = 0; i < model.mode_count(); ++i) {
    f.push_back(model.frequency_hz(i));
    const Eigen::VectorXd c = model.mode_shapes.col(i);
    shapes.push_back(std::vector<double>(c.data(), c.data() + c.size()));
  }
  j["n_rigid"] = model.n_rigid;
  j["frequencies_hz"] = f;
  j["damping"] = std::vector<double>(model.damping.data(), model.damping.data() + model.damping.size());
  j["mode_shapes"] = shapes;
  return j;
}

}  // namespace stageccd

#endif  // STAGECCD_STRUCTURAL_EXPORT_HPP
