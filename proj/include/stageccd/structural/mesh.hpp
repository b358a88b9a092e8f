#ifndef STAGECCD_STRUCTURAL_MESH_HPP
#define STAGECCD_STRUCTURAL_MESH_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <sstream>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "stageccd/errors.hpp"
#include "stageccd/structural/stage_params.hpp"

namespace stageccd {

/// Per-node degrees of freedom: in-plane translations, out-of-plane
/// translation, and the two bending rotations. The rotations are the normal's
/// slopes, so that in the thin limit `rot_x = dw/dx` and `rot_y = dw/dy`.
enum class NodeDof : int { kU = 0, kV = 1, kW = 2, kRotX = 3, kRotY = 4 };
inline constexpr int kDofsPerNode = 5;

/// Displacement component selector used by interpolation and device models.
enum class Direction : int { kX = 0, kY = 1, kZ = 2 };

inline const char* to_string(Direction d) {
  switch (d) {
    case Direction::kX: return "x";
    case Direction::kY: return "y";
    case Direction::kZ: return "z";
  }
  return "?";
}

inline NodeDof translation_dof(Direction d) { return static_cast<NodeDof>(static_cast<int>(d)); }

struct MeshOptions {
  /// Reject rib widths narrower than one element, as a plain thickness map
  /// cannot represent them. Smeared-stiffener assembly handles narrow ribs
  /// through the coverage fractions, so pipelines may switch this off.
  bool require_resolved_ribs{true};
};

/// Location of a point inside the structured mesh.
struct MeshLocation {
  int element{0};
  double xi{0.0};
  double eta{0.0};
};

/// Structured quadrilateral mesh of a square stage with a rib-coverage field.
struct FEMesh {
  double edge{0.0};
  int resolution{0};
  StageParams params{};
  std::vector<Eigen::Vector2d> nodes;
  std::vector<std::array<int, 4>> elements;  // counterclockwise
  /// Effective thickness: base + rib_height * (area fraction covered by ribs).
  std::vector<double> element_thickness;
  /// Area fraction covered by ribs running along x (resp. y).
  std::vector<double> coverage_x;
  std::vector<double> coverage_y;

  std::size_t node_count() const { return nodes.size(); }
  std::size_t element_count() const { return elements.size(); }
  std::size_t dof_count() const { return kDofsPerNode * nodes.size(); }
  double element_size() const { return edge / resolution; }

  static int dof(int node, NodeDof d) { return kDofsPerNode * node + static_cast<int>(d); }

  double element_area(int e) const {
    const auto& c = elements[static_cast<std::size_t>(e)];
    double a = 0;
    for (int k = 0; k < 4; ++k) {
      const auto& p = nodes[static_cast<std::size_t>(c[static_cast<std::size_t>(k)])];
      const auto& q = nodes[static_cast<std::size_t>(c[static_cast<std::size_t>((k + 1) % 4)])];
      a += p.x() * q.y() - q.x() * p.y();
    }
    return 0.5 * a;
  }

  double rib_coverage(int e) const {
    const double cx = coverage_x[static_cast<std::size_t>(e)];
    const double cy = coverage_y[static_cast<std::size_t>(e)];
    return cx + cy - cx * cy;
  }

  bool contains(const Eigen::Vector2d& p, double rel_tol = 1e-12) const {
    const double tol = rel_tol * edge;
    return p.x() >= -tol && p.y() >= -tol && p.x() <= edge + tol && p.y() <= edge + tol;
  }

  /// Element and natural coordinates of `p`; throws DomainError outside.
  MeshLocation locate(const Eigen::Vector2d& p) const {
    if (!contains(p)) {
      std::ostringstream os;
      os << "point (" << p.x() << ", " << p.y() << ") lies outside the " << edge << " m stage";
      throw DomainError(os.str());
    }
    const double h = element_size();
    const auto cell = [&](double s) {
      int i = static_cast<int>(std::floor(s / h));
      return std::clamp(i, 0, resolution - 1);
    };
    const int i = cell(p.x());
    const int j = cell(p.y());
    MeshLocation loc;
    loc.element = j * resolution + i;
    loc.xi = std::clamp(2.0 * (p.x() - i * h) / h - 1.0, -1.0, 1.0);
    loc.eta = std::clamp(2.0 * (p.y() - j * h) / h - 1.0, -1.0, 1.0);
    return loc;
  }
};

namespace detail {

using Interval = std::pair<double, double>;

inline std::vector<Interval> merge_intervals(std::vector<Interval> v) {
  std::sort(v.begin(), v.end());
  std::vector<Interval> out;
  for (const auto& iv : v) {
    if (!out.empty() && iv.first <= out.back().second) {
      out.back().second = std::max(out.back().second, iv.second);
    } else {
      out.push_back(iv);
    }
  }
  return out;
}

inline double covered_length(const std::vector<Interval>& set, double a, double b) {
  double len = 0;
  for (const auto& [lo, hi] : set) {
    len += std::max(0.0, std::min(hi, b) - std::max(lo, a));
  }
  return len;
}

}  // namespace detail

/// Centre lines of the interior rib grid: symmetric about the stage centre
/// with spacing `rib_pitch`, restricted to the region inside the frame.
inline std::vector<double> rib_centerlines(const StageParams& p, double edge) {
  std::vector<double> c;
  const double mid = 0.5 * edge;
  const int kmax = static_cast<int>(std::floor(mid / p.rib_pitch)) + 1;
  for (int k = -kmax; k <= kmax; ++k) {
    const double x = mid + k * p.rib_pitch;
    if (x > p.frame_width && x < edge - p.frame_width) c.push_back(x);
  }
  return c;
}

/// Union of the strips (frame plus interior ribs) along one axis.
inline std::vector<detail::Interval> rib_strips(const StageParams& p, double edge) {
  std::vector<detail::Interval> strips = {{0.0, p.frame_width}, {edge - p.frame_width, edge}};
  for (double c : rib_centerlines(p, edge)) {
    strips.emplace_back(std::max(0.0, c - 0.5 * p.rib_width), std::min(edge, c + 0.5 * p.rib_width));
  }
  return detail::merge_intervals(std::move(strips));
}

/// Structured `resolution` x `resolution` mesh of the square stage.
inline FEMesh build_mesh(const StageParams& params, double stage_edge, int resolution,
                         const MeshOptions& options = {}) {
  params.validate(stage_edge);
  if (resolution < 8) throw InvalidArgument("build_mesh: resolution must be at least 8");
  const double h = stage_edge / resolution;
  if (options.require_resolved_ribs && params.rib_height > 0 && params.rib_width < h * (1 - 1e-12)) {
    std::ostringstream os;
    os << "build_mesh: rib width " << params.rib_width << " m is narrower than one element ("
       << h << " m); raise the resolution to at least "
       << static_cast<int>(std::ceil(stage_edge / params.rib_width));
    throw MeshResolutionError(os.str());
  }

  FEMesh mesh;
  mesh.edge = stage_edge;
  mesh.resolution = resolution;
  mesh.params = params;
  const int nn = resolution + 1;
  mesh.nodes.reserve(static_cast<std::size_t>(nn * nn));
  for (int j = 0; j < nn; ++j) {
    for (int i = 0; i < nn; ++i) mesh.nodes.emplace_back(i * h, j * h);
  }

  const auto strips = rib_strips(params, stage_edge);
  std::vector<double> cover(static_cast<std::size_t>(resolution));
  for (int i = 0; i < resolution; ++i) {
    cover[static_cast<std::size_t>(i)] = detail::covered_length(strips, i * h, (i + 1) * h) / h;
  }

  const std::size_t ne = static_cast<std::size_t>(resolution) * static_cast<std::size_t>(resolution);
  mesh.elements.reserve(ne);
  mesh.element_thickness.reserve(ne);
  mesh.coverage_x.reserve(ne);
  mesh.coverage_y.reserve(ne);
  for (int j = 0; j < resolution; ++j) {
    for (int i = 0; i < resolution; ++i) {
      const int n0 = j * nn + i;
      mesh.elements.push_back({n0, n0 + 1, n0 + nn + 1, n0 + nn});
      // Ribs running along x occupy intervals in y and vice versa.
      const double cx = cover[static_cast<std::size_t>(j)];
      const double cy = cover[static_cast<std::size_t>(i)];
      mesh.coverage_x.push_back(cx);
      mesh.coverage_y.push_back(cy);
      mesh.element_thickness.push_back(params.base_thickness + params.rib_height * (cx + cy - cx * cy));
    }
  }
  return mesh;
}

}  // namespace stageccd

#endif  // STAGECCD_STRUCTURAL_MESH_HPP
