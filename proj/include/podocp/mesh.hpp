#ifndef PODOCP_MESH_HPP
#define PODOCP_MESH_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "podocp/case_id.hpp"
#include "podocp/error.hpp"
#include "podocp/parameter.hpp"

namespace podocp {

using Point = Eigen::Vector2d;

// Boundary and subdomain tags of the two reference domains.
namespace tags {
inline constexpr int kGraetzDirichlet = 1;  // inlet x=0 and the walls of the first block
inline constexpr int kGraetzControl = 2;    // [1,2]x{0} and [1,2]x{1}
inline constexpr int kGraetzOutflow = 3;    // {2}x(0,1)
inline constexpr int kGraetzOmega1 = 1;     // [0,1]x[0,1]
inline constexpr int kGraetzOmega2 = 2;     // [1,2]x[0.2,0.8]
inline constexpr int kGraetzOmega3 = 3;     // [1,2]x([0,0.2] u [0.8,1])

inline constexpr int kStokesInlet = 1;   // (0,1)x{1}
inline constexpr int kStokesWall = 2;    // remaining boundary
inline constexpr int kStokesCavity = 1;  // (0,1)^2
}  // namespace tags

struct BoundaryEdge {
  std::array<int, 2> vertices;
  int tag;
};

/// Triangulation with boundary and subdomain tags. Triangles are stored
/// counter-clockwise.
struct Mesh {
  std::vector<Point> vertices;
  std::vector<std::array<int, 3>> triangles;
  std::vector<BoundaryEdge> boundary_edges;
  std::vector<int> subdomain_tags;
  std::vector<int> boundary_tag_set;  // tags the case declares, with or without edges

  std::size_t num_vertices() const { return vertices.size(); }
  std::size_t num_triangles() const { return triangles.size(); }

  double signed_area(std::size_t t) const {
    const auto& tri = triangles[t];
    const Point e1 = vertices[tri[1]] - vertices[tri[0]];
    const Point e2 = vertices[tri[2]] - vertices[tri[0]];
    return 0.5 * (e1.x() * e2.y() - e1.y() * e2.x());
  }

  bool has_boundary_tag(int tag) const {
    for (const auto& e : boundary_edges)
      if (e.tag == tag) return true;
    return false;
  }

  bool declares_boundary_tag(int tag) const {
    return std::find(boundary_tag_set.begin(), boundary_tag_set.end(), tag) !=
               boundary_tag_set.end() ||
           has_boundary_tag(tag);
  }

  bool has_subdomain(int tag) const {
    for (int s : subdomain_tags)
      if (s == tag) return true;
    return false;
  }
};

namespace detail {

inline int grid_index_of(double coordinate, double length, int cells, const char* axis) {
  const double scaled = coordinate / length * cells;
  const double rounded = std::round(scaled);
  if (std::abs(scaled - rounded) > 1e-9) {
    std::ostringstream os;
    os << "subdomain interface " << axis << "=" << coordinate << " does not lie on a grid line ("
       << cells << " cells over length " << length << ")";
    throw ConfigError(os.str());
  }
  return static_cast<int>(rounded);
}

}  // namespace detail

/// Structured triangulation of the reference domain: every rectangular cell
/// is cut along its (0,0)-(1,1) diagonal. Vertex (i, j) has index j*(nx+1)+i.
inline Mesh build_structured_mesh(CaseId case_id, int nx, int ny) {
  if (nx < 2 || ny < 2) throw ConfigError("structured mesh needs nx, ny >= 2");

  const double lx = case_id == CaseId::graetz ? 2.0 : 1.0;
  const double ly = 1.0;
  if (case_id == CaseId::graetz) {
    detail::grid_index_of(1.0, lx, nx, "x");
    detail::grid_index_of(0.2, ly, ny, "y");
    detail::grid_index_of(0.8, ly, ny, "y");
  }

  Mesh mesh;
  mesh.boundary_tag_set =
      case_id == CaseId::graetz
          ? std::vector<int>{tags::kGraetzDirichlet, tags::kGraetzControl, tags::kGraetzOutflow}
          : std::vector<int>{tags::kStokesInlet, tags::kStokesWall};
  mesh.vertices.reserve(static_cast<std::size_t>((nx + 1) * (ny + 1)));
  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i <= nx; ++i) mesh.vertices.emplace_back(lx * i / nx, ly * j / ny);

  auto vid = [nx](int i, int j) { return j * (nx + 1) + i; };

  auto subdomain_of = [&](const Point& c) {
    if (case_id == CaseId::stokes_cavity) return tags::kStokesCavity;
    if (c.x() < 1.0) return tags::kGraetzOmega1;
    return (c.y() > 0.2 && c.y() < 0.8) ? tags::kGraetzOmega2 : tags::kGraetzOmega3;
  };

  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const int v00 = vid(i, j), v10 = vid(i + 1, j), v01 = vid(i, j + 1), v11 = vid(i + 1, j + 1);
      for (const auto& tri : {std::array<int, 3>{v00, v10, v11}, std::array<int, 3>{v00, v11, v01}}) {
        const Point c = (mesh.vertices[tri[0]] + mesh.vertices[tri[1]] + mesh.vertices[tri[2]]) / 3.0;
        mesh.triangles.push_back(tri);
        mesh.subdomain_tags.push_back(subdomain_of(c));
      }
    }
  }

  // Boundary edges, oriented counter-clockwise around the domain.
  auto edge_tag = [&](const Point& a, const Point& b) {
    const Point mid = 0.5 * (a + b);
    if (case_id == CaseId::stokes_cavity) {
      return std::abs(mid.y() - 1.0) < 1e-12 ? tags::kStokesInlet : tags::kStokesWall;
    }
    if (std::abs(mid.x() - lx) < 1e-12) return tags::kGraetzOutflow;
    if (mid.x() > 1.0 && (std::abs(mid.y()) < 1e-12 || std::abs(mid.y() - 1.0) < 1e-12))
      return tags::kGraetzControl;
    return tags::kGraetzDirichlet;
  };
  auto add_edge = [&](int a, int b) {
    mesh.boundary_edges.push_back({{a, b}, edge_tag(mesh.vertices[a], mesh.vertices[b])});
  };
  for (int i = 0; i < nx; ++i) add_edge(vid(i, 0), vid(i + 1, 0));
  for (int j = 0; j < ny; ++j) add_edge(vid(nx, j), vid(nx, j + 1));
  for (int i = nx; i > 0; --i) add_edge(vid(i, ny), vid(i - 1, ny));
  for (int j = ny; j > 0; --j) add_edge(vid(0, j), vid(0, j - 1));

  return mesh;
}

/// Affine map x -> linear * x + offset from a reference subdomain to its
/// physical configuration.
struct GeometricMap {
  int subdomain_id = 0;
  Eigen::Matrix2d linear = Eigen::Matrix2d::Identity();
  Eigen::Vector2d offset = Eigen::Vector2d::Zero();
  double jacobian_det = 1.0;

  Point apply(const Point& x) const { return linear * x + offset; }
  Point inverse_apply(const Point& x) const { return linear.inverse() * (x - offset); }
};

inline GeometricMap horizontal_stretch(int subdomain, double anchor_x, double factor) {
  GeometricMap map;
  map.subdomain_id = subdomain;
  map.linear << factor, 0.0, 0.0, 1.0;
  map.offset << anchor_x * (1.0 - factor), 0.0;
  map.jacobian_det = factor;
  return map;
}

/// Per-subdomain maps from the reference domain to Omega(mu).
///   graetz:        identity on Omega_1; x -> 1 + mu_length (x - 1) on Omega_2, Omega_3
///   stokes_cavity: x -> mu_geo x on the whole square
inline std::vector<GeometricMap> subdomain_maps(CaseId case_id, const Parameter& mu) {
  default_parameter_box(case_id).require(mu);
  if (case_id == CaseId::graetz) {
    const double s = mu[graetz::kLength];
    return {horizontal_stretch(tags::kGraetzOmega1, 0.0, 1.0),
            horizontal_stretch(tags::kGraetzOmega2, 1.0, s),
            horizontal_stretch(tags::kGraetzOmega3, 1.0, s)};
  }
  return {horizontal_stretch(tags::kStokesCavity, 0.0, mu[stokes::kStretch])};
}

/// Physical mesh obtained by pushing every vertex through the map of an
/// adjacent subdomain. Topology and tags are unchanged.
inline Mesh deformed_mesh(const Mesh& reference, const std::vector<GeometricMap>& maps) {
  std::map<int, const GeometricMap*> by_subdomain;
  for (const auto& m : maps) by_subdomain[m.subdomain_id] = &m;

  Mesh out = reference;
  std::vector<bool> done(reference.num_vertices(), false);
  for (std::size_t t = 0; t < reference.num_triangles(); ++t) {
    auto it = by_subdomain.find(reference.subdomain_tags[t]);
    if (it == by_subdomain.end()) throw ConfigError("no geometric map for subdomain");
    for (int v : reference.triangles[t]) {
      if (done[v]) continue;
      out.vertices[v] = it->second->apply(reference.vertices[v]);
      done[v] = true;
    }
  }
  return out;
}

/// Plain-text export, one record per line:
///   vertex <x> <y> / triangle <a> <b> <c> <subdomain> / edge <a> <b> <tag>
inline void write_mesh_text(std::ostream& os, const Mesh& mesh) {
  os.precision(17);
  os << "# podocp mesh v1: " << mesh.num_vertices() << " vertices, " << mesh.num_triangles()
     << " triangles, " << mesh.boundary_edges.size() << " boundary edges\n";
  for (const auto& v : mesh.vertices) os << "vertex " << v.x() << ' ' << v.y() << '\n';
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangles[t];
    os << "triangle " << tri[0] << ' ' << tri[1] << ' ' << tri[2] << ' ' << mesh.subdomain_tags[t]
       << '\n';
  }
  for (const auto& e : mesh.boundary_edges)
    os << "edge " << e.vertices[0] << ' ' << e.vertices[1] << ' ' << e.tag << '\n';
}

}  // namespace podocp

#endif  // PODOCP_MESH_HPP
