#ifndef PODOCP_FEM_HPP
#define PODOCP_FEM_HPP

#include <algorithm>
#include <array>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "podocp/error.hpp"
#include "podocp/mesh.hpp"
#include "podocp/quadrature.hpp"

namespace podocp {

using SparseOperator = Eigen::SparseMatrix<double>;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Continuous Lagrange space of order 1 or 2 with 1 or 2 components.
///
/// Scalar dofs are numbered vertices first, then edge midpoints in order of
/// first appearance while sweeping the triangles. Vector dofs are blocked by
/// component: dof = component * num_scalar_dofs() + scalar_dof.
class FunctionSpace {
 public:
  FunctionSpace(std::shared_ptr<const Mesh> mesh, int order, int components)
      : mesh_(std::move(mesh)), order_(order), components_(components) {
    if (order_ != 1 && order_ != 2) throw ConfigError("element order must be 1 or 2");
    if (components_ != 1 && components_ != 2) throw ConfigError("components must be 1 or 2");
    build_dof_map();
  }

  const Mesh& mesh() const { return *mesh_; }
  std::shared_ptr<const Mesh> mesh_ptr() const { return mesh_; }
  int order() const { return order_; }
  int components() const { return components_; }
  int local_dofs() const { return order_ == 1 ? 3 : 6; }

  Eigen::Index num_scalar_dofs() const { return static_cast<Eigen::Index>(dof_points_.size()); }
  Eigen::Index num_dofs() const { return components_ * num_scalar_dofs(); }

  /// Scalar dofs of triangle t: v0 v1 v2 [e01 e12 e20].
  const std::vector<int>& cell_dofs(std::size_t t) const { return cell_dofs_[t]; }
  /// Scalar dofs of boundary edge e: a b [mid].
  const std::vector<int>& edge_dofs(std::size_t e) const { return edge_dofs_[e]; }
  const Point& dof_point(int scalar_dof) const { return dof_points_[scalar_dof]; }

  /// Scalar dofs lying on edges with the given boundary tag, sorted.
  std::vector<int> scalar_dofs_on_tag(int tag) const {
    std::vector<int> out;
    for (std::size_t e = 0; e < mesh_->boundary_edges.size(); ++e) {
      if (mesh_->boundary_edges[e].tag != tag) continue;
      out.insert(out.end(), edge_dofs_[e].begin(), edge_dofs_[e].end());
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

 private:
  void build_dof_map() {
    const Mesh& m = *mesh_;
    dof_points_ = m.vertices;
    cell_dofs_.resize(m.num_triangles());
    std::map<std::pair<int, int>, int> edge_ids;
    auto edge_dof = [&](int a, int b) {
      const auto key = std::minmax(a, b);
      auto [it, inserted] = edge_ids.try_emplace(key, static_cast<int>(dof_points_.size()));
      if (inserted) dof_points_.push_back(0.5 * (m.vertices[a] + m.vertices[b]));
      return it->second;
    };
    for (std::size_t t = 0; t < m.num_triangles(); ++t) {
      const auto& tri = m.triangles[t];
      auto& dofs = cell_dofs_[t];
      dofs.assign(tri.begin(), tri.end());
      if (order_ == 2) {
        dofs.push_back(edge_dof(tri[0], tri[1]));
        dofs.push_back(edge_dof(tri[1], tri[2]));
        dofs.push_back(edge_dof(tri[2], tri[0]));
      }
    }
    edge_dofs_.resize(m.boundary_edges.size());
    for (std::size_t e = 0; e < m.boundary_edges.size(); ++e) {
      const auto [a, b] = m.boundary_edges[e].vertices;
      edge_dofs_[e] = {a, b};
      if (order_ == 2) edge_dofs_[e].push_back(edge_ids.at(std::minmax(a, b)));
    }
  }

  std::shared_ptr<const Mesh> mesh_;
  int order_;
  int components_;
  std::vector<Point> dof_points_;
  std::vector<std::vector<int>> cell_dofs_;
  std::vector<std::vector<int>> edge_dofs_;
};

namespace detail {

/// Shape function values and physical gradients at one quadrature point.
struct ShapeEval {
  Eigen::Matrix<double, 6, 1> values;
  Eigen::Matrix<double, 6, 2> grads;
  Point x;
  double weight;  // reference weight times |det J|
};

inline void reference_shapes(int order, double s, double t, Eigen::Matrix<double, 6, 1>& v,
                             Eigen::Matrix<double, 6, 2>& g) {
  const double l[3] = {1.0 - s - t, s, t};
  const Eigen::Vector2d dl[3] = {{-1.0, -1.0}, {1.0, 0.0}, {0.0, 1.0}};
  if (order == 1) {
    for (int i = 0; i < 3; ++i) {
      v(i) = l[i];
      g.row(i) = dl[i].transpose();
    }
    return;
  }
  for (int i = 0; i < 3; ++i) {
    v(i) = l[i] * (2.0 * l[i] - 1.0);
    g.row(i) = ((4.0 * l[i] - 1.0) * dl[i]).transpose();
  }
  const int edges[3][2] = {{0, 1}, {1, 2}, {2, 0}};
  for (int e = 0; e < 3; ++e) {
    const int a = edges[e][0], b = edges[e][1];
    v(3 + e) = 4.0 * l[a] * l[b];
    g.row(3 + e) = (4.0 * (l[b] * dl[a] + l[a] * dl[b])).transpose();
  }
}

/// Evaluates `order` shape functions on triangle t at every rule point.
inline std::vector<ShapeEval> evaluate_cell(const Mesh& mesh, std::size_t t, int order,
                                            const TriangleRule& rule) {
  const auto& tri = mesh.triangles[t];
  const Point& p0 = mesh.vertices[tri[0]];
  Eigen::Matrix2d jac;
  jac.col(0) = mesh.vertices[tri[1]] - p0;
  jac.col(1) = mesh.vertices[tri[2]] - p0;
  const double det = jac.determinant();
  if (det <= 0.0) throw NumericalError("triangle with non-positive signed area");
  const Eigen::Matrix2d inv_t = jac.inverse().transpose();

  std::vector<ShapeEval> out(rule.points.size());
  for (std::size_t q = 0; q < rule.points.size(); ++q) {
    Eigen::Matrix<double, 6, 2> ref_grads = Eigen::Matrix<double, 6, 2>::Zero();
    out[q].values.setZero();
    reference_shapes(order, rule.points[q].x(), rule.points[q].y(), out[q].values, ref_grads);
    out[q].grads = ref_grads * inv_t.transpose();
    out[q].x = p0 + jac * rule.points[q];
    out[q].weight = rule.weights[q] * det;
  }
  return out;
}

inline const TriangleRule& default_rule(int order) {
  return order == 1 ? triangle_rule_degree2() : triangle_rule_degree4();
}

inline bool in_subdomain(const Mesh& mesh, std::size_t t, const std::optional<int>& subdomain) {
  return !subdomain || mesh.subdomain_tags[t] == *subdomain;
}

inline void check_subdomain(const Mesh& mesh, const std::optional<int>& subdomain) {
  if (subdomain && !mesh.has_subdomain(*subdomain))
    throw ConfigError("unknown subdomain tag " + std::to_string(*subdomain));
}

/// Generic scalar bilinear-form assembly replicated over the components of
/// `space` (block diagonal). `kernel(eval, i, j)` returns the integrand.
template <class Kernel>
SparseOperator assemble_blockwise(const FunctionSpace& space, const std::optional<int>& subdomain,
                                  const TriangleRule& rule, Kernel&& kernel) {
  const Mesh& mesh = space.mesh();
  check_subdomain(mesh, subdomain);
  const Eigen::Index ns = space.num_scalar_dofs();
  const int nl = space.local_dofs();
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(mesh.num_triangles() * nl * nl * space.components());
  Eigen::MatrixXd local(nl, nl);
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    if (!in_subdomain(mesh, t, subdomain)) continue;
    const auto evals = evaluate_cell(mesh, t, space.order(), rule);
    local.setZero();
    for (const auto& ev : evals)
      for (int i = 0; i < nl; ++i)
        for (int j = 0; j < nl; ++j) local(i, j) += ev.weight * kernel(ev, i, j);
    const auto& dofs = space.cell_dofs(t);
    for (int c = 0; c < space.components(); ++c)
      for (int i = 0; i < nl; ++i)
        for (int j = 0; j < nl; ++j)
          trips.emplace_back(c * ns + dofs[i], c * ns + dofs[j], local(i, j));
  }
  SparseOperator op(space.num_dofs(), space.num_dofs());
  op.setFromTriplets(trips.begin(), trips.end());
  op.makeCompressed();
  return op;
}

}  // namespace detail

/// M_ij = int phi_i phi_j over `subdomain` (or the whole mesh).
inline SparseOperator assemble_mass(const FunctionSpace& space,
                                    std::optional<int> subdomain = std::nullopt) {
  return detail::assemble_blockwise(
      space, subdomain, detail::default_rule(space.order()),
      [](const detail::ShapeEval& ev, int i, int j) { return ev.values(i) * ev.values(j); });
}

/// int d_b(phi_j) d_a(phi_i): one entry of the anisotropic stiffness split.
inline SparseOperator assemble_gradient_product(const FunctionSpace& space,
                                                std::optional<int> subdomain, int a, int b) {
  return detail::assemble_blockwise(
      space, subdomain, detail::default_rule(space.order()),
      [a, b](const detail::ShapeEval& ev, int i, int j) { return ev.grads(j, b) * ev.grads(i, a); });
}

/// K_ij = int (metric grad phi_j) . grad phi_i with a symmetric positive
/// definite 2x2 metric.
inline SparseOperator assemble_stiffness(const FunctionSpace& space, std::optional<int> subdomain,
                                         const Eigen::Matrix2d& metric) {
  if (std::abs(metric(0, 1) - metric(1, 0)) > 1e-14 * metric.norm() || metric(0, 0) <= 0.0 ||
      metric.determinant() <= 0.0) {
    throw ConfigError("stiffness metric must be symmetric positive definite");
  }
  return detail::assemble_blockwise(
      space, subdomain, detail::default_rule(space.order()),
      [&metric](const detail::ShapeEval& ev, int i, int j) {
        return ev.grads.row(i).dot(metric * ev.grads.row(j).transpose());
      });
}

inline SparseOperator assemble_stiffness(const FunctionSpace& space,
                                         std::optional<int> subdomain = std::nullopt) {
  return assemble_stiffness(space, subdomain, Eigen::Matrix2d::Identity());
}

using VelocityField = std::function<Eigen::Vector2d(const Point&)>;

/// A_ij = int (v . grad phi_j) phi_i. Uses the degree-4 rule so quadratic
/// velocity profiles are integrated exactly on P1.
inline SparseOperator assemble_advection(const FunctionSpace& space, const VelocityField& velocity,
                                         std::optional<int> subdomain = std::nullopt) {
  return detail::assemble_blockwise(space, subdomain, triangle_rule_degree4(),
                                    [&velocity](const detail::ShapeEval& ev, int i, int j) {
                                      return velocity(ev.x).dot(ev.grads.row(j)) * ev.values(i);
                                    });
}

/// D_ij = -int psi_i d_c(Phi_j^c): the `component` part of the divergence
/// form, shape (pressure dofs) x (velocity dofs).
inline SparseOperator assemble_divergence_component(const FunctionSpace& velocity,
                                                    const FunctionSpace& pressure, int component,
                                                    std::optional<int> subdomain = std::nullopt) {
  if (&velocity.mesh() != &pressure.mesh() &&
      (velocity.mesh().num_triangles() != pressure.mesh().num_triangles() ||
       velocity.mesh().vertices != pressure.mesh().vertices)) {
    throw ConfigError("divergence: velocity and pressure spaces live on different meshes");
  }
  if (velocity.components() != 2 || pressure.components() != 1)
    throw ConfigError("divergence needs a vector velocity space and a scalar pressure space");
  const Mesh& mesh = velocity.mesh();
  detail::check_subdomain(mesh, subdomain);
  const auto& rule = triangle_rule_degree4();
  const Eigen::Index ns = velocity.num_scalar_dofs();
  std::vector<Eigen::Triplet<double>> trips;
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    if (!detail::in_subdomain(mesh, t, subdomain)) continue;
    const auto vel = detail::evaluate_cell(mesh, t, velocity.order(), rule);
    const auto pre = detail::evaluate_cell(mesh, t, pressure.order(), rule);
    const auto& vd = velocity.cell_dofs(t);
    const auto& pd = pressure.cell_dofs(t);
    for (int i = 0; i < pressure.local_dofs(); ++i) {
      for (int j = 0; j < velocity.local_dofs(); ++j) {
        double value = 0.0;
        for (std::size_t q = 0; q < rule.points.size(); ++q)
          value -= vel[q].weight * pre[q].values(i) * vel[q].grads(j, component);
        trips.emplace_back(pd[i], component * ns + vd[j], value);
      }
    }
  }
  SparseOperator op(pressure.num_dofs(), velocity.num_dofs());
  op.setFromTriplets(trips.begin(), trips.end());
  op.makeCompressed();
  return op;
}

/// D_ij = -int psi_i div(Phi_j).
inline SparseOperator assemble_divergence(const FunctionSpace& velocity,
                                          const FunctionSpace& pressure) {
  SparseOperator d = assemble_divergence_component(velocity, pressure, 0);
  d += assemble_divergence_component(velocity, pressure, 1);
  return d;
}

/// (M_G)_ij = int_G phi_i phi_j over the boundary edges carrying `tag`.
inline SparseOperator assemble_boundary_mass(const FunctionSpace& space, int tag) {
  const Mesh& mesh = space.mesh();
  if (!mesh.declares_boundary_tag(tag))
    throw ConfigError("unknown boundary tag " + std::to_string(tag));
  const auto& rule = line_rule_gauss3();
  const Eigen::Index ns = space.num_scalar_dofs();
  std::vector<Eigen::Triplet<double>> trips;
  for (std::size_t e = 0; e < mesh.boundary_edges.size(); ++e) {
    if (mesh.boundary_edges[e].tag != tag) continue;
    const auto [a, b] = mesh.boundary_edges[e].vertices;
    const double length = (mesh.vertices[b] - mesh.vertices[a]).norm();
    const auto& dofs = space.edge_dofs(e);
    const int nl = static_cast<int>(dofs.size());
    for (std::size_t q = 0; q < rule.points.size(); ++q) {
      const double s = rule.points[q];
      double phi[3];
      if (space.order() == 1) {
        phi[0] = 1.0 - s;
        phi[1] = s;
      } else {
        phi[0] = (1.0 - s) * (1.0 - 2.0 * s);
        phi[1] = s * (2.0 * s - 1.0);
        phi[2] = 4.0 * s * (1.0 - s);
      }
      for (int c = 0; c < space.components(); ++c)
        for (int i = 0; i < nl; ++i)
          for (int j = 0; j < nl; ++j)
            trips.emplace_back(c * ns + dofs[i], c * ns + dofs[j],
                               rule.weights[q] * length * phi[i] * phi[j]);
    }
  }
  SparseOperator op(space.num_dofs(), space.num_dofs());
  op.setFromTriplets(trips.begin(), trips.end());
  op.makeCompressed();
  return op;
}

/// Nodal interpolation of a (vector) function at the Lagrange nodes.
inline Vector interpolate(const FunctionSpace& space,
                          const std::function<Eigen::Vector2d(const Point&)>& f) {
  const Eigen::Index ns = space.num_scalar_dofs();
  Vector out(space.num_dofs());
  for (Eigen::Index s = 0; s < ns; ++s) {
    const Eigen::Vector2d v = f(space.dof_point(static_cast<int>(s)));
    for (int c = 0; c < space.components(); ++c) out(c * ns + s) = v(c);
  }
  return out;
}

inline Vector interpolate_scalar(const FunctionSpace& space,
                                 const std::function<double(const Point&)>& f) {
  return interpolate(space, [&f](const Point& x) { return Eigen::Vector2d(f(x), 0.0); });
}

// ---------------------------------------------------------------------------
// Dirichlet lifting

using BoundaryValue = std::function<Eigen::Vector2d(const Point&)>;

/// Boundary data keyed by tag. At dofs shared by several tags the earliest
/// tag in `priority` wins; a shared dof whose tags are not all ordered is an
/// error.
struct DirichletData {
  std::map<int, BoundaryValue> values;
  std::vector<int> priority;
};

/// Split of the dofs into free and constrained sets, plus the lift vector
/// that interpolates the boundary data on constrained dofs.
struct DofPartition {
  Vector lift;
  std::vector<int> free_dofs;
  std::vector<int> dirichlet_dofs;
  std::vector<int> free_index;  // -1 on Dirichlet dofs

  Eigen::Index num_free() const { return static_cast<Eigen::Index>(free_dofs.size()); }
  Eigen::Index num_total() const { return static_cast<Eigen::Index>(free_index.size()); }
};

inline DofPartition dirichlet_lifting(const FunctionSpace& space, const DirichletData& data) {
  const Eigen::Index ns = space.num_scalar_dofs();
  std::vector<int> owner(ns, 0);  // winning tag per scalar dof, 0 = none
  auto rank = [&data](int tag) {
    auto it = std::find(data.priority.begin(), data.priority.end(), tag);
    return it == data.priority.end() ? -1 : static_cast<int>(it - data.priority.begin());
  };
  for (const auto& [tag, fn] : data.values) {
    if (!space.mesh().has_boundary_tag(tag))
      throw ConfigError("Dirichlet data for unknown boundary tag " + std::to_string(tag));
    for (int s : space.scalar_dofs_on_tag(tag)) {
      if (owner[s] == 0) {
        owner[s] = tag;
        continue;
      }
      const int r_old = rank(owner[s]), r_new = rank(tag);
      if (r_old < 0 || r_new < 0) {
        throw ConfigError("Dirichlet tags " + std::to_string(owner[s]) + " and " +
                          std::to_string(tag) + " share a dof but have no priority order");
      }
      if (r_new < r_old) owner[s] = tag;
    }
  }

  DofPartition part;
  part.lift = Vector::Zero(space.num_dofs());
  part.free_index.assign(space.num_dofs(), -1);
  for (int c = 0; c < space.components(); ++c) {
    for (Eigen::Index s = 0; s < ns; ++s) {
      const int dof = static_cast<int>(c * ns + s);
      if (owner[s] == 0) {
        part.free_index[dof] = static_cast<int>(part.free_dofs.size());
        part.free_dofs.push_back(dof);
      } else {
        part.dirichlet_dofs.push_back(dof);
        part.lift(dof) = data.values.at(owner[s])(space.dof_point(static_cast<int>(s)))(c);
      }
    }
  }
  return part;
}

/// Selection matrix S with S(i, dofs[i]) = 1, so S*A*S' restricts A.
inline SparseOperator selection(const std::vector<int>& dofs, Eigen::Index total) {
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(dofs.size());
  for (std::size_t i = 0; i < dofs.size(); ++i) trips.emplace_back(static_cast<int>(i), dofs[i], 1.0);
  SparseOperator s(static_cast<Eigen::Index>(dofs.size()), total);
  s.setFromTriplets(trips.begin(), trips.end());
  return s;
}

inline SparseOperator restrict_operator(const SparseOperator& op, const std::vector<int>& rows,
                                        const std::vector<int>& cols) {
  SparseOperator out = selection(rows, op.rows()) * op * SparseOperator(selection(cols, op.cols()).transpose());
  out.prune(0.0);
  out.makeCompressed();
  return out;
}

inline Vector restrict_vector(const Vector& v, const std::vector<int>& dofs) {
  Vector out(static_cast<Eigen::Index>(dofs.size()));
  for (std::size_t i = 0; i < dofs.size(); ++i) out(static_cast<Eigen::Index>(i)) = v(dofs[i]);
  return out;
}

/// Full vector from free values plus the lift on constrained dofs.
inline Vector expand_free(const DofPartition& part, const Vector& free_values, const Vector& lift) {
  Vector out = lift;
  for (std::size_t i = 0; i < part.free_dofs.size(); ++i)
    out(part.free_dofs[i]) = free_values(static_cast<Eigen::Index>(i));
  return out;
}

// ---------------------------------------------------------------------------
// Small operator utilities

inline double max_abs(const SparseOperator& op) {
  double m = 0.0;
  for (int k = 0; k < op.outerSize(); ++k)
    for (SparseOperator::InnerIterator it(op, k); it; ++it) m = std::max(m, std::abs(it.value()));
  return m;
}

inline double symmetry_defect(const SparseOperator& op) {
  const SparseOperator diff = op - SparseOperator(op.transpose());
  return max_abs(diff);
}

inline bool is_symmetric(const SparseOperator& op, double tol = 1e-12) {
  return op.rows() == op.cols() && symmetry_defect(op) < tol;
}

/// Coordinate text export: header line "rows cols nnz", then "row col value".
inline void write_coo_text(std::ostream& os, const SparseOperator& op) {
  os.precision(17);
  os << op.rows() << ' ' << op.cols() << ' ' << op.nonZeros() << '\n';
  for (int k = 0; k < op.outerSize(); ++k)
    for (SparseOperator::InnerIterator it(op, k); it; ++it)
      os << it.row() << ' ' << it.col() << ' ' << it.value() << '\n';
}

}  // namespace podocp

#endif  // PODOCP_FEM_HPP
