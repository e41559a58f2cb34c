#ifndef PODOCP_ROM_HPP
#define PODOCP_ROM_HPP

#include <chrono>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>

#include "podocp/affine.hpp"
#include "podocp/model.hpp"
#include "podocp/pod.hpp"

namespace podocp {

// ---------------------------------------------------------------------------
// Snapshots

inline InnerProduct role_inner_product(const CaseModel& model, const std::string& key) {
  return {model.role(key).gram, model.ocp.grid.dt(), model.ocp.grid.steps};
}

/// Inner product attached to a basis key; supremizers live in the
/// velocity space.
inline InnerProduct basis_inner_product(const CaseModel& model, const std::string& key) {
  if (key.rfind("supremizer_", 0) == 0) return role_inner_product(model, model.supremizer_gram_key);
  return role_inner_product(model, key);
}

inline Vector flatten(const Matrix& steps) { return Eigen::Map<const Vector>(steps.data(), steps.size()); }

inline Matrix unflatten(const Vector& flat, Eigen::Index rows) {
  return Eigen::Map<const Matrix>(flat.data(), rows, flat.size() / rows);
}

/// Riesz representation of the divergence form: per step, solve
/// X_v t_k = B(mu)' s_k.
class SupremizerOperator {
 public:
  explicit SupremizerOperator(const CaseModel& model) : model_(&model) {
    if (model.supremizer_coupling.empty()) throw ConfigError("case has no pressure coupling");
    factor_.compute(model.role(model.supremizer_gram_key).gram);
    if (factor_.info() != Eigen::Success) throw NumericalError("velocity inner product is not SPD");
  }

  Matrix operator()(const Parameter& mu, const Matrix& pressure_steps) const {
    const SparseOperator bt = SparseOperator(model_->supremizer_coupling.evaluate(mu).transpose());
    if (pressure_steps.rows() != bt.cols()) throw ConfigError("supremizer: pressure size mismatch");
    Matrix out(bt.rows(), pressure_steps.cols());
    for (Eigen::Index k = 0; k < pressure_steps.cols(); ++k) out.col(k) = factor_.solve(bt * pressure_steps.col(k));
    return out;
  }

 private:
  const CaseModel* model_;
  Eigen::SimplicialLDLT<SparseOperator> factor_;
};

inline Matrix compute_supremizer(const CaseModel& model, const Parameter& mu, const Matrix& pressure_steps) {
  return SupremizerOperator(model)(mu, pressure_steps);
}

/// Snapshot matrices per basis key, one column per training parameter.
struct SnapshotCollection {
  std::vector<Parameter> parameters;
  std::map<std::string, Matrix> sets;

  SnapshotSet set(const std::string& key) const {
    auto it = sets.find(key);
    if (it == sets.end()) throw ConfigError("no snapshots for '" + key + "'");
    return {key, parameters, it->second};
  }
};

inline SnapshotCollection collect_snapshots(const CaseModel& model, const std::vector<Parameter>& params,
                                            const std::vector<KKTSolution>& solutions) {
  if (params.size() != solutions.size()) throw ConfigError("snapshot parameter/solution count mismatch");
  SnapshotCollection c;
  c.parameters = params;
  const Eigen::Index m = static_cast<Eigen::Index>(params.size());
  const int nt = model.ocp.grid.steps;
  for (const auto& [key, role] : model.roles) {
    Matrix s(role.size * nt, m);
    for (Eigen::Index j = 0; j < m; ++j) s.col(j) = flatten(role_slice(role, block_of(solutions[j], role.block)));
    c.sets[key] = std::move(s);
  }
  if (!model.supremizer_coupling.empty()) {
    const SupremizerOperator sup(model);
    for (const char* src : {"pressure", "adjoint_pressure"}) {
      const RoleLayout& role = model.role(src);
      const Eigen::Index nv = model.role(model.supremizer_gram_key).size;
      Matrix s(nv * nt, m);
      for (Eigen::Index j = 0; j < m; ++j)
        s.col(j) = flatten(sup(params[j], role_slice(role, block_of(solutions[j], role.block))));
      c.sets[std::string("supremizer_") + src] = std::move(s);
    }
  }
  return c;
}

inline std::map<std::string, ReducedBasis> compute_pod_bases(const CaseModel& model, const SnapshotCollection& snaps,
                                                             Eigen::Index n, std::ostream* warnings = &std::cerr) {
  std::map<std::string, ReducedBasis> out;
  for (const auto& [key, s] : snaps.sets)
    out[key] = compute_pod_basis(snaps.set(key), basis_inner_product(model, key), n, warnings);
  return out;
}

// ---------------------------------------------------------------------------
// Aggregated spaces

/// X-orthonormal basis of the span of several families (first `n` columns
/// of each), in the given order.
inline Matrix aggregate_family(const std::vector<Matrix>& families, const InnerProduct& ip, Eigen::Index n,
                               Eigen::Index* deficiency = nullptr, double drop_tol = 1e-10) {
  Eigen::Index cols = 0;
  for (const auto& f : families) cols += std::min(n, f.cols());
  if (cols == 0) throw ConfigError("aggregation of empty bases");
  Matrix all(ip.size(), cols);
  Eigen::Index c = 0;
  for (const auto& f : families) {
    const Eigen::Index take = std::min(n, f.cols());
    all.middleCols(c, take) = f.leftCols(take);
    c += take;
  }
  Eigen::Index dropped = 0;
  Matrix q = orthonormalize(all, ip, drop_tol, &dropped);
  if (deficiency) *deficiency = dropped;
  return q;
}

struct AggregatedSpace {
  Matrix primal;   // (N_t * state size) x N_Y, columns in the state layout
  Matrix control;  // (N_t * control size) x N_U
  std::vector<std::pair<std::string, Eigen::Index>> block_sizes;
  Eigen::Index deficiency = 0;
  Eigen::Index n = 0;

  Eigen::Index primal_size() const { return primal.cols(); }
  Eigen::Index control_size() const { return control.cols(); }
  Eigen::Index total_size() const { return 2 * primal_size() + control_size(); }
};

inline AggregatedSpace aggregate(const CaseModel& model, const std::map<std::string, ReducedBasis>& pod,
                                 Eigen::Index n, std::ostream* warnings = &std::cerr) {
  const int nt = model.ocp.grid.steps;
  const Eigen::Index ns = model.ocp.state_size;
  AggregatedSpace space;
  space.n = n;
  std::vector<Matrix> blocks;
  for (const auto& spec : model.primal_blocks) {
    std::vector<Matrix> fams;
    for (const auto& src : spec.sources) {
      auto it = pod.find(src);
      if (it == pod.end()) throw ConfigError("aggregation: missing basis '" + src + "'");
      if (it->second.size() < n && warnings)
        *warnings << "warning: basis '" << src << "' has only " << it->second.size() << " modes\n";
      fams.push_back(it->second.vectors);
    }
    Eigen::Index def = 0;
    blocks.push_back(aggregate_family(fams, role_inner_product(model, spec.gram_key), n, &def));
    if (def > 0 && warnings)
      *warnings << "warning: aggregated block '" << spec.name << "' lost " << def << " dependent directions\n";
    space.deficiency += def;
    space.block_sizes.emplace_back(spec.name, blocks.back().cols());
  }
  Eigen::Index total = 0;
  for (const auto& b : blocks) total += b.cols();
  space.primal = Matrix::Zero(nt * ns, total);
  Eigen::Index col = 0;
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const auto& spec = model.primal_blocks[b];
    for (Eigen::Index j = 0; j < blocks[b].cols(); ++j, ++col)
      for (int k = 0; k < nt; ++k)
        space.primal.col(col).segment(k * ns + spec.offset, spec.size) =
            blocks[b].col(j).segment(k * spec.size, spec.size);
  }
  const auto& ctrl = pod.at(model.control_key);
  space.control = ctrl.vectors.leftCols(std::min(n, ctrl.size()));
  space.block_sizes.emplace_back("control", space.control.cols());
  return space;
}

// ---------------------------------------------------------------------------
// Galerkin projection

namespace detail {

/// sum_k U_k' T V_k (shift = 0) or sum_{k>=1} U_k' T V_{k-1} (shift = 1).
inline Matrix project_steps(const SparseOperator& t, const Matrix& u, const Matrix& v, int steps, int shift = 0) {
  const Eigen::Index r = t.rows(), c = t.cols();
  Matrix out = Matrix::Zero(u.cols(), v.cols());
  for (int k = shift; k < steps; ++k) {
    const Matrix tv = t * v.middleRows((k - shift) * c, c);
    out.noalias() += u.middleRows(k * r, r).transpose() * tv;
  }
  return out;
}

inline Vector project_load(const Matrix& load, const Matrix& u) {
  const Eigen::Index r = load.rows();
  Vector out = Vector::Zero(u.cols());
  for (Eigen::Index k = 0; k < load.cols(); ++k) out.noalias() += u.middleRows(k * r, r).transpose() * load.col(k);
  return out;
}

}  // namespace detail

/// Offline-projected reduced saddle point system with unknowns
/// [y (N_Y), u (N_U), p (N_Y)].
struct ReducedModel {
  CaseId case_id = CaseId::graetz;
  ParameterBox box;
  TimeGrid grid;
  double alpha = 1.0;
  Eigen::Index n = 0;
  Eigen::Index primal_size = 0;
  Eigen::Index control_size = 0;
  std::vector<std::pair<std::string, Eigen::Index>> block_sizes;

  AffineMatrix kkt;          // (2 N_Y + N_U)^2
  AffineVector rhs;          // 2 N_Y + N_U
  AffineMatrix hessian;      // (N_Y + N_U)^2, objective quadratic part
  AffineVector load;         // N_Y + N_U, objective linear part
  AffineScalar constant;

  Matrix primal_basis;   // for lifting
  Matrix control_basis;

  Eigen::Index total_size() const { return 2 * primal_size + control_size; }
};

inline ReducedModel galerkin_project(const CaseModel& model, const AggregatedSpace& space) {
  const AffineOcp& ocp = model.ocp;
  const int nt = ocp.grid.steps;
  const double dt = ocp.grid.dt();
  const Matrix& w = space.primal;
  const Matrix& z = space.control;
  if (w.rows() != nt * ocp.state_size || z.rows() != nt * ocp.control_size)
    throw ConfigError("galerkin_project: basis does not match the case dimensions");
  const Eigen::Index ny = w.cols(), nu = z.cols(), tot = 2 * ny + nu;

  ReducedModel rm;
  rm.case_id = model.config.case_id;
  rm.box = model.config.box;
  rm.grid = ocp.grid;
  rm.alpha = ocp.alpha;
  rm.n = space.n;
  rm.primal_size = ny;
  rm.control_size = nu;
  rm.block_sizes = space.block_sizes;
  rm.primal_basis = w;
  rm.control_basis = z;

  auto add_state_coupling = [&](const Theta& theta, const Matrix& b) {  // b: N_Y x N_Y, rows = adjoint tests
    Matrix t = Matrix::Zero(tot, tot);
    t.block(ny + nu, 0, ny, ny) = b;
    t.block(0, ny + nu, ny, ny) = b.transpose();
    rm.kkt.add(theta, t);
  };

  for (const auto& term : ocp.observation.terms()) {
    const Matrix a = dt * detail::project_steps(term.value, w, w, nt);
    Matrix t = Matrix::Zero(tot, tot);
    t.topLeftCorner(ny, ny) = a;
    rm.kkt.add(term.theta, t);
    Matrix h = Matrix::Zero(ny + nu, ny + nu);
    h.topLeftCorner(ny, ny) = a;
    rm.hessian.add(term.theta, h);
  }
  for (const auto& term : ocp.control_mass.terms()) {
    const Matrix a = ocp.alpha * dt * detail::project_steps(term.value, z, z, nt);
    Matrix t = Matrix::Zero(tot, tot);
    t.block(ny, ny, nu, nu) = a;
    rm.kkt.add(term.theta, t);
    Matrix h = Matrix::Zero(ny + nu, ny + nu);
    h.block(ny, ny, nu, nu) = a;
    rm.hessian.add(term.theta, h);
  }
  for (const auto& term : ocp.time_mass.terms())
    add_state_coupling(term.theta,
                       detail::project_steps(term.value, w, w, nt) - detail::project_steps(term.value, w, w, nt, 1));
  for (const auto& term : ocp.spatial.terms())
    add_state_coupling(term.theta, dt * detail::project_steps(term.value, w, w, nt));
  for (const auto& term : ocp.constraint.terms())
    add_state_coupling(term.theta, detail::project_steps(term.value, w, w, nt));
  for (const auto& term : ocp.control.terms()) {
    const Matrix b = -dt * detail::project_steps(term.value, w, z, nt);
    Matrix t = Matrix::Zero(tot, tot);
    t.block(ny + nu, ny, ny, nu) = b;
    t.block(ny, ny + nu, nu, ny) = b.transpose();
    rm.kkt.add(term.theta, t);
  }
  for (const auto& term : ocp.state_load.terms()) {
    const Vector f = detail::project_load(term.value, w);
    Vector r = Vector::Zero(tot);
    r.head(ny) = f;
    rm.rhs.add(term.theta, r);
    Vector l = Vector::Zero(ny + nu);
    l.head(ny) = f;
    rm.load.add(term.theta, l);
  }
  for (const auto& term : ocp.constraint_load.terms()) {
    Vector r = Vector::Zero(tot);
    r.tail(ny) = detail::project_load(term.value, w);
    rm.rhs.add(term.theta, r);
  }
  for (const auto& term : ocp.constant.terms()) rm.constant.add(term.theta, term.value);
  if (rm.load.empty()) rm.load.add(Theta::constant(rm.box.dim()), Vector::Zero(ny + nu));
  if (rm.rhs.empty()) rm.rhs.add(Theta::constant(rm.box.dim()), Vector::Zero(tot));
  if (rm.constant.empty()) rm.constant.add(Theta::constant(rm.box.dim()), 0.0);
  return rm;
}

// ---------------------------------------------------------------------------
// Online stage

struct OnlineSolution {
  Parameter mu;
  Vector state;    // reduced coefficients
  Vector control;
  Vector adjoint;
  double objective = 0.0;
  double seconds = 0.0;  // assemble + solve
};

inline OnlineSolution solve_online(const ReducedModel& rm, const Parameter& mu) {
  rm.box.require(mu);
  const auto start = std::chrono::steady_clock::now();
  const Matrix s = rm.kkt.evaluate(mu);
  const Vector r = rm.rhs.evaluate(mu);
  const Eigen::PartialPivLU<Matrix> lu(s);
  const Vector x = lu.solve(r);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (!x.allFinite()) {
    const Eigen::JacobiSVD<Matrix> svd(s);
    throw NumericalError("reduced KKT matrix is singular (smallest singular value " +
                         std::to_string(svd.singularValues().tail(1)(0)) + ")");
  }
  OnlineSolution out;
  out.mu = mu;
  out.seconds = seconds;
  const Eigen::Index ny = rm.primal_size, nu = rm.control_size;
  out.state = x.head(ny);
  out.control = x.segment(ny, nu);
  out.adjoint = x.tail(ny);
  const Vector xu = x.head(ny + nu);
  out.objective = 0.5 * xu.dot(rm.hessian.evaluate(mu) * xu) - rm.load.evaluate(mu).dot(xu) + rm.constant.evaluate(mu);
  return out;
}

inline double reduced_min_singular_value(const ReducedModel& rm, const Parameter& mu) {
  const Eigen::JacobiSVD<Matrix> svd(rm.kkt.evaluate(mu));
  return svd.singularValues().tail(1)(0);
}

/// Average online wall time over enough repetitions to be measurable.
inline double time_online(const ReducedModel& rm, const Parameter& mu, double min_total = 0.02) {
  int reps = 0;
  double total = 0.0;
  while (total < min_total || reps < 3) {
    total += solve_online(rm, mu).seconds;
    ++reps;
  }
  return total / reps;
}

/// Full-order representation of a reduced solution.
inline KKTSolution lift_solution(const ReducedModel& rm, const OnlineSolution& sol, Eigen::Index state_size,
                                 Eigen::Index control_size) {
  KKTSolution out;
  out.state = unflatten(rm.primal_basis * sol.state, state_size);
  out.control = unflatten(rm.control_basis * sol.control, control_size);
  out.adjoint = unflatten(rm.primal_basis * sol.adjoint, state_size);
  return out;
}

inline KKTSolution lift_solution(const CaseModel& model, const ReducedModel& rm, const OnlineSolution& sol) {
  return lift_solution(rm, sol, model.ocp.state_size, model.ocp.control_size);
}

// ---------------------------------------------------------------------------
// Errors

struct ErrorReport {
  std::map<std::string, double> relative;  // per variable
  std::vector<std::string> absolute;       // variables whose reference norm vanished
  double output = 0.0;
};

inline ErrorReport error_report(const CaseModel& model, const KKTSolution& fe, double j_fe, const KKTSolution& rom,
                                double j_rom) {
  ErrorReport rep;
  const double dt = model.ocp.grid.dt();
  for (const auto& [key, role] : model.roles) {
    const Matrix a = full_field(role, role_slice(role, block_of(fe, role.block)));
    const Matrix b = full_field(role, role_slice(role, block_of(rom, role.block)));
    const double err = spacetime_norm(role.norm_gram, a - b, dt);
    const double ref = spacetime_norm(role.norm_gram, a, dt);
    if (ref > 0.0) {
      rep.relative[key] = err / ref;
    } else {
      rep.relative[key] = err;
      rep.absolute.push_back(key);
    }
  }
  rep.output = j_fe != 0.0 ? std::abs(j_fe - j_rom) / std::abs(j_fe) : std::abs(j_rom);
  return rep;
}

}  // namespace podocp

#endif  // PODOCP_ROM_HPP
