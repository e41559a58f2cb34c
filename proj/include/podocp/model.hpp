#ifndef PODOCP_MODEL_HPP
#define PODOCP_MODEL_HPP

#include <chrono>
#include <cmath>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "podocp/affine.hpp"
#include "podocp/cases.hpp"
#include "podocp/fem.hpp"
#include "podocp/mesh.hpp"
#include "podocp/spacetime.hpp"

namespace podocp {

/// Parameter-separable linear-quadratic OCP on the free dofs: affine step
/// operators, affine loads (one column per step) and the objective constant.
struct AffineOcp {
  TimeGrid grid;
  double alpha = 1.0;
  Eigen::Index state_size = 0;
  Eigen::Index control_size = 0;

  AffineOperator time_mass;
  AffineOperator spatial;
  AffineOperator constraint;
  AffineOperator control;
  AffineOperator observation;
  AffineOperator control_mass;
  AffineMatrix state_load;
  AffineMatrix constraint_load;
  AffineScalar constant;

  void finalize() {
    for (auto* f : {&time_mass, &spatial, &constraint, &control, &observation, &control_mass}) f->finalize();
  }

  StepOperators operators(const Parameter& mu) const {
    auto eval = [&mu](const AffineOperator& f, Eigen::Index r, Eigen::Index c) {
      return f.empty() ? SparseOperator(r, c) : f.evaluate(mu);
    };
    StepOperators ops;
    ops.time_mass = eval(time_mass, state_size, state_size);
    ops.spatial = eval(spatial, state_size, state_size);
    ops.constraint = eval(constraint, state_size, state_size);
    ops.control = eval(control, state_size, control_size);
    ops.observation = eval(observation, state_size, state_size);
    ops.control_mass = eval(control_mass, control_size, control_size);
    ops.alpha = alpha;
    return ops;
  }

  KKTRhs rhs(const Parameter& mu) const {
    KKTRhs r;
    r.state_load = state_load.empty() ? Matrix::Zero(state_size, grid.steps) : state_load.evaluate(mu);
    r.constraint_load =
        constraint_load.empty() ? Matrix::Zero(state_size, grid.steps) : constraint_load.evaluate(mu);
    return r;
  }

  double objective_constant(const Parameter& mu) const {
    return constant.empty() ? 0.0 : constant.evaluate(mu);
  }
};

enum class Block { state, control, adjoint };

/// Where one physical variable lives inside the per-step vectors of the
/// KKT unknowns, and how it is measured.
struct RoleLayout {
  Role role = Role::state;
  Block block = Block::state;
  Eigen::Index offset = 0;
  Eigen::Index size = 0;
  SparseOperator gram;       // size x size, inner product for POD
  SparseOperator prolong;    // full x size, slice -> coefficient vector on all dofs
  SparseOperator norm_gram;  // full x full, error norm
  Matrix lift;               // full x N_t, added to the prolonged slice (empty: none)
  Vector mean_weights;       // nonempty: subtract the mean before measuring
  std::string norm = "L2";

  Eigen::Index full_size() const { return prolong.rows(); }
};

/// A block of the primal reduced space: the spatial slot it fills and the
/// snapshot families aggregated into it.
struct ReducedBlockSpec {
  std::string name;
  Eigen::Index offset = 0;
  Eigen::Index size = 0;
  std::string gram_key;
  std::vector<std::string> sources;  // basis keys
};

/// Fully discretized benchmark.
struct CaseModel {
  CaseConfig config;
  std::shared_ptr<const Mesh> mesh;
  std::shared_ptr<const FunctionSpace> state_space;
  std::shared_ptr<const FunctionSpace> pressure_space;  // Stokes only
  DofPartition partition;
  AffineOcp ocp;

  std::map<std::string, RoleLayout> roles;  // keyed by role_name
  std::vector<ReducedBlockSpec> primal_blocks;
  std::string control_key = "control";

  // Stokes: divergence coupling used for supremizers (pressure x free velocity)
  AffineOperator supremizer_coupling;
  std::string supremizer_gram_key;

  // Families on all dofs of the physical problem, kept for verification.
  std::map<std::string, AffineOperator> full_families;

  Matrix desired_state;  // full dofs x N_t (Stokes); empty for Graetz

  const RoleLayout& role(const std::string& key) const {
    auto it = roles.find(key);
    if (it == roles.end()) throw ConfigError("case has no variable '" + key + "'");
    return it->second;
  }

  std::vector<std::string> snapshot_keys() const {
    std::vector<std::string> out;
    for (const auto& [k, r] : roles) out.push_back(k);
    return out;
  }
};

namespace detail {

/// Places `op` at (row, col) inside a zero rows x cols operator.
inline SparseOperator embed(const SparseOperator& op, Eigen::Index row, Eigen::Index col, Eigen::Index rows,
                            Eigen::Index cols) {
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(op.nonZeros());
  for (int c = 0; c < op.outerSize(); ++c)
    for (SparseOperator::InnerIterator it(op, c); it; ++it)
      trips.emplace_back(static_cast<int>(row + it.row()), static_cast<int>(col + it.col()), it.value());
  SparseOperator out(rows, cols);
  out.setFromTriplets(trips.begin(), trips.end());
  out.makeCompressed();
  return out;
}

inline SparseOperator column_operator(const Vector& v) {
  SparseOperator s = v.sparseView(0.0, 0.0);
  return s;
}

inline std::vector<int> iota(Eigen::Index n) {
  std::vector<int> out(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = static_cast<int>(i);
  return out;
}

inline Matrix repeat_columns(const Vector& v, int count) { return v.replicate(1, count); }

inline SparseOperator identity(Eigen::Index n) {
  SparseOperator id(n, n);
  id.setIdentity();
  return id;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Graetz flow: P1 state, boundary control on Gamma_C, observation on Omega_3.

inline Eigen::Vector2d graetz_profile(const Point& x) { return {x.y() * (1.0 - x.y()), 0.0}; }

inline CaseModel build_graetz_model(const CaseConfig& cfg) {
  using namespace tags;
  namespace g = graetz;
  const std::size_t dim = cfg.box.dim();
  const Theta one = Theta::constant(dim);
  const Theta len = Theta::monomial(dim, {{g::kLength, 1}});
  const Theta diff = Theta::monomial(dim, {{g::kDiffusivity, 1}});
  const Theta diff_over_len = Theta::monomial(dim, {{g::kDiffusivity, 1}, {g::kLength, -1}});
  const Theta diff_len = Theta::monomial(dim, {{g::kDiffusivity, 1}, {g::kLength, 1}});
  const Theta target_len = Theta::monomial(dim, {{g::kTarget, 1}, {g::kLength, 1}});
  const Theta target2_len = Theta::monomial(dim, {{g::kTarget, 2}, {g::kLength, 1}});

  CaseModel model;
  model.config = cfg;
  model.mesh = std::make_shared<const Mesh>(build_structured_mesh(CaseId::graetz, cfg.nx, cfg.ny));
  auto space = std::make_shared<const FunctionSpace>(model.mesh, 1, 1);
  model.state_space = space;

  DirichletData data;
  data.values[kGraetzDirichlet] = [](const Point&) { return Eigen::Vector2d(1.0, 0.0); };
  data.priority = {kGraetzDirichlet};
  model.partition = dirichlet_lifting(*space, data);
  const auto& part = model.partition;
  const auto& free = part.free_dofs;
  const std::vector<int> ctrl = space->scalar_dofs_on_tag(kGraetzControl);
  const Eigen::Index n = space->num_dofs();

  const SparseOperator m1 = assemble_mass(*space, kGraetzOmega1);
  const SparseOperator m2 = assemble_mass(*space, kGraetzOmega2);
  const SparseOperator m3 = assemble_mass(*space, kGraetzOmega3);
  const SparseOperator k1 = assemble_stiffness(*space, kGraetzOmega1);
  const SparseOperator kxx = SparseOperator(assemble_gradient_product(*space, kGraetzOmega2, 0, 0) +
                                            assemble_gradient_product(*space, kGraetzOmega3, 0, 0));
  const SparseOperator kyy = SparseOperator(assemble_gradient_product(*space, kGraetzOmega2, 1, 1) +
                                            assemble_gradient_product(*space, kGraetzOmega3, 1, 1));
  const SparseOperator adv = assemble_advection(*space, graetz_profile);
  const SparseOperator mgc = assemble_boundary_mass(*space, kGraetzControl);

  auto& ff = model.full_families;
  ff["mass"].add(one, m1);
  ff["mass"].add(len, SparseOperator(m2 + m3));
  ff["stiffness"].add(diff, k1);
  ff["stiffness"].add(diff_over_len, kxx);
  ff["stiffness"].add(diff_len, kyy);
  ff["advection"].add(one, adv);
  ff["observation"].add(len, m3);
  ff["control"].add(len, mgc);
  for (auto& [k, f] : ff) f.finalize();

  AffineOcp& ocp = model.ocp;
  ocp.grid = cfg.grid;
  ocp.alpha = cfg.alpha;
  ocp.state_size = part.num_free();
  ocp.control_size = static_cast<Eigen::Index>(ctrl.size());
  const double dt = cfg.grid.dt();
  const int nt = cfg.grid.steps;

  auto restrict_family = [](const AffineOperator& f, const std::vector<int>& rows, const std::vector<int>& cols,
                            AffineOperator& out) {
    for (const auto& t : f.terms()) out.add(t.theta, restrict_operator(t.value, rows, cols));
  };
  restrict_family(ff["mass"], free, free, ocp.time_mass);
  restrict_family(ff["stiffness"], free, free, ocp.spatial);
  restrict_family(ff["advection"], free, free, ocp.spatial);
  restrict_family(ff["observation"], free, free, ocp.observation);
  restrict_family(ff["control"], free, ctrl, ocp.control);
  restrict_family(ff["control"], ctrl, ctrl, ocp.control_mass);

  // Lift is constant in time and equals y0, so only the spatial operator
  // acts on it: G_k = -dt L_{f,:} lift.
  const Vector& lift = part.lift;
  for (const char* key : {"stiffness", "advection"})
    for (const auto& t : ff[key].terms())
      ocp.constraint_load.add(t.theta, detail::repeat_columns(-dt * restrict_vector(t.value * lift, free), nt));

  // Objective on the full field y = lift + y_free with y_d = mu_target:
  // F_k = -dt M3_{f,:}(lift - mu_target 1), constant = dt/2 sum_k d'M3 d.
  const Vector ones = Vector::Ones(n);
  const Vector m3_lift = m3 * lift, m3_ones = m3 * ones;
  ocp.state_load.add(len, detail::repeat_columns(-dt * restrict_vector(m3_lift, free), nt));
  ocp.state_load.add(target_len, detail::repeat_columns(dt * restrict_vector(m3_ones, free), nt));
  ocp.constant.add(len, 0.5 * dt * nt * lift.dot(m3_lift));
  ocp.constant.add(target_len, -dt * nt * lift.dot(m3_ones));
  ocp.constant.add(target2_len, 0.5 * dt * nt * ones.dot(m3_ones));
  ocp.finalize();

  const SparseOperator h1 = SparseOperator(assemble_stiffness(*space) + assemble_mass(*space));
  const SparseOperator pro = SparseOperator(selection(free, n).transpose());
  RoleLayout state;
  state.role = Role::state;
  state.block = Block::state;
  state.size = part.num_free();
  state.gram = restrict_operator(h1, free, free);
  state.prolong = pro;
  state.norm_gram = h1;
  state.lift = detail::repeat_columns(lift, nt);
  state.norm = "H1";
  RoleLayout adjoint = state;
  adjoint.role = Role::adjoint;
  adjoint.block = Block::adjoint;
  adjoint.lift = Matrix();
  RoleLayout control;
  control.role = Role::control;
  control.block = Block::control;
  control.size = ocp.control_size;
  control.gram = restrict_operator(mgc, ctrl, ctrl);
  control.prolong = SparseOperator(selection(ctrl, n).transpose());
  control.norm_gram = mgc;
  model.roles["state"] = state;
  model.roles["adjoint"] = adjoint;
  model.roles["control"] = control;

  model.primal_blocks = {{"state_adjoint", 0, state.size, "state", {"state", "adjoint"}}};
  return model;
}

// ---------------------------------------------------------------------------
// Stokes cavity: P2-P1 Taylor-Hood, distributed P2 control.

/// Time factor of the inlet velocity.
inline double inlet_factor(double t) { return 1.0 + 0.5 * std::cos(4.0 * M_PI * t - M_PI); }

namespace detail {

struct StokesSpaces {
  std::shared_ptr<const Mesh> mesh;
  std::shared_ptr<const FunctionSpace> velocity;
  std::shared_ptr<const FunctionSpace> pressure;
  DofPartition partition;  // lift: unit inlet profile (1,0)
};

inline StokesSpaces stokes_spaces(const CaseConfig& cfg, std::shared_ptr<const Mesh> mesh = nullptr) {
  StokesSpaces s;
  s.mesh = mesh ? std::move(mesh)
                : std::make_shared<const Mesh>(build_structured_mesh(CaseId::stokes_cavity, cfg.nx, cfg.ny));
  s.velocity = std::make_shared<const FunctionSpace>(s.mesh, 2, 2);
  s.pressure = std::make_shared<const FunctionSpace>(s.mesh, 1, 1);
  DirichletData data;
  data.values[tags::kStokesInlet] = [](const Point&) { return Eigen::Vector2d(1.0, 0.0); };
  data.values[tags::kStokesWall] = [](const Point&) { return Eigen::Vector2d::Zero(); };
  data.priority = {tags::kStokesWall, tags::kStokesInlet};
  s.partition = dirichlet_lifting(*s.velocity, data);
  return s;
}

/// Per-step Stokes operators on [v_free, p, s] for given viscosity and
/// stretch, built directly (no affine bookkeeping).
struct StokesBlocks {
  Eigen::Index nv = 0, np = 0, ns = 0;
  SparseOperator mass, stiff_xx, stiff_yy, div_x, div_y;  // full dofs
  Vector mean;                                             // int psi_i
};

inline StokesBlocks stokes_blocks(const StokesSpaces& s) {
  StokesBlocks b;
  b.nv = s.partition.num_free();
  b.np = s.pressure->num_dofs();
  b.ns = b.nv + b.np + 1;
  b.mass = assemble_mass(*s.velocity);
  b.stiff_xx = assemble_gradient_product(*s.velocity, std::nullopt, 0, 0);
  b.stiff_yy = assemble_gradient_product(*s.velocity, std::nullopt, 1, 1);
  b.div_x = assemble_divergence_component(*s.velocity, *s.pressure, 0);
  b.div_y = assemble_divergence_component(*s.velocity, *s.pressure, 1);
  b.mean = assemble_mass(*s.pressure) * Vector::Ones(b.np);
  return b;
}

}  // namespace detail

/// Desired velocity: uncontrolled Stokes flow on the reference square with
/// unit viscosity and a constant lid velocity (1,0), started from the lift.
/// Returns full velocity coefficients, one column per step.
inline SpaceTimeField generate_stokes_target(const CaseConfig& cfg, std::shared_ptr<const Mesh> mesh) {
  const auto s = detail::stokes_spaces(cfg, std::move(mesh));
  const auto b = detail::stokes_blocks(s);
  const auto& free = s.partition.free_dofs;
  const std::vector<int> all_p = detail::iota(b.np);
  const SparseOperator k = SparseOperator(b.stiff_xx + b.stiff_yy);
  const SparseOperator d = SparseOperator(b.div_x + b.div_y);

  StepOperators ops;
  ops.time_mass = detail::embed(restrict_operator(b.mass, free, free), 0, 0, b.ns, b.ns);
  ops.spatial = detail::embed(restrict_operator(k, free, free), 0, 0, b.ns, b.ns);
  ops.spatial += detail::embed(SparseOperator(restrict_operator(d, all_p, free).transpose()), 0, b.nv, b.ns, b.ns);
  ops.constraint = detail::embed(restrict_operator(d, all_p, free), b.nv, 0, b.ns, b.ns);
  ops.constraint += detail::embed(detail::column_operator(b.mean), b.nv, b.nv + b.np, b.ns, b.ns);
  ops.constraint +=
      detail::embed(SparseOperator(detail::column_operator(b.mean).transpose()), b.nv + b.np, b.nv, b.ns, b.ns);
  ops.control = SparseOperator(b.ns, 1);
  ops.observation = SparseOperator(b.ns, b.ns);
  ops.control_mass = detail::identity(1);

  const Vector& lid = s.partition.lift;
  Vector g = Vector::Zero(b.ns);
  g.head(b.nv) = -cfg.grid.dt() * restrict_vector(k * lid, free);
  g.segment(b.nv, b.np) = -(d * lid);
  const Matrix loads = detail::repeat_columns(g, cfg.grid.steps);
  const Matrix free_part = march_state(ops, cfg.grid, Matrix::Zero(1, cfg.grid.steps), loads);

  SpaceTimeField out{Role::state, Matrix(s.velocity->num_dofs(), cfg.grid.steps)};
  for (int step = 0; step < cfg.grid.steps; ++step)
    out.steps.col(step) = expand_free(s.partition, free_part.col(step).head(b.nv), lid);
  return out;
}

inline CaseModel build_stokes_model(const CaseConfig& cfg) {
  namespace st = stokes;
  const std::size_t dim = cfg.box.dim();
  const Theta one = Theta::constant(dim);
  const Theta geo = Theta::monomial(dim, {{st::kStretch, 1}});
  const Theta visc_over_geo = Theta::monomial(dim, {{st::kViscosity, 1}, {st::kStretch, -1}});
  const Theta visc_geo = Theta::monomial(dim, {{st::kViscosity, 1}, {st::kStretch, 1}});

  CaseModel model;
  model.config = cfg;
  const auto s = detail::stokes_spaces(cfg);
  model.mesh = s.mesh;
  model.state_space = s.velocity;
  model.pressure_space = s.pressure;
  model.partition = s.partition;
  const auto b = detail::stokes_blocks(s);
  const auto& free = s.partition.free_dofs;
  const std::vector<int> all_p = detail::iota(b.np);
  const Eigen::Index nfull = s.velocity->num_dofs();
  const std::vector<int> all_v = detail::iota(nfull);
  const Eigen::Index nv = b.nv, np = b.np, ns = b.ns;
  const int nt = cfg.grid.steps;
  const double dt = cfg.grid.dt();

  auto& ff = model.full_families;
  ff["mass"].add(geo, b.mass);
  ff["stiffness"].add(visc_over_geo, b.stiff_xx);
  ff["stiffness"].add(visc_geo, b.stiff_yy);
  ff["divergence"].add(one, b.div_x);
  ff["divergence"].add(geo, b.div_y);
  ff["control"].add(geo, b.mass);
  for (auto& [k, f] : ff) f.finalize();

  auto block = [&](const SparseOperator& op, Eigen::Index r, Eigen::Index c) {
    return detail::embed(op, r, c, ns, ns);
  };
  const SparseOperator mff = restrict_operator(b.mass, free, free);
  const SparseOperator dx = restrict_operator(b.div_x, all_p, free);
  const SparseOperator dy = restrict_operator(b.div_y, all_p, free);
  const SparseOperator mean_col = detail::column_operator(b.mean);

  AffineOcp& ocp = model.ocp;
  ocp.grid = cfg.grid;
  ocp.alpha = cfg.alpha;
  ocp.state_size = ns;
  ocp.control_size = nfull;
  ocp.time_mass.add(geo, block(mff, 0, 0));
  ocp.spatial.add(visc_over_geo, block(restrict_operator(b.stiff_xx, free, free), 0, 0));
  ocp.spatial.add(visc_geo, block(restrict_operator(b.stiff_yy, free, free), 0, 0));
  ocp.spatial.add(one, block(SparseOperator(dx.transpose()), 0, nv));
  ocp.spatial.add(geo, block(SparseOperator(dy.transpose()), 0, nv));
  ocp.constraint.add(one, SparseOperator(block(dx, nv, 0) + block(mean_col, nv, nv + np) +
                                         block(SparseOperator(mean_col.transpose()), nv + np, nv)));
  ocp.constraint.add(geo, block(dy, nv, 0));
  ocp.control.add(geo, detail::embed(restrict_operator(b.mass, free, all_v), 0, 0, ns, nfull));
  ocp.observation.add(geo, block(mff, 0, 0));
  ocp.control_mass.add(geo, b.mass);

  // Lift lift_k = f(t_k) lift_unit with y0 = lift_0.
  const Vector& unit = s.partition.lift;
  std::vector<double> f(nt + 1);
  for (int k = 0; k <= nt; ++k) f[k] = inlet_factor(cfg.grid.time(k));
  auto momentum = [&](const Vector& v) {
    Vector out = Vector::Zero(ns);
    out.head(nv) = restrict_vector(v, free);
    return out;
  };
  auto continuity = [&](const Vector& q) {
    Vector out = Vector::Zero(ns);
    out.segment(nv, np) = q;
    return out;
  };
  Matrix g_mass(ns, nt), g_xx(ns, nt), g_yy(ns, nt), g_dx(ns, nt), g_dy(ns, nt);
  const Vector m_unit = momentum(b.mass * unit), kxx_unit = momentum(b.stiff_xx * unit),
               kyy_unit = momentum(b.stiff_yy * unit), dx_unit = continuity(b.div_x * unit),
               dy_unit = continuity(b.div_y * unit);
  for (int k = 0; k < nt; ++k) {
    g_mass.col(k) = -(f[k + 1] - f[k]) * m_unit;
    g_xx.col(k) = -dt * f[k + 1] * kxx_unit;
    g_yy.col(k) = -dt * f[k + 1] * kyy_unit;
    g_dx.col(k) = -f[k + 1] * dx_unit;
    g_dy.col(k) = -f[k + 1] * dy_unit;
  }
  ocp.constraint_load.add(geo, g_mass);
  ocp.constraint_load.add(visc_over_geo, g_xx);
  ocp.constraint_load.add(visc_geo, g_yy);
  ocp.constraint_load.add(one, g_dx);
  ocp.constraint_load.add(geo, g_dy);

  model.desired_state = generate_stokes_target(cfg, s.mesh).steps;
  Matrix f_obs(ns, nt);
  double c_obs = 0.0;
  for (int k = 0; k < nt; ++k) {
    const Vector d = f[k + 1] * unit - model.desired_state.col(k);
    const Vector md = b.mass * d;
    f_obs.col(k) = -dt * momentum(md);
    c_obs += 0.5 * dt * d.dot(md);
  }
  ocp.state_load.add(geo, f_obs);
  ocp.constant.add(geo, c_obs);
  ocp.finalize();

  const SparseOperator h1 = SparseOperator(b.stiff_xx + b.stiff_yy + b.mass);
  const SparseOperator mp = assemble_mass(*s.pressure);
  RoleLayout vel;
  vel.role = Role::state;
  vel.block = Block::state;
  vel.size = nv;
  vel.gram = restrict_operator(h1, free, free);
  vel.prolong = SparseOperator(selection(free, nfull).transpose());
  vel.norm_gram = h1;
  vel.lift.resize(nfull, nt);
  for (int k = 0; k < nt; ++k) vel.lift.col(k) = f[k + 1] * unit;
  vel.norm = "H1";
  RoleLayout pre;
  pre.role = Role::pressure;
  pre.block = Block::state;
  pre.offset = nv;
  pre.size = np;
  pre.gram = mp;
  pre.prolong = detail::identity(np);
  pre.norm_gram = mp;
  RoleLayout adj = vel;
  adj.role = Role::adjoint;
  adj.block = Block::adjoint;
  adj.lift = Matrix();
  RoleLayout adj_pre = pre;
  adj_pre.role = Role::adjoint_pressure;
  adj_pre.block = Block::adjoint;
  adj_pre.mean_weights = b.mean;
  RoleLayout ctrl;
  ctrl.role = Role::control;
  ctrl.block = Block::control;
  ctrl.size = nfull;
  ctrl.gram = b.mass;
  ctrl.prolong = detail::identity(nfull);
  ctrl.norm_gram = b.mass;
  model.roles["state"] = vel;
  model.roles["pressure"] = pre;
  model.roles["adjoint"] = adj;
  model.roles["adjoint_pressure"] = adj_pre;
  model.roles["control"] = ctrl;

  model.supremizer_coupling.add(one, dx);
  model.supremizer_coupling.add(geo, dy);
  model.supremizer_coupling.finalize();
  model.supremizer_gram_key = "state";
  model.primal_blocks = {
      {"velocity", 0, nv, "state",
       {"state", "supremizer_pressure", "adjoint", "supremizer_adjoint_pressure"}},
      {"pressure", nv, np, "pressure", {"pressure", "adjoint_pressure"}}};
  return model;
}

inline CaseModel build_case_model(const CaseConfig& cfg) {
  cfg.validate();
  return cfg.case_id == CaseId::graetz ? build_graetz_model(cfg) : build_stokes_model(cfg);
}

// ---------------------------------------------------------------------------
// Full-order solve

struct FullOrderSolution {
  Parameter mu;
  KKTSolution kkt;
  double objective = 0.0;
  double seconds = 0.0;  // evaluate + assemble + factorize + solve
};

inline FullOrderSolution solve_full_order(const CaseModel& model, const Parameter& mu) {
  model.config.box.require(mu);
  const auto start = std::chrono::steady_clock::now();
  const StepOperators ops = model.ocp.operators(mu);
  const KKTRhs rhs = model.ocp.rhs(mu);
  FullOrderSolution out;
  out.mu = mu;
  out.kkt = solve_kkt(assemble_kkt(ops, model.ocp.grid, rhs));
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  out.objective = quadratic_objective(ops, model.ocp.grid, out.kkt.state, out.kkt.control, rhs.state_load,
                                      model.ocp.objective_constant(mu));
  return out;
}

/// Per-step slice of one variable from a block matrix (block size x N_t).
inline Matrix role_slice(const RoleLayout& role, const Matrix& block_steps) {
  return block_steps.middleRows(role.offset, role.size);
}

inline const Matrix& block_of(const KKTSolution& sol, Block b) {
  return b == Block::state ? sol.state : (b == Block::control ? sol.control : sol.adjoint);
}

/// Coefficients on all dofs, lift included, optionally mean-shifted.
inline Matrix full_field(const RoleLayout& role, const Matrix& slice) {
  Matrix out = role.prolong * slice;
  if (role.lift.size() > 0) out += role.lift;
  if (role.mean_weights.size() > 0) {
    const double measure = role.mean_weights.sum();
    for (Eigen::Index k = 0; k < out.cols(); ++k) out.col(k).array() -= role.mean_weights.dot(out.col(k)) / measure;
  }
  return out;
}

/// sqrt(dt sum_k v_k' G v_k)
inline double spacetime_norm(const SparseOperator& gram, const Matrix& steps, double dt) {
  double s = 0.0;
  for (Eigen::Index k = 0; k < steps.cols(); ++k) s += steps.col(k).dot(gram * steps.col(k));
  return std::sqrt(std::max(0.0, dt * s));
}

}  // namespace podocp

#endif  // PODOCP_MODEL_HPP
