#ifndef PODOCP_SPACETIME_HPP
#define PODOCP_SPACETIME_HPP

#include <atomic>
#include <cmath>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <Eigen/UmfPackSupport>

#include "podocp/error.hpp"
#include "podocp/fem.hpp"

namespace podocp {

struct TimeGrid {
  double final_time = 1.0;
  int steps = 1;

  TimeGrid() = default;
  TimeGrid(double t_final, int n_steps) : final_time(t_final), steps(n_steps) {
    if (steps < 1) throw ConfigError("time grid needs at least one step");
    if (!(final_time > 0.0)) throw ConfigError("final time must be positive");
  }

  double dt() const { return final_time / steps; }
  /// Time of step k, k = 0..steps (k = 0 is the initial time).
  double time(int k) const { return k * dt(); }

  bool operator==(const TimeGrid&) const = default;
};

enum class Role { state, control, adjoint, pressure, adjoint_pressure };

inline const char* role_name(Role r) {
  switch (r) {
    case Role::state: return "state";
    case Role::control: return "control";
    case Role::adjoint: return "adjoint";
    case Role::pressure: return "pressure";
    case Role::adjoint_pressure: return "adjoint_pressure";
  }
  return "?";
}

/// Coefficients of one variable over all time steps; column k-1 holds step k.
/// Flattened storage (column-major) is the space-time vector [v_1; ...; v_Nt].
struct SpaceTimeField {
  Role role = Role::state;
  Matrix steps;

  Eigen::Index spatial_size() const { return steps.rows(); }
  Eigen::Index num_steps() const { return steps.cols(); }
  Vector flattened() const { return Eigen::Map<const Vector>(steps.data(), steps.size()); }

  static SpaceTimeField from_flat(Role role, const Vector& flat, Eigen::Index spatial) {
    if (spatial <= 0 || flat.size() % spatial != 0)
      throw ConfigError("space-time vector length is not a multiple of the spatial size");
    return {role, Eigen::Map<const Matrix>(flat.data(), spatial, flat.size() / spatial)};
  }
};

/// Spatial operators of one time step for a linear-quadratic OCP with
/// dynamics  E (y_k - y_{k-1}) + dt L y_k + C y_k - dt Dc u_k = G_k.
///   time_mass    E   (n_s x n_s)
///   spatial      L   (n_s x n_s), scaled by dt in the step block
///   constraint   C   (n_s x n_s), algebraic rows/columns, unscaled
///   control      Dc  (n_s x n_u)
///   observation  M_obs (n_s x n_s), objective weight on the state
///   control_mass M_c (n_u x n_u)
struct StepOperators {
  SparseOperator time_mass;
  SparseOperator spatial;
  SparseOperator constraint;
  SparseOperator control;
  SparseOperator observation;
  SparseOperator control_mass;
  double alpha = 1.0;

  Eigen::Index state_size() const { return time_mass.rows(); }
  Eigen::Index control_size() const { return control_mass.rows(); }

  SparseOperator step_block(double dt) const {
    SparseOperator k = time_mass + dt * spatial;
    if (constraint.nonZeros() > 0) k += constraint;
    return k;
  }

  void validate() const {
    const Eigen::Index n = state_size(), m = control_size();
    auto need = [](bool ok, const char* what) {
      if (!ok) throw ConfigError(std::string("step operators: shape mismatch in ") + what);
    };
    need(time_mass.cols() == n, "time_mass");
    need(spatial.rows() == n && spatial.cols() == n, "spatial");
    need(constraint.rows() == n && constraint.cols() == n, "constraint");
    need(control.rows() == n && control.cols() == m, "control");
    need(observation.rows() == n && observation.cols() == n, "observation");
    need(control_mass.cols() == m, "control_mass");
    if (!(alpha > 0.0)) throw ConfigError("regularization alpha must be positive");
  }
};

/// Load vectors, one column per time step.
///   state_load       F_y (n_s x N_t): objective load, already carries dt
///   constraint_load  G   (n_s x N_t): E y_0 (first step) + dt g_k + lifting terms
struct KKTRhs {
  Matrix state_load;
  Matrix constraint_load;
};

/// Right-hand side in the plain form F = dt M_obs y_d, G = M y0 + dt g.
inline KKTRhs standard_rhs(const StepOperators& ops, const TimeGrid& grid, const Vector& y0,
                           const Matrix& forcing, const Matrix& desired) {
  KKTRhs rhs;
  rhs.state_load = grid.dt() * (ops.observation * desired);
  rhs.constraint_load = grid.dt() * forcing;
  rhs.constraint_load.col(0) += ops.time_mass * y0;
  return rhs;
}

/// Block lower-bidiagonal state operator: diagonal E + dt L + C, subdiagonal -E.
inline SparseOperator build_state_spacetime(const SparseOperator& spatial,
                                            const SparseOperator& time_mass, const TimeGrid& grid,
                                            const SparseOperator* constraint = nullptr) {
  if (spatial.rows() != time_mass.rows() || spatial.cols() != time_mass.cols() ||
      spatial.rows() != spatial.cols()) {
    throw ConfigError("state operator: spatial and mass blocks must be square of equal size");
  }
  const Eigen::Index n = spatial.rows();
  SparseOperator diag = time_mass + grid.dt() * spatial;
  if (constraint) diag += *constraint;
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<std::size_t>(grid.steps) * (diag.nonZeros() + time_mass.nonZeros()));
  for (int k = 0; k < grid.steps; ++k) {
    for (int c = 0; c < diag.outerSize(); ++c)
      for (SparseOperator::InnerIterator it(diag, c); it; ++it)
        trips.emplace_back(k * n + it.row(), k * n + it.col(), it.value());
    if (k == 0) continue;
    for (int c = 0; c < time_mass.outerSize(); ++c)
      for (SparseOperator::InnerIterator it(time_mass, c); it; ++it)
        trips.emplace_back(k * n + it.row(), (k - 1) * n + it.col(), -it.value());
  }
  SparseOperator out(grid.steps * n, grid.steps * n);
  out.setFromTriplets(trips.begin(), trips.end());
  out.makeCompressed();
  return out;
}

/// N_t-fold block diagonal copy of a spatial operator.
inline SparseOperator block_diagonal(const SparseOperator& block, int copies) {
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<std::size_t>(copies) * block.nonZeros());
  for (int k = 0; k < copies; ++k)
    for (int c = 0; c < block.outerSize(); ++c)
      for (SparseOperator::InnerIterator it(block, c); it; ++it)
        trips.emplace_back(k * block.rows() + it.row(), k * block.cols() + it.col(), it.value());
  SparseOperator out(copies * block.rows(), copies * block.cols());
  out.setFromTriplets(trips.begin(), trips.end());
  out.makeCompressed();
  return out;
}

inline SparseOperator build_control_coupling(const SparseOperator& control, const TimeGrid& grid) {
  return block_diagonal(control, grid.steps);
}

/// The saddle point system [A B'; B 0][x; p] = [F; G], x = (y, u).
struct BlockKKT {
  SparseOperator a_block;  // blockdiag(dt M_obs, alpha dt M_c) over all steps
  SparseOperator b_block;  // [K, -dt C]
  Vector f_rhs;
  Vector g_rhs;
  Eigen::Index state_size = 0;
  Eigen::Index control_size = 0;
  int steps = 0;

  Eigen::Index primal_size() const { return a_block.rows(); }
  Eigen::Index dual_size() const { return b_block.rows(); }
  Eigen::Index total_size() const { return primal_size() + dual_size(); }

  SparseOperator matrix() const {
    const Eigen::Index nx = primal_size(), np = dual_size();
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(a_block.nonZeros() + 2 * b_block.nonZeros());
    for (int c = 0; c < a_block.outerSize(); ++c)
      for (SparseOperator::InnerIterator it(a_block, c); it; ++it)
        trips.emplace_back(it.row(), it.col(), it.value());
    for (int c = 0; c < b_block.outerSize(); ++c)
      for (SparseOperator::InnerIterator it(b_block, c); it; ++it) {
        trips.emplace_back(nx + it.row(), it.col(), it.value());
        trips.emplace_back(it.col(), nx + it.row(), it.value());
      }
    SparseOperator s(nx + np, nx + np);
    s.setFromTriplets(trips.begin(), trips.end());
    s.makeCompressed();
    return s;
  }

  Vector rhs() const {
    Vector r(total_size());
    r << f_rhs, g_rhs;
    return r;
  }
};

/// Assembles
///   [ dt M_obs      0          K'     ] [y]   [F_y]
///   [   0       a dt M_c   -dt C'     ] [u] = [ 0 ]
///   [   K        -dt C         0      ] [p]   [ G ]
inline BlockKKT assemble_kkt(const StepOperators& ops, const TimeGrid& grid, const KKTRhs& rhs) {
  ops.validate();
  const Eigen::Index ns = ops.state_size(), nu = ops.control_size();
  if (rhs.state_load.rows() != ns || rhs.state_load.cols() != grid.steps ||
      rhs.constraint_load.rows() != ns || rhs.constraint_load.cols() != grid.steps) {
    throw ConfigError("KKT right-hand side does not match the operator/time-grid shape");
  }
  const double dt = grid.dt();
  const int nt = grid.steps;

  BlockKKT kkt;
  kkt.state_size = ns;
  kkt.control_size = nu;
  kkt.steps = nt;

  {
    std::vector<Eigen::Triplet<double>> trips;
    for (int k = 0; k < nt; ++k) {
      for (int c = 0; c < ops.observation.outerSize(); ++c)
        for (SparseOperator::InnerIterator it(ops.observation, c); it; ++it)
          trips.emplace_back(k * ns + it.row(), k * ns + it.col(), dt * it.value());
      for (int c = 0; c < ops.control_mass.outerSize(); ++c)
        for (SparseOperator::InnerIterator it(ops.control_mass, c); it; ++it)
          trips.emplace_back(nt * ns + k * nu + it.row(), nt * ns + k * nu + it.col(),
                             ops.alpha * dt * it.value());
    }
    kkt.a_block.resize(nt * (ns + nu), nt * (ns + nu));
    kkt.a_block.setFromTriplets(trips.begin(), trips.end());
    kkt.a_block.makeCompressed();
  }
  {
    const SparseOperator state = build_state_spacetime(ops.spatial, ops.time_mass, grid,
                                                       ops.constraint.nonZeros() ? &ops.constraint : nullptr);
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(state.nonZeros() + nt * ops.control.nonZeros());
    for (int c = 0; c < state.outerSize(); ++c)
      for (SparseOperator::InnerIterator it(state, c); it; ++it)
        trips.emplace_back(it.row(), it.col(), it.value());
    for (int k = 0; k < nt; ++k)
      for (int c = 0; c < ops.control.outerSize(); ++c)
        for (SparseOperator::InnerIterator it(ops.control, c); it; ++it)
          trips.emplace_back(k * ns + it.row(), nt * ns + k * nu + it.col(), -dt * it.value());
    kkt.b_block.resize(nt * ns, nt * (ns + nu));
    kkt.b_block.setFromTriplets(trips.begin(), trips.end());
    kkt.b_block.makeCompressed();
  }
  kkt.f_rhs = Vector::Zero(nt * (ns + nu));
  kkt.f_rhs.head(nt * ns) = Eigen::Map<const Vector>(rhs.state_load.data(), nt * ns);
  kkt.g_rhs = Eigen::Map<const Vector>(rhs.constraint_load.data(), nt * ns);
  return kkt;
}

enum class DirectBackend { umfpack, sparse_lu };

/// Sparse LU with threshold pivoting, which handles the symmetric indefinite
/// KKT matrix. Eigen's SparseLU with COLAMD is the fallback.
///
/// With saddle-point steps (zero diagonal in the state operator) UMFPACK
/// needs the symmetric strategy to pivot on the diagonal, and nested
/// dissection keeps the fill low. Otherwise the unsymmetric strategy with
/// COLAMD-style ordering is several times faster on the time-banded pattern.
class SparseDirectSolver {
 public:
  explicit SparseDirectSolver(DirectBackend backend = DirectBackend::umfpack, bool saddle_steps = true)
      : backend_(backend) {
    auto& c = umf_.umfpackControl();
    c(UMFPACK_STRATEGY) = saddle_steps ? UMFPACK_STRATEGY_SYMMETRIC : UMFPACK_STRATEGY_UNSYMMETRIC;
    c(UMFPACK_ORDERING) = saddle_steps ? UMFPACK_ORDERING_METIS : UMFPACK_ORDERING_AMD;
  }

  DirectBackend backend() const { return backend_; }

  void factorize(const SparseOperator& matrix) {
    bool ok = false;
    std::string detail;
    if (backend_ == DirectBackend::umfpack) {
      matrix_ = matrix;  // UMFPACK solves read the matrix again
      matrix_.makeCompressed();
      umf_.compute(matrix_);
      ok = umf_.info() == Eigen::Success;
      detail = "UMFPACK numeric factorization failed";
    } else {
      lu_.analyzePattern(matrix);
      lu_.factorize(matrix);
      ok = lu_.info() == Eigen::Success;
      detail = lu_.lastErrorMessage();
    }
    if (!ok) {
      std::ostringstream os;
      os << "sparse factorization failed (" << detail
         << "); a zero pivot usually means missing Dirichlet constraints or an "
            "undetermined pressure constant";
      throw NumericalError(os.str());
    }
  }

  Vector solve(const Vector& rhs) const {
    Vector x = backend_ == DirectBackend::umfpack ? Vector(umf_.solve(rhs)) : Vector(lu_.solve(rhs));
    if (!x.allFinite()) throw NumericalError("sparse triangular solve produced non-finite values");
    return x;
  }

 private:
  DirectBackend backend_;
  SparseOperator matrix_;
  Eigen::UmfPackLU<SparseOperator> umf_;
  Eigen::SparseLU<SparseOperator, Eigen::COLAMDOrdering<int>> lu_;
};

struct KKTSolution {
  Matrix state;    // n_s x N_t
  Matrix control;  // n_u x N_t
  Matrix adjoint;  // n_s x N_t
  double relative_residual = 0.0;
};

namespace detail {

/// Factorize, solve, one refinement step; returns the relative max-norm residual.
inline double direct_solve(const SparseOperator& s, const Vector& r, DirectBackend backend, bool saddle_steps,
                           Vector& x) {
  SparseDirectSolver solver(backend, saddle_steps);
  solver.factorize(s);
  x = solver.solve(r);
  x += solver.solve(r - s * x);
  const double scale = r.lpNorm<Eigen::Infinity>();
  return scale > 0.0 ? (s * x - r).lpNorm<Eigen::Infinity>() / scale : 0.0;
}

/// True if the first state step block has a structurally or numerically zero diagonal entry.
inline bool has_saddle_steps(const BlockKKT& system) {
  const Eigen::Index ns = system.state_size;
  Vector diag = Vector::Zero(ns);
  for (Eigen::Index c = 0; c < ns; ++c)
    for (SparseOperator::InnerIterator it(system.b_block, c); it; ++it)
      if (it.row() == c) diag[c] = it.value();
  return (diag.array() == 0.0).any();
}

inline std::atomic<bool>& fallback_reported() {
  static std::atomic<bool> flag{false};
  return flag;
}

}  // namespace detail

/// Direct solve of the full KKT system. If the UMFPACK result misses the
/// tolerance (e.g. a faulty BLAS build) the system is re-solved with SparseLU.
inline KKTSolution solve_kkt(const BlockKKT& system, double tolerance = 1e-10) {
  const SparseOperator s = system.matrix();
  const Vector r = system.rhs();
  Vector x;
  double residual = 0.0;
  std::string failure;
  const bool saddle = detail::has_saddle_steps(system);
  try {
    residual = detail::direct_solve(s, r, DirectBackend::umfpack, saddle, x);
  } catch (const NumericalError& e) {
    failure = e.what();
  }
  if (!failure.empty() || !(residual < tolerance)) {
    if (!detail::fallback_reported().exchange(true)) {
      std::cerr << "warning: UMFPACK solve rejected ("
                << (failure.empty() ? "residual " + std::to_string(residual) : failure)
                << "); using SparseLU. With OpenBLAS, setting OPENBLAS_CORETYPE may help.\n";
    }
    residual = detail::direct_solve(s, r, DirectBackend::sparse_lu, saddle, x);
  }
  if (!(residual < tolerance)) {
    std::ostringstream os;
    os << "KKT solve residual " << residual << " exceeds " << tolerance;
    throw NumericalError(os.str());
  }

  const Eigen::Index ns = system.state_size, nu = system.control_size;
  const int nt = system.steps;
  KKTSolution sol;
  sol.state = Eigen::Map<const Matrix>(x.data(), ns, nt);
  sol.control = Eigen::Map<const Matrix>(x.data() + nt * ns, nu, nt);
  sol.adjoint = Eigen::Map<const Matrix>(x.data() + nt * (ns + nu), ns, nt);
  sol.relative_residual = residual;
  return sol;
}

// ---------------------------------------------------------------------------
// Sequential time marching (backward Euler forward in time for the state,
// the transposed recursion backward in time for the adjoint).

/// Solves K y = dt C u + G one step at a time.
inline Matrix march_state(const StepOperators& ops, const TimeGrid& grid, const Matrix& control,
                          const Matrix& constraint_load) {
  SparseDirectSolver step(DirectBackend::sparse_lu);
  step.factorize(ops.step_block(grid.dt()));
  Matrix y = Matrix::Zero(ops.state_size(), grid.steps);
  Vector previous = Vector::Zero(ops.state_size());
  for (int k = 0; k < grid.steps; ++k) {
    const Vector rhs = ops.time_mass * previous + grid.dt() * (ops.control * control.col(k)) +
                       constraint_load.col(k);
    y.col(k) = step.solve(rhs);
    previous = y.col(k);
  }
  return y;
}

/// Solves K' p = F_y - dt M_obs y from the last step backwards.
inline Matrix march_adjoint(const StepOperators& ops, const TimeGrid& grid, const Matrix& state,
                            const Matrix& state_load) {
  const SparseOperator block_t = ops.step_block(grid.dt()).transpose();
  SparseDirectSolver step(DirectBackend::sparse_lu);
  step.factorize(block_t);
  const SparseOperator mass_t = ops.time_mass.transpose();
  Matrix p = Matrix::Zero(ops.state_size(), grid.steps);
  Vector next = Vector::Zero(ops.state_size());
  for (int k = grid.steps - 1; k >= 0; --k) {
    const Vector rhs =
        state_load.col(k) - grid.dt() * (ops.observation * state.col(k)) + mass_t * next;
    p.col(k) = step.solve(rhs);
    next = p.col(k);
  }
  return p;
}

/// J = 1/2 dt sum y'M_obs y - sum F_y'y + alpha/2 dt sum u'M_c u + constant,
/// the homogenized objective whose stationarity system is the KKT above.
inline double quadratic_objective(const StepOperators& ops, const TimeGrid& grid,
                                  const Matrix& state, const Matrix& control,
                                  const Matrix& state_load, double constant) {
  double j = constant;
  for (int k = 0; k < grid.steps; ++k) {
    j += 0.5 * grid.dt() * state.col(k).dot(ops.observation * state.col(k));
    j -= state_load.col(k).dot(state.col(k));
    j += 0.5 * ops.alpha * grid.dt() * control.col(k).dot(ops.control_mass * control.col(k));
  }
  return j;
}

/// Gradient of the reduced objective u -> J(y(u), u) computed with one
/// forward and one backward sweep: alpha dt M_c u - dt Dc' p.
inline Matrix reduced_gradient(const StepOperators& ops, const TimeGrid& grid, const Matrix& control,
                               const KKTRhs& rhs) {
  const Matrix y = march_state(ops, grid, control, rhs.constraint_load);
  const Matrix p = march_adjoint(ops, grid, y, rhs.state_load);
  const SparseOperator dc_t = ops.control.transpose();
  Matrix g(ops.control_size(), grid.steps);
  for (int k = 0; k < grid.steps; ++k)
    g.col(k) = ops.alpha * grid.dt() * (ops.control_mass * control.col(k)) - grid.dt() * (dc_t * p.col(k));
  return g;
}

/// Rectangle-rule tracking objective on full fields:
///   dt sum_k [1/2 (y_k - yd_k)' M_obs (y_k - yd_k) + alpha/2 u_k' M_c u_k].
inline double objective_value(const Matrix& state, const Matrix& control, const Matrix& desired,
                              double alpha, const TimeGrid& grid, const SparseOperator& observation,
                              const SparseOperator& control_mass) {
  double j = 0.0;
  for (int k = 0; k < grid.steps; ++k) {
    const Vector d = state.col(k) - desired.col(k);
    j += 0.5 * d.dot(observation * d);
    j += 0.5 * alpha * control.col(k).dot(control_mass * control.col(k));
  }
  return grid.dt() * j;
}

}  // namespace podocp

#endif  // PODOCP_SPACETIME_HPP
