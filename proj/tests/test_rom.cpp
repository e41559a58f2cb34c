#include <gtest/gtest.h>

#include <sstream>

#include "podocp/pipeline.hpp"

using namespace podocp;

namespace {

CaseConfig small_case(CaseId id) {
  CaseConfig c = preset(id, Scale::desk);
  if (id == CaseId::graetz) {
    c.nx = 10;
    c.ny = 5;
    c.grid = TimeGrid(5.0, 4);
  } else {
    c.nx = 4;
    c.ny = 4;
    c.grid = TimeGrid(1.0, 4);
  }
  c.n_max = 6;
  c.n_basis = 6;
  return c;
}

struct Offline {
  CaseModel model;
  std::vector<Parameter> training;
  std::vector<FullOrderSolution> solutions;
  std::map<std::string, ReducedBasis> pod;
};

Offline small_offline(const CaseConfig& cfg) {
  Offline o{build_case_model(cfg), sample_uniform(cfg.box, cfg.n_max, cfg.seed), {}, {}};
  std::vector<KKTSolution> kkt;
  for (const auto& mu : o.training) {
    o.solutions.push_back(solve_full_order(o.model, mu));
    kkt.push_back(o.solutions.back().kkt);
  }
  std::ostringstream quiet;
  o.pod = compute_pod_bases(o.model, collect_snapshots(o.model, o.training, kkt), cfg.n_basis, &quiet);
  return o;
}

const Offline& graetz_offline() {
  static const Offline o = small_offline(small_case(CaseId::graetz));
  return o;
}

const Offline& stokes_offline() {
  static const Offline o = small_offline(small_case(CaseId::stokes_cavity));
  return o;
}

// blockdiag(W, Z, W) applied to the full KKT operator
Matrix explicit_projection(const Offline& o, const AggregatedSpace& sp, const Parameter& mu, Vector& rhs) {
  const BlockKKT kkt = assemble_kkt(o.model.ocp.operators(mu), o.model.ocp.grid, o.model.ocp.rhs(mu));
  const Eigen::Index ny = sp.primal.rows(), nu = sp.control.rows();
  Matrix v = Matrix::Zero(2 * ny + nu, sp.total_size());
  v.block(0, 0, ny, sp.primal_size()) = sp.primal;
  v.block(ny, sp.primal_size(), nu, sp.control_size()) = sp.control;
  v.block(ny + nu, sp.primal_size() + sp.control_size(), ny, sp.primal_size()) = sp.primal;
  rhs = v.transpose() * kkt.rhs();
  return v.transpose() * (kkt.matrix() * v);
}

}  // namespace

class RomBothCases : public ::testing::TestWithParam<CaseId> {
 protected:
  const Offline& offline() const { return GetParam() == CaseId::graetz ? graetz_offline() : stokes_offline(); }
};

TEST_P(RomBothCases, OnlineOperatorsEqualExplicitProjection) {
  const Offline& o = offline();
  const AggregatedSpace sp = aggregate(o.model, o.pod, 3);
  const ReducedModel rm = galerkin_project(o.model, sp);
  for (const Parameter& mu : sample_uniform(o.model.config.box, 3, 99)) {
    Vector rhs;
    const Matrix direct = explicit_projection(o, sp, mu, rhs);
    const Matrix online = rm.kkt.evaluate(mu);
    EXPECT_LT((online - direct).cwiseAbs().maxCoeff(), 1e-11 * direct.cwiseAbs().maxCoeff());
    EXPECT_LT((rm.rhs.evaluate(mu) - rhs).cwiseAbs().maxCoeff(), 1e-11 * rhs.cwiseAbs().maxCoeff());
    EXPECT_LT((online - online.transpose()).cwiseAbs().maxCoeff(), 1e-12 * online.cwiseAbs().maxCoeff());
  }
}

TEST_P(RomBothCases, DimensionBookkeeping) {
  const Offline& o = offline();
  const long per_n = GetParam() == CaseId::graetz ? 5 : 13;
  for (Eigen::Index n = 1; n <= o.model.config.n_basis; ++n) {
    std::ostringstream quiet;
    const AggregatedSpace sp = aggregate(o.model, o.pod, n, &quiet);
    ASSERT_EQ(sp.deficiency, 0);
    EXPECT_EQ(sp.total_size(), per_n * n);
    EXPECT_EQ(sp.total_size(), reduced_dimension(GetParam(), n));
    EXPECT_EQ(galerkin_project(o.model, sp).total_size(), per_n * n);
  }
}

TEST_P(RomBothCases, AggregatedBlocksAreOrthonormal) {
  const Offline& o = offline();
  const AggregatedSpace sp = aggregate(o.model, o.pod, 4);
  const int nt = o.model.ocp.grid.steps;
  Eigen::Index col = 0;
  for (std::size_t b = 0; b < o.model.primal_blocks.size(); ++b) {
    const auto& spec = o.model.primal_blocks[b];
    const Eigen::Index cols = sp.block_sizes[b].second;
    Matrix slot(spec.size * nt, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
      for (int k = 0; k < nt; ++k)
        slot.col(j).segment(k * spec.size, spec.size) =
            sp.primal.col(col + j).segment(k * o.model.ocp.state_size + spec.offset, spec.size);
    const Matrix g = role_inner_product(o.model, spec.gram_key).gram(slot, slot);
    EXPECT_LT((g - Matrix::Identity(cols, cols)).cwiseAbs().maxCoeff(), 1e-8) << spec.name;
    col += cols;
  }
  const Matrix gc = role_inner_product(o.model, "control").gram(sp.control, sp.control);
  EXPECT_LT((gc - Matrix::Identity(sp.control_size(), sp.control_size())).cwiseAbs().maxCoeff(), 1e-8);
}

TEST_P(RomBothCases, TrainingSnapshotsReproducedWithFullBasis) {
  const Offline& o = offline();
  const ReducedModel rm = galerkin_project(o.model, aggregate(o.model, o.pod, o.model.config.n_max));
  for (std::size_t i = 0; i < o.training.size(); ++i) {
    const OnlineSolution on = solve_online(rm, o.training[i]);
    const ErrorReport rep = error_report(o.model, o.solutions[i].kkt, o.solutions[i].objective,
                                         lift_solution(o.model, rm, on), on.objective);
    for (const auto& [key, e] : rep.relative) EXPECT_LT(e, 1e-6) << key;
    EXPECT_LT(rep.output, 1e-6);
    EXPECT_TRUE(rep.absolute.empty());
  }
}

TEST_P(RomBothCases, ReducedSystemWellPosed) {
  const Offline& o = offline();
  const ReducedModel rm = galerkin_project(o.model, aggregate(o.model, o.pod, 4));
  for (const Parameter& mu : sample_uniform(o.model.config.box, 10, 1234)) {
    EXPECT_GT(reduced_min_singular_value(rm, mu), 1e-10);
  }
}

TEST_P(RomBothCases, ErrorsShrinkWithBasisSize) {
  const Offline& o = offline();
  const Parameter mu = sample_uniform(o.model.config.box, 1, 4321).front();
  const FullOrderSolution fe = solve_full_order(o.model, mu);
  auto state_error = [&](Eigen::Index n) {
    const ReducedModel rm = galerkin_project(o.model, aggregate(o.model, o.pod, n));
    const OnlineSolution on = solve_online(rm, mu);
    return error_report(o.model, fe.kkt, fe.objective, lift_solution(o.model, rm, on), on.objective)
        .relative.at("state");
  };
  EXPECT_LT(state_error(6), state_error(1));
}

INSTANTIATE_TEST_SUITE_P(Cases, RomBothCases, ::testing::Values(CaseId::graetz, CaseId::stokes_cavity),
                         [](const auto& info) { return std::string(case_name(info.param)); });

TEST(Aggregation, DependentFamiliesReportDeficiency) {
  const Offline& o = graetz_offline();
  const ReducedBasis& s = o.pod.at("state");
  const InnerProduct ip = role_inner_product(o.model, "state");
  Eigen::Index deficiency = 0;
  const Matrix q = aggregate_family({s.vectors, s.vectors.leftCols(3)}, ip, 4, &deficiency);
  EXPECT_EQ(q.cols(), 4);
  EXPECT_EQ(deficiency, 3);
}

TEST(Aggregation, MissingBasisIsAnError) {
  const Offline& o = graetz_offline();
  auto pod = o.pod;
  pod.erase("adjoint");
  EXPECT_THROW(aggregate(o.model, pod, 2), ConfigError);
}

TEST(Supremizer, SolvesRieszProblem) {
  const Offline& o = stokes_offline();
  const Parameter mu{{0.02, 1.3}};
  const Eigen::Index np = o.model.role("pressure").size;
  const Matrix s = Matrix::Random(np, 3);
  const Matrix t = compute_supremizer(o.model, mu, s);
  const SparseOperator bt = SparseOperator(o.model.supremizer_coupling.evaluate(mu).transpose());
  const SparseOperator& x = o.model.role("state").gram;
  EXPECT_LT((x * t - bt * s).cwiseAbs().maxCoeff(), 1e-10 * (bt * s).cwiseAbs().maxCoeff());
  EXPECT_THROW(compute_supremizer(graetz_offline().model, mu, s), ConfigError);
}

TEST(Supremizer, EnrichmentRestoresPressureStability) {
  // without supremizers the velocity block can be too small to control the
  // pressure block, with them the reduced KKT stays nonsingular
  const Offline& o = stokes_offline();
  const ReducedModel rm = galerkin_project(o.model, aggregate(o.model, o.pod, 2));
  EXPECT_GT(reduced_min_singular_value(rm, o.model.config.reference), 1e-10);
  EXPECT_EQ(rm.block_sizes.at(0).second, 8);
  EXPECT_EQ(rm.block_sizes.at(1).second, 4);
}

TEST(Online, RejectsParameterOutsideBox) {
  const Offline& o = graetz_offline();
  const ReducedModel rm = galerkin_project(o.model, aggregate(o.model, o.pod, 2));
  EXPECT_THROW(solve_online(rm, Parameter{{1.0, 1.0, 1.0}}), ConfigError);
}

TEST(ErrorReport, ZeroReferenceFallsBackToAbsolute) {
  const Offline& o = graetz_offline();
  KKTSolution zero = o.solutions[0].kkt;
  zero.adjoint.setZero();
  KKTSolution other = zero;
  other.adjoint.setConstant(1e-3);
  const ErrorReport rep = error_report(o.model, zero, 1.0, other, 1.0);
  ASSERT_EQ(rep.absolute.size(), 1u);
  EXPECT_EQ(rep.absolute[0], "adjoint");
  EXPECT_GT(rep.relative.at("adjoint"), 0.0);
  EXPECT_EQ(rep.output, 0.0);
}

TEST_P(RomBothCases, GalerkinResidualOrthogonalToReducedSpace) {
  const Offline& o = offline();
  const AggregatedSpace sp = aggregate(o.model, o.pod, 4);
  const ReducedModel rm = galerkin_project(o.model, sp);
  const Parameter mu = sample_uniform(o.model.config.box, 1, 77).front();
  const OnlineSolution on = solve_online(rm, mu);
  const KKTSolution lifted = lift_solution(o.model, rm, on);
  const BlockKKT kkt = assemble_kkt(o.model.ocp.operators(mu), o.model.ocp.grid, o.model.ocp.rhs(mu));
  Vector x(kkt.matrix().rows());
  x << flatten(lifted.state), flatten(lifted.control), flatten(lifted.adjoint);
  const Vector residual = kkt.matrix() * x - kkt.rhs();
  const Eigen::Index ny = sp.primal.rows(), nu = sp.control.rows();
  Vector tested(sp.total_size());
  tested << sp.primal.transpose() * residual.head(ny), sp.control.transpose() * residual.segment(ny, nu),
      sp.primal.transpose() * residual.tail(ny);
  Vector reduced_rhs(sp.total_size());
  reduced_rhs << sp.primal.transpose() * kkt.rhs().head(ny), sp.control.transpose() * kkt.rhs().segment(ny, nu),
      sp.primal.transpose() * kkt.rhs().tail(ny);
  EXPECT_LT(tested.norm(), 1e-9 * reduced_rhs.norm());
}

TEST(Online, ZeroDataGivesZeroSolution) {
  const Offline& o = graetz_offline();
  ReducedModel rm = galerkin_project(o.model, aggregate(o.model, o.pod, 3));
  for (auto& t : rm.rhs.terms()) t.value.setZero();
  for (auto& t : rm.load.terms()) t.value.setZero();
  for (auto& t : rm.constant.terms()) t.value = 0.0;
  const OnlineSolution sol = solve_online(rm, o.model.config.reference);
  EXPECT_EQ(sol.state.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(sol.control.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(sol.objective, 0.0);
}

TEST(ErrorReport, IdenticalInputsAndLinearity) {
  const Offline& o = graetz_offline();
  const FullOrderSolution& fe = o.solutions[1];
  const ErrorReport same = error_report(o.model, fe.kkt, fe.objective, fe.kkt, fe.objective);
  for (const auto& [key, e] : same.relative) EXPECT_EQ(e, 0.0) << key;
  EXPECT_EQ(same.output, 0.0);

  const RoleLayout& role = o.model.role("state");
  const Matrix v = unflatten(o.pod.at("state").vectors.col(0), o.model.ocp.state_size);
  const double dt = o.model.ocp.grid.dt();
  const double ref = spacetime_norm(role.norm_gram, full_field(role, role_slice(role, fe.kkt.state)), dt);
  const double unit = spacetime_norm(role.norm_gram, role.prolong * role_slice(role, v), dt);
  for (double eps : {1e-6, 1e-3, 0.1}) {
    KKTSolution perturbed = fe.kkt;
    perturbed.state += eps * v;
    const ErrorReport rep = error_report(o.model, fe.kkt, fe.objective, perturbed, fe.objective);
    EXPECT_NEAR(rep.relative.at("state"), eps * unit / ref, 1e-9 * eps * unit / ref);
    EXPECT_EQ(rep.relative.at("control"), 0.0);
  }
}

TEST(Supremizer, ZeroPressureGivesZeroSupremizer) {
  const Offline& o = stokes_offline();
  const Matrix t = compute_supremizer(o.model, o.model.config.reference, Matrix::Zero(o.model.role("pressure").size, 2));
  EXPECT_EQ(t.cwiseAbs().maxCoeff(), 0.0);
}

namespace {

// smallest singular value of the reduced pressure-velocity coupling with
// both bases orthonormal in their own norms
double reduced_divergence_infsup(const CaseModel& model, const AggregatedSpace& sp, const Parameter& mu) {
  const int nt = model.ocp.grid.steps;
  const Eigen::Index ns = model.ocp.state_size;
  std::vector<Matrix> slots;
  Eigen::Index col = 0;
  for (std::size_t b = 0; b < 2; ++b) {
    const auto& spec = model.primal_blocks[b];
    const Eigen::Index cols = sp.block_sizes[b].second;
    Matrix slot(spec.size * nt, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
      for (int k = 0; k < nt; ++k)
        slot.col(j).segment(k * spec.size, spec.size) = sp.primal.col(col + j).segment(k * ns + spec.offset, spec.size);
    slots.push_back(slot);
    col += cols;
  }
  const Matrix b = model.ocp.grid.dt() *
                   detail::project_steps(model.supremizer_coupling.evaluate(mu), slots[1], slots[0], nt);
  const Eigen::JacobiSVD<Matrix> svd(b);
  return svd.singularValues().tail(1)(0);
}

}  // namespace

TEST(Supremizer, EnrichmentRaisesReducedInfSup) {
  const Offline& o = stokes_offline();
  CaseModel plain = o.model;
  plain.primal_blocks[0].sources = {"state", "adjoint"};
  std::ostringstream quiet;
  for (Eigen::Index n : {2, 4}) {
    const AggregatedSpace with = aggregate(o.model, o.pod, n, &quiet);
    const AggregatedSpace without = aggregate(plain, o.pod, n, &quiet);
    for (const Parameter& mu : sample_uniform(o.model.config.box, 3, 55)) {
      const double b_with = reduced_divergence_infsup(o.model, with, mu);
      const double b_without = reduced_divergence_infsup(plain, without, mu);
      EXPECT_GT(b_with, b_without) << "N=" << n;
    }
  }
}

TEST(Aggregation, StateOnlyDiagnostic) {
  // recorded, not asserted: how much the reduced KKT degrades without aggregation
  for (const Offline* o : {&graetz_offline(), &stokes_offline()}) {
    const auto mus = sample_uniform(o->model.config.box, 5, 31);
    const ReducedModel rm = galerkin_project(o->model, aggregate(o->model, o->pod, 4));
    double aggregated = std::numeric_limits<double>::infinity();
    for (const auto& mu : mus) aggregated = std::min(aggregated, reduced_min_singular_value(rm, mu));
    const double raw = state_only_min_singular_value(o->model, o->pod, 4, mus);
    RecordProperty(std::string(case_name(o->model.config.case_id)) + "_ratio", std::to_string(aggregated / raw));
    std::cout << case_name(o->model.config.case_id) << ": smallest reduced singular value " << aggregated
              << " aggregated, " << raw << " state only\n";
    EXPECT_GT(aggregated, 0.0);
  }
}
