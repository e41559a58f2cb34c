#ifndef PODOCP_CASES_HPP
#define PODOCP_CASES_HPP

#include <cstdint>
#include <fstream>
#include <string>

#include "json.hpp"
#include "podocp/case_id.hpp"
#include "podocp/error.hpp"
#include "podocp/parameter.hpp"
#include "podocp/spacetime.hpp"

namespace podocp {

inline constexpr const char* kCaseSchema = "podocp.case/1";

enum class Scale { desk, full };

/// Dimensions quoted for the full-scale benchmark runs. They are carried as
/// metadata only; desk meshes do not reproduce them.
struct ReportedDimensions {
  long state_dofs = 0;     // scalar or velocity dofs per step
  long pressure_dofs = 0;  // Stokes only
  long full_order = 0;     // dimension of the all-at-once system
  long reduced = 0;        // N_tot at the retained N

  bool operator==(const ReportedDimensions&) const = default;
};

/// Everything needed to rebuild a benchmark: geometry, physics, time grid,
/// sampling and reduction sizes.
struct CaseConfig {
  CaseId case_id = CaseId::graetz;
  ParameterBox box;
  Parameter reference;
  Parameter showcase;
  double alpha = 1e-2;
  TimeGrid grid;
  int nx = 2;
  int ny = 2;
  int n_max = 1;
  int n_basis = 1;
  int test_size = 1;
  std::string sampling = "uniform";
  std::uint64_t seed = 1;
  std::string observation_domain;
  std::string control_region;
  std::string dirichlet;           // human-readable boundary data summary
  std::vector<std::string> dirichlet_priority;
  std::string desired_state;
  std::string outflow;
  ReportedDimensions reported;

  void validate() const {
    if (!(alpha > 0.0)) throw ConfigError("alpha must be positive");
    if (box.dim() == 0 || box.lower.size() != box.upper.size() || box.names.size() != box.dim())
      throw ConfigError("parameter box is malformed");
    for (std::size_t i = 0; i < box.dim(); ++i)
      if (!(box.lower[i] < box.upper[i])) throw ConfigError("parameter box is empty in " + box.names[i]);
    box.require(reference);
    if (!showcase.values.empty()) box.require(showcase);
    if (n_max < 1) throw ConfigError("n_max must be at least 1");
    if (n_basis < 1 || n_basis > n_max) throw ConfigError("retained N must satisfy 1 <= N <= n_max");
    if (test_size < 1) throw ConfigError("test set size must be at least 1");
    if (sampling != "uniform") throw ConfigError("only uniform sampling is supported");
    TimeGrid(grid.final_time, grid.steps);
    if (nx < 2 || ny < 2) throw ConfigError("mesh resolution must be at least 2x2");
  }

  bool operator==(const CaseConfig&) const = default;
};

/// Reduced dimensions as a function of the retained N.
inline long reduced_dimension(CaseId id, long n) { return id == CaseId::graetz ? 5 * n : 13 * n; }

/// Dimension of the full space-time system per the counting
///   parabolic  3 N_t N,  Stokes  N_t (2 N_y + 2 N_p + N_u).
inline long full_order_dimension(CaseId id, long steps, long state_dofs, long pressure_dofs = 0) {
  if (id == CaseId::graetz) return 3 * steps * state_dofs;
  return steps * (3 * state_dofs + 2 * pressure_dofs);
}

inline CaseConfig graetz_case(Scale scale = Scale::desk) {
  CaseConfig c;
  c.case_id = CaseId::graetz;
  c.box = default_parameter_box(CaseId::graetz);
  c.reference = reference_parameter(CaseId::graetz);
  c.showcase = Parameter{{1.0 / 12.0, 2.0, 2.5}};
  c.alpha = 1e-2;
  c.observation_domain = "omega3";
  c.control_region = "gamma_c";
  c.dirichlet = "y=1 on gamma_d (x=0 and walls of [0,1]^2); y0 = lift of the boundary data";
  c.dirichlet_priority = {"gamma_d"};
  c.desired_state = "constant mu_target";
  c.outflow = "homogeneous neumann on {2}x(0,1)";
  c.reported = {3487, 0, 313830, 175};
  if (scale == Scale::full) {
    c.grid = TimeGrid(5.0, 30);
    c.nx = 84;
    c.ny = 40;
    c.n_max = 70;
    c.n_basis = 35;
    c.test_size = 50;
  } else {
    c.grid = TimeGrid(5.0, 10);
    c.nx = 48;
    c.ny = 20;
    c.n_max = 20;
    c.n_basis = 10;
    c.test_size = 20;
  }
  c.seed = 20240501;
  return c;
}

inline CaseConfig stokes_cavity_case(Scale scale = Scale::desk) {
  CaseConfig c;
  c.case_id = CaseId::stokes_cavity;
  c.box = default_parameter_box(CaseId::stokes_cavity);
  c.reference = reference_parameter(CaseId::stokes_cavity);
  c.showcase = Parameter{{1e-2, 1.5}};
  c.alpha = 1e-2;
  c.observation_domain = "cavity";
  c.control_region = "cavity";
  c.dirichlet = "v=(1+cos(4 pi t - pi)/2, 0) on gamma_in, v=0 on gamma_d; y0 = lift at t=0";
  c.dirichlet_priority = {"gamma_d", "gamma_in"};
  c.desired_state = "uncontrolled stokes, mu_phys=1, lid (1,0), reference geometry";
  c.outflow = "none";
  c.reported = {4554, 591, 296880, 325};
  if (scale == Scale::full) {
    c.grid = TimeGrid(1.0, 20);
    c.nx = 23;
    c.ny = 23;
    c.n_max = 70;
    c.n_basis = 25;
    c.test_size = 35;
  } else {
    c.grid = TimeGrid(1.0, 10);
    c.nx = 12;
    c.ny = 12;
    c.n_max = 20;
    c.n_basis = 10;
    c.test_size = 10;
  }
  c.seed = 20240502;
  return c;
}

inline CaseConfig preset(CaseId id, Scale scale) {
  return id == CaseId::graetz ? graetz_case(scale) : stokes_cavity_case(scale);
}

// ---------------------------------------------------------------------------
// JSON form

inline nlohmann::json to_json(const CaseConfig& c) {
  nlohmann::json j;
  j["schema"] = kCaseSchema;
  j["case"] = std::string(case_name(c.case_id));
  // component order of every parameter vector follows parameters.names
  j["parameters"] = {{"names", c.box.names},
                     {"lower", c.box.lower},
                     {"upper", c.box.upper},
                     {"reference", c.reference.values},
                     {"showcase", c.showcase.values}};
  j["alpha"] = c.alpha;
  j["time"] = {{"final_time", c.grid.final_time}, {"steps", c.grid.steps}};
  j["mesh"] = {{"nx", c.nx}, {"ny", c.ny}};
  j["reduction"] = {{"n_max", c.n_max}, {"n", c.n_basis}, {"test_size", c.test_size}};
  j["sampling"] = {{"distribution", c.sampling}, {"seed", c.seed}};
  j["problem"] = {{"observation_domain", c.observation_domain},
                  {"control_region", c.control_region},
                  {"dirichlet", c.dirichlet},
                  {"dirichlet_priority", c.dirichlet_priority},
                  {"desired_state", c.desired_state},
                  {"outflow", c.outflow}};
  j["reported"] = {{"state_dofs", c.reported.state_dofs},
                   {"pressure_dofs", c.reported.pressure_dofs},
                   {"full_order", c.reported.full_order},
                   {"reduced", c.reported.reduced}};
  return j;
}

inline CaseConfig case_from_json(const nlohmann::json& j) {
  try {
    if (j.value("schema", std::string()) != kCaseSchema)
      throw ConfigError("unsupported config schema '" + j.value("schema", std::string()) + "'");
    CaseConfig c = preset(parse_case(j.at("case").get<std::string>()), Scale::desk);
    const auto& p = j.at("parameters");
    c.box.names = p.at("names").get<std::vector<std::string>>();
    c.box.lower = p.at("lower").get<std::vector<double>>();
    c.box.upper = p.at("upper").get<std::vector<double>>();
    c.reference.values = p.at("reference").get<std::vector<double>>();
    c.showcase.values = p.value("showcase", std::vector<double>{});
    if (c.box.names != default_parameter_box(c.case_id).names)
      throw ConfigError("parameter names must be " +
                        nlohmann::json(default_parameter_box(c.case_id).names).dump());
    c.alpha = j.at("alpha").get<double>();
    c.grid = TimeGrid(j.at("time").at("final_time").get<double>(), j.at("time").at("steps").get<int>());
    c.nx = j.at("mesh").at("nx").get<int>();
    c.ny = j.at("mesh").at("ny").get<int>();
    c.n_max = j.at("reduction").at("n_max").get<int>();
    c.n_basis = j.at("reduction").at("n").get<int>();
    c.test_size = j.at("reduction").at("test_size").get<int>();
    c.sampling = j.at("sampling").value("distribution", std::string("uniform"));
    c.seed = j.at("sampling").at("seed").get<std::uint64_t>();
    if (j.contains("problem")) {
      const auto& pr = j.at("problem");
      c.observation_domain = pr.value("observation_domain", c.observation_domain);
      c.control_region = pr.value("control_region", c.control_region);
      c.dirichlet = pr.value("dirichlet", c.dirichlet);
      c.dirichlet_priority = pr.value("dirichlet_priority", c.dirichlet_priority);
      c.desired_state = pr.value("desired_state", c.desired_state);
      c.outflow = pr.value("outflow", c.outflow);
    }
    if (j.contains("reported")) {
      const auto& r = j.at("reported");
      c.reported = {r.value("state_dofs", 0L), r.value("pressure_dofs", 0L), r.value("full_order", 0L),
                    r.value("reduced", 0L)};
    }
    const CaseConfig defaults = preset(c.case_id, Scale::desk);
    if (c.observation_domain != defaults.observation_domain || c.control_region != defaults.control_region)
      throw ConfigError("observation/control regions are fixed by the case");
    c.validate();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

inline CaseConfig load_case(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
  }
  return case_from_json(j);
}

}  // namespace podocp

#endif  // PODOCP_CASES_HPP
