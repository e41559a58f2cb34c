#ifndef PODOCP_PIPELINE_HPP
#define PODOCP_PIPELINE_HPP

#include <atomic>
#include <chrono>
#include <exception>
#include <iostream>
#include <mutex>
#include <optional>
#include <thread>

#include "podocp/io.hpp"
#include "podocp/rom.hpp"

namespace podocp {

namespace fs = std::filesystem;

namespace detail {

inline double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

/// Re-raises the exception in `e` with `prefix` prepended, keeping its category.
[[noreturn]] inline void rethrow_prefixed(std::exception_ptr e, const std::string& prefix) {
  try {
    std::rethrow_exception(e);
  } catch (const ConfigError& x) {
    throw ConfigError(prefix + x.what());
  } catch (const ArtifactError& x) {
    throw ArtifactError(prefix + x.what());
  } catch (const std::exception& x) {
    throw NumericalError(prefix + x.what());
  }
}

template <class Fn>
auto run_stage(const std::string& stage, Fn&& fn) {
  try {
    return fn();
  } catch (...) {
    rethrow_prefixed(std::current_exception(), "stage '" + stage + "': ");
  }
}

}  // namespace detail

/// Full-order solves over a list of parameters on up to `workers` threads.
/// Results keep the input order; the first failing sample is reported.
inline std::vector<FullOrderSolution> solve_full_order_batch(const CaseModel& model, const std::vector<Parameter>& mus,
                                                             int workers, const std::string& stage,
                                                             std::ostream* log = nullptr) {
  std::vector<FullOrderSolution> out(mus.size());
  std::vector<std::exception_ptr> errors(mus.size());
  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;
  auto work = [&] {
    for (std::size_t i; (i = next++) < mus.size();) {
      try {
        out[i] = solve_full_order(model, mus[i]);
        if (log) {
          std::lock_guard lock(log_mutex);
          *log << stage << ": sample " << i + 1 << "/" << mus.size() << " solved in " << out[i].seconds << " s\n";
        }
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(workers, 1)), 1, std::max<std::size_t>(mus.size(), 1));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  for (std::size_t i = 0; i < mus.size(); ++i)
    if (errors[i])
      detail::rethrow_prefixed(errors[i], "stage '" + stage + "', sample " + std::to_string(i) + " mu=" +
                                              to_string(mus[i]) + ": ");
  return out;
}

// ---------------------------------------------------------------------------
// offline

struct OfflineResult {
  CaseConfig config;
  CaseModel model;
  std::vector<Parameter> training;
  std::vector<FullOrderSolution> solutions;
  std::map<std::string, ReducedBasis> pod;  // up to n_max modes each
  ReducedModel reduced;                     // at the retained N
  Eigen::Index deficiency = 0;
  std::vector<std::pair<std::string, double>> timings;
};

inline OfflineResult run_offline(const CaseConfig& cfg, int workers = 1, std::ostream* log = nullptr) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  OfflineResult r{cfg, {}, {}, {}, {}, {}, 0, {}};
  auto timed = [&](const std::string& stage, auto&& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    detail::run_stage(stage, fn);
    r.timings.emplace_back(stage, detail::seconds_since(t0));
    if (log) *log << stage << ": " << r.timings.back().second << " s\n";
  };
  timed("model", [&] {
    r.model = build_case_model(cfg);
    return 0;
  });
  r.training = sample_uniform(cfg.box, static_cast<std::size_t>(cfg.n_max), cfg.seed);
  {
    const auto t0 = std::chrono::steady_clock::now();
    r.solutions = solve_full_order_batch(r.model, r.training, workers, "training solves", log);
    r.timings.emplace_back("training solves", detail::seconds_since(t0));
  }
  SnapshotCollection snaps;
  timed("snapshots", [&] {
    std::vector<KKTSolution> kkt;
    for (const auto& s : r.solutions) kkt.push_back(s.kkt);
    snaps = collect_snapshots(r.model, r.training, kkt);
    return 0;
  });
  timed("pod", [&] {
    r.pod = compute_pod_bases(r.model, snaps, cfg.n_max, log);
    return 0;
  });
  timed("projection", [&] {
    const AggregatedSpace space = aggregate(r.model, r.pod, cfg.n_basis, log);
    r.deficiency = space.deficiency;
    r.reduced = galerkin_project(r.model, space);
    return 0;
  });
  r.timings.emplace_back("total", detail::seconds_since(start));
  return r;
}

inline nlohmann::json grid_json(const TimeGrid& g) {
  return {{"final_time", g.final_time}, {"steps", g.steps}, {"dt", g.dt()}};
}

/// Writes config, training parameters, POD bases, reduced model and manifest.
inline nlohmann::json write_offline(const fs::path& dir, const OfflineResult& r) {
  io::ArtifactWriter w(dir);
  w.json("config.json", to_json(r.config));
  w.matrix("training_parameters.bin", io::parameters_matrix(r.training));
  nlohmann::json bases = nlohmann::json::array();
  for (const auto& [key, b] : r.pod) {
    io::save_basis(w, "bases", b);
    bases.push_back({{"key", key}, {"modes", b.size()}});
  }
  io::save_reduced_model(w, "reduced", r.reduced);

  const AffineOcp& ocp = r.model.ocp;
  nlohmann::json m;
  m["schema"] = io::kManifestSchema;
  m["tool"] = {{"name", "podocp"}, {"version", io::kToolVersion}};
  m["case"] = case_name(r.config.case_id);
  m["config_hash"] = io::config_hash(r.config);
  m["seed"] = r.config.seed;
  m["grid"] = grid_json(ocp.grid);
  m["dimensions"] = {{"state_per_step", ocp.state_size},
                     {"control_per_step", ocp.control_size},
                     {"full_order", ocp.grid.steps * (2 * ocp.state_size + ocp.control_size)},
                     {"n_max", r.config.n_max},
                     {"n", r.reduced.n},
                     {"reduced", r.reduced.total_size()},
                     {"aggregation_deficiency", r.deficiency}};
  m["bases"] = bases;
  m["reduced_model"] = "reduced/model.json";
  m["files"] = w.file_list();
  nlohmann::json t = nlohmann::json::object();
  for (const auto& [stage, s] : r.timings) t[stage] = s;
  m["timings"] = t;
  io::write_bytes(dir / "manifest.json", m.dump(2) + "\n");
  return m;
}

/// Offline artifacts read back with checksums verified.
struct StoredOffline {
  fs::path dir;
  nlohmann::json manifest;
  CaseConfig config;
  std::vector<Parameter> training;
  std::map<std::string, ReducedBasis> pod;
};

inline StoredOffline load_offline(const fs::path& dir, bool with_bases = true) {
  StoredOffline s;
  s.dir = dir;
  s.manifest = io::load_manifest(dir);
  try {
    s.config = case_from_json(io::read_json(dir / "config.json"));
  } catch (const ConfigError& e) {
    throw ArtifactError(std::string("stored config is invalid: ") + e.what());
  }
  if (io::config_hash(s.config) != s.manifest.at("config_hash").get<std::string>())
    throw ArtifactError("stored config does not match the manifest hash");
  s.training = io::parameters_from_matrix(io::load_matrix(dir / "training_parameters.bin"));
  if (with_bases)
    for (const auto& b : s.manifest.at("bases")) {
      const std::string key = b.at("key");
      s.pod[key] = io::load_basis(dir, "bases", key);
    }
  return s;
}

// ---------------------------------------------------------------------------
// online

inline std::uint64_t test_seed(std::uint64_t training_seed) { return training_seed ^ 0x9e3779b97f4a7c15ULL; }

struct OnlineOptions {
  bool compare_fe = false;
  int workers = 1;
  std::ostream* log = nullptr;
};

/// Solves the stored reduced model at each parameter, writes lifted fields
/// and returns the per-parameter table.
inline io::CsvTable run_online(const fs::path& model_dir, const std::vector<Parameter>& mus, const fs::path& out_dir,
                               const OnlineOptions& opt = {}) {
  const StoredOffline stored = load_offline(model_dir, false);
  const ReducedModel rm = io::load_reduced_model(model_dir);
  for (const auto& mu : mus) rm.box.require(mu);

  std::vector<std::string> header{"index"};
  for (const auto& name : rm.box.names) header.push_back(name);
  header.insert(header.end(), {"J", "rom_seconds"});
  const auto keys = io::error_keys(rm.case_id);
  if (opt.compare_fe) {
    header.push_back("J_fe");
    for (const auto& k : keys) header.push_back(io::error_column(k));
    header.insert(header.end(), {"e_J", "fe_seconds"});
  }
  io::CsvTable table(header);

  std::optional<CaseModel> model;
  std::vector<FullOrderSolution> fe;
  if (opt.compare_fe) {
    model = detail::run_stage("model", [&] { return build_case_model(stored.config); });
    fe = solve_full_order_batch(*model, mus, opt.workers, "reference solves", opt.log);
  }
  const Eigen::Index ns = rm.primal_basis.rows() / rm.grid.steps;
  const Eigen::Index nc = rm.control_basis.rows() / rm.grid.steps;
  io::ArtifactWriter w(out_dir);
  for (std::size_t i = 0; i < mus.size(); ++i) {
    const OnlineSolution sol = solve_online(rm, mus[i]);
    const double seconds = time_online(rm, mus[i]);
    const KKTSolution lifted = lift_solution(rm, sol, ns, nc);
    char tag[32];
    std::snprintf(tag, sizeof tag, "online/solution_%03zu_", i);
    w.matrix(std::string(tag) + "state.bin", lifted.state);
    w.matrix(std::string(tag) + "control.bin", lifted.control);
    w.matrix(std::string(tag) + "adjoint.bin", lifted.adjoint);
    Vector coeffs(sol.state.size() + sol.control.size() + sol.adjoint.size());
    coeffs << sol.state, sol.control, sol.adjoint;
    w.matrix(std::string(tag) + "coefficients.bin", coeffs);

    std::vector<std::string> row{std::to_string(i)};
    for (double v : mus[i].values) row.push_back(io::format_number(v));
    row.push_back(io::format_number(sol.objective));
    row.push_back(io::format_number(seconds));
    if (opt.compare_fe) {
      const ErrorReport rep = error_report(*model, fe[i].kkt, fe[i].objective, lifted, sol.objective);
      row.push_back(io::format_number(fe[i].objective));
      for (const auto& k : keys) row.push_back(io::format_number(rep.relative.at(k)));
      row.push_back(io::format_number(rep.output));
      row.push_back(io::format_number(fe[i].seconds));
    }
    table.add(row);
  }
  table.save(out_dir / "online.csv");
  return table;
}

// ---------------------------------------------------------------------------
// benchmark

struct BenchmarkRow {
  Eigen::Index n = 0;
  Eigen::Index total = 0;
  std::map<std::string, double> errors;  // mean relative error per variable
  double output = 0.0;                   // mean output error
  double fe_seconds = 0.0;
  double rom_seconds = 0.0;
  double speedup = 0.0;
  double min_singular_value = 0.0;
};

struct TestReference {
  std::vector<Parameter> mus;
  std::vector<FullOrderSolution> fe;
};

/// Parses "4", "2,4,6" or "2:10:2" (inclusive).
inline std::vector<Eigen::Index> parse_n_range(const std::string& text) {
  std::vector<Eigen::Index> out;
  auto to_int = [&](const std::string& s) {
    try {
      std::size_t used = 0;
      const long v = std::stol(s, &used);
      if (used != s.size()) throw ConfigError("");
      return static_cast<Eigen::Index>(v);
    } catch (const std::exception&) {
      throw ConfigError("malformed N range '" + text + "'");
    }
  };
  if (text.find(':') != std::string::npos) {
    std::vector<std::string> parts;
    std::istringstream is(text);
    for (std::string p; std::getline(is, p, ':');) parts.push_back(p);
    if (parts.size() < 2 || parts.size() > 3) throw ConfigError("malformed N range '" + text + "'");
    const Eigen::Index lo = to_int(parts[0]), hi = to_int(parts[1]), step = parts.size() == 3 ? to_int(parts[2]) : 1;
    if (step < 1 || hi < lo) throw ConfigError("malformed N range '" + text + "'");
    for (Eigen::Index n = lo; n <= hi; n += step) out.push_back(n);
  } else {
    std::istringstream is(text);
    for (std::string p; std::getline(is, p, ',');) out.push_back(to_int(p));
  }
  if (out.empty()) throw ConfigError("empty N range");
  for (Eigen::Index n : out)
    if (n < 1) throw ConfigError("N must be positive");
  return out;
}

inline std::vector<BenchmarkRow> speedup_study(const CaseModel& model, const std::map<std::string, ReducedBasis>& pod,
                                               const TestReference& test, const std::vector<Eigen::Index>& n_range,
                                               std::ostream* log = nullptr) {
  if (test.mus.empty() || test.mus.size() != test.fe.size()) throw ConfigError("benchmark needs reference solutions");
  for (Eigen::Index n : n_range)
    if (n > model.config.n_max)
      throw ConfigError("N range exceeds N_max (" + std::to_string(n) + " > " + std::to_string(model.config.n_max) + ")");
  double fe_seconds = 0.0;
  for (const auto& f : test.fe) fe_seconds += f.seconds;
  fe_seconds /= static_cast<double>(test.fe.size());

  std::vector<BenchmarkRow> rows;
  for (Eigen::Index n : n_range) {
    const ReducedModel rm = galerkin_project(model, aggregate(model, pod, n, log));
    BenchmarkRow row;
    row.n = n;
    row.total = rm.total_size();
    row.fe_seconds = fe_seconds;
    row.min_singular_value = std::numeric_limits<double>::infinity();
    const double m = static_cast<double>(test.mus.size());
    for (std::size_t i = 0; i < test.mus.size(); ++i) {
      const OnlineSolution sol = solve_online(rm, test.mus[i]);
      const ErrorReport rep =
          error_report(model, test.fe[i].kkt, test.fe[i].objective, lift_solution(model, rm, sol), sol.objective);
      for (const auto& [k, e] : rep.relative) row.errors[k] += e / m;
      row.output += rep.output / m;
      row.rom_seconds += time_online(rm, test.mus[i]) / m;
      row.min_singular_value = std::min(row.min_singular_value, reduced_min_singular_value(rm, test.mus[i]));
    }
    row.speedup = row.fe_seconds / row.rom_seconds;
    if (log) *log << "N=" << n << " N_tot=" << row.total << " e_J=" << row.output << " speedup=" << row.speedup << "\n";
    rows.push_back(row);
  }
  return rows;
}

/// Error decay table, header N,e_y,e_u,e_p[,e_press,e_adjpress],e_J,speedup.
inline io::CsvTable benchmark_table(CaseId id, const std::vector<BenchmarkRow>& rows) {
  const auto keys = io::error_keys(id);
  std::vector<std::string> header{"N"};
  for (const auto& k : keys) header.push_back(io::error_column(k));
  header.insert(header.end(), {"e_J", "speedup"});
  io::CsvTable t(header);
  for (const auto& r : rows) {
    std::vector<std::string> row{std::to_string(r.n)};
    for (const auto& k : keys) row.push_back(io::format_number(r.errors.at(k)));
    row.push_back(io::format_number(r.output));
    row.push_back(io::format_number(r.speedup));
    t.add(row);
  }
  return t;
}

inline io::CsvTable timing_table(const std::vector<BenchmarkRow>& rows) {
  io::CsvTable t({"N", "N_tot", "fe_seconds", "rom_seconds", "speedup", "min_singular_value"});
  for (const auto& r : rows)
    t.add({std::to_string(r.n), std::to_string(r.total), io::format_number(r.fe_seconds),
           io::format_number(r.rom_seconds), io::format_number(r.speedup), io::format_number(r.min_singular_value)});
  return t;
}

struct BenchmarkOptions {
  std::vector<Eigen::Index> n_range;
  int test_size = 0;  // 0: config value
  std::optional<std::uint64_t> seed;
  int workers = 1;
  std::ostream* log = nullptr;
};

struct BenchmarkResult {
  TestReference test;
  std::vector<BenchmarkRow> rows;
};

/// Error decay and speedup over a test set drawn independently of training.
inline BenchmarkResult run_benchmark(const fs::path& model_dir, const fs::path& out_dir, const BenchmarkOptions& opt) {
  const StoredOffline stored = load_offline(model_dir);
  std::vector<Eigen::Index> n_range = opt.n_range;
  if (n_range.empty()) n_range = {stored.config.n_basis};
  for (Eigen::Index n : n_range)
    if (n > stored.config.n_max)
      throw ConfigError("N range exceeds N_max (" + std::to_string(n) + " > " + std::to_string(stored.config.n_max) + ")");
  const int size = opt.test_size > 0 ? opt.test_size : stored.config.test_size;
  const std::uint64_t seed = opt.seed.value_or(test_seed(stored.config.seed));

  const CaseModel model = detail::run_stage("model", [&] { return build_case_model(stored.config); });
  BenchmarkResult r;
  r.test.mus = sample_uniform(stored.config.box, static_cast<std::size_t>(size), seed);
  r.test.fe = solve_full_order_batch(model, r.test.mus, opt.workers, "reference solves", opt.log);
  r.rows = detail::run_stage("benchmark", [&] { return speedup_study(model, stored.pod, r.test, n_range, opt.log); });
  benchmark_table(stored.config.case_id, r.rows).save(out_dir / "benchmark.csv");
  timing_table(r.rows).save(out_dir / "benchmark_timings.csv");
  std::vector<std::string> header{"index"};
  for (const auto& name : stored.config.box.names) header.push_back(name);
  io::CsvTable params(header);
  for (std::size_t i = 0; i < r.test.mus.size(); ++i) {
    std::vector<std::string> row{std::to_string(i)};
    for (double v : r.test.mus[i].values) row.push_back(io::format_number(v));
    params.add(row);
  }
  params.save(out_dir / "test_parameters.csv");
  return r;
}

// ---------------------------------------------------------------------------
// diagnostics

/// Smallest singular value of the reduced KKT matrix over `mus` when the
/// primal space is spanned by the first source of each block only (no
/// adjoint or supremizer aggregation).
inline double state_only_min_singular_value(const CaseModel& model, const std::map<std::string, ReducedBasis>& pod,
                                            Eigen::Index n, const std::vector<Parameter>& mus) {
  CaseModel raw = model;
  for (auto& spec : raw.primal_blocks) spec.sources.resize(1);
  std::ostringstream quiet;
  const ReducedModel rm = galerkin_project(raw, aggregate(raw, pod, n, &quiet));
  double out = std::numeric_limits<double>::infinity();
  for (const auto& mu : mus) out = std::min(out, reduced_min_singular_value(rm, mu));
  return out;
}

}  // namespace podocp

#endif  // PODOCP_PIPELINE_HPP
