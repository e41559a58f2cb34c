// podocp: offline / online / benchmark / inspect driver.

#include <cstdlib>
#include <iostream>

#include "CLI11.hpp"
#include "podocp/pipeline.hpp"

using namespace podocp;

namespace {

Parameter parse_mu(const std::string& text) {
  Parameter mu;
  std::istringstream is(text);
  for (std::string part; std::getline(is, part, ',');) {
    try {
      std::size_t used = 0;
      mu.values.push_back(std::stod(part, &used));
      while (used < part.size() && std::isspace(static_cast<unsigned char>(part[used]))) ++used;
      if (used != part.size()) throw ConfigError("");
    } catch (const std::exception&) {
      throw ConfigError("malformed parameter '" + text + "'");
    }
  }
  return mu;
}

fs::path scratch_root() {
  const char* s = std::getenv("PODOCP_SCRATCH");
  return s && *s ? fs::path(s) : fs::current_path();
}

CaseConfig resolve_config(const std::string& path, const std::string& case_name, const std::string& scale) {
  if (!path.empty()) return load_case(path);
  if (case_name.empty()) throw ConfigError("either --config or --case is required");
  return preset(parse_case(case_name), scale == "full" ? Scale::full : Scale::desk);
}

void print_dimensions(const CaseConfig& cfg) {
  std::cout << "case            " << case_name(cfg.case_id) << "\n"
            << "parameters      ";
  for (std::size_t i = 0; i < cfg.box.dim(); ++i)
    std::cout << cfg.box.names[i] << " in [" << cfg.box.lower[i] << ", " << cfg.box.upper[i] << "]  ";
  std::cout << "\n"
            << "time grid       T=" << cfg.grid.final_time << " N_t=" << cfg.grid.steps << " dt=" << cfg.grid.dt() << "\n"
            << "mesh            " << cfg.nx << " x " << cfg.ny << "\n"
            << "alpha           " << cfg.alpha << "\n"
            << "N_max / N       " << cfg.n_max << " / " << cfg.n_basis << "\n"
            << "N_tot           " << reduced_dimension(cfg.case_id, cfg.n_basis) << "\n";
  if (cfg.reported.full_order > 0)
    std::cout << "reported sizes  full order " << cfg.reported.full_order << ", reduced " << cfg.reported.reduced << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reduced order models for parametrized optimal control problems"};
  app.require_subcommand(1);
  app.set_version_flag("--version", io::kToolVersion);

  std::string config_path, case_id, scale = "desk", out, n_text;
  std::vector<std::string> mu_text;
  fs::path model_dir;
  int workers = 1, test_size = 0;
  std::uint64_t seed = 0;
  bool compare_fe = false, quiet = false;

  auto* offline = app.add_subcommand("offline", "solve training problems, compress and project");
  offline->add_option("--config", config_path, "case configuration (JSON)");
  offline->add_option("--case", case_id, "built-in case: graetz or stokes_cavity");
  offline->add_option("--scale", scale, "built-in case scale")->check(CLI::IsMember({"desk", "full"}));
  offline->add_option("--out", out, "output directory (default $PODOCP_SCRATCH/<case>)");
  offline->add_option("--seed", seed, "training sample seed (default from config)");
  offline->add_option("--n", n_text, "retained N (default from config)");
  offline->add_option("--workers", workers, "parallel full-order solves")->check(CLI::PositiveNumber);

  auto* online = app.add_subcommand("online", "solve the reduced problem for given parameters");
  online->add_option("model_dir", model_dir, "offline output directory")->required();
  online->add_option("--mu", mu_text, "parameter, comma separated (repeatable)");
  online->add_option("--test-size", test_size, "number of random parameters");
  online->add_option("--seed", seed, "seed for random parameters");
  online->add_option("--out", out, "output directory (default model_dir)");
  online->add_flag("--compare-fe", compare_fe, "also solve the full-order problem and report errors");
  online->add_option("--workers", workers, "parallel full-order solves")->check(CLI::PositiveNumber);

  auto* bench = app.add_subcommand("benchmark", "error decay and speedup over a test set");
  bench->add_option("model_dir", model_dir, "offline output directory")->required();
  bench->add_option("--n", n_text, "N values: 4, 2,4,6 or 2:10:2");
  bench->add_option("--test-size", test_size, "test set size (default from config)");
  bench->add_option("--seed", seed, "test set seed");
  bench->add_option("--out", out, "output directory (default model_dir)");
  bench->add_option("--workers", workers, "parallel full-order solves")->check(CLI::PositiveNumber);

  auto* inspect = app.add_subcommand("inspect", "describe a configuration or verify an offline directory");
  inspect->add_option("model_dir", model_dir, "offline output directory");
  inspect->add_option("--config", config_path, "case configuration (JSON)");
  inspect->add_option("--case", case_id, "built-in case");
  inspect->add_option("--scale", scale, "built-in case scale")->check(CLI::IsMember({"desk", "full"}));
  bool as_json = false;
  inspect->add_flag("--json", as_json, "print the configuration as JSON");

  for (auto* sub : {offline, online, bench}) sub->add_flag("--quiet", quiet, "no progress output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  std::ostream* log = quiet ? nullptr : &std::cerr;
  try {
    if (*offline) {
      CaseConfig cfg = resolve_config(config_path, case_id, scale);
      if (offline->count("--seed")) cfg.seed = seed;
      if (!n_text.empty()) cfg.n_basis = static_cast<int>(parse_n_range(n_text).back());
      cfg.validate();
      const fs::path dir = out.empty() ? scratch_root() / std::string(case_name(cfg.case_id)) : fs::path(out);
      const OfflineResult r = run_offline(cfg, workers, log);
      const nlohmann::json m = write_offline(dir, r);
      std::cout << "wrote " << m["files"].size() << " artifacts to " << dir.string() << " (N_tot "
                << r.reduced.total_size() << ")\n";
    } else if (*online) {
      const StoredOffline stored = load_offline(model_dir, false);
      std::vector<Parameter> mus;
      for (const auto& t : mu_text) mus.push_back(parse_mu(t));
      if (test_size > 0) {
        const auto drawn = sample_uniform(stored.config.box, static_cast<std::size_t>(test_size),
                                          online->count("--seed") ? seed : test_seed(stored.config.seed));
        mus.insert(mus.end(), drawn.begin(), drawn.end());
      }
      if (mus.empty()) mus.push_back(stored.config.showcase.values.empty() ? stored.config.reference : stored.config.showcase);
      const fs::path dir = out.empty() ? model_dir : fs::path(out);
      const io::CsvTable t = run_online(model_dir, mus, dir, {compare_fe, workers, log});
      std::cout << t.str();
    } else if (*bench) {
      BenchmarkOptions opt;
      if (!n_text.empty()) opt.n_range = parse_n_range(n_text);
      opt.test_size = test_size;
      if (bench->count("--seed")) opt.seed = seed;
      opt.workers = workers;
      opt.log = log;
      const fs::path dir = out.empty() ? model_dir : fs::path(out);
      const BenchmarkResult r = run_benchmark(model_dir, dir, opt);
      std::cout << benchmark_table(load_offline(model_dir, false).config.case_id, r.rows).str();
    } else if (*inspect) {
      if (!model_dir.empty()) {
        const StoredOffline s = load_offline(model_dir, false);
        print_dimensions(s.config);
        const auto& d = s.manifest.at("dimensions");
        std::cout << "full order      " << d.at("full_order") << " unknowns\n"
                  << "reduced         " << d.at("reduced") << " unknowns at N=" << d.at("n") << "\n"
                  << "artifacts       " << s.manifest.at("files").size() << " files, checksums ok\n";
      } else if (as_json) {
        std::cout << to_json(resolve_config(config_path, case_id, scale)).dump(2) << "\n";
      } else {
        print_dimensions(resolve_config(config_path, case_id, scale));
      }
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const ArtifactError& e) {
    std::cerr << "artifact error: " << e.what() << "\n";
    return kExitArtifact;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
  return kExitOk;
}
