#include <gtest/gtest.h>

#include <clocale>
#include <limits>
#include <locale>

#include "podocp/pipeline.hpp"

using namespace podocp;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::path(::testing::TempDir()) / ("podocp_io_" + name);
  fs::remove_all(p);
  return p;
}

CaseConfig tiny_graetz(int n_max = 4, int n = 2) {
  CaseConfig c = graetz_case();
  c.nx = 10;
  c.ny = 5;
  c.grid = TimeGrid(5.0, 3);
  c.n_max = n_max;
  c.n_basis = n;
  c.test_size = 2;
  return c;
}

}  // namespace

TEST(MatrixFile, HeaderLayout) {
  Matrix m(2, 3);
  m << 1, 2, 3, 4, 5, 6;
  const std::string b = io::encode_matrix(m);
  ASSERT_EQ(b.size(), 16u + 6 * 8);
  EXPECT_EQ(b.substr(0, 4), "PODM");
  EXPECT_EQ(static_cast<unsigned char>(b[4]), 2);
  EXPECT_EQ(static_cast<unsigned char>(b[8]), 3);
  EXPECT_EQ(static_cast<unsigned char>(b[12]), 8);
  // column-major: second stored value is m(1, 0)
  double second;
  std::memcpy(&second, b.data() + 24, 8);
  EXPECT_EQ(second, 4.0);
}

TEST(MatrixFile, BitExactRoundTrip) {
  Matrix m(4, 2);
  m << 0.1, -0.0, std::numeric_limits<double>::denorm_min(), std::numeric_limits<double>::max(),
      std::numeric_limits<double>::infinity(), 1.0 / 3.0, -1e-300, std::nan("");
  const Matrix back = io::decode_matrix(io::encode_matrix(m));
  ASSERT_EQ(back.rows(), 4);
  ASSERT_EQ(back.cols(), 2);
  EXPECT_EQ(std::memcmp(back.data(), m.data(), sizeof(double) * 8), 0);
  const Matrix empty = io::decode_matrix(io::encode_matrix(Matrix(0, 5)));
  EXPECT_EQ(empty.cols(), 5);
}

TEST(MatrixFile, RejectsCorruptFiles) {
  const std::string good = io::encode_matrix(Matrix::Ones(3, 3));
  EXPECT_THROW(io::decode_matrix(good.substr(0, good.size() - 1)), ArtifactError);
  EXPECT_THROW(io::decode_matrix(good + "x"), ArtifactError);
  std::string bad = good;
  bad[0] = 'X';
  EXPECT_THROW(io::decode_matrix(bad), ArtifactError);
  bad = good;
  bad[12] = 4;
  EXPECT_THROW(io::decode_matrix(bad), ArtifactError);
  EXPECT_THROW(io::decode_matrix("PODM"), ArtifactError);
  EXPECT_THROW(io::load_matrix(scratch("missing") / "nothing.bin"), ArtifactError);
}

TEST(Checksum, KnownVectors) {
  EXPECT_EQ(io::sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(io::sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Csv, NumbersIgnoreLocale) {
  struct Comma : std::numpunct<char> {
    char do_decimal_point() const override { return ','; }
  };
  const std::locale old = std::locale::global(std::locale(std::locale::classic(), new Comma));
  std::setlocale(LC_NUMERIC, "de_DE.UTF-8");
  EXPECT_EQ(io::format_number(0.1), "0.1");
  EXPECT_EQ(io::format_number(-2.5e-7), "-2.5e-07");
  EXPECT_EQ(io::format_number(3.0), "3");
  for (double v : {1.0 / 3.0, 6.02214076e23, 1e-300}) EXPECT_EQ(std::stod(io::format_number(v)), v);
  std::setlocale(LC_NUMERIC, "C");
  std::locale::global(old);

  io::CsvTable t({"N", "e_y"});
  t.add({"1", io::format_number(0.5)});
  EXPECT_EQ(t.str(), "N,e_y\n1,0.5\n");
  EXPECT_THROW(t.add({"2"}), ConfigError);
}

TEST(Csv, ErrorColumns) {
  EXPECT_EQ(io::error_column("state"), "e_y");
  EXPECT_EQ(io::error_column("adjoint"), "e_p");
  EXPECT_EQ(io::error_column("adjoint_pressure"), "e_adjpress");
  EXPECT_EQ(benchmark_table(CaseId::graetz, {}).str(), "N,e_y,e_u,e_p,e_J,speedup\n");
  EXPECT_EQ(benchmark_table(CaseId::stokes_cavity, {}).str(), "N,e_y,e_u,e_p,e_press,e_adjpress,e_J,speedup\n");
}

TEST(NRange, Parsing) {
  EXPECT_EQ(parse_n_range("4"), (std::vector<Eigen::Index>{4}));
  EXPECT_EQ(parse_n_range("2,4,7"), (std::vector<Eigen::Index>{2, 4, 7}));
  EXPECT_EQ(parse_n_range("2:10:2"), (std::vector<Eigen::Index>{2, 4, 6, 8, 10}));
  EXPECT_EQ(parse_n_range("1:3"), (std::vector<Eigen::Index>{1, 2, 3}));
  for (const char* bad : {"", "0", "a", "3:1", "1:4:0", "2,x", "1:2:3:4"}) EXPECT_THROW(parse_n_range(bad), ConfigError) << bad;
}

class OfflineRun : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    result_ = new OfflineResult(run_offline(tiny_graetz()));
    dir_ = new fs::path(scratch("offline"));
    write_offline(*dir_, *result_);
  }
  static void TearDownTestSuite() {
    delete result_;
    delete dir_;
  }
  static OfflineResult* result_;
  static fs::path* dir_;
};

OfflineResult* OfflineRun::result_ = nullptr;
fs::path* OfflineRun::dir_ = nullptr;

TEST_F(OfflineRun, WritesParabolicFamiliesAndReducedModel) {
  const nlohmann::json m = io::load_manifest(*dir_);
  std::vector<std::string> keys;
  for (const auto& b : m.at("bases")) keys.push_back(b.at("key"));
  EXPECT_EQ(keys, (std::vector<std::string>{"adjoint", "control", "state"}));
  EXPECT_TRUE(fs::exists(*dir_ / "reduced" / "primal_basis.bin"));
  EXPECT_EQ(m.at("dimensions").at("reduced"), 10);
  EXPECT_EQ(m.at("seed"), tiny_graetz().seed);
  EXPECT_EQ(m.at("config_hash"), io::file_sha256(*dir_ / "config.json"));
  EXPECT_TRUE(m.at("timings").contains("training solves"));
}

TEST_F(OfflineRun, ReducedModelRoundTrip) {
  const ReducedModel loaded = io::load_reduced_model(*dir_);
  const ReducedModel& rm = result_->reduced;
  EXPECT_EQ(loaded.kkt.size(), rm.kkt.size());
  EXPECT_EQ(loaded.block_sizes, rm.block_sizes);
  for (const Parameter& mu : sample_uniform(rm.box, 3, 5)) {
    EXPECT_EQ(loaded.kkt.evaluate(mu), rm.kkt.evaluate(mu));
    const OnlineSolution a = solve_online(rm, mu), b = solve_online(loaded, mu);
    EXPECT_EQ(a.state, b.state);
    EXPECT_EQ(a.objective, b.objective);
  }
}

TEST_F(OfflineRun, StoredBasesMatchMemory) {
  const StoredOffline s = load_offline(*dir_);
  EXPECT_EQ(s.config, result_->config);
  EXPECT_EQ(s.training, result_->training);
  for (const auto& [key, b] : result_->pod) {
    EXPECT_EQ(s.pod.at(key).vectors, b.vectors) << key;
    EXPECT_EQ(s.pod.at(key).eigenvalues, b.eigenvalues) << key;
  }
}

TEST_F(OfflineRun, CorruptedArtifactsRejected) {
  const fs::path copy = scratch("corrupt");
  fs::copy(*dir_, copy, fs::copy_options::recursive);
  {
    std::fstream f(copy / "reduced" / "kkt_0.bin", std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(40);
    f.put('\x7f');
  }
  EXPECT_THROW(load_offline(copy), ArtifactError);
  fs::remove(copy / "reduced" / "kkt_0.bin");
  EXPECT_THROW(io::load_manifest(copy), ArtifactError);
  fs::remove(copy / "manifest.json");
  EXPECT_THROW(io::load_manifest(copy), ArtifactError);
}

TEST_F(OfflineRun, OnlineWritesFieldsAndTable) {
  const fs::path out = scratch("online");
  const std::vector<Parameter> mus = sample_uniform(result_->config.box, 2, 3);
  const io::CsvTable t = run_online(*dir_, mus, out, {true});
  EXPECT_EQ(t.size(), 2u);
  EXPECT_EQ(t.header().front(), "index");
  EXPECT_EQ(t.header().back(), "fe_seconds");
  EXPECT_TRUE(fs::exists(out / "online.csv"));
  const Matrix y = io::load_matrix(out / "online" / "solution_001_state.bin");
  EXPECT_EQ(y.rows(), result_->model.ocp.state_size);
  EXPECT_EQ(y.cols(), 3);
  EXPECT_THROW(run_online(*dir_, {Parameter{{1.0, 1.0, 1.0}}}, out), ConfigError);
}

TEST_F(OfflineRun, BenchmarkRejectsNBeyondNmax) {
  BenchmarkOptions opt;
  opt.n_range = {5};
  EXPECT_THROW(run_benchmark(*dir_, scratch("bench"), opt), ConfigError);
}

TEST_F(OfflineRun, BenchmarkTables) {
  BenchmarkOptions opt;
  opt.n_range = {1, 4};
  opt.test_size = 2;
  const fs::path out = scratch("bench");
  const BenchmarkResult r = run_benchmark(*dir_, out, opt);
  ASSERT_EQ(r.rows.size(), 2u);
  EXPECT_EQ(r.rows[0].total, 5);
  EXPECT_EQ(r.rows[1].total, 20);
  EXPECT_LT(r.rows[1].errors.at("state"), r.rows[0].errors.at("state"));
  EXPECT_GT(r.rows[1].speedup, 1.0);
  const std::string csv = io::read_bytes(out / "benchmark.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "N,e_y,e_u,e_p,e_J,speedup");
  // test parameters are drawn apart from the training seed
  EXPECT_NE(r.test.mus.front(), result_->training.front());
}

TEST(Offline, SameSeedIsByteIdentical) {
  const CaseConfig cfg = tiny_graetz();
  const fs::path a = scratch("det_a"), b = scratch("det_b");
  const nlohmann::json ma = write_offline(a, run_offline(cfg));
  const nlohmann::json mb = write_offline(b, run_offline(cfg));
  EXPECT_EQ(io::stable_manifest(ma).dump(), io::stable_manifest(mb).dump());
  for (const auto& f : ma.at("files")) {
    const std::string rel = f.at("path");
    EXPECT_EQ(io::read_bytes(a / rel), io::read_bytes(b / rel)) << rel;
  }
}

TEST(Offline, SingleSnapshotRun) {
  const CaseConfig cfg = tiny_graetz(1, 1);
  std::ostringstream log;
  const OfflineResult r = run_offline(cfg, 1, &log);
  for (const auto& [key, b] : r.pod) EXPECT_EQ(b.size(), 1) << key;
  EXPECT_EQ(r.reduced.total_size(), 5);
  const OnlineSolution sol = solve_online(r.reduced, r.training[0]);
  const ErrorReport rep = error_report(r.model, r.solutions[0].kkt, r.solutions[0].objective,
                                       lift_solution(r.model, r.reduced, sol), sol.objective);
  for (const auto& [key, e] : rep.relative) EXPECT_LT(e, 1e-8) << key;
}

TEST(Offline, FailureNamesStageAndSample) {
  const CaseModel model = build_case_model(tiny_graetz());
  const std::vector<Parameter> mus{model.config.reference, Parameter{{1.0, 1.0, 1.0}}};
  try {
    solve_full_order_batch(model, mus, 2, "training solves");
    FAIL() << "expected a failure";
  } catch (const ConfigError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("training solves"), std::string::npos) << what;
    EXPECT_NE(what.find("sample 1"), std::string::npos) << what;
  }
}

TEST(Offline, ParallelSolvesKeepOrder) {
  const CaseModel model = build_case_model(tiny_graetz());
  const auto mus = sample_uniform(model.config.box, 4, 17);
  const auto serial = solve_full_order_batch(model, mus, 1, "serial");
  const auto parallel = solve_full_order_batch(model, mus, 3, "parallel");
  for (std::size_t i = 0; i < mus.size(); ++i) {
    EXPECT_EQ(parallel[i].mu, mus[i]);
    EXPECT_NEAR(parallel[i].objective, serial[i].objective, 1e-12 * std::abs(serial[i].objective));
  }
}
