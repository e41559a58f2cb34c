#ifndef PODOCP_IO_HPP
#define PODOCP_IO_HPP

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "podocp/cases.hpp"
#include "podocp/error.hpp"
#include "podocp/rom.hpp"

namespace podocp::io {

namespace fs = std::filesystem;

inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr const char* kManifestSchema = "podocp.manifest/1";
inline constexpr const char* kReducedSchema = "podocp.reduced/1";
inline constexpr std::array<char, 4> kMatrixMagic{'P', 'O', 'D', 'M'};

// ---------------------------------------------------------------------------
// bytes and checksums

inline std::string read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArtifactError("cannot open '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_bytes(const fs::path& path, const std::string& bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ArtifactError("cannot write '" + path.string() + "'");
}

inline std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw ArtifactError("sha256 failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

inline std::string file_sha256(const fs::path& path) { return sha256_hex(read_bytes(path)); }

// ---------------------------------------------------------------------------
// binary matrices: 16 byte header then little-endian column-major doubles

namespace detail {

template <class T>
void put_le(std::string& out, T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  std::array<char, sizeof(T)> b;
  std::memcpy(b.data(), &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(b.begin(), b.end());
  out.append(b.data(), b.size());
}

template <class T>
T get_le(const char* p) {
  std::array<char, sizeof(T)> b;
  std::memcpy(b.data(), p, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(b.begin(), b.end());
  T v;
  std::memcpy(&v, b.data(), sizeof(T));
  return v;
}

}  // namespace detail

inline std::string encode_matrix(const Matrix& m) {
  if (m.rows() > UINT32_MAX || m.cols() > UINT32_MAX) throw ArtifactError("matrix too large for the file format");
  std::string out(kMatrixMagic.data(), kMatrixMagic.size());
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(m.rows()));
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(m.cols()));
  detail::put_le<std::uint32_t>(out, sizeof(double));
  out.reserve(out.size() + m.size() * sizeof(double));
  if constexpr (std::endian::native == std::endian::little) {
    out.append(reinterpret_cast<const char*>(m.data()), m.size() * sizeof(double));
  } else {
    for (Eigen::Index i = 0; i < m.size(); ++i) detail::put_le<double>(out, m.data()[i]);
  }
  return out;
}

inline Matrix decode_matrix(const std::string& bytes, const std::string& what = "matrix") {
  if (bytes.size() < 16 || !std::equal(kMatrixMagic.begin(), kMatrixMagic.end(), bytes.begin()))
    throw ArtifactError(what + ": not a matrix file");
  const auto rows = detail::get_le<std::uint32_t>(bytes.data() + 4);
  const auto cols = detail::get_le<std::uint32_t>(bytes.data() + 8);
  const auto width = detail::get_le<std::uint32_t>(bytes.data() + 12);
  if (width != sizeof(double)) throw ArtifactError(what + ": unsupported scalar width " + std::to_string(width));
  const std::uint64_t count = std::uint64_t(rows) * cols;
  if (bytes.size() != 16 + count * sizeof(double)) throw ArtifactError(what + ": truncated or oversized payload");
  Matrix m(rows, cols);
  for (std::uint64_t i = 0; i < count; ++i) m.data()[i] = detail::get_le<double>(bytes.data() + 16 + 8 * i);
  return m;
}

inline void save_matrix(const fs::path& path, const Matrix& m) { write_bytes(path, encode_matrix(m)); }
inline Matrix load_matrix(const fs::path& path) { return decode_matrix(read_bytes(path), path.string()); }

// ---------------------------------------------------------------------------
// CSV

/// Shortest round-trip decimal, '.' separator regardless of locale.
inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

  void add(std::vector<std::string> row) {
    if (row.size() != header_.size()) throw ConfigError("csv row has the wrong number of columns");
    rows_.push_back(std::move(row));
  }

  const std::vector<std::string>& header() const { return header_; }
  std::size_t size() const { return rows_.size(); }

  std::string str() const {
    std::string out;
    auto line = [&](const std::vector<std::string>& cells) {
      for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) out += ',';
        out += cells[i];
      }
      out += '\n';
    };
    line(header_);
    for (const auto& r : rows_) line(r);
    return out;
  }

  void save(const fs::path& path) const { write_bytes(path, str()); }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

/// CSV column for a variable's error.
inline std::string error_column(const std::string& key) {
  static const std::map<std::string, std::string> names{{"state", "e_y"},
                                                        {"control", "e_u"},
                                                        {"adjoint", "e_p"},
                                                        {"pressure", "e_press"},
                                                        {"adjoint_pressure", "e_adjpress"}};
  auto it = names.find(key);
  return it == names.end() ? "e_" + key : it->second;
}

/// Variables in column order.
inline std::vector<std::string> error_keys(CaseId id) {
  if (id == CaseId::graetz) return {"state", "control", "adjoint"};
  return {"state", "control", "adjoint", "pressure", "adjoint_pressure"};
}

// ---------------------------------------------------------------------------
// artifact directory: files are written through a writer that records
// checksums, the manifest lists them

class ArtifactWriter {
 public:
  explicit ArtifactWriter(fs::path root) : root_(std::move(root)) { fs::create_directories(root_); }

  const fs::path& root() const { return root_; }

  void bytes(const std::string& rel, const std::string& content) {
    write_bytes(root_ / rel, content);
    files_[rel] = {sha256_hex(content), content.size()};
  }
  void matrix(const std::string& rel, const Matrix& m) { bytes(rel, encode_matrix(m)); }
  void json(const std::string& rel, const nlohmann::json& j) { bytes(rel, j.dump(2) + "\n"); }

  nlohmann::json file_list() const {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& [path, f] : files_) out.push_back({{"path", path}, {"sha256", f.first}, {"bytes", f.second}});
    return out;
  }

 private:
  fs::path root_;
  std::map<std::string, std::pair<std::string, std::size_t>> files_;
};

inline nlohmann::json read_json(const fs::path& path) {
  try {
    return nlohmann::json::parse(read_bytes(path));
  } catch (const nlohmann::json::exception& e) {
    throw ArtifactError("'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

/// Loads a manifest and checks every listed file against its checksum.
inline nlohmann::json load_manifest(const fs::path& dir) {
  const fs::path path = dir / "manifest.json";
  if (!fs::exists(path)) throw ArtifactError("no manifest in '" + dir.string() + "'");
  nlohmann::json m = read_json(path);
  if (m.value("schema", "") != kManifestSchema) throw ArtifactError("unsupported manifest schema");
  for (const auto& f : m.at("files")) {
    const fs::path file = dir / f.at("path").get<std::string>();
    if (!fs::exists(file)) throw ArtifactError("missing artifact '" + f.at("path").get<std::string>() + "'");
    if (file_sha256(file) != f.at("sha256").get<std::string>())
      throw ArtifactError("checksum mismatch for '" + f.at("path").get<std::string>() + "'");
  }
  return m;
}

/// Manifest without the run-dependent fields.
inline nlohmann::json stable_manifest(nlohmann::json m) {
  m.erase("timings");
  return m;
}

inline std::string config_hash(const CaseConfig& cfg) { return sha256_hex(to_json(cfg).dump(2) + "\n"); }

// ---------------------------------------------------------------------------
// ReducedModel persistence

namespace detail {

template <class T>
nlohmann::json save_family(ArtifactWriter& w, const std::string& prefix, const AffineFamily<T>& fam) {
  nlohmann::json terms = nlohmann::json::array();
  for (std::size_t q = 0; q < fam.terms().size(); ++q) {
    const auto& t = fam.terms()[q];
    if constexpr (std::is_same_v<T, double>) {
      terms.push_back({{"theta", t.theta.descriptor()}, {"value", t.value}});
    } else {
      const std::string rel = prefix + "_" + std::to_string(q) + ".bin";
      w.matrix(rel, Matrix(t.value));
      terms.push_back({{"theta", t.theta.descriptor()}, {"file", rel}});
    }
  }
  return terms;
}

template <class T>
AffineFamily<T> load_family(const fs::path& root, const nlohmann::json& terms, std::size_t dim) {
  AffineFamily<T> fam;
  for (const auto& t : terms) {
    const Theta theta = Theta::parse(t.at("theta").get<std::string>());
    if (theta.exponents.size() != dim) throw ArtifactError("theta descriptor has the wrong dimension");
    if constexpr (std::is_same_v<T, double>) {
      fam.add(theta, t.at("value").get<double>());
    } else if constexpr (std::is_same_v<T, Vector>) {
      const Matrix m = load_matrix(root / t.at("file").get<std::string>());
      if (m.cols() != 1) throw ArtifactError("vector term stored with several columns");
      fam.add(theta, Vector(m.col(0)));
    } else {
      fam.add(theta, load_matrix(root / t.at("file").get<std::string>()));
    }
  }
  if (fam.empty()) throw ArtifactError("empty affine family in reduced model");
  return fam;
}

inline nlohmann::json box_json(const ParameterBox& box) {
  return {{"names", box.names}, {"lower", box.lower}, {"upper", box.upper}};
}

}  // namespace detail

/// Writes the reduced model under `prefix/` and returns its descriptor.
inline void save_reduced_model(ArtifactWriter& w, const std::string& prefix, const ReducedModel& rm) {
  nlohmann::json j;
  j["schema"] = kReducedSchema;
  j["case"] = case_name(rm.case_id);
  j["parameters"] = detail::box_json(rm.box);
  j["time"] = {{"final_time", rm.grid.final_time}, {"steps", rm.grid.steps}};
  j["alpha"] = rm.alpha;
  j["n"] = rm.n;
  j["primal_size"] = rm.primal_size;
  j["control_size"] = rm.control_size;
  nlohmann::json blocks = nlohmann::json::array();
  for (const auto& [name, size] : rm.block_sizes) blocks.push_back({{"name", name}, {"size", size}});
  j["blocks"] = blocks;
  j["kkt"] = detail::save_family(w, prefix + "/kkt", rm.kkt);
  j["rhs"] = detail::save_family(w, prefix + "/rhs", rm.rhs);
  j["hessian"] = detail::save_family(w, prefix + "/hessian", rm.hessian);
  j["load"] = detail::save_family(w, prefix + "/load", rm.load);
  j["constant"] = detail::save_family(w, prefix + "/constant", rm.constant);
  w.matrix(prefix + "/primal_basis.bin", rm.primal_basis);
  w.matrix(prefix + "/control_basis.bin", rm.control_basis);
  j["primal_basis"] = prefix + "/primal_basis.bin";
  j["control_basis"] = prefix + "/control_basis.bin";
  w.json(prefix + "/model.json", j);
}

inline ReducedModel load_reduced_model(const fs::path& root, const std::string& prefix = "reduced") {
  const nlohmann::json j = read_json(root / prefix / "model.json");
  try {
    if (j.at("schema") != kReducedSchema) throw ArtifactError("unsupported reduced model schema");
    ReducedModel rm;
    rm.case_id = parse_case(j.at("case").get<std::string>());
    rm.box.names = j.at("parameters").at("names").get<std::vector<std::string>>();
    rm.box.lower = j.at("parameters").at("lower").get<std::vector<double>>();
    rm.box.upper = j.at("parameters").at("upper").get<std::vector<double>>();
    rm.grid = TimeGrid(j.at("time").at("final_time").get<double>(), j.at("time").at("steps").get<int>());
    rm.alpha = j.at("alpha").get<double>();
    rm.n = j.at("n").get<Eigen::Index>();
    rm.primal_size = j.at("primal_size").get<Eigen::Index>();
    rm.control_size = j.at("control_size").get<Eigen::Index>();
    for (const auto& b : j.at("blocks")) rm.block_sizes.emplace_back(b.at("name"), b.at("size").get<Eigen::Index>());
    const std::size_t dim = rm.box.dim();
    rm.kkt = detail::load_family<Matrix>(root, j.at("kkt"), dim);
    rm.rhs = detail::load_family<Vector>(root, j.at("rhs"), dim);
    rm.hessian = detail::load_family<Matrix>(root, j.at("hessian"), dim);
    rm.load = detail::load_family<Vector>(root, j.at("load"), dim);
    rm.constant = detail::load_family<double>(root, j.at("constant"), dim);
    rm.primal_basis = load_matrix(root / j.at("primal_basis").get<std::string>());
    rm.control_basis = load_matrix(root / j.at("control_basis").get<std::string>());
    const Eigen::Index tot = rm.total_size();
    for (const auto& t : rm.kkt.terms())
      if (t.value.rows() != tot || t.value.cols() != tot) throw ArtifactError("reduced KKT term has the wrong size");
    for (const auto& t : rm.rhs.terms())
      if (t.value.size() != tot) throw ArtifactError("reduced right-hand side has the wrong size");
    if (rm.primal_basis.cols() != rm.primal_size || rm.control_basis.cols() != rm.control_size)
      throw ArtifactError("stored bases do not match the reduced sizes");
    return rm;
  } catch (const nlohmann::json::exception& e) {
    throw ArtifactError(std::string("malformed reduced model: ") + e.what());
  } catch (const ConfigError& e) {
    throw ArtifactError(std::string("malformed reduced model: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// POD bases

inline void save_basis(ArtifactWriter& w, const std::string& prefix, const ReducedBasis& b) {
  w.matrix(prefix + "/" + b.key + ".bin", b.vectors);
  w.matrix(prefix + "/" + b.key + ".eigenvalues.bin", Matrix(b.eigenvalues));
}

inline ReducedBasis load_basis(const fs::path& root, const std::string& prefix, const std::string& key) {
  ReducedBasis b;
  b.key = key;
  b.vectors = load_matrix(root / prefix / (key + ".bin"));
  const Matrix ev = load_matrix(root / prefix / (key + ".eigenvalues.bin"));
  if (ev.cols() != 1) throw ArtifactError("eigenvalue file for '" + key + "' is not a column");
  b.eigenvalues = ev.col(0);
  b.requested = b.vectors.cols();
  return b;
}

inline Matrix parameters_matrix(const std::vector<Parameter>& mus) {
  if (mus.empty()) return Matrix(0, 0);
  Matrix m(static_cast<Eigen::Index>(mus.front().size()), static_cast<Eigen::Index>(mus.size()));
  for (std::size_t j = 0; j < mus.size(); ++j)
    for (std::size_t i = 0; i < mus[j].size(); ++i) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = mus[j][i];
  return m;
}

inline std::vector<Parameter> parameters_from_matrix(const Matrix& m) {
  std::vector<Parameter> out;
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    Parameter mu;
    for (Eigen::Index i = 0; i < m.rows(); ++i) mu.values.push_back(m(i, j));
    out.push_back(mu);
  }
  return out;
}

}  // namespace podocp::io

#endif  // PODOCP_IO_HPP
