#ifndef PODOCP_PARAMETER_HPP
#define PODOCP_PARAMETER_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "podocp/error.hpp"

namespace podocp {

/// A point in the parameter box. Component meaning is fixed by the owning
/// case (see ParameterBox::names).
struct Parameter {
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
  double operator[](std::size_t i) const { return values[i]; }
  double& operator[](std::size_t i) { return values[i]; }
  bool operator==(const Parameter&) const = default;
};

inline std::string to_string(const Parameter& mu) {
  std::ostringstream os;
  os.precision(17);
  os << '(';
  for (std::size_t i = 0; i < mu.size(); ++i) os << (i ? ", " : "") << mu[i];
  os << ')';
  return os.str();
}

/// Axis-aligned box of admissible parameters.
struct ParameterBox {
  std::vector<std::string> names;
  std::vector<double> lower;
  std::vector<double> upper;

  std::size_t dim() const { return lower.size(); }

  bool contains(const Parameter& mu, double tol = 1e-12) const {
    if (mu.size() != dim()) return false;
    for (std::size_t i = 0; i < dim(); ++i) {
      const double slack = tol * std::max(1.0, std::abs(upper[i]));
      if (mu[i] < lower[i] - slack || mu[i] > upper[i] + slack) return false;
    }
    return true;
  }

  void require(const Parameter& mu) const {
    if (!contains(mu)) {
      throw ConfigError("parameter " + to_string(mu) + " outside the parameter box");
    }
  }

  bool operator==(const ParameterBox&) const = default;
};

/// Independent uniform sampling of each component. std::mt19937_64 output is
/// specified by the standard; the uniform mapping is done by hand so samples
/// do not depend on the library's distribution implementation.
inline std::vector<Parameter> sample_uniform(const ParameterBox& box, std::size_t count,
                                             std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Parameter> out;
  out.reserve(count);
  for (std::size_t s = 0; s < count; ++s) {
    Parameter mu;
    mu.values.resize(box.dim());
    for (std::size_t i = 0; i < box.dim(); ++i) {
      const double unit = static_cast<double>(rng() >> 11) * 0x1.0p-53;
      mu[i] = box.lower[i] + unit * (box.upper[i] - box.lower[i]);
    }
    out.push_back(std::move(mu));
  }
  return out;
}

}  // namespace podocp

#endif  // PODOCP_PARAMETER_HPP
