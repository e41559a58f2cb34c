#ifndef PODOCP_CASE_ID_HPP
#define PODOCP_CASE_ID_HPP

#include <string>
#include <string_view>

#include "podocp/error.hpp"
#include "podocp/parameter.hpp"

namespace podocp {

enum class CaseId { graetz, stokes_cavity };

inline std::string_view case_name(CaseId id) {
  return id == CaseId::graetz ? "graetz" : "stokes_cavity";
}

inline CaseId parse_case(std::string_view name) {
  if (name == "graetz") return CaseId::graetz;
  if (name == "stokes_cavity") return CaseId::stokes_cavity;
  throw ConfigError("unknown case id '" + std::string(name) + "'");
}

// Parameter component layout.
//   graetz:        (mu_diff, mu_target, mu_length)
//   stokes_cavity: (mu_phys, mu_geo)
namespace graetz {
inline constexpr std::size_t kDiffusivity = 0;
inline constexpr std::size_t kTarget = 1;
inline constexpr std::size_t kLength = 2;
}  // namespace graetz

namespace stokes {
inline constexpr std::size_t kViscosity = 0;
inline constexpr std::size_t kStretch = 1;
}  // namespace stokes

inline ParameterBox default_parameter_box(CaseId id) {
  if (id == CaseId::graetz) {
    return {{"mu_diff", "mu_target", "mu_length"}, {1.0 / 20.0, 1.0, 0.5}, {1.0 / 6.0, 3.0, 3.0}};
  }
  return {{"mu_phys", "mu_geo"}, {1e-3, 0.5}, {1e-1, 2.5}};
}

inline Parameter reference_parameter(CaseId id) {
  if (id == CaseId::graetz) return {{1.0 / 12.0, 2.0, 1.0}};
  return {{1e-2, 1.0}};
}

}  // namespace podocp

#endif  // PODOCP_CASE_ID_HPP
