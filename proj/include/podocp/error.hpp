#ifndef PODOCP_ERROR_HPP
#define PODOCP_ERROR_HPP

#include <stdexcept>
#include <string>

namespace podocp {

// Exceptions are grouped by the CLI exit code they map to.

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ArtifactError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumerical = 3;
inline constexpr int kExitArtifact = 4;

}  // namespace podocp

#endif  // PODOCP_ERROR_HPP
