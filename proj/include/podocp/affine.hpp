#ifndef PODOCP_AFFINE_HPP
#define PODOCP_AFFINE_HPP

#include <cmath>
#include <cstdio>
#include <sstream>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "podocp/error.hpp"
#include "podocp/fem.hpp"
#include "podocp/parameter.hpp"

namespace podocp {

/// theta(mu) = coefficient * prod_i mu_i^{exponent_i}.
///
/// Every coefficient function of the two benchmarks is a monomial in the
/// parameter components, so a monomial is a complete, serializable description.
struct Theta {
  double coefficient = 1.0;
  std::vector<int> exponents;

  static Theta constant(std::size_t dim, double c = 1.0) { return {c, std::vector<int>(dim, 0)}; }

  static Theta monomial(std::size_t dim, std::initializer_list<std::pair<std::size_t, int>> powers,
                        double c = 1.0) {
    Theta t = constant(dim, c);
    for (auto [i, e] : powers) t.exponents.at(i) += e;
    return t;
  }

  double operator()(const Parameter& mu) const {
    if (mu.size() != exponents.size())
      throw ConfigError("theta evaluated with a parameter of the wrong dimension");
    double v = coefficient;
    for (std::size_t i = 0; i < exponents.size(); ++i)
      if (exponents[i] != 0) v *= std::pow(mu[i], exponents[i]);
    return v;
  }

  bool same_monomial(const Theta& o) const { return exponents == o.exponents; }

  Theta operator*(const Theta& o) const {
    if (exponents.size() != o.exponents.size()) throw ConfigError("theta dimension mismatch");
    Theta t{coefficient * o.coefficient, exponents};
    for (std::size_t i = 0; i < exponents.size(); ++i) t.exponents[i] += o.exponents[i];
    return t;
  }

  /// "coefficient|e0 e1 ...", e.g. "1|1 0 -1" for mu_0 / mu_2.
  std::string descriptor() const {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", coefficient);
    std::string s = buf;
    s += '|';
    for (std::size_t i = 0; i < exponents.size(); ++i) {
      if (i) s += ' ';
      s += std::to_string(exponents[i]);
    }
    return s;
  }

  static Theta parse(const std::string& text) {
    const auto bar = text.find('|');
    if (bar == std::string::npos) throw ArtifactError("malformed theta descriptor '" + text + "'");
    Theta t;
    try {
      t.coefficient = std::stod(text.substr(0, bar));
    } catch (const std::exception&) {
      throw ArtifactError("malformed theta coefficient in '" + text + "'");
    }
    std::istringstream is(text.substr(bar + 1));
    int e;
    while (is >> e) t.exponents.push_back(e);
    if (!is.eof()) throw ArtifactError("malformed theta exponents in '" + text + "'");
    return t;
  }

  bool operator==(const Theta&) const = default;
};

namespace detail {

template <class T>
bool same_shape(const T& a, const T& b) {
  if constexpr (std::is_arithmetic_v<T>) {
    return true;
  } else {
    return a.rows() == b.rows() && a.cols() == b.cols();
  }
}

template <class T>
T zero_like(const T& a) {
  if constexpr (std::is_arithmetic_v<T>) {
    return T(0);
  } else if constexpr (std::is_same_v<T, SparseOperator>) {
    return SparseOperator(a.rows(), a.cols());
  } else {
    return T::Zero(a.rows(), a.cols());
  }
}

}  // namespace detail

template <class T>
struct AffineTerm {
  Theta theta;
  T value;
};

/// Parameter-separable quantity sum_q theta_q(mu) value_q. Terms with the
/// same monomial are merged on insertion, so the stored Q is minimal for the
/// given set of monomials. Sparse terms share one sparsity pattern after
/// finalize(), which makes evaluation a sum over value arrays.
template <class T>
class AffineFamily {
 public:
  AffineFamily() = default;

  void add(const Theta& theta, const T& value) {
    if (!terms_.empty() && !detail::same_shape(terms_.front().value, value))
      throw ConfigError("affine family: term shape mismatch");
    for (auto& term : terms_) {
      if (term.theta.same_monomial(theta)) {
        term.value = term.theta.coefficient * term.value + theta.coefficient * value;
        term.theta.coefficient = 1.0;
        finalized_ = false;
        return;
      }
    }
    terms_.push_back({theta, value});
    finalized_ = false;
  }

  void append(const AffineFamily& other, const Theta& factor) {
    for (const auto& t : other.terms_) add(t.theta * factor, t.value);
  }

  std::size_t size() const { return terms_.size(); }
  bool empty() const { return terms_.empty(); }
  const std::vector<AffineTerm<T>>& terms() const { return terms_; }
  std::vector<AffineTerm<T>>& terms() { return terms_; }

  /// Unifies the sparsity pattern of all sparse terms.
  void finalize() {
    if constexpr (std::is_same_v<T, SparseOperator>) {
      if (terms_.size() > 1) {
        SparseOperator pattern = detail::zero_like(terms_.front().value);
        for (const auto& t : terms_) {
          SparseOperator abs = t.value.cwiseAbs();
          pattern += abs;
        }
        pattern *= 0.0;
        for (auto& t : terms_) {
          SparseOperator unified = t.value + pattern;
          unified.makeCompressed();
          t.value = std::move(unified);
        }
      }
    }
    finalized_ = true;
  }

  T evaluate(const Parameter& mu) const {
    if (terms_.empty()) throw ConfigError("evaluating an empty affine family");
    if constexpr (std::is_same_v<T, SparseOperator>) {
      if (finalized_ && terms_.size() > 1) {
        SparseOperator out = terms_.front().value;
        Eigen::Map<Vector> values(out.valuePtr(), out.nonZeros());
        values *= terms_.front().theta(mu);
        for (std::size_t q = 1; q < terms_.size(); ++q) {
          const auto& v = terms_[q].value;
          values += terms_[q].theta(mu) * Eigen::Map<const Vector>(v.valuePtr(), v.nonZeros());
        }
        return out;
      }
    }
    T out = terms_.front().theta(mu) * terms_.front().value;
    for (std::size_t q = 1; q < terms_.size(); ++q) out = out + terms_[q].theta(mu) * terms_[q].value;
    return out;
  }

  /// Applies `fn` to every term value, keeping the thetas.
  template <class U, class Fn>
  AffineFamily<U> map(Fn&& fn) const {
    AffineFamily<U> out;
    for (const auto& t : terms_) out.add(t.theta, fn(t.value));
    return out;
  }

 private:
  std::vector<AffineTerm<T>> terms_;
  bool finalized_ = false;
};

using AffineOperator = AffineFamily<SparseOperator>;
using AffineVector = AffineFamily<Vector>;
using AffineMatrix = AffineFamily<Matrix>;
using AffineScalar = AffineFamily<double>;

}  // namespace podocp

#endif  // PODOCP_AFFINE_HPP
