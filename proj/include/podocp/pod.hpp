#ifndef PODOCP_POD_HPP
#define PODOCP_POD_HPP

#include <cmath>
#include <iostream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "podocp/error.hpp"
#include "podocp/fem.hpp"
#include "podocp/parameter.hpp"

namespace podocp {

/// Space-time inner product dt * blockdiag(G, ..., G) for N_t steps.
struct InnerProduct {
  SparseOperator spatial;
  double dt = 1.0;
  int steps = 1;

  Eigen::Index spatial_size() const { return spatial.rows(); }
  Eigen::Index size() const { return spatial.rows() * steps; }

  /// X * V for space-time columns V.
  Matrix apply(const Matrix& v) const {
    if (v.rows() != size()) throw ConfigError("inner product: vector length mismatch");
    Matrix out(v.rows(), v.cols());
    const Eigen::Index n = spatial_size();
    for (int k = 0; k < steps; ++k) out.middleRows(k * n, n) = dt * (spatial * v.middleRows(k * n, n));
    return out;
  }

  /// U' X V
  Matrix gram(const Matrix& u, const Matrix& v) const { return u.transpose() * apply(v); }

  double norm(const Vector& v) const { return std::sqrt(std::max(0.0, v.dot(apply(v).col(0)))); }
};

/// Snapshots of one variable: column m is the flattened space-time solution
/// at parameter m.
struct SnapshotSet {
  std::string key;
  std::vector<Parameter> parameters;
  Matrix snapshots;

  void validate() const {
    if (static_cast<Eigen::Index>(parameters.size()) != snapshots.cols())
      throw ConfigError("snapshot set '" + key + "': parameter count differs from snapshot count");
  }
};

struct ReducedBasis {
  std::string key;
  Matrix vectors;              // space-time columns, X-orthonormal
  Vector eigenvalues;          // all eigenvalues of the correlation matrix, nonincreasing
  Eigen::Index requested = 0;  // N asked for before rank truncation

  Eigen::Index size() const { return vectors.cols(); }
};

/// C_ml = (1/N_max) s_m' X s_l
inline Matrix correlation_matrix(const Matrix& snapshots, const InnerProduct& ip) {
  const double n_max = static_cast<double>(snapshots.cols());
  if (snapshots.cols() < 1) throw ConfigError("correlation matrix needs at least one snapshot");
  Matrix c = ip.gram(snapshots, snapshots) / n_max;
  return 0.5 * (c + c.transpose());
}

/// Enforces the sign convention: the first entry of significant magnitude
/// is positive.
inline void fix_sign(Eigen::Ref<Vector> v) {
  const double scale = v.cwiseAbs().maxCoeff();
  if (scale == 0.0) return;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (std::abs(v(i)) > 1e-8 * scale) {
      if (v(i) < 0.0) v = -v;
      return;
    }
  }
}

/// Modified Gram-Schmidt in the X inner product, two passes, dropping
/// columns whose remaining norm falls below `drop_tol` times their original norm.
inline Matrix orthonormalize(const Matrix& columns, const InnerProduct& ip, double drop_tol = 1e-10,
                             Eigen::Index* dropped = nullptr) {
  Matrix q(columns.rows(), 0);
  Matrix xq(columns.rows(), 0);  // X q_j, kept for cheap projections
  Eigen::Index n_dropped = 0;
  for (Eigen::Index j = 0; j < columns.cols(); ++j) {
    Vector v = columns.col(j);
    const double original = ip.norm(v);
    if (original == 0.0) {
      ++n_dropped;
      continue;
    }
    for (int pass = 0; pass < 2; ++pass)
      for (Eigen::Index i = 0; i < q.cols(); ++i) v -= xq.col(i).dot(v) * q.col(i);
    const double remaining = ip.norm(v);
    if (remaining < drop_tol * original) {
      ++n_dropped;
      continue;
    }
    v /= remaining;
    q.conservativeResize(Eigen::NoChange, q.cols() + 1);
    xq.conservativeResize(Eigen::NoChange, xq.cols() + 1);
    q.col(q.cols() - 1) = v;
    xq.col(xq.cols() - 1) = ip.apply(v);
  }
  if (dropped) *dropped = n_dropped;
  return q;
}

/// Method of snapshots: xi_n = S v_n / sqrt(N_max lambda_n) for the N
/// largest eigenpairs of the correlation matrix. Modes with
/// lambda < 1e-12 lambda_1 are not returned.
inline ReducedBasis compute_pod_basis(const SnapshotSet& set, const InnerProduct& ip, Eigen::Index n,
                                      std::ostream* warnings = &std::cerr) {
  set.validate();
  if (n < 1) throw ConfigError("POD basis size must be at least 1");
  const Matrix c = correlation_matrix(set.snapshots, ip);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(c);
  if (eig.info() != Eigen::Success) throw NumericalError("correlation eigensolver failed for " + set.key);
  const Eigen::Index m = c.rows();
  ReducedBasis basis;
  basis.key = set.key;
  basis.requested = n;
  basis.eigenvalues = eig.eigenvalues().reverse();
  Matrix vecs = eig.eigenvectors().rowwise().reverse();

  const double lambda1 = basis.eigenvalues.size() ? basis.eigenvalues(0) : 0.0;
  Eigen::Index rank = 0;
  while (rank < m && basis.eigenvalues(rank) > 1e-12 * lambda1 && basis.eigenvalues(rank) > 0.0) ++rank;
  Eigen::Index keep = std::min(n, rank);
  if (keep < n && warnings) {
    *warnings << "warning: POD '" << set.key << "' has numerical rank " << rank << "; returning " << keep
              << " of " << n << " requested modes\n";
  }
  if (keep == 0) throw NumericalError("POD '" + set.key + "': all snapshots vanish");

  Matrix modes(set.snapshots.rows(), keep);
  for (Eigen::Index i = 0; i < keep; ++i) {
    modes.col(i) = set.snapshots * vecs.col(i) / std::sqrt(static_cast<double>(m) * basis.eigenvalues(i));
    fix_sign(modes.col(i));
  }
  // one cleanup pass removes the loss of orthogonality of small modes
  basis.vectors = orthonormalize(modes, ip, 0.0);
  for (Eigen::Index i = 0; i < basis.vectors.cols(); ++i) fix_sign(basis.vectors.col(i));
  return basis;
}

/// Coefficients of the X-orthogonal projection onto an X-orthonormal basis.
inline Vector project(const Matrix& basis, const InnerProduct& ip, const Vector& field) {
  if (field.size() != basis.rows()) throw ConfigError("project: dimension mismatch");
  return basis.transpose() * ip.apply(field);
}

inline Vector lift(const Matrix& basis, const Vector& coefficients) {
  if (coefficients.size() != basis.cols()) throw ConfigError("lift: dimension mismatch");
  return basis * coefficients;
}

/// Fraction of the snapshot energy captured by the first n modes.
inline double captured_energy(const ReducedBasis& basis, Eigen::Index n) {
  const double total = basis.eigenvalues.cwiseMax(0.0).sum();
  if (total == 0.0) return 1.0;
  return basis.eigenvalues.head(std::min(n, basis.eigenvalues.size())).cwiseMax(0.0).sum() / total;
}

}  // namespace podocp

#endif  // PODOCP_POD_HPP
