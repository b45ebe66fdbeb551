#pragma once

// Relevant Component Analysis over realified fingerprints.

#include "mrf/core.hpp"
#include "mrf/dictionary.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <map>
#include <optional>
#include <vector>

namespace mrf {

/// [Re(x); Im(x)] of the unit-normalized fingerprint x (length 2T).
template <typename Derived>
Eigen::VectorXd realify(const Eigen::MatrixBase<Derived> &x) {
  const Index t = x.size();
  Eigen::VectorXd v(2 * t);
  const double n = x.norm();
  if (!(n > 0))
    throw ValidationError("realify: zero fingerprint");
  for (Index i = 0; i < t; ++i) {
    v[i] = x(i).real() / n;
    v[t + i] = x(i).imag() / n;
  }
  return v;
}

struct Chunklet {
  Index atom = -1;                      // dictionary row this chunklet shares
  std::vector<Eigen::VectorXd> members; // realified fingerprints
};

struct ChunkletSet {
  std::vector<Chunklet> chunklets;

  Index dim() const { return chunklets.empty() ? 0 : chunklets.front().members.front().size(); }
  Index total() const {
    Index m = 0;
    for (const auto &c : chunklets)
      m += static_cast<Index>(c.members.size());
    return m;
  }
  Eigen::VectorXd mean(std::size_t j) const {
    Eigen::VectorXd mu = Eigen::VectorXd::Zero(dim());
    for (const auto &p : chunklets[j].members)
      mu += p;
    return mu / static_cast<double>(chunklets[j].members.size());
  }
};

/// One chunklet per atom with at least one assigned voxel: the voxels'
/// reconstructed fingerprints plus the atom itself. Voxels with a negative
/// assignment or a zero fingerprint are skipped.
inline ChunkletSet build_chunklets(const ImageSequence &recon, const Dictionary &dict,
                                   const std::vector<std::int32_t> &truth_assignment) {
  if (static_cast<Index>(truth_assignment.size()) != recon.voxels())
    throw ValidationError("build_chunklets: assignment size does not match voxel count");
  if (recon.frames() != dict.frames())
    throw ValidationError("build_chunklets: sequence length does not match dictionary");
  std::map<std::int32_t, std::vector<Index>> by_atom;
  for (Index i = 0; i < recon.voxels(); ++i) {
    const std::int32_t k = truth_assignment[static_cast<std::size_t>(i)];
    if (k < 0)
      continue;
    if (k >= dict.size())
      throw ValidationError("build_chunklets: assignment out of dictionary range");
    if (recon.fingerprint(i).norm() > 0)
      by_atom[k].push_back(i);
  }
  ChunkletSet cs;
  for (const auto &[k, voxels] : by_atom) {
    Chunklet c;
    c.atom = k;
    for (Index i : voxels)
      c.members.push_back(realify(recon.fingerprint(i)));
    c.members.push_back(realify(dict.atom(k)));
    cs.chunklets.push_back(std::move(c));
  }
  if (cs.chunklets.empty())
    throw ValidationError("build_chunklets: no foreground voxels to train on");
  return cs;
}

/// C = (1/M) sum_j sum_i (P_ji - mean_j)(P_ji - mean_j)^T.
inline Eigen::MatrixXd within_chunklet_covariance(const ChunkletSet &cs) {
  const Index m = cs.total();
  if (m < 1)
    throw ValidationError("within_chunklet_covariance: empty chunklet set");
  const Index dim = cs.dim();
  // Stack centered members as columns and form one rank-update product.
  Eigen::MatrixXd centered(dim, m);
  Index col = 0;
  for (std::size_t j = 0; j < cs.chunklets.size(); ++j) {
    const Eigen::VectorXd mu = cs.mean(j);
    for (const auto &p : cs.chunklets[j].members)
      centered.col(col++) = p - mu;
  }
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(dim, dim);
  c.selfadjointView<Eigen::Lower>().rankUpdate(centered, 1.0 / static_cast<double>(m));
  return c.selfadjointView<Eigen::Lower>();
}

struct MahalanobisMetric {
  Eigen::MatrixXd w; // 2T x 2T, A = W^T W
  double ridge = 0;

  Index dim() const { return w.rows(); }
  static MahalanobisMetric identity(Index dim) { return {Eigen::MatrixXd::Identity(dim, dim), 0.0}; }
};

/// `factor` times the mean eigenvalue of C. With the default factor this is
/// the ridge used when none is supplied.
inline double default_ridge(const Eigen::MatrixXd &c, double factor = 1e-8) {
  return factor * c.trace() / static_cast<double>(c.rows());
}

/// W = (C + ridge I)^(-1/2) from the symmetric eigendecomposition of C.
inline MahalanobisMetric whiten(const Eigen::MatrixXd &c, double ridge) {
  if (ridge < 0)
    throw ValidationError("rca: ridge must be >= 0");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(c);
  if (eig.info() != Eigen::Success)
    throw Error("rca: eigendecomposition failed");
  Eigen::VectorXd lambda = eig.eigenvalues();
  if (ridge == 0) {
    const double tol = std::max(lambda.cwiseAbs().maxCoeff(), 1e-300) * static_cast<double>(c.rows()) *
                       std::numeric_limits<double>::epsilon();
    const Index deficient = (lambda.array() <= tol).count();
    if (deficient > 0)
      throw RankDeficientError("rca: within-chunklet covariance is singular in " + std::to_string(deficient) +
                                 " of " + std::to_string(c.rows()) + " dimensions; use a positive ridge",
                               deficient);
  }
  for (Index i = 0; i < lambda.size(); ++i)
    lambda[i] = std::max(lambda[i] + ridge, ridge);
  const Eigen::MatrixXd &v = eig.eigenvectors();
  MahalanobisMetric m;
  m.w = v * lambda.cwiseSqrt().cwiseInverse().asDiagonal() * v.transpose();
  m.ridge = ridge;
  return m;
}

/// Fits the RCA whitening transform. An absent ridge selects default_ridge(C).
inline MahalanobisMetric rca_fit(const ChunkletSet &cs, std::optional<double> ridge = std::nullopt) {
  const Eigen::MatrixXd c = within_chunklet_covariance(cs);
  return whiten(c, ridge ? *ridge : default_ridge(c));
}

/// ||W (a - b)||^2.
inline double mahalanobis_distance(const Eigen::VectorXd &a, const Eigen::VectorXd &b, const MahalanobisMetric &m) {
  if (a.size() != b.size() || a.size() != m.dim())
    throw ValidationError("mahalanobis_distance: length mismatch");
  return (m.w * (a - b)).squaredNorm();
}

} // namespace mrf
