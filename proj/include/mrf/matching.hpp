#pragma once

// Nearest-atom dictionary matching, parameter retrieval and proton density.

#include "mrf/core.hpp"
#include "mrf/dictionary.hpp"
#include "mrf/kspace.hpp"
#include "mrf/metric.hpp"
#include "mrf/parallel.hpp"

#include <limits>
#include <optional>
#include <vector>

namespace mrf {

struct MatchResult {
  Index atom = -1; // -1: background (zero query)
  AtomParams params;
  double amplitude = 0; // max(Re<x, D^k>, 0): coefficient on the unit atom
  double rho = 0;       // proton density, amplitude / pre-normalization atom norm
  /// L2: real inner product of the normalized query with the atom (larger
  /// is closer). Metric: squared Mahalanobis distance (smaller is closer).
  double score = 0;
};

/// Dictionary prepared for repeated matching, optionally under a learned
/// metric. Read-only after construction and safe to share across threads.
class Matcher {
public:
  explicit Matcher(const Dictionary &dict, const MahalanobisMetric *metric = nullptr) : dict_(&dict) {
    if (dict.size() == 0)
      throw ValidationError("matcher: empty dictionary");
    if (dict.norms.size() != dict.size() || !(dict.norms.array() > 0).all())
      throw ValidationError("matcher: dictionary norms missing or non-positive");
    const Index t = dict.frames();
    real_atoms_.resize(dict.size(), 2 * t);
    real_atoms_.leftCols(t) = dict.atoms.real();
    real_atoms_.rightCols(t) = dict.atoms.imag();
    if (metric) {
      if (metric->dim() != 2 * t)
        throw ValidationError("matcher: metric dimension " + std::to_string(metric->dim()) + " != 2T = " +
                              std::to_string(2 * t));
      w_ = metric->w;
      transformed_ = real_atoms_ * w_.transpose();
      transformed_norm_ = transformed_.rowwise().squaredNorm();
      use_metric_ = true;
    }
  }

  bool uses_metric() const { return use_metric_; }
  const Dictionary &dictionary() const { return *dict_; }

  /// Matches each row of `queries` (B x T complex fingerprints).
  std::vector<MatchResult> match_block(const Eigen::Ref<const Eigen::MatrixXcd> &queries) const {
    const Index b = queries.rows(), t = queries.cols();
    if (t != dict_->frames())
      throw ValidationError("matcher: query length does not match dictionary");
    Eigen::MatrixXd q(b, 2 * t);
    q.leftCols(t) = queries.real();
    q.rightCols(t) = queries.imag();
    const Eigen::VectorXd norms = q.rowwise().norm();
    // Real parts of the Hermitian inner products with every atom.
    const Eigen::MatrixXd inner = q * real_atoms_.transpose();
    Eigen::MatrixXd dist;
    Eigen::VectorXd qn2;
    if (use_metric_) {
      Eigen::MatrixXd qn = q;
      for (Index i = 0; i < b; ++i)
        if (norms[i] > 0)
          qn.row(i) /= norms[i];
      const Eigen::MatrixXd wq = qn * w_.transpose();
      qn2 = wq.rowwise().squaredNorm();
      dist = wq * transformed_.transpose();
    }
    std::vector<MatchResult> out(static_cast<std::size_t>(b));
    const Index k = dict_->size();
    for (Index i = 0; i < b; ++i) {
      MatchResult &r = out[static_cast<std::size_t>(i)];
      if (!(norms[i] > 0))
        continue;
      Index best = 0;
      if (use_metric_) {
        double best_d = std::numeric_limits<double>::infinity();
        for (Index j = 0; j < k; ++j) {
          const double d = qn2[i] - 2.0 * dist(i, j) + transformed_norm_[j];
          if (d < best_d) {
            best_d = d;
            best = j;
          }
        }
        r.score = std::max(best_d, 0.0);
      } else {
        double best_s = -std::numeric_limits<double>::infinity();
        for (Index j = 0; j < k; ++j)
          if (inner(i, j) > best_s) {
            best_s = inner(i, j);
            best = j;
          }
        r.score = best_s / norms[i];
      }
      r.atom = best;
      r.params = dict_->params[static_cast<std::size_t>(best)];
      r.amplitude = std::max(inner(i, best), 0.0);
      r.rho = r.amplitude / dict_->norms[best];
    }
    return out;
  }

  MatchResult match(const Eigen::VectorXcd &x) const { return match_block(x.transpose()).front(); }

private:
  const Dictionary *dict_;
  Eigen::MatrixXd real_atoms_;
  bool use_metric_ = false;
  Eigen::MatrixXd w_;
  Eigen::MatrixXd transformed_;
  Eigen::VectorXd transformed_norm_;
};

inline MatchResult match_l2(const Eigen::VectorXcd &x, const Dictionary &dict) { return Matcher(dict).match(x); }

inline MatchResult match_metric(const Eigen::VectorXcd &x, const Dictionary &dict, const MahalanobisMetric &m) {
  return Matcher(dict, &m).match(x);
}

struct MatchOutput {
  ParameterMaps maps;
  IndexMap atoms;          // -1 where the query was zero
  ImageSequence replaced;  // each voxel set to amplitude * unit atom
};

/// Sends voxels whose estimated density is below `fraction` of the image's
/// largest estimate to background: zero parameters, atom -1 and, when given,
/// a zero fingerprint.
inline void suppress_background(ParameterMaps &maps, IndexMap &atoms, ImageSequence *replaced, double fraction) {
  if (fraction < 0 || fraction >= 1)
    throw ValidationError("suppress_background: fraction must lie in [0, 1)");
  if (fraction == 0 || maps.density.size() == 0)
    return;
  const double cut = fraction * *std::max_element(maps.density.data.begin(), maps.density.data.end());
  for (Index v = 0; v < maps.density.size(); ++v) {
    if (atoms[v] < 0 || maps.density[v] >= cut)
      continue;
    maps.t1[v] = maps.t2[v] = maps.b0[v] = maps.density[v] = 0;
    atoms[v] = -1;
    if (replaced)
      replaced->fingerprint(v).setZero();
  }
}

inline MatchOutput match_image(const ImageSequence &recon, const Matcher &matcher, int threads = 0,
                               double background = 0) {
  const Dictionary &dict = matcher.dictionary();
  if (recon.frames() != dict.frames())
    throw ValidationError("match_image: sequence length does not match dictionary");
  MatchOutput out{ParameterMaps(recon.rows, recon.cols), IndexMap(recon.rows, recon.cols, -1),
                  ImageSequence(recon.rows, recon.cols, recon.frames())};
  constexpr Index block = 256;
  const Index n = recon.voxels();
  const Index blocks = (n + block - 1) / block;
  parallel_for(
    blocks,
    [&](long bi) {
      const Index start = bi * block;
      const Index len = std::min(block, n - start);
      const auto results = matcher.match_block(recon.data.middleRows(start, len));
      for (Index j = 0; j < len; ++j) {
        const MatchResult &r = results[static_cast<std::size_t>(j)];
        const Index v = start + j;
        if (r.atom < 0)
          continue;
        out.atoms[v] = static_cast<std::int32_t>(r.atom);
        out.maps.t1[v] = r.params.t1;
        out.maps.t2[v] = r.params.t2;
        out.maps.b0[v] = r.params.b0;
        out.maps.density[v] = r.rho;
        out.replaced.fingerprint(v) = r.amplitude * dict.atom(r.atom);
      }
    },
    threads);
  suppress_background(out.maps, out.atoms, &out.replaced, background);
  return out;
}

inline MatchOutput match_image(const ImageSequence &recon, const Dictionary &dict,
                               const MahalanobisMetric *metric = nullptr, int threads = 0, double background = 0) {
  return match_image(recon, Matcher(dict, metric), threads, background);
}

/// L2 matching of the fully sampled, zero-filled reconstruction.
inline MatchOutput oracle_match(const MeasurementSet &ms, const Dictionary &dict, int threads = 0,
                                double background = 0) {
  if (!ms.masks.fully_sampled())
    throw ValidationError("oracle_estimate: measurements are not fully sampled");
  return match_image(adjoint_sequence(ms, threads), dict, nullptr, threads, background);
}

inline ParameterMaps oracle_estimate(const MeasurementSet &ms, const Dictionary &dict, int threads = 0,
                                     double background = 0) {
  return oracle_match(ms, dict, threads, background).maps;
}

} // namespace mrf
