#pragma once

// PSNR / SSIM on parameter maps, with normalization anchored to the truth
// map's range so different estimators share one scale.

#include "mrf/core.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <ostream>
#include <string>
#include <vector>

namespace mrf {

struct MapScore {
  double psnr = 0; // dB, +inf for an exact estimate
  double ssim = 0;
};

/// Affine map sending the truth's [min, max] to [0, 255].
struct Normalization {
  double offset = 0;
  double scale = 1;

  static Normalization from_truth(const RealMap &truth) {
    const auto [lo, hi] = std::minmax_element(truth.data.begin(), truth.data.end());
    if (truth.data.empty() || !(*hi > *lo))
      throw ValidationError("normalization: truth map is constant");
    return {*lo, 255.0 / (*hi - *lo)};
  }
  double operator()(double v) const { return (v - offset) * scale; }
  RealMap apply(const RealMap &m) const {
    RealMap out = m;
    for (double &v : out.data)
      v = (*this)(v);
    return out;
  }
};

inline double psnr(const RealMap &estimate, const RealMap &truth) {
  if (!estimate.same_shape(truth))
    throw ValidationError("psnr: shape mismatch");
  const Normalization n = Normalization::from_truth(truth);
  double sse = 0;
  for (Index i = 0; i < truth.size(); ++i) {
    const double e = n(estimate[i]) - n(truth[i]);
    sse += e * e;
  }
  const double mse = sse / static_cast<double>(truth.size());
  if (mse == 0)
    return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(255.0 * 255.0 / mse);
}

namespace detail {
inline std::array<double, 11> gaussian_window_1d() {
  std::array<double, 11> w{};
  double s = 0;
  for (int i = 0; i < 11; ++i) {
    const double d = i - 5;
    w[static_cast<std::size_t>(i)] = std::exp(-d * d / (2 * 1.5 * 1.5));
    s += w[static_cast<std::size_t>(i)];
  }
  for (double &v : w)
    v /= s;
  return w;
}
} // namespace detail

/// Mean SSIM over all 11x11 Gaussian (sigma 1.5) windows fully inside the
/// image, K1 = 0.01, K2 = 0.03, for inputs already on a [0, range] scale.
inline double ssim_raw(const RealMap &x, const RealMap &y, double range = 255.0) {
  if (!x.same_shape(y))
    throw ValidationError("ssim: shape mismatch");
  if (x.rows < 11 || x.cols < 11)
    throw ValidationError("ssim: image smaller than the 11x11 window");
  const auto w1 = detail::gaussian_window_1d();
  const double c1 = (0.01 * range) * (0.01 * range);
  const double c2 = (0.03 * range) * (0.03 * range);
  double total = 0;
  Index count = 0;
  for (Index r = 0; r + 11 <= x.rows; ++r)
    for (Index c = 0; c + 11 <= x.cols; ++c) {
      double mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
      for (Index i = 0; i < 11; ++i)
        for (Index j = 0; j < 11; ++j) {
          const double w = w1[static_cast<std::size_t>(i)] * w1[static_cast<std::size_t>(j)];
          const double a = x(r + i, c + j), b = y(r + i, c + j);
          mx += w * a;
          my += w * b;
          sxx += w * (a * a);
          syy += w * (b * b);
          sxy += w * (a * b);
        }
      const double vx = sxx - mx * mx;
      const double vy = syy - my * my;
      const double cxy = sxy - mx * my;
      const double num = (2.0 * (mx * my) + c1) * (2.0 * cxy + c2);
      const double den = (mx * mx + my * my + c1) * (vx + vy + c2);
      total += num / den;
      ++count;
    }
  return total / static_cast<double>(count);
}

/// SSIM after normalizing both maps with the truth's range.
inline double ssim(const RealMap &estimate, const RealMap &truth) {
  const Normalization n = Normalization::from_truth(truth);
  return ssim_raw(n.apply(estimate), n.apply(truth));
}

inline MapScore score_map(const RealMap &estimate, const RealMap &truth) {
  return {psnr(estimate, truth), ssim(estimate, truth)};
}

inline constexpr std::array<const char *, 4> kMapNames{"T1", "T2", "B0", "density"};

struct RunScore {
  std::array<MapScore, 4> maps; // T1, T2, B0, density
};

inline RunScore score_run(const ParameterMaps &est, const ParameterMaps &truth) {
  return {{score_map(est.t1, truth.t1), score_map(est.t2, truth.t2), score_map(est.b0, truth.b0),
           score_map(est.density, truth.density)}};
}

/// Fraction of truth-foreground voxels (truth atom >= 0) assigned the truth atom.
inline double matching_accuracy(const IndexMap &estimate, const IndexMap &truth) {
  if (!estimate.same_shape(truth))
    throw ValidationError("matching_accuracy: shape mismatch");
  Index hits = 0, total = 0;
  for (Index i = 0; i < truth.size(); ++i) {
    if (truth[i] < 0)
      continue;
    ++total;
    hits += estimate[i] == truth[i];
  }
  return total ? static_cast<double>(hits) / static_cast<double>(total) : 1.0;
}

struct MeanStd {
  double mean = 0;
  double std = 0; // sample standard deviation, 0 for one value
};

inline MeanStd mean_std(const std::vector<double> &v) {
  MeanStd out;
  if (v.empty())
    return out;
  for (double x : v)
    out.mean += x;
  out.mean /= static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0;
    for (double x : v)
      ss += (x - out.mean) * (x - out.mean);
    out.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return out;
}

/// One scored (method, seed) run.
struct ScoreRow {
  std::string method;
  std::uint64_t seed = 0;
  RunScore score;
};

inline void write_score_csv(std::ostream &os, const std::vector<ScoreRow> &rows) {
  os << "method,seed,map,psnr_db,ssim\n";
  os.precision(10);
  for (const auto &r : rows)
    for (std::size_t m = 0; m < 4; ++m)
      os << r.method << ',' << r.seed << ',' << kMapNames[m] << ',' << r.score.maps[m].psnr << ','
         << r.score.maps[m].ssim << '\n';
}

struct AggregateRow {
  std::string method;
  std::string map;
  MeanStd psnr;
  MeanStd ssim;
};

/// Mean +- std over seeds per (method, map), methods in first-seen order.
inline std::vector<AggregateRow> aggregate(const std::vector<ScoreRow> &rows) {
  std::vector<std::string> order;
  std::map<std::string, std::array<std::pair<std::vector<double>, std::vector<double>>, 4>> acc;
  for (const auto &r : rows) {
    if (!acc.count(r.method))
      order.push_back(r.method);
    auto &slot = acc[r.method];
    for (std::size_t m = 0; m < 4; ++m) {
      slot[m].first.push_back(r.score.maps[m].psnr);
      slot[m].second.push_back(r.score.maps[m].ssim);
    }
  }
  std::vector<AggregateRow> out;
  for (const auto &method : order)
    for (std::size_t m = 0; m < 4; ++m)
      out.push_back({method, kMapNames[m], mean_std(acc[method][m].first), mean_std(acc[method][m].second)});
  return out;
}

inline void write_aggregate_csv(std::ostream &os, const std::vector<AggregateRow> &rows) {
  os << "method,map,psnr_mean,psnr_std,ssim_mean,ssim_std\n";
  os.precision(10);
  for (const auto &r : rows)
    os << r.method << ',' << r.map << ',' << r.psnr.mean << ',' << r.psnr.std << ',' << r.ssim.mean << ','
       << r.ssim.std << '\n';
}

} // namespace mrf
