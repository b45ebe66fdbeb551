#pragma once

// Row-wise Cartesian undersampling masks.

#include "mrf/core.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace mrf {

struct MaskSequence {
  Index n_rows = 0;
  Index rows_per_frame = 0;            // nominal R
  std::vector<Index> center;           // C, sorted ascending
  std::vector<std::vector<Index>> frames; // each sorted ascending

  Index length() const { return static_cast<Index>(frames.size()); }
  bool operator==(const MaskSequence &) const = default;

  void validate() const {
    for (std::size_t t = 0; t < frames.size(); ++t) {
      const auto &f = frames[t];
      for (std::size_t i = 0; i < f.size(); ++i) {
        if (f[i] < 0 || f[i] >= n_rows)
          throw ValidationError("mask frame " + std::to_string(t) + ": row out of range");
        if (i > 0 && f[i] <= f[i - 1])
          throw ValidationError("mask frame " + std::to_string(t) + ": rows not strictly increasing");
      }
    }
  }

  bool fully_sampled() const {
    return std::all_of(frames.begin(), frames.end(),
                       [this](const auto &f) { return static_cast<Index>(f.size()) == n_rows; });
  }
};

/// Row index of k-space DC under the centered-DFT convention.
inline Index dc_row(Index n_rows) { return n_rows / 2; }

/// p(i) proportional to (1 - d(i)/d_max)^q, d measured from the DC row.
/// d_max is one past the largest distance so every row keeps a positive
/// probability.
inline Eigen::VectorXd init_probability(Index n_rows, Index rows_per_frame, double power) {
  if (n_rows < 1 || rows_per_frame < 1 || rows_per_frame > n_rows)
    throw ValidationError("init_probability: need 1 <= R <= n_rows");
  if (power < 0)
    throw ValidationError("init_probability: power must be >= 0");
  const Index dc = dc_row(n_rows);
  const double d_max = static_cast<double>(std::max(dc, n_rows - 1 - dc)) + 1.0;
  Eigen::VectorXd p(n_rows);
  for (Index i = 0; i < n_rows; ++i)
    p[i] = std::pow(1.0 - std::abs(static_cast<double>(i - dc)) / d_max, power);
  return p / p.sum();
}

/// The c rows nearest the DC row, ties going to the lower index.
inline std::vector<Index> center_rows(Index n_rows, Index c) {
  std::vector<Index> idx(static_cast<std::size_t>(n_rows));
  std::iota(idx.begin(), idx.end(), Index{0});
  const Index dc = dc_row(n_rows);
  std::stable_sort(idx.begin(), idx.end(), [dc](Index a, Index b) {
    const Index da = std::abs(a - dc), db = std::abs(b - dc);
    return da != db ? da < db : a < b;
  });
  idx.resize(static_cast<std::size_t>(std::clamp<Index>(c, 0, n_rows)));
  std::sort(idx.begin(), idx.end());
  return idx;
}

namespace detail {
/// Draws exactly `count` distinct indices with probability proportional to
/// the remaining weights (successive weighted draws without replacement).
inline std::vector<Index> weighted_sample(std::vector<double> weights, Index count, Rng &rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Index> out;
  out.reserve(static_cast<std::size_t>(count));
  for (Index k = 0; k < count; ++k) {
    double total = 0;
    for (double w : weights)
      total += w;
    if (!(total > 0))
      throw InfeasibleError("weighted_sample: fewer eligible rows than requested");
    const double u = unit(rng) * total;
    double acc = 0;
    std::size_t pick = weights.size();
    std::size_t last_positive = weights.size();
    for (std::size_t i = 0; i < weights.size(); ++i) {
      if (weights[i] <= 0)
        continue;
      last_positive = i;
      acc += weights[i];
      if (u < acc) {
        pick = i;
        break;
      }
    }
    if (pick == weights.size())
      pick = last_positive;
    out.push_back(static_cast<Index>(pick));
    weights[pick] = 0;
  }
  std::sort(out.begin(), out.end());
  return out;
}
} // namespace detail

/// Time-dependent strategy: frame t may reuse a row of frame t-1 only if the
/// row lies in the center set C. Exactly R rows per frame.
inline MaskSequence draw_mask_sequence(Index n_rows, Index rows_per_frame, Index c, Index frames, double power,
                                       std::uint64_t seed) {
  const Eigen::VectorXd p1 = init_probability(n_rows, rows_per_frame, power);
  if (c < 0 || c > n_rows)
    throw ValidationError("draw_mask_sequence: need 0 <= c <= n_rows");
  if (frames < 1)
    throw ValidationError("draw_mask_sequence: need T >= 1");
  // Worst case leaves n_rows - R + |M_{t-1} ∩ C| eligible rows.
  if (!(n_rows >= 2 * rows_per_frame || c >= rows_per_frame))
    throw InfeasibleError("draw_mask_sequence: infeasible, need n_rows >= 2R or c >= R (n_rows=" +
                          std::to_string(n_rows) + ", R=" + std::to_string(rows_per_frame) +
                          ", c=" + std::to_string(c) + ")");
  MaskSequence ms;
  ms.n_rows = n_rows;
  ms.rows_per_frame = rows_per_frame;
  ms.center = center_rows(n_rows, c);
  std::vector<char> in_center(static_cast<std::size_t>(n_rows), 0);
  for (Index i : ms.center)
    in_center[static_cast<std::size_t>(i)] = 1;

  Rng rng = make_rng(seed, 0x3a);
  const std::vector<double> base(p1.data(), p1.data() + n_rows);
  std::vector<double> w = base;
  for (Index t = 0; t < frames; ++t) {
    if (t > 0) {
      w = base;
      for (Index i : ms.frames.back())
        if (!in_center[static_cast<std::size_t>(i)])
          w[static_cast<std::size_t>(i)] = 0;
    }
    ms.frames.push_back(detail::weighted_sample(w, rows_per_frame, rng));
  }
  return ms;
}

/// Baseline: each frame drawn independently from the initial density.
inline MaskSequence draw_independent_masks(Index n_rows, Index rows_per_frame, double power, Index frames,
                                           std::uint64_t seed) {
  const Eigen::VectorXd p1 = init_probability(n_rows, rows_per_frame, power);
  MaskSequence ms;
  ms.n_rows = n_rows;
  ms.rows_per_frame = rows_per_frame;
  Rng rng = make_rng(seed, 0x3b);
  const std::vector<double> base(p1.data(), p1.data() + n_rows);
  for (Index t = 0; t < frames; ++t)
    ms.frames.push_back(detail::weighted_sample(base, rows_per_frame, rng));
  return ms;
}

/// Uniform EPI-style undersampling by `factor` with a random shift per frame.
inline MaskSequence draw_epi_masks(Index n_rows, Index factor, Index frames, std::uint64_t seed) {
  if (factor < 1)
    throw ValidationError("draw_epi_masks: factor must be >= 1");
  MaskSequence ms;
  ms.n_rows = n_rows;
  ms.rows_per_frame = (n_rows + factor - 1) / factor;
  Rng rng = make_rng(seed, 0x3c);
  std::uniform_int_distribution<Index> shift(0, factor - 1);
  for (Index t = 0; t < frames; ++t) {
    const Index s = shift(rng);
    std::vector<Index> rows;
    for (Index i = s; i < n_rows; i += factor)
      rows.push_back(i);
    ms.frames.push_back(std::move(rows));
  }
  return ms;
}

inline MaskSequence full_masks(Index n_rows, Index frames) {
  MaskSequence ms;
  ms.n_rows = n_rows;
  ms.rows_per_frame = n_rows;
  std::vector<Index> all(static_cast<std::size_t>(n_rows));
  std::iota(all.begin(), all.end(), Index{0});
  ms.frames.assign(static_cast<std::size_t>(frames), all);
  return ms;
}

/// Text form: header "n_rows R c T", then one line of row indices per frame.
/// The c center rows are recomputed from n_rows on read.
inline void write_masks(std::ostream &os, const MaskSequence &ms) {
  os << ms.n_rows << ' ' << ms.rows_per_frame << ' ' << ms.center.size() << ' ' << ms.frames.size() << '\n';
  for (const auto &f : ms.frames) {
    for (std::size_t i = 0; i < f.size(); ++i)
      os << (i ? " " : "") << f[i];
    os << '\n';
  }
}

inline MaskSequence read_masks(std::istream &is) {
  MaskSequence ms;
  Index c = 0, frames = 0;
  std::string line;
  if (!std::getline(is, line))
    throw FormatError("mask text: missing header");
  std::istringstream header(line);
  if (!(header >> ms.n_rows >> ms.rows_per_frame >> c >> frames) || ms.n_rows < 1 || frames < 0)
    throw FormatError("mask text: bad header '" + line + "'");
  ms.center = center_rows(ms.n_rows, c);
  for (Index t = 0; t < frames; ++t) {
    if (!std::getline(is, line))
      throw FormatError("mask text: truncated at frame " + std::to_string(t));
    std::istringstream row(line);
    std::vector<Index> f;
    Index v;
    while (row >> v)
      f.push_back(v);
    if (!row.eof())
      throw FormatError("mask text: bad token in frame " + std::to_string(t));
    ms.frames.push_back(std::move(f));
  }
  try {
    ms.validate();
  } catch (const ValidationError &e) {
    throw FormatError(e.what());
  }
  return ms;
}

} // namespace mrf
