#pragma once

// IR-bSSFP signal simulation and the normalized fingerprint dictionary.
//
// Per frame: instantaneous RF rotation about x by (-1)^t * FA(t), then
// relaxation and off-resonance precession for TR/2 to the echo where the
// transverse magnetization is sampled, then another TR/2 to the next pulse.

#include "mrf/core.hpp"
#include "mrf/parallel.hpp"
#include "mrf/sequence.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

namespace mrf {

struct SpinState {
  double mx = 0, my = 0, mz = -1;
  double norm() const { return std::sqrt(mx * mx + my * my + mz * mz); }
};

namespace detail {
inline void free_precession(SpinState &m, double dt_ms, double t1, double t2, double b0_hz) {
  const double e2 = std::exp(-dt_ms / t2);
  const double e1 = std::exp(-dt_ms / t1);
  const double phi = 2.0 * std::numbers::pi * b0_hz * dt_ms * 1e-3;
  const double c = std::cos(phi), s = std::sin(phi);
  const double mx = e2 * (c * m.mx - s * m.my);
  const double my = e2 * (s * m.mx + c * m.my);
  m.mx = mx;
  m.my = my;
  m.mz = 1.0 + (m.mz - 1.0) * e1;
}

inline void rf_rotate_x(SpinState &m, double angle_rad) {
  const double c = std::cos(angle_rad), s = std::sin(angle_rad);
  const double my = c * m.my - s * m.mz;
  const double mz = s * m.my + c * m.mz;
  m.my = my;
  m.mz = mz;
}
} // namespace detail

/// Raw (unnormalized, unit proton density) fingerprint. If `max_norm` is
/// given it receives the largest |M| seen along the trajectory.
inline Eigen::VectorXcd simulate_fingerprint(double t1, double t2, double b0, const PulseSequence &seq,
                                             double *max_norm = nullptr) {
  if (!(t1 > 0) || !(t2 > 0))
    throw ValidationError("simulate_fingerprint: relaxation times must be positive");
  const Index frames = seq.length();
  Eigen::VectorXcd signal(frames);
  SpinState m; // inverted
  double peak = m.norm();
  constexpr double deg = std::numbers::pi / 180.0;
  for (Index t = 0; t < frames; ++t) {
    const double sign = (t % 2 == 0) ? 1.0 : -1.0;
    const double half_tr = 0.5 * seq.tr_ms[static_cast<std::size_t>(t)];
    detail::rf_rotate_x(m, sign * seq.fa_deg[static_cast<std::size_t>(t)] * deg);
    detail::free_precession(m, half_tr, t1, t2, b0);
    signal[t] = Complex(m.mx, m.my);
    peak = std::max(peak, m.norm());
    detail::free_precession(m, half_tr, t1, t2, b0);
    peak = std::max(peak, m.norm());
  }
  if (max_norm)
    *max_norm = peak;
  return signal;
}

struct AtomParams {
  double t1 = 0, t2 = 0, b0 = 0;
  bool operator==(const AtomParams &) const = default;
};

struct ParameterGrid {
  std::vector<double> t1_values;
  std::vector<double> t2_values;
  std::vector<double> b0_values;
  bool drop_t2_above_t1 = true;

  void validate() const {
    auto check = [](const std::vector<double> &v, const char *name, bool positive) {
      if (v.empty())
        throw ValidationError(std::string("parameter grid: empty ") + name + " list");
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (!std::isfinite(v[i]) || (positive && !(v[i] > 0)))
          throw ValidationError(std::string("parameter grid: invalid ") + name + " value");
        if (i > 0 && !(v[i] > v[i - 1]))
          throw ValidationError(std::string("parameter grid: ") + name + " list not strictly increasing");
      }
    };
    check(t1_values, "T1", true);
    check(t2_values, "T2", true);
    check(b0_values, "B0", false);
  }

  /// Triples in lexicographic (T1, T2, B0) order after the T2 <= T1 filter.
  std::vector<AtomParams> triples() const {
    std::vector<AtomParams> out;
    for (double t1 : t1_values)
      for (double t2 : t2_values) {
        if (drop_t2_above_t1 && t2 > t1)
          continue;
        for (double b0 : b0_values)
          out.push_back({t1, t2, b0});
      }
    return out;
  }

  Index raw_size() const {
    return static_cast<Index>(t1_values.size() * t2_values.size() * b0_values.size());
  }
};

namespace detail {
inline void append_range(std::vector<double> &v, double lo, double hi, double step) {
  for (int i = 0;; ++i) {
    const double x = lo + step * i;
    if (x > hi + 1e-9)
      break;
    v.push_back(x);
  }
}

inline std::vector<double> sorted_unique(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end(), [](double a, double b) { return std::abs(a - b) < 1e-9; }),
          v.end());
  return v;
}
} // namespace detail

inline ParameterGrid build_grid_custom(std::vector<double> t1, std::vector<double> t2, std::vector<double> b0,
                                       bool drop_t2_above_t1 = true) {
  ParameterGrid g{std::move(t1), std::move(t2), std::move(b0), drop_t2_above_t1};
  g.validate();
  return g;
}

/// Segmented full-scale grid: T1 300-1000/30, 1000-2500/100, 2500-4700/300;
/// T2 45-100/10, 110-320/50, 320-370/10, 380-630/50; B0 -200..200/10.
/// Duplicated segment endpoints are removed.
inline ParameterGrid build_grid_segmented() {
  std::vector<double> t1, t2, b0;
  detail::append_range(t1, 300, 1000, 30);
  detail::append_range(t1, 1000, 2500, 100);
  detail::append_range(t1, 2500, 4700, 300);
  detail::append_range(t2, 45, 100, 10);
  detail::append_range(t2, 110, 320, 50);
  detail::append_range(t2, 320, 370, 10);
  detail::append_range(t2, 380, 630, 50);
  detail::append_range(b0, -200, 200, 10);
  return build_grid_custom(detail::sorted_unique(t1), detail::sorted_unique(t2), detail::sorted_unique(b0));
}

/// Off-resonance period of the sampled signal for a constant TR: shifting B0
/// by 2/TR reproduces the fingerprint exactly (1/TR flips its sign).
inline double b0_alias_period_hz(double tr_ms) { return 2000.0 / tr_ms; }

/// Desk-scale grid: geometric T1/T2 ladders and a uniform B0 ladder merged
/// with the supplied anchor values so a phantom built from those anchors is
/// exactly representable. Ladder T1/T2 values within 5% of an anchor and B0
/// values that alias an anchor modulo `b0_alias_period_hz` are dropped.
inline ParameterGrid build_grid_desk(const std::vector<AtomParams> &anchors, int n_t1 = 16, int n_t2 = 16,
                                     int n_b0 = 7, double tr_ms = 10.0) {
  std::vector<double> t1, t2, b0;
  auto geometric = [](std::vector<double> &v, double lo, double hi, int n) {
    for (int i = 0; i < n; ++i)
      v.push_back(std::round(lo * std::pow(hi / lo, n > 1 ? double(i) / (n - 1) : 0.0)));
  };
  geometric(t1, 300, 4700, n_t1);
  geometric(t2, 40, 650, n_t2);
  for (int i = 0; i < n_b0; ++i)
    b0.push_back(n_b0 > 1 ? std::round(-100.0 + 300.0 * i / (n_b0 - 1)) : 0.0);

  const double period = b0_alias_period_hz(tr_ms);
  auto aliases = [period](double a, double b) {
    const double d = std::remainder(a - b, period);
    return std::abs(d) < 1e-6 && std::abs(a - b) > 1e-6;
  };
  // Ladder values within 5% of an anchor would be near-duplicate atoms.
  auto merge = [](std::vector<double> &ladder, const std::vector<double> &keep) {
    std::vector<double> out = keep;
    for (double v : ladder)
      if (std::none_of(keep.begin(), keep.end(), [v](double k) { return std::abs(v - k) < 0.05 * k; }))
        out.push_back(v);
    ladder = std::move(out);
  };
  std::vector<double> b0_kept, t1_anchor, t2_anchor;
  for (const auto &a : anchors) {
    t1_anchor.push_back(a.t1);
    t2_anchor.push_back(a.t2);
    b0_kept.push_back(a.b0);
  }
  merge(t1, t1_anchor);
  merge(t2, t2_anchor);
  for (double v : b0) {
    bool clash = false;
    for (double w : b0_kept)
      clash = clash || aliases(v, w) || std::abs(v - w) < 1e-6;
    if (!clash)
      b0_kept.push_back(v);
  }
  return build_grid_custom(detail::sorted_unique(t1), detail::sorted_unique(t2), detail::sorted_unique(b0_kept));
}

/// K unit-norm atoms (row k contiguous) with their generating parameters and
/// pre-normalization norms.
struct Dictionary {
  using AtomMatrix = Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  AtomMatrix atoms;
  std::vector<AtomParams> params;
  Eigen::VectorXd norms;

  Index size() const { return atoms.rows(); }
  Index frames() const { return atoms.cols(); }
  auto atom(Index k) const { return atoms.row(k); }
};

inline Dictionary build_dictionary(const ParameterGrid &grid, const PulseSequence &seq, int threads = 0) {
  grid.validate();
  seq.validate();
  Dictionary dict;
  dict.params = grid.triples();
  if (dict.params.empty())
    throw ValidationError("build_dictionary: every grid triple was filtered out");
  const Index k = static_cast<Index>(dict.params.size());
  dict.atoms.resize(k, seq.length());
  dict.norms.resize(k);
  parallel_for(
    k,
    [&](long i) {
      const AtomParams &p = dict.params[static_cast<std::size_t>(i)];
      Eigen::VectorXcd s = simulate_fingerprint(p.t1, p.t2, p.b0, seq);
      const double n = s.norm();
      if (!(n > 0))
        throw Error("build_dictionary: zero-energy fingerprint (all flip angles zero?)");
      dict.norms[i] = n;
      dict.atoms.row(i) = (s / n).transpose();
    },
    threads);
  return dict;
}

} // namespace mrf
