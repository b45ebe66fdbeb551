#pragma once

// Tissue tables, procedural label maps and noisy ground-truth parameter maps.

#include "mrf/core.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

namespace mrf {

struct Tissue {
  std::int32_t label = 0;
  std::string name;
  double t1 = 0;      // ms
  double t2 = 0;      // ms
  double b0 = 0;      // Hz
  double density = 0; // [0, 1]
};

class TissueTable {
public:
  TissueTable(std::vector<Tissue> entries, std::int32_t background_label)
    : entries_(std::move(entries)), background_(background_label) {
    validate();
  }

  /// The seven-class segmented brain phantom: background, CSF, gray matter,
  /// white matter, fat, muscle, muscle/skin.
  static TissueTable brain() {
    return TissueTable({{1, "background", 0, 0, 0, 0},
                        {2, "csf", 4231, 572, 185, 1.0},
                        {3, "gray_matter", 833, 86, -30, 0.86},
                        {4, "white_matter", 500, 55, -70, 0.77},
                        {5, "fat", 350, 70, -80, 0.7},
                        {6, "muscle", 900, 47, -40, 1.0},
                        {7, "muscle_skin", 2269, 329, 75, 1.0}},
                       1);
  }

  const std::vector<Tissue> &entries() const { return entries_; }
  std::int32_t background_label() const { return background_; }

  const Tissue *find(std::int32_t label) const {
    auto it = std::find_if(entries_.begin(), entries_.end(),
                           [label](const Tissue &t) { return t.label == label; });
    return it == entries_.end() ? nullptr : &*it;
  }

private:
  void validate() const {
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      const Tissue &t = entries_[i];
      for (std::size_t j = i + 1; j < entries_.size(); ++j)
        if (entries_[j].label == t.label)
          throw ValidationError("tissue table: duplicate label " + std::to_string(t.label));
      if (t.density < 0 || t.density > 1)
        throw ValidationError("tissue table: density out of [0,1] for " + t.name);
      if (t.label == background_) {
        if (t.t1 != 0 || t.t2 != 0 || t.b0 != 0 || t.density != 0)
          throw ValidationError("tissue table: background must have all-zero parameters");
      } else if (!(t.t1 >= t.t2 && t.t2 >= 0)) {
        throw ValidationError("tissue table: need T1 >= T2 >= 0 for " + t.name);
      }
    }
    if (!find(background_))
      throw ValidationError("tissue table: background label missing");
  }

  std::vector<Tissue> entries_;
  std::int32_t background_;
};

using LabelMap = IndexMap;

/// One-sided uniform perturbation intervals added per voxel.
struct NoiseSpec {
  double t1_lo = 0, t1_hi = 50; // ms
  double t2_lo = 0, t2_hi = 10; // ms
  double b0_lo = 0, b0_hi = 10; // Hz

  static NoiseSpec none() { return {0, 0, 0, 0, 0, 0}; }

  void validate() const {
    auto check = [](double lo, double hi, const char *name) {
      if (lo < 0 || hi < lo)
        throw ValidationError(std::string("noise interval invalid for ") + name);
    };
    check(t1_lo, t1_hi, "T1");
    check(t2_lo, t2_hi, "T2");
    check(b0_lo, b0_hi, "B0");
  }
};

/// Nested elliptical tissue zones with smooth boundary wobble; seed jitters
/// geometry. Labels follow TissueTable::brain().
inline LabelMap synth_label_map(Index rows, Index cols, std::uint64_t seed) {
  if (rows < 8 || cols < 8)
    throw ValidationError("synth_label_map: rows and cols must be >= 8");
  Rng rng = make_rng(seed, 0x70);
  std::uniform_real_distribution<double> jitter(-1.0, 1.0);

  const double cy = 0.5 * (rows - 1) + 0.03 * rows * jitter(rng);
  const double cx = 0.5 * (cols - 1) + 0.03 * cols * jitter(rng);
  // Leave at least one background pixel on every side.
  const double ay = (0.5 * rows - 1.0) * (0.90 + 0.04 * jitter(rng));
  const double ax = (0.5 * cols - 1.0) * (0.84 + 0.04 * jitter(rng));
  const double tilt = 0.15 * jitter(rng);
  const double wobble_amp = 0.025 * (1.0 + jitter(rng));
  const double wobble_phase = std::numbers::pi * jitter(rng);
  const int lobes = 3 + static_cast<int>(rng() % 3);

  // Outer radius thresholds (normalized elliptical radius) per zone.
  struct Zone {
    double outer;
    std::int32_t label;
  };
  const double shrink = 0.015 * jitter(rng);
  const Zone zones[] = {{1.00, 7}, {0.90, 5}, {0.82, 6}, {0.74 + shrink, 2}, {0.66 + shrink, 3},
                        {0.46 + shrink, 4}};

  // Ventricles: two small CSF ellipses inside white matter.
  const double vy = 0.10 * (1.0 + 0.3 * jitter(rng));
  const double vx = 0.14 * (1.0 + 0.3 * jitter(rng));
  const double vsep = 0.16 * (1.0 + 0.2 * jitter(rng));

  LabelMap map(rows, cols, 1);
  const double ct = std::cos(tilt), st = std::sin(tilt);
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c) {
      if (r == 0 || c == 0 || r == rows - 1 || c == cols - 1)
        continue;
      const double dy = r - cy, dx = c - cx;
      const double u = (ct * dx + st * dy) / ax;
      const double v = (-st * dx + ct * dy) / ay;
      const double theta = std::atan2(v, u);
      const double rad = std::hypot(u, v) * (1.0 + wobble_amp * std::sin(lobes * theta + wobble_phase));
      std::int32_t label = 1;
      for (const Zone &z : zones)
        if (rad <= z.outer)
          label = z.label;
      if (label == 4) {
        const double left = std::hypot((u + vsep) / vx, v / vy);
        const double right = std::hypot((u - vsep) / vx, v / vy);
        if (left <= 1.0 || right <= 1.0)
          label = 2;
      }
      map(r, c) = label;
    }
  }
  return map;
}

inline void validate_labels(const LabelMap &labels, const TissueTable &table) {
  for (Index i = 0; i < labels.size(); ++i)
    if (!table.find(labels[i]))
      throw ValidationError("label " + std::to_string(labels[i]) + " at voxel " + std::to_string(i) +
                            " is not in the tissue table");
}

/// Assigns each voxel its tissue's parameters plus independent one-sided
/// uniform offsets on T1, T2 and B0. Background stays all zero; density is
/// never perturbed.
inline ParameterMaps build_parameter_maps(const LabelMap &labels, const TissueTable &table,
                                          const NoiseSpec &noise, std::uint64_t seed) {
  validate_labels(labels, table);
  noise.validate();
  Rng rng = make_rng(seed, 0x71);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  ParameterMaps maps(labels.rows, labels.cols);
  for (Index i = 0; i < labels.size(); ++i) {
    // Draw for every voxel so one voxel's noise never depends on its neighbours' labels.
    const double u1 = unit(rng), u2 = unit(rng), u3 = unit(rng);
    if (labels[i] == table.background_label())
      continue;
    const Tissue &t = *table.find(labels[i]);
    maps.t1[i] = t.t1 + (noise.t1_lo + (noise.t1_hi - noise.t1_lo) * u1);
    maps.t2[i] = t.t2 + (noise.t2_lo + (noise.t2_hi - noise.t2_lo) * u2);
    maps.b0[i] = t.b0 + (noise.b0_lo + (noise.b0_hi - noise.b0_lo) * u3);
    maps.density[i] = t.density;
    // One-sided T2 noise can push T2 past T1 only for pathological tables.
    maps.t2[i] = std::min(maps.t2[i], maps.t1[i]);
  }
  return maps;
}

} // namespace mrf
