#pragma once

#include "mrf/core.hpp"

#include <cmath>
#include <numbers>
#include <ostream>
#include <vector>

namespace mrf {

struct PulseSequence {
  std::vector<double> fa_deg;
  std::vector<double> tr_ms;

  Index length() const { return static_cast<Index>(fa_deg.size()); }

  void validate() const {
    if (fa_deg.size() != tr_ms.size() || fa_deg.empty())
      throw ValidationError("pulse sequence: FA and TR must be non-empty and equal length");
    for (std::size_t t = 0; t < fa_deg.size(); ++t)
      if (!std::isfinite(fa_deg[t]) || !(tr_ms[t] > 0))
        throw ValidationError("pulse sequence: non-finite FA or non-positive TR at frame " +
                              std::to_string(t));
  }
};

/// How the third segment of the flip-angle pattern is evaluated. `Literal`
/// keeps the constant 5 + sin(2*pi/200*25); `Corrected` uses the
/// sinusoid 5 + 25*sin(2*pi*t/200).
enum class FaVariant { Literal, Corrected };

struct SequenceOptions {
  double eta_sigma = 5.0; // degrees
  FaVariant variant = FaVariant::Literal;
  bool randomize_tr = false;
  double tr_ms = 10.0;
  double tr_jitter_ms = 2.0; // half-width of uniform TR jitter when randomized
};

/// Noise-free flip angle for 1-based frame t, repeating with period 500.
inline double base_flip_angle(Index t, FaVariant variant) {
  constexpr double pi = std::numbers::pi;
  const Index tp = ((t - 1) % 500) + 1;
  if (tp <= 250)
    return 10.0 + std::sin(2.0 * pi * static_cast<double>(tp) / 500.0) * 50.0;
  if (tp <= 300)
    return 10.0;
  if (variant == FaVariant::Literal)
    return 5.0 + std::sin(2.0 * pi / 200.0 * 25.0);
  return 5.0 + std::sin(2.0 * pi * static_cast<double>(tp) / 200.0) * 25.0;
}

/// Gaussian noise is added on the sinusoidal segments only; the final angle
/// is clamped at zero. TR is constant unless randomized.
inline PulseSequence generate_sequence(Index frames, std::uint64_t seed,
                                       const SequenceOptions &opt = {}) {
  if (frames < 1)
    throw ValidationError("generate_sequence: T must be >= 1");
  if (opt.eta_sigma < 0)
    throw ValidationError("generate_sequence: eta_sigma must be >= 0");
  Rng rng = make_rng(seed, 0x5e);
  std::normal_distribution<double> eta(0.0, 1.0);
  std::uniform_real_distribution<double> jitter(-1.0, 1.0);

  PulseSequence seq;
  seq.fa_deg.resize(static_cast<std::size_t>(frames));
  seq.tr_ms.resize(static_cast<std::size_t>(frames));
  for (Index t = 1; t <= frames; ++t) {
    const Index tp = ((t - 1) % 500) + 1;
    const bool noisy = tp <= 250 || tp > 300;
    // Always consume one variate per frame so the schedule at t does not
    // depend on which branch earlier frames took.
    const double n = eta(rng) * opt.eta_sigma;
    double fa = base_flip_angle(t, opt.variant) + (noisy ? n : 0.0);
    seq.fa_deg[static_cast<std::size_t>(t - 1)] = std::max(fa, 0.0);
    const double j = jitter(rng);
    seq.tr_ms[static_cast<std::size_t>(t - 1)] = opt.randomize_tr ? opt.tr_ms + opt.tr_jitter_ms * j : opt.tr_ms;
  }
  seq.validate();
  return seq;
}

inline void write_sequence_csv(std::ostream &os, const PulseSequence &seq) {
  os << "t,fa_deg,tr_ms\n";
  os.precision(17);
  for (Index t = 0; t < seq.length(); ++t)
    os << (t + 1) << ',' << seq.fa_deg[static_cast<std::size_t>(t)] << ','
       << seq.tr_ms[static_cast<std::size_t>(t)] << '\n';
}

} // namespace mrf
