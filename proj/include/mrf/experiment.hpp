#pragma once

// Experiment runners: builds seeded scenarios from a config, trains the
// metric on a separate phantom, runs every estimator and scores it.

#include "mrf/config.hpp"
#include "mrf/core.hpp"
#include "mrf/dictionary.hpp"
#include "mrf/eval.hpp"
#include "mrf/kspace.hpp"
#include "mrf/matching.hpp"
#include "mrf/metric.hpp"
#include "mrf/phantom.hpp"
#include "mrf/pipeline.hpp"
#include "mrf/sampling.hpp"
#include "mrf/sequence.hpp"

#include <chrono>
#include <cmath>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace mrf {

inline PulseSequence make_sequence(const ExperimentConfig &cfg) {
  return generate_sequence(cfg.frames, cfg.sequence_seed, cfg.sequence_options());
}

inline std::vector<AtomParams> tissue_anchors(const TissueTable &table = TissueTable::brain()) {
  std::vector<AtomParams> out;
  for (const auto &t : table.entries())
    if (t.label != table.background_label())
      out.push_back({t.t1, t.t2, t.b0});
  return out;
}

inline ParameterGrid make_grid(const ExperimentConfig &cfg) {
  ParameterGrid g;
  switch (cfg.grid) {
  case GridPreset::Desk: g = build_grid_desk(tissue_anchors(), cfg.grid_t1, cfg.grid_t2, cfg.grid_b0); break;
  case GridPreset::Segmented: g = build_grid_segmented(); break;
  case GridPreset::Custom: g = build_grid_custom(cfg.custom_t1, cfg.custom_t2, cfg.custom_b0); break;
  }
  g.drop_t2_above_t1 = cfg.drop_t2_above_t1;
  return g;
}

inline Dictionary make_dictionary(const ExperimentConfig &cfg, const PulseSequence &seq) {
  return build_dictionary(make_grid(cfg), seq, cfg.pipeline.threads);
}

/// EPI factor giving the same nominal rows per frame as the configured R.
inline Index epi_factor(const ExperimentConfig &cfg) {
  return std::max<Index>(1, (cfg.rows + cfg.rows_per_frame - 1) / cfg.rows_per_frame);
}

inline MaskSequence make_masks(const ExperimentConfig &cfg, SamplingStrategy strategy, std::uint64_t seed) {
  switch (strategy) {
  case SamplingStrategy::Alternating:
    return draw_mask_sequence(cfg.rows, cfg.rows_per_frame, cfg.center, cfg.frames, cfg.power, seed);
  case SamplingStrategy::Independent:
    return draw_independent_masks(cfg.rows, cfg.rows_per_frame, cfg.power, cfg.frames, seed);
  case SamplingStrategy::Epi: return draw_epi_masks(cfg.rows, epi_factor(cfg), cfg.frames, seed);
  case SamplingStrategy::Full: return full_masks(cfg.rows, cfg.frames);
  }
  throw ValidationError("make_masks: unknown strategy");
}

/// Magnitude-image PSNR of a fully sampled noisy frame against the clean one.
/// `unit_noise` is a fixed complex draw of unit total variance per voxel.
inline double noisy_frame_psnr(const Image &clean, const Image &unit_noise, double sigma, Index rows, Index cols) {
  RealMap truth(rows, cols), noisy(rows, cols);
  for (Index i = 0; i < clean.size(); ++i) {
    truth[i] = std::abs(clean[i]);
    noisy[i] = std::abs(clean[i] + sigma * unit_noise[i]);
  }
  return psnr(noisy, truth);
}

/// Noise std whose fully sampled first frame has the requested magnitude
/// PSNR. The unitary transform keeps the k-space std in the image domain.
inline double calibrate_noise_sigma(const ImageSequence &truth, double target_psnr_db, std::uint64_t seed) {
  if (!(target_psnr_db > 0))
    throw ValidationError("calibrate_noise_sigma: target PSNR must be > 0");
  const Image clean = truth.frame(0);
  const double peak = clean.cwiseAbs().maxCoeff();
  if (!(peak > 0))
    throw ValidationError("calibrate_noise_sigma: first frame is empty");
  Rng rng = make_rng(seed, 0x5151);
  std::normal_distribution<double> g(0.0, std::sqrt(0.5));
  Image unit(clean.size());
  for (Index i = 0; i < unit.size(); ++i) {
    const double re = g(rng);
    const double im = g(rng);
    unit[i] = {re, im};
  }
  // PSNR falls with sigma for a fixed draw; bisect in log space.
  double lo = std::log(peak * 1e-6), hi = std::log(peak * 1e3);
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (noisy_frame_psnr(clean, unit, std::exp(mid), truth.rows, truth.cols) > target_psnr_db)
      lo = mid;
    else
      hi = mid;
  }
  return std::exp(0.5 * (lo + hi));
}

/// One seeded phantom: labels, generating maps, clean frames, and the atom
/// index each voxel's clean fingerprint matches (-1 for background).
struct Scenario {
  std::uint64_t seed = 0;
  LabelMap labels;
  ParameterMaps maps;
  ImageSequence truth;
  IndexMap truth_atoms;
};

inline Scenario make_scenario(const ExperimentConfig &cfg, std::uint64_t seed, const PulseSequence &seq,
                              const Dictionary &dict) {
  Scenario s;
  s.seed = seed;
  s.labels = synth_label_map(cfg.rows, cfg.cols, seed);
  s.maps = build_parameter_maps(s.labels, TissueTable::brain(),
                                cfg.grid_aligned ? NoiseSpec::none() : cfg.tissue_noise, seed);
  s.truth = render_ground_truth(s.maps, seq, cfg.pipeline.threads);
  s.truth_atoms = match_image(s.truth, dict, nullptr, cfg.pipeline.threads).atoms;
  return s;
}

/// Noise std for a run: explicit sigma, or the calibrated one when a target
/// PSNR is configured (calibrated on the training phantom).
inline double resolve_noise_sigma(const ExperimentConfig &cfg, const PulseSequence &seq) {
  if (!(cfg.noise_target_psnr > 0))
    return cfg.noise_sigma;
  const LabelMap labels = synth_label_map(cfg.rows, cfg.cols, cfg.train_seed);
  const ParameterMaps maps = build_parameter_maps(labels, TissueTable::brain(), NoiseSpec::none(), cfg.train_seed);
  return calibrate_noise_sigma(render_ground_truth(maps, seq, cfg.pipeline.threads), cfg.noise_target_psnr,
                               cfg.train_seed);
}

/// Measurement seeds are derived from the scenario seed so k-space noise and
/// masks differ between the training and test phantoms.
inline std::uint64_t mask_seed(std::uint64_t seed) { return seed * 2 + 1; }
inline std::uint64_t noise_seed(std::uint64_t seed) { return seed * 2 + 2; }

inline MeasurementSet measure(const ExperimentConfig &cfg, const Scenario &s, SamplingStrategy strategy,
                              double sigma) {
  return acquire(s.truth, make_masks(cfg, strategy, mask_seed(s.seed)), sigma, noise_seed(s.seed),
                 cfg.pipeline.threads);
}

/// Chunklets from the CS reconstruction of `y`, keyed by the atom each
/// voxel's clean fingerprint matches.
inline ChunkletSet training_chunklets(const ExperimentConfig &cfg, const MeasurementSet &y, const Dictionary &dict,
                                      const IndexMap &truth_atoms) {
  const ImageSequence x =
    cs_reconstruct(y, adjoint_sequence(y, cfg.pipeline.threads), cfg.pipeline.cs, nullptr, 0, nullptr,
                   cfg.pipeline.threads);
  return build_chunklets(x, dict, truth_atoms.data);
}

/// RCA over chunklets pooled from several training slices. Chunklets of
/// different slices stay separate even when they share an atom.
inline MahalanobisMetric fit_metric(const ExperimentConfig &cfg, const std::vector<ChunkletSet> &sets) {
  ChunkletSet all;
  for (const auto &s : sets)
    all.chunklets.insert(all.chunklets.end(), s.chunklets.begin(), s.chunklets.end());
  const Eigen::MatrixXd c = within_chunklet_covariance(all);
  return whiten(c, cfg.ridge ? *cfg.ridge : default_ridge(c, cfg.ridge_scale));
}

/// Training phantom for the metric. A perturbed phantom spreads each tissue
/// over many neighbouring atoms.
inline ExperimentConfig training_config(const ExperimentConfig &cfg) {
  ExperimentConfig train = cfg;
  train.grid_aligned = !cfg.train_perturbed;
  return train;
}

inline std::uint64_t training_seed(const ExperimentConfig &cfg, int i) {
  return cfg.train_seed + static_cast<std::uint64_t>(i);
}

inline MahalanobisMetric train_metric(const ExperimentConfig &cfg, const PulseSequence &seq, const Dictionary &dict,
                                      double sigma) {
  std::vector<ChunkletSet> sets;
  for (int i = 0; i < cfg.train_phantoms; ++i) {
    const Scenario s = make_scenario(training_config(cfg), training_seed(cfg, i), seq, dict);
    sets.push_back(training_chunklets(cfg, measure(cfg, s, cfg.sampling, sigma), dict, s.truth_atoms));
  }
  return fit_metric(cfg, sets);
}

struct MethodRun {
  Method method;
  EstimateResult result;
  RunScore score;
  double accuracy = 0;
  double seconds = 0;
};

struct SeedRun {
  std::uint64_t seed = 0;
  Scenario scenario;
  std::vector<MethodRun> methods;
};

/// Runs every configured estimator on one seed. csmrf and csmrf_ml share a
/// single CS reconstruction when only one outer pass is configured.
inline SeedRun run_seed(const ExperimentConfig &cfg, std::uint64_t seed, const PulseSequence &seq,
                        const Dictionary &dict, const MahalanobisMetric *metric, double sigma) {
  SeedRun run;
  run.seed = seed;
  run.scenario = make_scenario(cfg, seed, seq, dict);
  const Scenario &s = run.scenario;
  const int threads = cfg.pipeline.threads;

  std::optional<MeasurementSet> under;
  auto undersampled = [&]() -> const MeasurementSet & {
    if (!under)
      under = measure(cfg, s, cfg.sampling, sigma);
    return *under;
  };
  std::optional<ImageSequence> shared_cs;
  std::vector<FrameWarning> shared_warnings;

  for (Method m : cfg.methods) {
    const auto t0 = std::chrono::steady_clock::now();
    EstimateResult r;
    switch (m) {
    case Method::Oracle: {
      const MeasurementSet full = measure(cfg, s, SamplingStrategy::Full, sigma);
      MatchOutput o = oracle_match(full, dict, threads, cfg.pipeline.background);
      r.maps = std::move(o.maps);
      r.atoms = std::move(o.atoms);
      r.sequence = std::move(o.replaced);
      break;
    }
    case Method::Mrf: r = run_mrf(undersampled(), dict, threads, cfg.pipeline.background); break;
    case Method::CsMrf:
    case Method::CsMrfMl: {
      const MahalanobisMetric *mm = m == Method::CsMrfMl ? metric : nullptr;
      if (m == Method::CsMrfMl && !mm)
        throw ValidationError("run_seed: csmrf_ml requested without a trained metric");
      if (cfg.pipeline.outer_iters == 1 && !cfg.pipeline.cs.record_trace) {
        if (!shared_cs)
          shared_cs = cs_reconstruct(undersampled(), adjoint_sequence(undersampled(), threads), cfg.pipeline.cs,
                                     &shared_warnings, 0, nullptr, threads);
        MatchOutput o = match_image(*shared_cs, Matcher(dict, mm), threads, cfg.pipeline.background);
        r.maps = std::move(o.maps);
        r.atoms = std::move(o.atoms);
        r.sequence = std::move(o.replaced);
        r.warnings = shared_warnings;
      } else {
        r = run_csmrf(undersampled(), dict, mm, cfg.pipeline);
      }
      break;
    }
    case Method::Blip: {
      const MeasurementSet epi = measure(cfg, s, SamplingStrategy::Epi, sigma);
      r = run_blip(epi, dict, cfg.pipeline.blip_iters, cfg.pipeline.blip_step, threads, cfg.pipeline.background);
      break;
    }
    }
    MethodRun mr{m, std::move(r), {}, 0, 0};
    mr.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    mr.score = score_run(mr.result.maps, s.maps);
    mr.accuracy = matching_accuracy(mr.result.atoms, s.truth_atoms);
    run.methods.push_back(std::move(mr));
  }
  return run;
}

/// Everything shared by the seeds of one configuration.
struct ExperimentContext {
  PulseSequence sequence;
  Dictionary dictionary;
  double sigma = 0;
  std::optional<MahalanobisMetric> metric;
};

inline bool needs_metric(const ExperimentConfig &cfg) {
  return cfg.metric && std::find(cfg.methods.begin(), cfg.methods.end(), Method::CsMrfMl) != cfg.methods.end();
}

inline ExperimentContext prepare(const ExperimentConfig &cfg) {
  cfg.validate();
  ExperimentContext ctx;
  ctx.sequence = make_sequence(cfg);
  ctx.dictionary = make_dictionary(cfg, ctx.sequence);
  ctx.sigma = resolve_noise_sigma(cfg, ctx.sequence);
  if (needs_metric(cfg))
    ctx.metric = train_metric(cfg, ctx.sequence, ctx.dictionary, ctx.sigma);
  return ctx;
}

inline std::vector<ScoreRow> score_rows(const SeedRun &run, const std::string &label_prefix = "") {
  std::vector<ScoreRow> rows;
  for (const auto &m : run.methods)
    rows.push_back({label_prefix + to_string(m.method), run.seed, m.score});
  return rows;
}

} // namespace mrf
