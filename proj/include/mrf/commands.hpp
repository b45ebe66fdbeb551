#pragma once

// Stage commands behind the mrf executable. Each reads its predecessor's
// artifacts, writes its own outputs and a manifest.txt that re-runs it
// (the manifest body is a valid config file).

#include "mrf/config.hpp"
#include "mrf/experiment.hpp"
#include "mrf/io.hpp"
#include "mrf/study.hpp"

#include <filesystem>
#include <optional>
#include <string>

namespace mrf {

namespace fs = std::filesystem;

inline void require_file(const fs::path &p, const std::string &what) {
  if (!fs::is_regular_file(p))
    throw Error("missing " + what + ": '" + p.string() + "'");
}

inline ExperimentConfig load_config(const fs::path &p) {
  require_file(p, "config");
  auto is = io::open_in(p);
  return parse_config(is);
}

/// Writes labels and generating maps. Training phantom `i` uses the i-th
/// training seed and the tissue perturbation.
inline ParameterMaps cmd_phantom(const ExperimentConfig &cfg, std::uint64_t seed, const fs::path &out,
                                 std::optional<int> training = std::nullopt) {
  const ExperimentConfig c = training ? training_config(cfg) : cfg;
  const std::uint64_t s = training ? training_seed(cfg, *training) : seed;
  const LabelMap labels = synth_label_map(c.rows, c.cols, s);
  const ParameterMaps maps =
    build_parameter_maps(labels, TissueTable::brain(), c.grid_aligned ? NoiseSpec::none() : c.tissue_noise, s);
  fs::create_directories(out);
  save_map(out / "labels.map", labels);
  save_parameter_maps(out, maps);
  write_manifest(out, "phantom", {{"seed", std::to_string(s)}, {"training", training ? "true" : "false"}}, cfg);
  return maps;
}

inline Dictionary cmd_dict(const ExperimentConfig &cfg, const fs::path &out) {
  const PulseSequence seq = make_sequence(cfg);
  const Dictionary dict = make_dictionary(cfg, seq);
  fs::create_directories(out);
  save_dictionary(out / "dictionary.bin", dict);
  {
    const auto p = out / "sequence.csv";
    auto os = io::open_out(p);
    write_sequence_csv(os, seq);
    io::finish(os, p);
  }
  write_manifest(out, "dict", {{"atoms", std::to_string(dict.size())}}, cfg);
  return dict;
}

/// Renders the phantom through the configured sequence and samples k-space.
/// Mask and noise streams derive from `seed`.
inline MeasurementSet cmd_acquire(const ExperimentConfig &cfg, std::uint64_t seed, const fs::path &phantom_dir,
                                  SamplingStrategy strategy, const fs::path &out) {
  const ParameterMaps maps = load_parameter_maps(phantom_dir);
  if (maps.rows() != cfg.rows || maps.cols() != cfg.cols)
    throw ValidationError("acquire: phantom size does not match the config");
  const PulseSequence seq = make_sequence(cfg);
  const ImageSequence truth = render_ground_truth(maps, seq, cfg.pipeline.threads);
  const double sigma = resolve_noise_sigma(cfg, seq);
  const MeasurementSet ms =
    acquire(truth, make_masks(cfg, strategy, mask_seed(seed)), sigma, noise_seed(seed), cfg.pipeline.threads);
  fs::create_directories(out);
  save_measurements(out / "measurements.bin", ms);
  std::ostringstream sig;
  sig.precision(17);
  sig << sigma;
  write_manifest(out, "acquire",
                 {{"seed", std::to_string(seed)},
                  {"phantom", phantom_dir.string()},
                  {"strategy", to_string(strategy)},
                  {"sigma", sig.str()}},
                 cfg);
  return ms;
}

inline IndexMap truth_atoms_for(const ParameterMaps &maps, const Dictionary &dict, const ExperimentConfig &cfg) {
  const ImageSequence truth = render_ground_truth(maps, make_sequence(cfg), cfg.pipeline.threads);
  if (truth.frames() != dict.frames())
    throw ValidationError("sequence length does not match the dictionary");
  return match_image(truth, dict, nullptr, cfg.pipeline.threads).atoms;
}

/// Learns the metric from paired training phantoms and acquisitions.
inline MahalanobisMetric cmd_train_metric(const ExperimentConfig &cfg, const std::vector<fs::path> &phantom_dirs,
                                          const std::vector<fs::path> &acq_dirs, const fs::path &dict_dir,
                                          const fs::path &out) {
  if (phantom_dirs.empty() || phantom_dirs.size() != acq_dirs.size())
    throw ValidationError("train-metric: need one acquisition per training phantom");
  require_file(dict_dir / "dictionary.bin", "dictionary");
  const Dictionary dict = load_dictionary(dict_dir / "dictionary.bin");
  std::vector<ChunkletSet> sets;
  std::vector<std::pair<std::string, std::string>> fields;
  for (std::size_t i = 0; i < phantom_dirs.size(); ++i) {
    require_file(acq_dirs[i] / "measurements.bin", "measurements");
    const IndexMap atoms = truth_atoms_for(load_parameter_maps(phantom_dirs[i]), dict, cfg);
    sets.push_back(training_chunklets(cfg, load_measurements(acq_dirs[i] / "measurements.bin"), dict, atoms));
    fields.push_back({"phantom", phantom_dirs[i].string()});
    fields.push_back({"measurements", acq_dirs[i].string()});
  }
  const MahalanobisMetric m = fit_metric(cfg, sets);
  fs::create_directories(out);
  save_metric(out / "metric.bin", m);
  std::ostringstream r;
  r.precision(17);
  r << m.ridge;
  fields.push_back({"dictionary", dict_dir.string()});
  fields.push_back({"ridge", r.str()});
  write_manifest(out, "train-metric", fields, cfg);
  return m;
}

inline EstimateResult cmd_reconstruct(const ExperimentConfig &cfg, const fs::path &acq_dir, const fs::path &dict_dir,
                                      Method method, const std::optional<fs::path> &metric_file,
                                      const fs::path &out) {
  require_file(acq_dir / "measurements.bin", "measurements");
  require_file(dict_dir / "dictionary.bin", "dictionary");
  const MeasurementSet y = load_measurements(acq_dir / "measurements.bin");
  const Dictionary dict = load_dictionary(dict_dir / "dictionary.bin");
  std::optional<MahalanobisMetric> metric;
  if (method == Method::CsMrfMl) {
    if (!metric_file)
      throw ValidationError("reconstruct: csmrf_ml needs --metric");
    require_file(*metric_file, "metric");
    metric = load_metric(*metric_file);
  }
  const PipelineConfig &p = cfg.pipeline;
  EstimateResult r;
  switch (method) {
  case Method::Oracle: {
    MatchOutput o = oracle_match(y, dict, p.threads, p.background);
    r.maps = std::move(o.maps);
    r.atoms = std::move(o.atoms);
    break;
  }
  case Method::Mrf: r = run_mrf(y, dict, p.threads, p.background); break;
  case Method::CsMrf: r = run_csmrf(y, dict, nullptr, p); break;
  case Method::CsMrfMl: r = run_csmrf(y, dict, &*metric, p); break;
  case Method::Blip: r = run_blip(y, dict, p.blip_iters, p.blip_step, p.threads, p.background); break;
  }
  save_estimate(out, r, nullptr);
  if (!r.solver_traces.empty()) {
    const auto path = out / "solver_trace.csv";
    auto os = io::open_out(path);
    os.precision(17);
    os << "frame,iteration,objective,grad_norm,step\n";
    for (std::size_t t = 0; t < r.solver_traces.size(); ++t)
      for (const auto &row : r.solver_traces[t])
        os << t << ',' << row.iteration << ',' << row.objective << ',' << row.grad_norm << ',' << row.step << '\n';
    io::finish(os, path);
  }
  std::vector<std::pair<std::string, std::string>> fields{
    {"method", to_string(method)}, {"measurements", acq_dir.string()}, {"dictionary", dict_dir.string()}};
  if (metric_file)
    fields.push_back({"metric", metric_file->string()});
  write_manifest(out, "reconstruct", fields, cfg);
  return r;
}

/// Scores the maps in `est_dir` against `truth_dir`; writes scores.csv.
inline RunScore cmd_evaluate(const ExperimentConfig &cfg, const fs::path &est_dir, const fs::path &truth_dir,
                             const std::string &label, std::uint64_t seed, const fs::path &out) {
  const RunScore s = score_run(load_parameter_maps(est_dir), load_parameter_maps(truth_dir));
  fs::create_directories(out);
  const auto p = out / "scores.csv";
  auto os = io::open_out(p);
  write_score_csv(os, {{label, seed, s}});
  io::finish(os, p);
  write_manifest(out, "evaluate",
                 {{"estimate", est_dir.string()}, {"truth", truth_dir.string()}, {"label", label}}, cfg);
  return s;
}

/// PGM renderings of the maps in `est_dir`, scaled by the truth maps when
/// given so several estimates share one display range.
inline void cmd_export(const fs::path &est_dir, const std::optional<fs::path> &truth_dir, const fs::path &out) {
  const ParameterMaps est = load_parameter_maps(est_dir);
  std::optional<ParameterMaps> truth;
  if (truth_dir)
    truth = load_parameter_maps(*truth_dir);
  fs::create_directories(out);
  const std::array<const RealMap *, 4> e{&est.t1, &est.t2, &est.b0, &est.density};
  for (std::size_t m = 0; m < 4; ++m) {
    const RealMap *ref = e[m];
    if (truth)
      ref = std::array<const RealMap *, 4>{&truth->t1, &truth->t2, &truth->b0, &truth->density}[m];
    std::string name = kMapFiles[m];
    name.replace(name.size() - 4, 4, ".pgm");
    export_pgm(*e[m], out / name, self_normalization(*ref));
  }
}

/// Every configured method on every configured seed.
inline std::vector<ScoreRow> cmd_run(const ExperimentConfig &cfg, const fs::path &out, const Log &log = {}) {
  std::vector<ScoreRow> rows;
  for (const SeedRun &run : run_experiment(cfg, out, log))
    for (const auto &r : score_rows(run))
      rows.push_back(r);
  fs::create_directories(out);
  {
    const auto p = out / "scores.csv";
    auto os = io::open_out(p);
    write_score_csv(os, rows);
    io::finish(os, p);
  }
  {
    const auto p = out / "aggregate.csv";
    auto os = io::open_out(p);
    write_aggregate_csv(os, aggregate(rows));
    io::finish(os, p);
  }
  write_manifest(out, "run", {}, cfg);
  return rows;
}

inline StudyResult cmd_study(StudyKind kind, const ExperimentConfig &cfg, const fs::path &out, const Log &log = {}) {
  return run_study(kind, cfg, out, log);
}

} // namespace mrf
