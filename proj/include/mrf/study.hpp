#pragma once

// Parameter sweeps over the experiment runner: sampling ratio, sequence
// length, sampling strategy and matching metric.

#include "mrf/config.hpp"
#include "mrf/eval.hpp"
#include "mrf/experiment.hpp"
#include "mrf/io.hpp"

#include <algorithm>
#include <filesystem>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

namespace mrf {

enum class StudyKind { Ratio, Length, Strategy, Metric };

inline std::string to_string(StudyKind k) {
  switch (k) {
  case StudyKind::Ratio: return "ratio";
  case StudyKind::Length: return "length";
  case StudyKind::Strategy: return "strategy";
  case StudyKind::Metric: return "metric";
  }
  return "?";
}

inline StudyKind parse_study(const std::string &s) {
  for (StudyKind k : {StudyKind::Ratio, StudyKind::Length, StudyKind::Strategy, StudyKind::Metric})
    if (to_string(k) == s)
      return k;
  throw ValidationError("unknown study '" + s + "' (ratio, length, strategy, metric)");
}

struct StudySetting {
  std::string label;
  double x = 0; // swept value; NaN for the baseline row
  ExperimentConfig cfg;
};

inline std::vector<Index> ratio_sweep(Index rows) {
  std::vector<Index> out;
  for (Index r : {2, 4, 8, 16})
    if (2 * r <= rows)
      out.push_back(r);
  return out;
}

inline std::vector<StudySetting> study_settings(StudyKind kind, const ExperimentConfig &base) {
  std::vector<StudySetting> out;
  switch (kind) {
  case StudyKind::Ratio:
    for (Index r : ratio_sweep(base.rows)) {
      StudySetting s{"R=" + std::to_string(r), static_cast<double>(r), base};
      s.cfg.rows_per_frame = r;
      out.push_back(s);
    }
    break;
  case StudyKind::Length:
    for (Index t : {100, 200, 300, 400, 500}) {
      StudySetting s{"T=" + std::to_string(t), static_cast<double>(t), base};
      s.cfg.frames = t;
      out.push_back(s);
    }
    break;
  case StudyKind::Strategy:
    for (Index c : {2, 4, 6, 8}) {
      StudySetting s{"c=" + std::to_string(c), static_cast<double>(c), base};
      s.cfg.sampling = SamplingStrategy::Alternating;
      s.cfg.center = c;
      out.push_back(s);
    }
    {
      StudySetting s{"independent", std::numeric_limits<double>::quiet_NaN(), base};
      s.cfg.sampling = SamplingStrategy::Independent;
      out.push_back(s);
    }
    break;
  case StudyKind::Metric: {
    StudySetting s{"metric", std::numeric_limits<double>::quiet_NaN(), base};
    s.cfg.methods = {Method::CsMrf, Method::CsMrfMl};
    s.cfg.metric = true;
    out.push_back(s);
    break;
  }
  }
  for (auto &s : out)
    s.cfg.validate();
  return out;
}

struct StudyRow {
  std::string setting;
  double x = 0;
  std::string method;
  std::uint64_t seed = 0;
  RunScore score;
  double accuracy = 0;
};

struct StudyAggregate {
  std::string setting;
  double x = 0;
  std::string method;
  std::string map;
  MeanStd psnr, ssim, accuracy;
};

inline std::vector<StudyAggregate> aggregate_study(const std::vector<StudyRow> &rows) {
  std::vector<std::pair<std::string, std::string>> order;
  std::map<std::pair<std::string, std::string>, std::vector<const StudyRow *>> groups;
  for (const auto &r : rows) {
    const auto key = std::make_pair(r.setting, r.method);
    if (!groups.count(key))
      order.push_back(key);
    groups[key].push_back(&r);
  }
  std::vector<StudyAggregate> out;
  for (const auto &key : order) {
    const auto &g = groups[key];
    std::vector<double> acc;
    for (const StudyRow *r : g)
      acc.push_back(r->accuracy);
    for (std::size_t m = 0; m < 4; ++m) {
      std::vector<double> p, s;
      for (const StudyRow *r : g) {
        p.push_back(r->score.maps[m].psnr);
        s.push_back(r->score.maps[m].ssim);
      }
      out.push_back({key.first, g.front()->x, key.second, kMapNames[m], mean_std(p), mean_std(s), mean_std(acc)});
    }
  }
  return out;
}

inline void write_study_csv(std::ostream &os, const std::vector<StudyRow> &rows) {
  os << "setting,x,method,seed,map,psnr_db,ssim,accuracy\n";
  os.precision(10);
  for (const auto &r : rows)
    for (std::size_t m = 0; m < 4; ++m)
      os << r.setting << ',' << r.x << ',' << r.method << ',' << r.seed << ',' << kMapNames[m] << ','
         << r.score.maps[m].psnr << ',' << r.score.maps[m].ssim << ',' << r.accuracy << '\n';
}

inline void write_study_aggregate_csv(std::ostream &os, const std::vector<StudyAggregate> &rows) {
  os << "setting,x,method,map,psnr_mean,psnr_std,ssim_mean,ssim_std,accuracy_mean,accuracy_std\n";
  os.precision(10);
  for (const auto &r : rows)
    os << r.setting << ',' << r.x << ',' << r.method << ',' << r.map << ',' << r.psnr.mean << ',' << r.psnr.std
       << ',' << r.ssim.mean << ',' << r.ssim.std << ',' << r.accuracy.mean << ',' << r.accuracy.std << '\n';
}

/// Average ranks, ties sharing the mean rank.
inline std::vector<double> ranks(const std::vector<double> &v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]])
      ++j;
    for (std::size_t k = i; k <= j; ++k)
      r[idx[k]] = 0.5 * static_cast<double>(i + j) + 1.0;
    i = j + 1;
  }
  return r;
}

inline double spearman(const std::vector<double> &x, const std::vector<double> &y) {
  if (x.size() != y.size() || x.size() < 2)
    throw ValidationError("spearman: need two equal-length samples of size >= 2");
  const auto rx = ranks(x), ry = ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (!(sxx > 0 && syy > 0))
    return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

inline void write_manifest(const std::filesystem::path &dir, const std::string &stage,
                           const std::vector<std::pair<std::string, std::string>> &fields,
                           const ExperimentConfig &cfg) {
  std::filesystem::create_directories(dir);
  const auto p = dir / "manifest.txt";
  auto os = io::open_out(p);
  os << "# stage: " << stage << '\n';
  for (const auto &[k, v] : fields)
    os << "# " << k << ": " << v << '\n';
  os << '\n';
  write_config(os, cfg);
  io::finish(os, p);
}

/// Maps, atom indices and truth-normalized PGM renderings of one estimate.
inline void save_estimate(const std::filesystem::path &dir, const EstimateResult &r, const ParameterMaps *truth) {
  std::filesystem::create_directories(dir);
  save_parameter_maps(dir, r.maps);
  save_map(dir / "atoms.map", r.atoms);
  const std::array<const RealMap *, 4> est{&r.maps.t1, &r.maps.t2, &r.maps.b0, &r.maps.density};
  const std::array<const RealMap *, 4> ref =
    truth ? std::array<const RealMap *, 4>{&truth->t1, &truth->t2, &truth->b0, &truth->density} : est;
  for (std::size_t m = 0; m < 4; ++m) {
    std::string name = kMapFiles[m];
    name.replace(name.size() - 4, 4, ".pgm");
    export_pgm(*est[m], dir / name, self_normalization(*ref[m]));
  }
  if (!r.residual_trace.empty()) {
    const auto p = dir / "residual.csv";
    auto os = io::open_out(p);
    os.precision(17);
    os << "iter,residual\n";
    for (std::size_t i = 0; i < r.residual_trace.size(); ++i)
      os << i + 1 << ',' << r.residual_trace[i] << '\n';
    io::finish(os, p);
  }
  if (!r.warnings.empty()) {
    const auto p = dir / "warnings.csv";
    auto os = io::open_out(p);
    os << "frame,pass\n";
    for (const auto &w : r.warnings)
      os << w.frame << ',' << w.pass << '\n';
    io::finish(os, p);
  }
}

inline void save_seed_run(const std::filesystem::path &dir, const SeedRun &run) {
  const ParameterMaps &truth = run.scenario.maps;
  save_estimate(dir / "truth", {truth, run.scenario.truth_atoms, {}, {}, {}, {}}, &truth);
  save_map(dir / "truth" / "labels.map", run.scenario.labels);
  for (const auto &m : run.methods)
    save_estimate(dir / to_string(m.method), m.result, &truth);
}

using Log = std::function<void(const std::string &)>;

/// Runs every seed of one config, writing per-seed directories under `dir`
/// when it is non-empty.
inline std::vector<SeedRun> run_experiment(const ExperimentConfig &cfg, const std::filesystem::path &dir,
                                           const Log &log = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  const ExperimentContext ctx = prepare(cfg);
  if (log)
    log("prepared " + std::to_string(ctx.dictionary.size()) + " atoms, sigma " + std::to_string(ctx.sigma) +
        (ctx.metric ? ", metric trained" : "") + " in " +
        std::to_string(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()) + " s");
  std::vector<SeedRun> runs;
  for (std::uint64_t seed : cfg.seeds) {
    SeedRun run = run_seed(cfg, seed, ctx.sequence, ctx.dictionary, ctx.metric ? &*ctx.metric : nullptr, ctx.sigma);
    if (log)
      for (const auto &m : run.methods)
        log("seed " + std::to_string(seed) + " " + to_string(m.method) + ": T1 " +
            std::to_string(m.score.maps[0].psnr) + " T2 " + std::to_string(m.score.maps[1].psnr) + " B0 " +
            std::to_string(m.score.maps[2].psnr) + " dB, accuracy " + std::to_string(m.accuracy) + ", " +
            std::to_string(m.seconds) + " s");
    if (!dir.empty())
      save_seed_run(dir / ("seed_" + std::to_string(seed)), run);
    // Drop the heavy per-frame sequences once written.
    for (auto &m : run.methods)
      m.result.sequence = {};
    run.scenario.truth = {};
    runs.push_back(std::move(run));
  }
  return runs;
}

struct StudyResult {
  std::vector<StudyRow> rows;
  std::vector<StudyAggregate> aggregate;
};

inline StudyResult run_study(StudyKind kind, const ExperimentConfig &base, const std::filesystem::path &dir,
                             const Log &log = {}) {
  StudyResult res;
  for (const StudySetting &s : study_settings(kind, base)) {
    if (log)
      log("setting " + s.label);
    const auto sub = dir.empty() ? std::filesystem::path{} : dir / "runs" / s.label;
    if (!sub.empty())
      write_manifest(sub, "study " + to_string(kind), {{"setting", s.label}}, s.cfg);
    for (const SeedRun &run : run_experiment(s.cfg, sub, log))
      for (const auto &m : run.methods)
        res.rows.push_back({s.label, s.x, to_string(m.method), run.seed, m.score, m.accuracy});
  }
  res.aggregate = aggregate_study(res.rows);
  if (!dir.empty()) {
    write_manifest(dir, "study " + to_string(kind), {}, base);
    {
      const auto p = dir / "scores.csv";
      auto os = io::open_out(p);
      write_study_csv(os, res.rows);
      io::finish(os, p);
    }
    const auto p = dir / "aggregate.csv";
    auto os = io::open_out(p);
    write_study_aggregate_csv(os, res.aggregate);
    io::finish(os, p);
  }
  return res;
}

} // namespace mrf
