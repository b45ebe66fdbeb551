#pragma once

// Estimators: CS reconstruction followed by (metric) matching, plain MRF
// matching, and the projected-Landweber (BLIP) baseline.

#include "mrf/core.hpp"
#include "mrf/csrecon.hpp"
#include "mrf/matching.hpp"
#include "mrf/parallel.hpp"

#include <optional>
#include <string>
#include <vector>

namespace mrf {

enum class Method { Oracle, Mrf, CsMrf, CsMrfMl, Blip };

inline std::string to_string(Method m) {
  switch (m) {
  case Method::Oracle: return "oracle";
  case Method::Mrf: return "mrf";
  case Method::CsMrf: return "csmrf";
  case Method::CsMrfMl: return "csmrf_ml";
  case Method::Blip: return "blip";
  }
  return "?";
}

inline Method parse_method(const std::string &s) {
  for (Method m : {Method::Oracle, Method::Mrf, Method::CsMrf, Method::CsMrfMl, Method::Blip})
    if (to_string(m) == s)
      return m;
  throw ValidationError("unknown method '" + s + "'");
}

struct PipelineConfig {
  CsConfig cs;
  int outer_iters = 1;
  int blip_iters = 16;
  double blip_step = 1.0;
  double background = 0.1; // density cut, as a fraction of the largest estimate
  int threads = 0;

  void validate() const {
    cs.validate();
    if (background < 0 || background >= 1)
      throw ValidationError("pipeline: background must lie in [0, 1)");
    if (outer_iters < 1)
      throw ValidationError("pipeline: outer_iters must be >= 1");
    if (blip_iters < 1)
      throw ValidationError("pipeline: blip_iters must be >= 1");
    if (!(blip_step > 0))
      throw ValidationError("pipeline: blip_step must be > 0");
  }
};

struct FrameWarning {
  Index frame;
  int pass;
};

struct EstimateResult {
  ParameterMaps maps;
  IndexMap atoms;
  ImageSequence sequence;              // final replaced sequence
  std::vector<FrameWarning> warnings;  // frames whose line search failed
  std::vector<double> residual_trace;  // BLIP: ||Y - F_u X|| after each iteration
  std::vector<std::vector<SolverTraceRow>> solver_traces; // per frame, last pass, when recorded
};

/// Reconstructs every frame by the CS objective, starting from `init`.
inline ImageSequence cs_reconstruct(const MeasurementSet &y, const ImageSequence &init, const CsConfig &cfg,
                                    std::vector<FrameWarning> *warnings = nullptr, int pass = 0,
                                    std::vector<std::vector<SolverTraceRow>> *traces = nullptr,
                                    int threads = 0) {
  ImageSequence x(y.rows, y.cols, y.frames());
  std::vector<char> failed(static_cast<std::size_t>(y.frames()), 0);
  if (traces)
    traces->assign(static_cast<std::size_t>(y.frames()), {});
  parallel_for(
    y.frames(),
    [&](long t) {
      const auto ut = static_cast<std::size_t>(t);
      CsProblem problem(y.y[ut], y.masks.frames[ut], y.rows, y.cols, cfg);
      CsResult r = problem.solve(init.frame(t));
      x.frame(t) = r.image;
      failed[ut] = r.line_search_failed;
      if (traces)
        (*traces)[ut] = std::move(r.trace);
    },
    threads);
  if (warnings)
    for (Index t = 0; t < y.frames(); ++t)
      if (failed[static_cast<std::size_t>(t)])
        warnings->push_back({t, pass});
  return x;
}

/// Zero-filled initialization, per-frame CS update, then per-voxel matching
/// (learned metric when given, L2 otherwise) with replacement by rho * atom.
/// Extra outer passes warm-start the frame update from the replaced sequence.
inline EstimateResult run_csmrf(const MeasurementSet &y, const Dictionary &dict, const MahalanobisMetric *metric,
                                const PipelineConfig &cfg) {
  cfg.validate();
  const Matcher matcher(dict, metric);
  EstimateResult res;
  ImageSequence x = adjoint_sequence(y, cfg.threads);
  for (int pass = 0; pass < cfg.outer_iters; ++pass) {
    const bool last = pass + 1 == cfg.outer_iters;
    x = cs_reconstruct(y, x, cfg.cs, &res.warnings, pass,
                       (last && cfg.cs.record_trace) ? &res.solver_traces : nullptr, cfg.threads);
    MatchOutput m = match_image(x, matcher, cfg.threads, cfg.background);
    x = std::move(m.replaced);
    res.maps = std::move(m.maps);
    res.atoms = std::move(m.atoms);
  }
  res.sequence = std::move(x);
  return res;
}

/// Zero-filled reconstruction matched with the L2 inner product.
inline EstimateResult run_mrf(const MeasurementSet &y, const Dictionary &dict, int threads = 0,
                              double background = 0) {
  MatchOutput m = match_image(adjoint_sequence(y, threads), dict, nullptr, threads, background);
  return {std::move(m.maps), std::move(m.atoms), std::move(m.replaced), {}, {}, {}};
}

inline double data_residual(const MeasurementSet &y, const ImageSequence &x, int threads = 0) {
  std::vector<double> per_frame(static_cast<std::size_t>(y.frames()));
  parallel_for(
    y.frames(),
    [&](long t) {
      const auto ut = static_cast<std::size_t>(t);
      per_frame[ut] = (y.y[ut] - forward(x.frame(t), y.rows, y.cols, y.masks.frames[ut])).squaredNorm();
    },
    threads);
  double s = 0;
  for (double v : per_frame)
    s += v;
  return std::sqrt(s);
}

/// Projected Landweber: X <- P(X + step * F_u^H (Y - F_u X)) where P is the
/// per-voxel projection onto {rho * atom : rho >= 0}. Starts from X = 0.
/// The background cut applies to the returned maps only, never to the iterate.
inline EstimateResult run_blip(const MeasurementSet &y, const Dictionary &dict, int iters = 16, double step = 1.0,
                               int threads = 0, double background = 0) {
  if (iters < 1 || !(step > 0))
    throw ValidationError("run_blip: need iters >= 1 and step > 0");
  const Matcher matcher(dict);
  EstimateResult res;
  ImageSequence x(y.rows, y.cols, y.frames());
  for (int it = 0; it < iters; ++it) {
    ImageSequence z(y.rows, y.cols, y.frames());
    parallel_for(
      y.frames(),
      [&](long t) {
        const auto ut = static_cast<std::size_t>(t);
        const auto &rows = y.masks.frames[ut];
        const KRows r = y.y[ut] - forward(x.frame(t), y.rows, y.cols, rows);
        z.frame(t) = x.frame(t) + step * adjoint(r, rows, y.rows, y.cols);
      },
      threads);
    MatchOutput m = match_image(z, matcher, threads);
    x = std::move(m.replaced);
    res.maps = std::move(m.maps);
    res.atoms = std::move(m.atoms);
    res.residual_trace.push_back(data_residual(y, x, threads));
  }
  suppress_background(res.maps, res.atoms, nullptr, background);
  res.sequence = std::move(x);
  return res;
}

} // namespace mrf
