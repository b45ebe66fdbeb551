#pragma once

// Per-frame compressed-sensing reconstruction:
//   min_x ||F_u x - y||^2 + a_w * sum sqrt(|Wx|^2 + mu) + a_tv * sum sqrt(|Dx|^2 + mu)
// with W the 4-tap Daubechies transform and D periodic horizontal/vertical
// first differences, solved by nonlinear conjugate gradient with Armijo
// backtracking.

#include "mrf/core.hpp"
#include "mrf/kspace.hpp"
#include "mrf/wavelet.hpp"

#include <cmath>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

namespace mrf {

struct CsConfig {
  double alpha_wavelet = 0.002;
  double alpha_tv = 0.002;
  double smooth_mu = 1e-15;
  int max_iters = 30;
  double grad_tol = 1e-12;
  double initial_step = 1.0;
  double shrink = 0.5;     // backtracking factor beta
  double armijo = 1e-4;    // sufficient-decrease constant
  int max_backtracks = 20;
  int wavelet_levels = 4;
  bool record_trace = false;

  void validate() const {
    if (alpha_wavelet < 0 || alpha_tv < 0)
      throw ValidationError("cs config: regularization weights must be >= 0");
    if (!(smooth_mu > 0))
      throw ValidationError("cs config: smooth_mu must be > 0");
    if (!(shrink > 0 && shrink < 1))
      throw ValidationError("cs config: shrink must lie in (0,1)");
    if (max_iters < 0 || max_backtracks < 0 || armijo < 0 || !(initial_step > 0) || grad_tol < 0)
      throw ValidationError("cs config: iteration/step parameters must be non-negative");
  }
};

struct SolverTraceRow {
  int iteration;
  double objective;
  double grad_norm;
  double step;
};

struct CsResult {
  Image image;
  int iterations = 0;
  bool line_search_failed = false;
  std::vector<SolverTraceRow> trace;
};

inline void write_trace_csv(std::ostream &os, const std::vector<SolverTraceRow> &trace) {
  os << "iteration,objective,grad_norm,step\n";
  os.precision(17);
  for (const auto &r : trace)
    os << r.iteration << ',' << r.objective << ',' << r.grad_norm << ',' << r.step << '\n';
}

namespace detail {
/// Horizontal then vertical periodic forward differences, stacked.
inline Image finite_diff(const Image &x, Index rows, Index cols) {
  Image d(2 * rows * cols);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) {
      const Index i = r * cols + c;
      d[i] = x[r * cols + (c + 1) % cols] - x[i];
      d[rows * cols + i] = x[((r + 1) % rows) * cols + c] - x[i];
    }
  return d;
}

inline Image finite_diff_adjoint(const Image &d, Index rows, Index cols) {
  const Index n = rows * cols;
  Image x(n);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) {
      const Index i = r * cols + c;
      x[i] = d[r * cols + (c + cols - 1) % cols] - d[i] + d[n + ((r + rows - 1) % rows) * cols + c] - d[n + i];
    }
  return x;
}

inline double smoothed_l1(const Image &v, double mu) {
  double s = 0;
  for (Index i = 0; i < v.size(); ++i)
    s += std::sqrt(std::norm(v[i]) + mu);
  return s;
}

inline Image smoothed_l1_grad(const Image &v, double mu) {
  Image g(v.size());
  for (Index i = 0; i < v.size(); ++i)
    g[i] = v[i] / std::sqrt(std::norm(v[i]) + mu);
  return g;
}

inline double real_dot(const Image &a, const Image &b) { return a.dot(b).real(); }
} // namespace detail

/// One frame's reconstruction problem. Holds the sampled rows, their data
/// and the sparsifying transforms.
class CsProblem {
public:
  CsProblem(KRows y, std::vector<Index> mask, Index rows, Index cols, CsConfig cfg)
    : y_(std::move(y)), mask_(std::move(mask)), rows_(rows), cols_(cols), cfg_(cfg),
      wavelet_(rows, cols, cfg.wavelet_levels) {
    cfg_.validate();
    if (y_.rows() != static_cast<Index>(mask_.size()) || y_.cols() != cols)
      throw ValidationError("cs problem: measurement shape does not match mask");
  }

  const CsConfig &config() const { return cfg_; }

  double objective(const Image &x) const {
    const KRows r = forward(x, rows_, cols_, mask_) - y_;
    double f = r.squaredNorm();
    if (cfg_.alpha_wavelet > 0)
      f += cfg_.alpha_wavelet * detail::smoothed_l1(wavelet_.forward(x), cfg_.smooth_mu);
    if (cfg_.alpha_tv > 0)
      f += cfg_.alpha_tv * detail::smoothed_l1(detail::finite_diff(x, rows_, cols_), cfg_.smooth_mu);
    return f;
  }

  /// Gradient g such that f(x + e v) = f(x) + e Re<g, v> + O(e^2).
  Image gradient(const Image &x) const {
    const KRows r = forward(x, rows_, cols_, mask_) - y_;
    return gradient_from(r, x);
  }

  CsResult solve(const Image &x0) const {
    State s = prepare(x0);
    CsResult out;
    Image g = gradient_from(s.fx - y_, s.x);
    Image d = -g;
    double t0 = cfg_.initial_step;
    double f = value(s, Direction{}, 0.0);
    if (cfg_.record_trace)
      out.trace.push_back({0, f, g.norm(), 0.0});
    for (int it = 0; it < cfg_.max_iters; ++it) {
      const double gnorm = g.norm();
      if (gnorm <= cfg_.grad_tol)
        break;
      const Direction dir = transform(d);
      const double slope = detail::real_dot(g, d);
      double t = t0;
      double ft = value(s, dir, t);
      int bt = 0;
      while (ft > f + cfg_.armijo * t * slope && bt < cfg_.max_backtracks) {
        t *= cfg_.shrink;
        ft = value(s, dir, t);
        ++bt;
      }
      if (ft > f + cfg_.armijo * t * slope) {
        out.line_search_failed = true;
        break;
      }
      if (bt > 2)
        t0 *= cfg_.shrink;
      if (bt < 1)
        t0 /= cfg_.shrink;

      s.x += t * d;
      s.fx += t * dir.fd;
      s.wx += t * dir.wd;
      s.dx += t * dir.dd;
      f = ft;
      out.iterations = it + 1;

      Image g_new = gradient_from(s.fx - y_, s.x);
      const double gg = g.squaredNorm();
      const double beta_fr = g_new.squaredNorm() / gg;
      const double beta_pr = detail::real_dot(g_new, g_new - g) / gg;
      const double beta = std::max(0.0, std::min(beta_pr, beta_fr));
      d = -g_new + beta * d;
      if (detail::real_dot(g_new, d) >= 0)
        d = -g_new;
      g = std::move(g_new);
      if (cfg_.record_trace)
        out.trace.push_back({it + 1, f, g.norm(), t});
    }
    out.image = std::move(s.x);
    return out;
  }

private:
  struct State {
    Image x;
    KRows fx;
    Image wx;
    Image dx;
  };
  struct Direction {
    KRows fd;
    Image wd;
    Image dd;
  };

  State prepare(const Image &x0) const {
    State s{x0, forward(x0, rows_, cols_, mask_), Image(), Image()};
    if (cfg_.alpha_wavelet > 0)
      s.wx = wavelet_.forward(x0);
    if (cfg_.alpha_tv > 0)
      s.dx = detail::finite_diff(x0, rows_, cols_);
    return s;
  }

  Direction transform(const Image &d) const {
    Direction dir{forward(d, rows_, cols_, mask_), Image(), Image()};
    if (cfg_.alpha_wavelet > 0)
      dir.wd = wavelet_.forward(d);
    if (cfg_.alpha_tv > 0)
      dir.dd = detail::finite_diff(d, rows_, cols_);
    return dir;
  }

  /// Objective at x + t d from cached transforms of x and d.
  double value(const State &s, const Direction &dir, double t) const {
    double f = 0;
    if (t == 0) {
      f = (s.fx - y_).squaredNorm();
      if (cfg_.alpha_wavelet > 0)
        f += cfg_.alpha_wavelet * detail::smoothed_l1(s.wx, cfg_.smooth_mu);
      if (cfg_.alpha_tv > 0)
        f += cfg_.alpha_tv * detail::smoothed_l1(s.dx, cfg_.smooth_mu);
      return f;
    }
    f = (s.fx + t * dir.fd - y_).squaredNorm();
    if (cfg_.alpha_wavelet > 0)
      f += cfg_.alpha_wavelet * detail::smoothed_l1(s.wx + t * dir.wd, cfg_.smooth_mu);
    if (cfg_.alpha_tv > 0)
      f += cfg_.alpha_tv * detail::smoothed_l1(s.dx + t * dir.dd, cfg_.smooth_mu);
    return f;
  }

  Image gradient_from(const KRows &residual, const Image &x) const {
    Image g = 2.0 * adjoint(residual, mask_, rows_, cols_);
    if (cfg_.alpha_wavelet > 0)
      g += cfg_.alpha_wavelet * wavelet_.inverse(detail::smoothed_l1_grad(wavelet_.forward(x), cfg_.smooth_mu));
    if (cfg_.alpha_tv > 0)
      g += cfg_.alpha_tv *
           detail::finite_diff_adjoint(detail::smoothed_l1_grad(detail::finite_diff(x, rows_, cols_), cfg_.smooth_mu),
                                       rows_, cols_);
    return g;
  }

  KRows y_;
  std::vector<Index> mask_;
  Index rows_, cols_;
  CsConfig cfg_;
  Daubechies4 wavelet_;
};

inline double objective(const Image &x, const KRows &y, std::span<const Index> mask, Index rows, Index cols,
                        const CsConfig &cfg) {
  return CsProblem(y, {mask.begin(), mask.end()}, rows, cols, cfg).objective(x);
}

inline Image gradient(const Image &x, const KRows &y, std::span<const Index> mask, Index rows, Index cols,
                      const CsConfig &cfg) {
  return CsProblem(y, {mask.begin(), mask.end()}, rows, cols, cfg).gradient(x);
}

/// Starts from x0, or the zero-filled adjoint of y when absent.
inline CsResult reconstruct_frame(const KRows &y, std::span<const Index> mask, Index rows, Index cols,
                                  const CsConfig &cfg, const std::optional<Image> &x0 = std::nullopt) {
  CsProblem problem(y, {mask.begin(), mask.end()}, rows, cols, cfg);
  return problem.solve(x0 ? *x0 : adjoint(y, mask, rows, cols));
}

} // namespace mrf
