#include "mrf/csrecon.hpp"
#include "mrf/sampling.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

namespace {

using namespace mrf;

Image random_image(Index n, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> g;
  Image x(n);
  for (Index i = 0; i < n; ++i)
    x[i] = {g(rng), g(rng)};
  return x;
}

std::vector<Index> all_rows(Index n) {
  std::vector<Index> v;
  for (Index i = 0; i < n; ++i)
    v.push_back(i);
  return v;
}

std::vector<Index> random_mask(Index n, Index count, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Index> v = all_rows(n);
  std::shuffle(v.begin(), v.end(), rng);
  v.resize(static_cast<std::size_t>(count));
  std::sort(v.begin(), v.end());
  return v;
}

CsConfig smooth_config(double aw, double atv) {
  CsConfig c;
  c.alpha_wavelet = aw;
  c.alpha_tv = atv;
  c.smooth_mu = 1e-6;
  return c;
}

// Independent evaluation: explicit loops, terms summed back to front.
double reference_objective(const Image &x, const KRows &y, const std::vector<Index> &mask, Index rows, Index cols,
                           const CsConfig &cfg) {
  const KRows fx = forward(x, rows, cols, mask);
  double data = 0;
  for (Index i = fx.rows() - 1; i >= 0; --i)
    for (Index j = fx.cols() - 1; j >= 0; --j)
      data += std::norm(fx(i, j) - y(i, j));
  const Image w = Daubechies4(rows, cols, cfg.wavelet_levels).forward(x);
  double wsum = 0;
  for (Index i = w.size() - 1; i >= 0; --i)
    wsum += std::sqrt(std::norm(w[i]) + cfg.smooth_mu);
  double tv = 0;
  for (Index r = rows - 1; r >= 0; --r)
    for (Index c = cols - 1; c >= 0; --c) {
      const Complex v = x[r * cols + c];
      const Complex right = x[r * cols + (c + 1) % cols];
      const Complex down = x[((r + 1) % rows) * cols + c];
      tv += std::sqrt(std::norm(right - v) + cfg.smooth_mu) + std::sqrt(std::norm(down - v) + cfg.smooth_mu);
    }
  return data + cfg.alpha_wavelet * wsum + cfg.alpha_tv * tv;
}

TEST(Objective, ExactDataNoPrior) {
  const Index n = 8;
  const Image x = random_image(n * n, 1);
  const auto mask = all_rows(n);
  const KRows y = forward(x, n, n, mask);
  CsConfig cfg = smooth_config(0, 0);
  EXPECT_NEAR(objective(adjoint(y, mask, n, n), y, mask, n, n, cfg), 0.0, 1e-12);
}

TEST(Objective, ZeroImageClosedForm) {
  const Index n = 16;
  const auto mask = random_mask(n, 5, 2);
  const KRows y = KRows::Zero(5, n);
  const CsConfig cfg = smooth_config(0.3, 0.7);
  const double expected = 0.3 * n * n * std::sqrt(cfg.smooth_mu) + 0.7 * 2 * n * n * std::sqrt(cfg.smooth_mu);
  EXPECT_NEAR(objective(Image::Zero(n * n), y, mask, n, n, cfg), expected, 1e-12);
}

TEST(Objective, MatchesIndependentRecomputation) {
  const Index n = 8;
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto mask = random_mask(n, 4, s);
    const Image x = random_image(n * n, 10 + s);
    const KRows y = forward(random_image(n * n, 20 + s), n, n, mask);
    const CsConfig cfg = smooth_config(0.05, 0.02);
    const double a = objective(x, y, mask, n, n, cfg);
    EXPECT_NEAR(a, reference_objective(x, y, mask, n, n, cfg), 1e-10 * std::abs(a));
  }
}

TEST(Gradient, CentralDifferencesAgree) {
  const Index n = 8;
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto mask = random_mask(n, 3, 100 + s);
    const Image x = random_image(n * n, 200 + s);
    const KRows y = forward(random_image(n * n, 300 + s), n, n, mask);
    const CsConfig cfg = smooth_config(0.05, 0.05);
    const Image g = gradient(x, y, mask, n, n, cfg);
    Image fd(n * n);
    const double h = 1e-6;
    for (Index i = 0; i < n * n; ++i) {
      double parts[2];
      for (int p = 0; p < 2; ++p) {
        Image e = Image::Zero(n * n);
        e[i] = p == 0 ? Complex(1, 0) : Complex(0, 1);
        parts[p] = (objective(x + h * e, y, mask, n, n, cfg) - objective(x - h * e, y, mask, n, n, cfg)) / (2 * h);
      }
      fd[i] = {parts[0], parts[1]};
    }
    EXPECT_LT((g - fd).norm() / g.norm(), 1e-4) << "seed " << s;
  }
}

TEST(Gradient, VanishesAtExactSolution) {
  const Index n = 8;
  const Image x = random_image(n * n, 4);
  const auto mask = all_rows(n);
  const KRows y = forward(x, n, n, mask);
  EXPECT_LT(gradient(x, y, mask, n, n, smooth_config(0, 0)).norm(), 1e-12);
}

TEST(Gradient, DataTermIsAffine) {
  const Index n = 8;
  const auto mask = random_mask(n, 4, 3);
  const Image x = random_image(n * n, 5);
  const KRows zero = KRows::Zero(4, n);
  const CsConfig cfg = smooth_config(0, 0);
  EXPECT_LT((gradient(2.0 * x, zero, mask, n, n, cfg) - 2.0 * gradient(x, zero, mask, n, n, cfg)).norm(),
            1e-12 * x.norm());
}

TEST(Solver, LeastSquaresWithFullMask) {
  const Index n = 16;
  const Image truth = random_image(n * n, 6);
  const auto mask = all_rows(n);
  const KRows y = forward(truth, n, n, mask);
  CsConfig cfg = smooth_config(0, 0);
  const CsResult r = reconstruct_frame(y, mask, n, n, cfg, Image::Zero(n * n));
  EXPECT_LT((r.image - adjoint(y, mask, n, n)).norm(), 1e-8 * truth.norm());
}

TEST(Solver, ObjectiveNonIncreasing) {
  const Index n = 16;
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto mask = random_mask(n, 6, 40 + s);
    const KRows y = forward(random_image(n * n, 50 + s), n, n, mask);
    CsConfig cfg;
    cfg.alpha_wavelet = 0.05;
    cfg.alpha_tv = 0.05;
    cfg.record_trace = true;
    const CsResult r = reconstruct_frame(y, mask, n, n, cfg);
    ASSERT_GE(r.trace.size(), 2u);
    for (std::size_t i = 1; i < r.trace.size(); ++i)
      EXPECT_LE(r.trace[i].objective, r.trace[i - 1].objective) << "seed " << s << " iter " << i;
  }
}

TEST(Solver, TraceCsv) {
  std::ostringstream os;
  write_trace_csv(os, {{0, 1.5, 2.0, 0.0}, {1, 1.0, 0.5, 1.0}});
  EXPECT_EQ(os.str().substr(0, os.str().find('\n')), "iteration,objective,grad_norm,step");
}

TEST(Solver, InvalidConfigRejected) {
  CsConfig c;
  c.shrink = 1.0;
  EXPECT_THROW(c.validate(), ValidationError);
  c = CsConfig{};
  c.smooth_mu = 0;
  EXPECT_THROW(c.validate(), ValidationError);
  c = CsConfig{};
  c.alpha_tv = -1;
  EXPECT_THROW(c.validate(), ValidationError);
}

// Primal-dual (Chambolle-Pock) solve of min ||F_u x - y||^2 + a * sum |Dx|_1
// with the exact (unsmoothed) anisotropic complex L1.
Image primal_dual_tv(const KRows &y, const std::vector<Index> &mask, Index n, double a, int iters) {
  const auto full = all_rows(n);
  const double tau = 0.3, sigma = 0.3; // tau * sigma * ||D||^2 <= 0.72
  Image x = adjoint(y, mask, n, n), xbar = x;
  Image p = Image::Zero(2 * n * n);
  KRows y_full = KRows::Zero(n, n);
  std::vector<char> sampled(static_cast<std::size_t>(n), 0);
  for (std::size_t j = 0; j < mask.size(); ++j) {
    y_full.row(mask[j]) = y.row(static_cast<Index>(j));
    sampled[static_cast<std::size_t>(mask[j])] = 1;
  }
  for (int it = 0; it < iters; ++it) {
    p += sigma * detail::finite_diff(xbar, n, n);
    for (Index i = 0; i < p.size(); ++i)
      if (std::abs(p[i]) > a)
        p[i] *= a / std::abs(p[i]);
    const Image v = x - tau * detail::finite_diff_adjoint(p, n, n);
    KRows z = forward(v, n, n, full);
    for (Index r = 0; r < n; ++r)
      if (sampled[static_cast<std::size_t>(r)])
        z.row(r) = (z.row(r) + 2 * tau * y_full.row(r)) / (1 + 2 * tau);
    const Image x_new = adjoint(z, full, n, n);
    xbar = 2.0 * x_new - x;
    x = x_new;
  }
  return x;
}

TEST(Solver, PiecewiseConstantTvRecovery) {
  const Index n = 16;
  Image truth = Image::Zero(n * n);
  for (Index r = 0; r < n; ++r)
    for (Index c = 0; c < n; ++c) {
      double v = 1.0;
      if (r >= 3 && r < 11 && c >= 4 && c < 13)
        v = 2.0;
      if (r >= 9 && c < 6)
        v = 0.5;
      truth[r * n + c] = v;
    }
  const auto mask = draw_mask_sequence(n, n / 2, 2, 1, 4.0, 3).frames.front();
  const KRows y = forward(truth, n, n, mask);
  CsConfig cfg;
  cfg.alpha_wavelet = 0;
  cfg.alpha_tv = 0.01;
  cfg.max_iters = 400;
  const Image x = reconstruct_frame(y, mask, n, n, cfg).image;
  const Image ref = primal_dual_tv(y, mask, n, cfg.alpha_tv, 20000);
  EXPECT_LT((x - truth).norm() / truth.norm(), 0.05);
  EXPECT_LT((ref - truth).norm() / truth.norm(), 0.05);
  EXPECT_LT((x - ref).norm() / ref.norm(), 0.02);
}

} // namespace
