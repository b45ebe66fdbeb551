#include "mrf/io.hpp"
#include "mrf/kspace.hpp"
#include "mrf/sampling.hpp"
#include "mrf/wavelet.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <set>
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

KRows random_rows(Index r, Index c, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> g;
  KRows y(r, c);
  for (Index i = 0; i < r; ++i)
    for (Index j = 0; j < c; ++j)
      y(i, j) = {g(rng), g(rng)};
  return y;
}

std::vector<Index> all_rows(Index n) {
  std::vector<Index> v(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i)
    v[static_cast<std::size_t>(i)] = i;
  return v;
}

// Direct O(N^2) centered unitary DFT of one k-space row.
std::vector<Complex> naive_row(const Image &x, Index rows, Index cols, Index k_row) {
  std::vector<Complex> out(static_cast<std::size_t>(cols));
  const double cr = static_cast<double>(rows / 2), cc = static_cast<double>(cols / 2);
  for (Index kc = 0; kc < cols; ++kc) {
    Complex s = 0;
    for (Index r = 0; r < rows; ++r)
      for (Index c = 0; c < cols; ++c) {
        const double ph = -2.0 * std::numbers::pi *
                          ((k_row - cr) * (r - cr) / static_cast<double>(rows) +
                           (kc - cc) * (c - cc) / static_cast<double>(cols));
        s += x[r * cols + c] * std::polar(1.0, ph);
      }
    out[static_cast<std::size_t>(kc)] = s / std::sqrt(static_cast<double>(rows * cols));
  }
  return out;
}

TEST(Probability, UniformForZeroPower) {
  const Eigen::VectorXd p = init_probability(37, 4, 0.0);
  for (Index i = 0; i < p.size(); ++i)
    EXPECT_NEAR(p[i], 1.0 / 37, 1e-15);
}

TEST(Probability, PeakAtDcAndNormalized) {
  const Eigen::VectorXd p = init_probability(256, 16, 4.0);
  EXPECT_NEAR(p.sum(), 1.0, 1e-12);
  Index arg;
  p.maxCoeff(&arg);
  EXPECT_EQ(arg, dc_row(256));
  for (Index i = 0; i < p.size(); ++i) {
    EXPECT_GT(p[i], 0.0);
    if (i != arg) {
      EXPECT_LT(p[i], p[arg]);
    }
  }
}

TEST(Masks, CenterSetNearestDc) {
  EXPECT_EQ(center_rows(256, 6), (std::vector<Index>{125, 126, 127, 128, 129, 130}));
  EXPECT_EQ(center_rows(256, 3), (std::vector<Index>{127, 128, 129}));
  EXPECT_TRUE(center_rows(64, 0).empty());
}

TEST(Masks, ConsecutiveOverlapLiesInCenter) {
  const MaskSequence ms = draw_mask_sequence(256, 16, 6, 500, 4.0, 11);
  const std::set<Index> c(ms.center.begin(), ms.center.end());
  ASSERT_EQ(ms.frames.size(), 500u);
  for (std::size_t t = 0; t < ms.frames.size(); ++t) {
    const auto &f = ms.frames[t];
    ASSERT_EQ(f.size(), 16u);
    EXPECT_TRUE(std::is_sorted(f.begin(), f.end()));
    EXPECT_EQ(std::set<Index>(f.begin(), f.end()).size(), 16u);
    if (t == 0)
      continue;
    std::vector<Index> both;
    std::set_intersection(f.begin(), f.end(), ms.frames[t - 1].begin(), ms.frames[t - 1].end(),
                          std::back_inserter(both));
    for (Index r : both)
      EXPECT_TRUE(c.count(r)) << "frame " << t << " row " << r;
  }
}

TEST(Masks, NoCenterMeansDisjointFrames) {
  const MaskSequence ms = draw_mask_sequence(256, 16, 0, 300, 4.0, 2);
  for (std::size_t t = 1; t < ms.frames.size(); ++t) {
    std::vector<Index> both;
    std::set_intersection(ms.frames[t].begin(), ms.frames[t].end(), ms.frames[t - 1].begin(),
                          ms.frames[t - 1].end(), std::back_inserter(both));
    EXPECT_TRUE(both.empty());
  }
}

TEST(Masks, FullCenterMatchesIndependentDraws) {
  // With c = n_rows nothing is ever zeroed, so each frame is drawn from p1.
  const MaskSequence ms = draw_mask_sequence(32, 4, 32, 4000, 4.0, 5);
  const Eigen::VectorXd p = init_probability(32, 4, 4.0);
  std::vector<double> hits(32, 0.0);
  for (const auto &f : ms.frames)
    for (Index r : f)
      hits[static_cast<std::size_t>(r)] += 1;
  // Rows near DC must be hit more often than the edge rows.
  EXPECT_GT(hits[16], hits[0]);
  EXPECT_GT(hits[16], hits[31]);
  Index overlaps = 0;
  for (std::size_t t = 1; t < ms.frames.size(); ++t) {
    std::vector<Index> both;
    std::set_intersection(ms.frames[t].begin(), ms.frames[t].end(), ms.frames[t - 1].begin(),
                          ms.frames[t - 1].end(), std::back_inserter(both));
    overlaps += static_cast<Index>(both.size());
  }
  EXPECT_GT(overlaps, 0);
  (void)p;
}

TEST(Masks, Feasibility) {
  EXPECT_THROW(draw_mask_sequence(10, 6, 4, 5, 4.0, 1), InfeasibleError);
  EXPECT_NO_THROW(draw_mask_sequence(10, 6, 6, 50, 4.0, 1));
  EXPECT_NO_THROW(draw_mask_sequence(12, 6, 0, 50, 4.0, 1));
  EXPECT_THROW(draw_mask_sequence(10, 11, 0, 5, 4.0, 1), ValidationError);
}

TEST(Masks, Determinism) {
  EXPECT_EQ(draw_mask_sequence(64, 4, 2, 100, 4.0, 9), draw_mask_sequence(64, 4, 2, 100, 4.0, 9));
  EXPECT_NE(draw_mask_sequence(64, 4, 2, 100, 4.0, 9), draw_mask_sequence(64, 4, 2, 100, 4.0, 10));
  EXPECT_EQ(draw_independent_masks(64, 4, 4.0, 100, 9), draw_independent_masks(64, 4, 4.0, 100, 9));
}

TEST(Masks, IndependentBaseline) {
  const MaskSequence full = draw_independent_masks(16, 16, 4.0, 5, 1);
  EXPECT_TRUE(full.fully_sampled());
  const MaskSequence ms = draw_independent_masks(256, 16, 4.0, 500, 3);
  bool overlap = false;
  for (std::size_t t = 1; t < ms.frames.size() && !overlap; ++t) {
    std::vector<Index> both;
    std::set_intersection(ms.frames[t].begin(), ms.frames[t].end(), ms.frames[t - 1].begin(),
                          ms.frames[t - 1].end(), std::back_inserter(both));
    overlap = !both.empty();
  }
  EXPECT_TRUE(overlap);
}

TEST(Masks, EpiStrideAndShiftCoverage) {
  EXPECT_TRUE(draw_epi_masks(32, 1, 4, 1).fully_sampled());
  const MaskSequence ms = draw_epi_masks(256, 16, 512, 4);
  std::set<Index> shifts;
  for (const auto &f : ms.frames) {
    ASSERT_EQ(f.size(), 16u);
    for (std::size_t i = 1; i < f.size(); ++i)
      EXPECT_EQ(f[i] - f[i - 1], 16);
    shifts.insert(f.front());
  }
  EXPECT_EQ(shifts.size(), 16u);
  EXPECT_THROW(draw_epi_masks(16, 0, 2, 1), ValidationError);
}

TEST(Masks, TextRoundTripAndErrors) {
  const MaskSequence ms = draw_mask_sequence(64, 4, 2, 20, 4.0, 3);
  std::stringstream ss;
  write_masks(ss, ms);
  EXPECT_EQ(read_masks(ss), ms);
  std::istringstream bad("64 4 2 2\n1 2 3 4\n");
  EXPECT_THROW(read_masks(bad), FormatError);
  std::istringstream range("8 1 0 1\n9\n");
  EXPECT_THROW(read_masks(range), FormatError);
  std::istringstream junk("8 1 0 1\n1 x\n");
  EXPECT_THROW(read_masks(junk), FormatError);
}

TEST(Operator, FullMaskIsUnitary) {
  const Index rows = 12, cols = 10;
  const Image x = random_image(rows * cols, 1);
  const auto mask = all_rows(rows);
  const KRows y = forward(x, rows, cols, mask);
  EXPECT_NEAR(y.norm(), x.norm(), 1e-10 * x.norm());
  EXPECT_LT((adjoint(y, mask, rows, cols) - x).norm(), 1e-10 * x.norm());
  EXPECT_EQ(forward(Image::Zero(rows * cols), rows, cols, mask).norm(), 0.0);
}

TEST(Operator, MatchesNaiveDft) {
  for (auto [rows, cols] : {std::pair<Index, Index>{4, 4}, {5, 6}, {8, 3}}) {
    Image impulse = Image::Zero(rows * cols);
    impulse[0] = 1.0;
    const Image x = random_image(rows * cols, 7);
    for (const Image *img : {static_cast<const Image *>(&impulse), &x})
      for (Index k = 0; k < rows; ++k) {
        const std::vector<Index> mask{k};
        const KRows y = forward(*img, rows, cols, mask);
        const auto ref = naive_row(*img, rows, cols, k);
        for (Index c = 0; c < cols; ++c)
          EXPECT_LT(std::abs(y(0, c) - ref[static_cast<std::size_t>(c)]), 1e-12);
      }
  }
}

TEST(Operator, DcRowHoldsImageMean) {
  const Index rows = 8, cols = 8;
  const Image x = Image::Constant(rows * cols, Complex(2.0, -1.0));
  const std::vector<Index> dc{dc_row(rows)};
  const KRows y = forward(x, rows, cols, dc);
  EXPECT_NEAR(std::abs(y(0, cols / 2) - Complex(2.0, -1.0) * 8.0), 0.0, 1e-12);
}

TEST(Operator, AdjointIdentity) {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const Index rows = 4 + static_cast<Index>(rng() % 13), cols = 4 + static_cast<Index>(rng() % 13);
    std::vector<Index> mask;
    for (Index r = 0; r < rows; ++r)
      if (rng() % 3 == 0)
        mask.push_back(r);
    if (mask.empty())
      mask.push_back(rows / 2);
    const Image x = random_image(rows * cols, rng());
    const KRows y = random_rows(static_cast<Index>(mask.size()), cols, rng());
    const Complex lhs = (forward(x, rows, cols, mask).array() * y.array().conjugate()).sum();
    const Complex rhs = (x.array() * adjoint(y, mask, rows, cols).array().conjugate()).sum();
    EXPECT_LT(std::abs(lhs - rhs) / (x.norm() * y.norm()), 1e-10);
  }
}

TEST(Operator, SubsampledNormalOperatorIsProjection) {
  const Index rows = 8, cols = 8;
  const std::vector<Index> mask{3};
  const Image x = random_image(rows * cols, 5);
  const Image once = adjoint(forward(x, rows, cols, mask), mask, rows, cols);
  const Image twice = adjoint(forward(once, rows, cols, mask), mask, rows, cols);
  EXPECT_LT((once - twice).norm(), 1e-10 * x.norm());
  const KRows y = random_rows(1, cols, 9);
  EXPECT_LT((forward(adjoint(y, mask, rows, cols), rows, cols, mask) - y).norm(), 1e-10 * y.norm());
}

TEST(Operator, ShapeErrors) {
  const std::vector<Index> mask{0, 1};
  EXPECT_THROW(adjoint(KRows::Zero(3, 4), mask, 4, 4), ValidationError);
  const std::vector<Index> bad{7};
  EXPECT_THROW(forward(Image::Zero(16), 4, 4, bad), ValidationError);
}

TEST(Acquisition, NoiselessEqualsForward) {
  ImageSequence truth(6, 6, 3);
  for (Index t = 0; t < 3; ++t)
    truth.frame(t) = random_image(36, 20 + static_cast<std::uint64_t>(t));
  const MaskSequence masks = draw_mask_sequence(6, 2, 2, 3, 4.0, 1);
  const MeasurementSet ms = acquire(truth, masks, 0.0, 4);
  for (Index t = 0; t < 3; ++t)
    EXPECT_EQ(ms.y[static_cast<std::size_t>(t)], forward(truth.frame(t), 6, 6, masks.frames[static_cast<std::size_t>(t)]));
}

TEST(Acquisition, NoiseStdMatchesSigma) {
  const Index n = 256;
  ImageSequence truth(n, n, 2);
  const MaskSequence masks = full_masks(n, 2);
  const double sigma = 0.5;
  const MeasurementSet ms = acquire(truth, masks, sigma, 8);
  double ss = 0, sre = 0;
  Index count = 0;
  for (const auto &y : ms.y) {
    ss += y.squaredNorm();
    sre += y.real().squaredNorm();
    count += y.size();
  }
  EXPECT_GE(count, 100000);
  EXPECT_NEAR(std::sqrt(ss / count), sigma, 0.02 * sigma);
  EXPECT_NEAR(std::sqrt(sre / count), sigma / std::sqrt(2.0), 0.02 * sigma);
  const MeasurementSet again = acquire(truth, masks, sigma, 8, 2);
  EXPECT_EQ(again.y, ms.y);
}

TEST(Acquisition, MeasurementFileRoundTrip) {
  ImageSequence truth(8, 6, 4);
  for (Index t = 0; t < 4; ++t)
    truth.frame(t) = random_image(48, 40 + static_cast<std::uint64_t>(t));
  const MeasurementSet ms = acquire(truth, draw_mask_sequence(8, 3, 2, 4, 4.0, 2), 0.1, 3);
  std::stringstream ss;
  write_measurements(ss, ms);
  const MeasurementSet r = read_measurements(ss);
  EXPECT_EQ(r.rows, ms.rows);
  EXPECT_EQ(r.cols, ms.cols);
  EXPECT_EQ(r.masks, ms.masks);
  EXPECT_EQ(r.y, ms.y);
}

TEST(Wavelet, RoundTripAndOrthogonality) {
  for (auto [rows, cols] : {std::pair<Index, Index>{64, 64}, {16, 32}, {8, 8}, {12, 20}}) {
    const Daubechies4 w(rows, cols, 4);
    const Image x = random_image(rows * cols, static_cast<std::uint64_t>(rows * 100 + cols));
    const Image c = w.forward(x);
    EXPECT_NEAR(c.norm(), x.norm(), 1e-10 * x.norm());
    EXPECT_LT((w.inverse(c) - x).norm(), 1e-10 * x.norm());
    const Image y = random_image(rows * cols, 3);
    EXPECT_LT(std::abs(c.dot(w.forward(y)) - x.dot(y)), 1e-10 * x.norm() * y.norm());
  }
}

TEST(Wavelet, LevelsClampedBySize) {
  EXPECT_EQ(Daubechies4(64, 64, 4).levels(), 4);
  EXPECT_EQ(Daubechies4(12, 20, 4).levels(), 2);
  EXPECT_EQ(Daubechies4(7, 8, 4).levels(), 0);
}

TEST(Wavelet, FilterIsOrthonormal) {
  const auto h = Daubechies4::lowpass();
  double s = 0, s2 = 0, shift = 0;
  for (std::size_t i = 0; i < 4; ++i) {
    s += h[i];
    s2 += h[i] * h[i];
  }
  shift = h[0] * h[2] + h[1] * h[3];
  EXPECT_NEAR(s, std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(s2, 1.0, 1e-15);
  EXPECT_NEAR(shift, 0.0, 1e-15);
}

TEST(Wavelet, ConstantImageHasOnlyCoarseEnergy) {
  const Index n = 16;
  const Daubechies4 w(n, n, 2);
  const Image x = Image::Constant(n * n, 3.0);
  const Image c = w.forward(x);
  // Coarse block is the top-left (n/4)x(n/4) corner.
  double detail = 0;
  for (Index r = 0; r < n; ++r)
    for (Index col = 0; col < n; ++col)
      if (r >= n / 4 || col >= n / 4)
        detail += std::norm(c[r * n + col]);
  EXPECT_LT(detail, 1e-20);
}

} // namespace
