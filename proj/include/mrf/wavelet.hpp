#pragma once

// Orthogonal 4-tap Daubechies wavelet, periodic boundary, multi-level 2D
// (Mallat layout: the low-low band occupies the top-left corner).

#include "mrf/core.hpp"

#include <array>
#include <cmath>
#include <vector>

namespace mrf {

class Daubechies4 {
public:
  /// Levels are clamped to what the image sides support: each level halves
  /// both sides and needs them even.
  Daubechies4(Index rows, Index cols, int levels = 4) : rows_(rows), cols_(cols) {
    levels_ = 0;
    Index r = rows, c = cols;
    while (levels_ < levels && r % 2 == 0 && c % 2 == 0 && r >= 2 && c >= 2) {
      r /= 2;
      c /= 2;
      ++levels_;
    }
  }

  int levels() const { return levels_; }

  template <typename Scalar>
  void analyze(std::vector<Scalar> &img) const {
    std::vector<Scalar> tmp;
    Index r = rows_, c = cols_;
    for (int l = 0; l < levels_; ++l) {
      for (Index i = 0; i < r; ++i)
        step_forward(img.data() + i * cols_, 1, c, tmp);
      for (Index j = 0; j < c; ++j)
        step_forward(img.data() + j, cols_, r, tmp);
      r /= 2;
      c /= 2;
    }
  }

  template <typename Scalar>
  void synthesize(std::vector<Scalar> &coef) const {
    std::vector<Scalar> tmp;
    for (int l = levels_ - 1; l >= 0; --l) {
      const Index r = rows_ >> l, c = cols_ >> l;
      for (Index j = 0; j < c; ++j)
        step_inverse(coef.data() + j, cols_, r, tmp);
      for (Index i = 0; i < r; ++i)
        step_inverse(coef.data() + i * cols_, 1, c, tmp);
    }
  }

  Eigen::VectorXcd forward(const Eigen::VectorXcd &x) const {
    std::vector<Complex> v(x.data(), x.data() + x.size());
    analyze(v);
    return Eigen::Map<Eigen::VectorXcd>(v.data(), static_cast<Index>(v.size()));
  }

  Eigen::VectorXcd inverse(const Eigen::VectorXcd &w) const {
    std::vector<Complex> v(w.data(), w.data() + w.size());
    synthesize(v);
    return Eigen::Map<Eigen::VectorXcd>(v.data(), static_cast<Index>(v.size()));
  }

  static constexpr std::array<double, 4> lowpass() {
    // (1 +- sqrt3, 3 +- sqrt3) / (4 sqrt2)
    return {0.48296291314453414, 0.83651630373780794, 0.22414386804201339, -0.12940952255126037};
  }

private:
  template <typename Scalar>
  static void step_forward(Scalar *x, Index stride, Index n, std::vector<Scalar> &tmp) {
    constexpr auto h = lowpass();
    constexpr std::array<double, 4> g{h[3], -h[2], h[1], -h[0]};
    tmp.assign(static_cast<std::size_t>(n), Scalar{});
    const Index half = n / 2;
    for (Index k = 0; k < half; ++k) {
      Scalar a{}, d{};
      for (Index m = 0; m < 4; ++m) {
        const Scalar v = x[((2 * k + m) % n) * stride];
        a += h[static_cast<std::size_t>(m)] * v;
        d += g[static_cast<std::size_t>(m)] * v;
      }
      tmp[static_cast<std::size_t>(k)] = a;
      tmp[static_cast<std::size_t>(half + k)] = d;
    }
    for (Index i = 0; i < n; ++i)
      x[i * stride] = tmp[static_cast<std::size_t>(i)];
  }

  template <typename Scalar>
  static void step_inverse(Scalar *x, Index stride, Index n, std::vector<Scalar> &tmp) {
    constexpr auto h = lowpass();
    constexpr std::array<double, 4> g{h[3], -h[2], h[1], -h[0]};
    tmp.assign(static_cast<std::size_t>(n), Scalar{});
    const Index half = n / 2;
    for (Index k = 0; k < half; ++k) {
      const Scalar a = x[k * stride];
      const Scalar d = x[(half + k) * stride];
      for (Index m = 0; m < 4; ++m)
        tmp[static_cast<std::size_t>((2 * k + m) % n)] +=
          h[static_cast<std::size_t>(m)] * a + g[static_cast<std::size_t>(m)] * d;
    }
    for (Index i = 0; i < n; ++i)
      x[i * stride] = tmp[static_cast<std::size_t>(i)];
  }

  Index rows_, cols_;
  int levels_;
};

} // namespace mrf
