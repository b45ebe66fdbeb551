#pragma once

// Undersampled Fourier measurement operator F_u and its adjoint.
//
// Convention: unitary centered 2D DFT,
//   X[k,l] = 1/sqrt(R*C) * sum x[n,m] exp(-2*pi*i*((k-cr)(n-cr)/R + (l-cc)(m-cc)/C))
// with cr = R/2, cc = C/2, so k-space DC sits at row R/2.

#include "mrf/core.hpp"
#include "mrf/dictionary.hpp"
#include "mrf/parallel.hpp"
#include "mrf/phantom.hpp"
#include "mrf/sampling.hpp"

#include <unsupported/Eigen/FFT>

#include <cmath>
#include <span>
#include <vector>

namespace mrf {

/// Complex image, flattened row-major.
using Image = Eigen::VectorXcd;

/// Sampled k-space rows of one frame (|mask| x cols).
using KRows = Eigen::MatrixXcd;

namespace detail {

inline Eigen::FFT<double> &thread_fft() {
  thread_local Eigen::FFT<double> fft(Eigen::FFT<double>::impl_type(), Eigen::FFT<double>::Unscaled);
  return fft;
}

/// Centered 1D DFT (unscaled), strided input/output.
inline void centered_dft(const Complex *in, Index in_stride, Complex *out, Index out_stride, Index n,
                         bool inverse, std::vector<Complex> &a, std::vector<Complex> &b) {
  const Index c = n / 2;
  a.resize(static_cast<std::size_t>(n));
  b.resize(static_cast<std::size_t>(n));
  for (Index m = 0; m < n; ++m)
    a[static_cast<std::size_t>(m)] = in[((m + c) % n) * in_stride];
  auto &fft = thread_fft();
  if (inverse)
    fft.inv(b.data(), a.data(), n);
  else
    fft.fwd(b.data(), a.data(), n);
  for (Index k = 0; k < n; ++k)
    out[k * out_stride] = b[static_cast<std::size_t>(((k - c) % n + n) % n)];
}

} // namespace detail

/// F_u: centered unitary 2D DFT restricted to the listed k-space rows.
inline KRows forward(const Image &image, Index rows, Index cols, std::span<const Index> mask_rows) {
  if (image.size() != rows * cols)
    throw ValidationError("forward: image size does not match rows*cols");
  std::vector<Complex> a, b, colbuf(static_cast<std::size_t>(rows));
  Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> partial(mask_rows.size(), cols);
  for (Index r : mask_rows)
    if (r < 0 || r >= rows)
      throw ValidationError("forward: mask row out of range");
  // DFT along the row axis for each column, keeping only sampled rows.
  for (Index c = 0; c < cols; ++c) {
    detail::centered_dft(image.data() + c, cols, colbuf.data(), 1, rows, false, a, b);
    for (std::size_t j = 0; j < mask_rows.size(); ++j)
      partial(static_cast<Index>(j), c) = colbuf[static_cast<std::size_t>(mask_rows[j])];
  }
  KRows out(static_cast<Index>(mask_rows.size()), cols);
  std::vector<Complex> rowbuf(static_cast<std::size_t>(cols));
  const double scale = 1.0 / std::sqrt(static_cast<double>(rows * cols));
  for (Index j = 0; j < partial.rows(); ++j) {
    detail::centered_dft(partial.row(j).data(), 1, rowbuf.data(), 1, cols, false, a, b);
    for (Index c = 0; c < cols; ++c)
      out(j, c) = rowbuf[static_cast<std::size_t>(c)] * scale;
  }
  return out;
}

/// F_u^H: zero-fill unsampled rows, inverse centered unitary 2D DFT.
inline Image adjoint(const KRows &measurement, std::span<const Index> mask_rows, Index rows, Index cols) {
  if (measurement.rows() != static_cast<Index>(mask_rows.size()) || measurement.cols() != cols)
    throw ValidationError("adjoint: measurement shape does not match mask and width");
  std::vector<Complex> a, b;
  Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> full =
    Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>::Zero(rows, cols);
  std::vector<Complex> rowin(static_cast<std::size_t>(cols));
  for (std::size_t j = 0; j < mask_rows.size(); ++j) {
    const Index r = mask_rows[j];
    if (r < 0 || r >= rows)
      throw ValidationError("adjoint: mask row out of range");
    for (Index c = 0; c < cols; ++c)
      rowin[static_cast<std::size_t>(c)] = measurement(static_cast<Index>(j), c);
    // Duplicate rows accumulate, as the true adjoint of a repeated restriction.
    std::vector<Complex> tmp(static_cast<std::size_t>(cols));
    detail::centered_dft(rowin.data(), 1, tmp.data(), 1, cols, true, a, b);
    for (Index c = 0; c < cols; ++c)
      full(r, c) += tmp[static_cast<std::size_t>(c)];
  }
  Image out(rows * cols);
  const double scale = 1.0 / std::sqrt(static_cast<double>(rows * cols));
  for (Index c = 0; c < cols; ++c)
    detail::centered_dft(full.data() + c, cols, out.data() + c, cols, rows, true, a, b);
  out *= scale;
  return out;
}

struct MeasurementSet {
  Index rows = 0;
  Index cols = 0;
  MaskSequence masks;
  std::vector<KRows> y;

  Index frames() const { return static_cast<Index>(y.size()); }
};

/// y[t] = F_u(truth[t]) + complex Gaussian noise of total std noise_sigma.
inline MeasurementSet acquire(const ImageSequence &truth, const MaskSequence &masks, double noise_sigma,
                              std::uint64_t seed, int threads = 0) {
  if (masks.length() != truth.frames() || masks.n_rows != truth.rows)
    throw ValidationError("acquire: mask sequence does not match image sequence");
  if (noise_sigma < 0)
    throw ValidationError("acquire: noise sigma must be >= 0");
  MeasurementSet ms;
  ms.rows = truth.rows;
  ms.cols = truth.cols;
  ms.masks = masks;
  ms.y.resize(static_cast<std::size_t>(truth.frames()));
  parallel_for(
    truth.frames(),
    [&](long t) {
      const auto &rows = masks.frames[static_cast<std::size_t>(t)];
      KRows y = forward(truth.frame(t), truth.rows, truth.cols, rows);
      if (noise_sigma > 0) {
        Rng rng = make_rng(seed, 0x9000 + static_cast<std::uint64_t>(t));
        std::normal_distribution<double> n(0.0, noise_sigma / std::sqrt(2.0));
        for (Index i = 0; i < y.rows(); ++i)
          for (Index j = 0; j < y.cols(); ++j) {
            const double re = n(rng);
            const double im = n(rng);
            y(i, j) += Complex(re, im);
          }
      }
      ms.y[static_cast<std::size_t>(t)] = std::move(y);
    },
    threads);
  return ms;
}

/// Zero-filled F_u^H applied frame by frame.
inline ImageSequence adjoint_sequence(const MeasurementSet &ms, int threads = 0) {
  ImageSequence x(ms.rows, ms.cols, ms.frames());
  parallel_for(
    ms.frames(),
    [&](long t) {
      x.frame(t) = adjoint(ms.y[static_cast<std::size_t>(t)], ms.masks.frames[static_cast<std::size_t>(t)],
                           ms.rows, ms.cols);
    },
    threads);
  return x;
}

/// Ground-truth frames: each voxel's raw fingerprint scaled by its density.
inline ImageSequence render_ground_truth(const ParameterMaps &maps, const PulseSequence &seq, int threads = 0) {
  seq.validate();
  ImageSequence x(maps.rows(), maps.cols(), seq.length());
  parallel_for(
    x.voxels(),
    [&](long i) {
      const double rho = maps.density[i];
      if (rho == 0)
        return;
      x.fingerprint(i) = (rho * simulate_fingerprint(maps.t1[i], maps.t2[i], maps.b0[i], seq)).transpose();
    },
    threads);
  return x;
}

} // namespace mrf
