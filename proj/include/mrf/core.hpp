#pragma once

// Shared value types for the fingerprinting toolkit: 2D maps, image
// sequences, error hierarchy and seeded RNG construction.

#include <Eigen/Dense>

#include <complex>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace mrf {

using Complex = std::complex<double>;
using Index = Eigen::Index;
using Rng = std::mt19937_64;

class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Malformed or truncated file payloads.
class FormatError : public Error {
public:
  using Error::Error;
};

/// Inputs that violate a documented precondition.
class ValidationError : public Error {
public:
  using Error::Error;
};

class InfeasibleError : public Error {
public:
  using Error::Error;
};

class RankDeficientError : public Error {
public:
  RankDeficientError(const std::string &what, Index deficient)
    : Error(what), deficient_dims(deficient) {}
  Index deficient_dims;
};

/// Seeds an engine from a user seed plus a stream tag so that independent
/// consumers of the same user seed never share a random stream.
inline Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                    0x6d7266u};
  return Rng(seq);
}

/// Row-major 2D array.
template <typename T>
struct Map2D {
  Index rows = 0;
  Index cols = 0;
  std::vector<T> data;

  Map2D() = default;
  Map2D(Index r, Index c, T fill = T{})
    : rows(r), cols(c), data(static_cast<std::size_t>(r * c), fill) {}

  T &operator()(Index r, Index c) { return data[static_cast<std::size_t>(r * cols + c)]; }
  const T &operator()(Index r, Index c) const { return data[static_cast<std::size_t>(r * cols + c)]; }
  T &operator[](Index i) { return data[static_cast<std::size_t>(i)]; }
  const T &operator[](Index i) const { return data[static_cast<std::size_t>(i)]; }

  Index size() const { return rows * cols; }
  bool same_shape(const Map2D &o) const { return rows == o.rows && cols == o.cols; }
  bool operator==(const Map2D &o) const = default;
};

using RealMap = Map2D<double>;
using IndexMap = Map2D<std::int32_t>;

struct ParameterMaps {
  RealMap t1;      // ms
  RealMap t2;      // ms
  RealMap b0;      // Hz
  RealMap density; // unitless

  ParameterMaps() = default;
  ParameterMaps(Index rows, Index cols)
    : t1(rows, cols), t2(rows, cols), b0(rows, cols), density(rows, cols) {}

  Index rows() const { return t1.rows; }
  Index cols() const { return t1.cols; }
  bool operator==(const ParameterMaps &) const = default;
};

/// T complex frames of rows x cols. Stored voxel-major: column t of `data`
/// is frame t flattened row-major, row i is the fingerprint of voxel i.
struct ImageSequence {
  Index rows = 0;
  Index cols = 0;
  Eigen::MatrixXcd data;

  ImageSequence() = default;
  ImageSequence(Index r, Index c, Index frames)
    : rows(r), cols(c), data(Eigen::MatrixXcd::Zero(r * c, frames)) {}

  Index frames() const { return data.cols(); }
  Index voxels() const { return rows * cols; }
  auto frame(Index t) { return data.col(t); }
  auto frame(Index t) const { return data.col(t); }
  auto fingerprint(Index voxel) { return data.row(voxel); }
  auto fingerprint(Index voxel) const { return data.row(voxel); }
};

} // namespace mrf
