#pragma once

// Binary artifact formats (little-endian) and 16-bit PGM export.
//   map          "MRFM" u32 version, u8 dtype (1 f64, 2 i32), u32 rows, u32 cols, row-major payload
//   dictionary   "MRFD" u32 version, u32 K, u32 T, K x (t1,t2,b0) f64, K norms f64, K x T (re,im) f64
//   metric       "MRFA" u32 dim, dim x dim f64 row-major, f64 ridge
//   measurements "MRFY" u32 rows, u32 cols, u32 T, u32 mask-text bytes, mask text,
//                then per frame its sampled rows x cols (re,im) f64 row-major

#include "mrf/core.hpp"
#include "mrf/dictionary.hpp"
#include "mrf/eval.hpp"
#include "mrf/kspace.hpp"
#include "mrf/metric.hpp"
#include "mrf/phantom.hpp"
#include "mrf/sampling.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace mrf {

inline constexpr std::uint32_t kFormatVersion = 1;

namespace io {

inline void put_u8(std::ostream &os, std::uint8_t v) { os.put(static_cast<char>(v)); }

inline void put_u32(std::ostream &os, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i)
    b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b, 4);
}

inline void put_u64(std::ostream &os, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i)
    b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b, 8);
}

inline void put_f64(std::ostream &os, double v) { put_u64(os, std::bit_cast<std::uint64_t>(v)); }
inline void put_i32(std::ostream &os, std::int32_t v) { put_u32(os, static_cast<std::uint32_t>(v)); }

inline void put_dim(std::ostream &os, Index v, const char *what) {
  if (v < 0 || v > static_cast<Index>(UINT32_MAX))
    throw ValidationError(std::string("dimension out of u32 range: ") + what);
  put_u32(os, static_cast<std::uint32_t>(v));
}

class Reader {
public:
  Reader(std::istream &is, std::string what) : is_(is), what_(std::move(what)) {}

  void bytes(char *dst, std::size_t n) {
    is_.read(dst, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(is_.gcount()) != n)
      throw FormatError(what_ + ": truncated payload");
  }
  std::uint8_t u8() {
    char c;
    bytes(&c, 1);
    return static_cast<std::uint8_t>(c);
  }
  std::uint32_t u32() {
    unsigned char b[4];
    bytes(reinterpret_cast<char *>(b), 4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    unsigned char b[8];
    bytes(reinterpret_cast<char *>(b), 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }

  void magic(const char (&expected)[5], bool versioned = true) {
    char m[4];
    bytes(m, 4);
    if (std::memcmp(m, expected, 4) != 0)
      throw FormatError(what_ + ": bad magic (expected " + std::string(expected, 4) + ")");
    if (!versioned)
      return;
    const std::uint32_t v = u32();
    if (v != kFormatVersion)
      throw FormatError(what_ + ": unsupported version " + std::to_string(v));
  }
  void expect_end() {
    if (is_.peek() != std::char_traits<char>::eof())
      throw FormatError(what_ + ": trailing bytes after payload");
  }

private:
  std::istream &is_;
  std::string what_;
};

inline std::ofstream open_out(const std::filesystem::path &p) {
  if (p.has_parent_path())
    std::filesystem::create_directories(p.parent_path());
  std::ofstream os(p, std::ios::binary);
  if (!os)
    throw Error("cannot open '" + p.string() + "' for writing");
  return os;
}

inline std::ifstream open_in(const std::filesystem::path &p) {
  std::ifstream is(p, std::ios::binary);
  if (!is)
    throw Error("cannot open '" + p.string() + "'");
  return is;
}

inline void finish(std::ostream &os, const std::filesystem::path &p) {
  os.flush();
  if (!os)
    throw Error("write failed for '" + p.string() + "'");
}

} // namespace io

enum class MapDtype : std::uint8_t { F64 = 1, I32 = 2 };

namespace io {
template <typename T>
void write_map_impl(std::ostream &os, const Map2D<T> &m) {
  os.write("MRFM", 4);
  put_u32(os, kFormatVersion);
  put_u8(os, static_cast<std::uint8_t>(std::is_same_v<T, double> ? MapDtype::F64 : MapDtype::I32));
  put_dim(os, m.rows, "rows");
  put_dim(os, m.cols, "cols");
  for (const T &v : m.data) {
    if constexpr (std::is_same_v<T, double>)
      put_f64(os, v);
    else
      put_i32(os, v);
  }
}

template <typename T>
Map2D<T> read_map_impl(std::istream &is) {
  Reader r(is, "map file");
  r.magic("MRFM");
  const auto dtype = static_cast<MapDtype>(r.u8());
  const MapDtype want = std::is_same_v<T, double> ? MapDtype::F64 : MapDtype::I32;
  if (dtype != MapDtype::F64 && dtype != MapDtype::I32)
    throw FormatError("map file: unknown dtype tag");
  if (dtype != want)
    throw FormatError(std::string("map file: expected ") + (want == MapDtype::F64 ? "f64" : "i32") + " payload");
  const Index rows = r.u32(), cols = r.u32();
  Map2D<T> m(rows, cols);
  for (T &v : m.data) {
    if constexpr (std::is_same_v<T, double>)
      v = r.f64();
    else
      v = r.i32();
  }
  r.expect_end();
  return m;
}
} // namespace io

inline void write_map(std::ostream &os, const RealMap &m) { io::write_map_impl(os, m); }
inline void write_map(std::ostream &os, const IndexMap &m) { io::write_map_impl(os, m); }
inline RealMap read_real_map(std::istream &is) { return io::read_map_impl<double>(is); }
inline IndexMap read_index_map(std::istream &is) { return io::read_map_impl<std::int32_t>(is); }

template <typename T>
void save_map(const std::filesystem::path &p, const Map2D<T> &m) {
  auto os = io::open_out(p);
  write_map(os, m);
  io::finish(os, p);
}

inline RealMap load_real_map(const std::filesystem::path &p) {
  auto is = io::open_in(p);
  return read_real_map(is);
}

inline IndexMap load_index_map(const std::filesystem::path &p) {
  auto is = io::open_in(p);
  return read_index_map(is);
}

/// Integer map file whose labels must all appear in `table`.
inline LabelMap load_label_map(const std::filesystem::path &p, const TissueTable &table = TissueTable::brain()) {
  LabelMap labels = load_index_map(p);
  validate_labels(labels, table);
  return labels;
}

inline constexpr std::array<const char *, 4> kMapFiles{"t1.map", "t2.map", "b0.map", "density.map"};

inline void save_parameter_maps(const std::filesystem::path &dir, const ParameterMaps &m) {
  save_map(dir / kMapFiles[0], m.t1);
  save_map(dir / kMapFiles[1], m.t2);
  save_map(dir / kMapFiles[2], m.b0);
  save_map(dir / kMapFiles[3], m.density);
}

inline ParameterMaps load_parameter_maps(const std::filesystem::path &dir) {
  ParameterMaps m;
  m.t1 = load_real_map(dir / kMapFiles[0]);
  m.t2 = load_real_map(dir / kMapFiles[1]);
  m.b0 = load_real_map(dir / kMapFiles[2]);
  m.density = load_real_map(dir / kMapFiles[3]);
  if (!m.t1.same_shape(m.t2) || !m.t1.same_shape(m.b0) || !m.t1.same_shape(m.density))
    throw FormatError("parameter maps in '" + dir.string() + "' differ in shape");
  return m;
}

inline void write_dictionary(std::ostream &os, const Dictionary &d) {
  os.write("MRFD", 4);
  io::put_u32(os, kFormatVersion);
  io::put_dim(os, d.size(), "K");
  io::put_dim(os, d.frames(), "T");
  for (const auto &p : d.params) {
    io::put_f64(os, p.t1);
    io::put_f64(os, p.t2);
    io::put_f64(os, p.b0);
  }
  for (Index k = 0; k < d.size(); ++k)
    io::put_f64(os, d.norms[k]);
  for (Index k = 0; k < d.size(); ++k)
    for (Index t = 0; t < d.frames(); ++t) {
      io::put_f64(os, d.atoms(k, t).real());
      io::put_f64(os, d.atoms(k, t).imag());
    }
}

inline Dictionary read_dictionary(std::istream &is) {
  io::Reader r(is, "dictionary file");
  r.magic("MRFD");
  const Index k = r.u32(), t = r.u32();
  Dictionary d;
  d.params.resize(static_cast<std::size_t>(k));
  for (auto &p : d.params) {
    p.t1 = r.f64();
    p.t2 = r.f64();
    p.b0 = r.f64();
  }
  d.norms.resize(k);
  for (Index i = 0; i < k; ++i) {
    d.norms[i] = r.f64();
    if (!(d.norms[i] > 0))
      throw FormatError("dictionary file: non-positive atom norm");
  }
  d.atoms.resize(k, t);
  for (Index i = 0; i < k; ++i)
    for (Index j = 0; j < t; ++j) {
      const double re = r.f64();
      const double im = r.f64();
      d.atoms(i, j) = {re, im};
    }
  r.expect_end();
  return d;
}

inline void save_dictionary(const std::filesystem::path &p, const Dictionary &d) {
  auto os = io::open_out(p);
  write_dictionary(os, d);
  io::finish(os, p);
}

inline Dictionary load_dictionary(const std::filesystem::path &p) {
  auto is = io::open_in(p);
  return read_dictionary(is);
}

inline void write_metric(std::ostream &os, const MahalanobisMetric &m) {
  os.write("MRFA", 4);
  io::put_dim(os, m.dim(), "dim");
  for (Index i = 0; i < m.dim(); ++i)
    for (Index j = 0; j < m.dim(); ++j)
      io::put_f64(os, m.w(i, j));
  io::put_f64(os, m.ridge);
}

inline MahalanobisMetric read_metric(std::istream &is) {
  io::Reader r(is, "metric file");
  r.magic("MRFA", false);
  const Index dim = r.u32();
  MahalanobisMetric m;
  m.w.resize(dim, dim);
  for (Index i = 0; i < dim; ++i)
    for (Index j = 0; j < dim; ++j)
      m.w(i, j) = r.f64();
  m.ridge = r.f64();
  r.expect_end();
  return m;
}

inline void save_metric(const std::filesystem::path &p, const MahalanobisMetric &m) {
  auto os = io::open_out(p);
  write_metric(os, m);
  io::finish(os, p);
}

inline MahalanobisMetric load_metric(const std::filesystem::path &p) {
  auto is = io::open_in(p);
  return read_metric(is);
}

inline void write_measurements(std::ostream &os, const MeasurementSet &ms) {
  std::ostringstream masks;
  write_masks(masks, ms.masks);
  const std::string text = masks.str();
  os.write("MRFY", 4);
  io::put_dim(os, ms.rows, "rows");
  io::put_dim(os, ms.cols, "cols");
  io::put_dim(os, ms.frames(), "T");
  io::put_dim(os, static_cast<Index>(text.size()), "mask text");
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const KRows &y : ms.y)
    for (Index i = 0; i < y.rows(); ++i)
      for (Index j = 0; j < y.cols(); ++j) {
        io::put_f64(os, y(i, j).real());
        io::put_f64(os, y(i, j).imag());
      }
}

inline MeasurementSet read_measurements(std::istream &is) {
  io::Reader r(is, "measurement file");
  r.magic("MRFY", false);
  MeasurementSet ms;
  ms.rows = r.u32();
  ms.cols = r.u32();
  const Index frames = r.u32();
  std::string text(r.u32(), '\0');
  r.bytes(text.data(), text.size());
  std::istringstream masks(text);
  ms.masks = read_masks(masks);
  if (static_cast<Index>(ms.masks.frames.size()) != frames || ms.masks.n_rows != ms.rows)
    throw FormatError("measurement file: mask block disagrees with header");
  for (Index t = 0; t < frames; ++t) {
    KRows y(static_cast<Index>(ms.masks.frames[static_cast<std::size_t>(t)].size()), ms.cols);
    for (Index i = 0; i < y.rows(); ++i)
      for (Index j = 0; j < y.cols(); ++j) {
        const double re = r.f64();
        const double im = r.f64();
        y(i, j) = {re, im};
      }
    ms.y.push_back(std::move(y));
  }
  r.expect_end();
  return ms;
}

inline void save_measurements(const std::filesystem::path &p, const MeasurementSet &ms) {
  auto os = io::open_out(p);
  write_measurements(os, ms);
  io::finish(os, p);
}

inline MeasurementSet load_measurements(const std::filesystem::path &p) {
  auto is = io::open_in(p);
  return read_measurements(is);
}

using Gray16 = Map2D<std::uint16_t>;

/// Quantizes to 16 bits after an affine normalization onto [0, 255]; values
/// outside the range saturate.
inline Gray16 quantize(const RealMap &m, const Normalization &n) {
  Gray16 g(m.rows, m.cols);
  for (Index i = 0; i < m.size(); ++i) {
    const double v = m[i];
    if (!std::isfinite(v))
      throw ValidationError("export: map contains non-finite values");
    const double u = std::clamp(n(v) / 255.0, 0.0, 1.0);
    g[i] = static_cast<std::uint16_t>(std::lround(u * 65535.0));
  }
  return g;
}

/// Range of the map itself; a constant map quantizes to all zeros.
inline Normalization self_normalization(const RealMap &m) {
  if (m.data.empty())
    return {};
  const auto [lo, hi] = std::minmax_element(m.data.begin(), m.data.end());
  if (!(*hi > *lo))
    return {*lo, 0.0};
  return Normalization::from_truth(m);
}

inline void write_pgm(std::ostream &os, const Gray16 &g) {
  os << "P5\n" << g.cols << ' ' << g.rows << "\n65535\n";
  for (std::uint16_t v : g.data) {
    os.put(static_cast<char>(v >> 8));
    os.put(static_cast<char>(v & 0xff));
  }
}

inline Gray16 read_pgm(std::istream &is) {
  std::string magic;
  Index cols = 0, rows = 0;
  int maxval = 0;
  if (!(is >> magic >> cols >> rows >> maxval) || magic != "P5" || maxval != 65535 || rows < 0 || cols < 0)
    throw FormatError("pgm: expected a 16-bit binary P5 header");
  is.get();
  Gray16 g(rows, cols);
  io::Reader r(is, "pgm");
  for (auto &v : g.data) {
    unsigned char b[2];
    r.bytes(reinterpret_cast<char *>(b), 2);
    v = static_cast<std::uint16_t>((b[0] << 8) | b[1]);
  }
  return g;
}

/// Writes `m` scaled by `n` (pass the truth's normalization so several
/// estimates share one display range).
inline void export_pgm(const RealMap &m, const std::filesystem::path &p, const Normalization &n) {
  auto os = io::open_out(p);
  write_pgm(os, quantize(m, n));
  io::finish(os, p);
}

inline void export_pgm(const RealMap &m, const std::filesystem::path &p) { export_pgm(m, p, self_normalization(m)); }

inline Gray16 load_pgm(const std::filesystem::path &p) {
  auto is = io::open_in(p);
  return read_pgm(is);
}

} // namespace mrf
