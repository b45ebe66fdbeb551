#pragma once

// Experiment configuration: a line-oriented "key = value" text with [section]
// headers. '#' and ';' start comments. Every error names the offending line.

#include "mrf/core.hpp"
#include "mrf/dictionary.hpp"
#include "mrf/phantom.hpp"
#include "mrf/pipeline.hpp"
#include "mrf/sequence.hpp"

#include <cmath>
#include <cstdint>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace mrf {

enum class SamplingStrategy { Alternating, Independent, Epi, Full };

inline std::string to_string(SamplingStrategy s) {
  switch (s) {
  case SamplingStrategy::Alternating: return "alternating";
  case SamplingStrategy::Independent: return "independent";
  case SamplingStrategy::Epi: return "epi";
  case SamplingStrategy::Full: return "full";
  }
  return "?";
}

enum class GridPreset { Desk, Segmented, Custom };

inline std::string to_string(GridPreset g) {
  switch (g) {
  case GridPreset::Desk: return "desk";
  case GridPreset::Segmented: return "segmented";
  case GridPreset::Custom: return "custom";
  }
  return "?";
}

struct ExperimentConfig {
  Index rows = 64;
  Index cols = 64;
  Index frames = 300;

  bool grid_aligned = true; // no per-voxel parameter noise, so every voxel is a dictionary atom
  NoiseSpec tissue_noise;

  FaVariant fa_variant = FaVariant::Literal;
  double eta_sigma = 5.0;
  std::uint64_t sequence_seed = 1;
  bool randomize_tr = false;

  SamplingStrategy sampling = SamplingStrategy::Alternating;
  Index rows_per_frame = 4;
  Index center = 2;
  double power = 4.0;

  GridPreset grid = GridPreset::Desk;
  int grid_t1 = 20;
  int grid_t2 = 20;
  int grid_b0 = 11;
  std::vector<double> custom_t1, custom_t2, custom_b0;
  bool drop_t2_above_t1 = true;

  PipelineConfig pipeline;

  bool metric = true;
  std::optional<double> ridge; // absolute; absent: ridge_scale * mean eigenvalue of C
  double ridge_scale = 3.0;
  bool train_perturbed = true; // training phantom carries the tissue parameter noise
  std::uint64_t train_seed = 1000;
  int train_phantoms = 3; // seeds train_seed, train_seed + 1, ...

  double noise_sigma = 0;
  double noise_target_psnr = 0; // > 0: derive sigma from this frame-1 PSNR instead

  std::vector<Method> methods{Method::Oracle, Method::Mrf, Method::CsMrf, Method::CsMrfMl, Method::Blip};
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  std::string output = "out";

  void validate() const {
    if (rows < 16 || cols < 16)
      throw ValidationError("config: image sides must be >= 16");
    if (frames < 1)
      throw ValidationError("config: frames must be >= 1");
    if (rows_per_frame < 1 || rows_per_frame > rows)
      throw ValidationError("config: rows_per_frame must lie in [1, rows]");
    if (center < 0 || center > rows)
      throw ValidationError("config: center must lie in [0, rows]");
    if (power < 0)
      throw ValidationError("config: power must be >= 0");
    if (eta_sigma < 0)
      throw ValidationError("config: eta must be >= 0");
    if (grid_t1 < 1 || grid_t2 < 1 || grid_b0 < 1)
      throw ValidationError("config: grid step counts must be >= 1");
    if (grid == GridPreset::Custom && (custom_t1.empty() || custom_t2.empty() || custom_b0.empty()))
      throw ValidationError("config: custom grid needs t1, t2 and b0 lists");
    if ((ridge && *ridge < 0) || ridge_scale < 0)
      throw ValidationError("config: ridge must be >= 0");
    if (train_phantoms < 1)
      throw ValidationError("config: train_phantoms must be >= 1");
    if (noise_sigma < 0 || noise_target_psnr < 0)
      throw ValidationError("config: noise settings must be >= 0");
    if (methods.empty())
      throw ValidationError("config: method list is empty");
    if (seeds.empty())
      throw ValidationError("config: seed list is empty");
    tissue_noise.validate();
    pipeline.validate();
  }

  SequenceOptions sequence_options() const {
    SequenceOptions o;
    o.eta_sigma = eta_sigma;
    o.variant = fa_variant;
    o.randomize_tr = randomize_tr;
    return o;
  }
};

class ConfigError : public ValidationError {
public:
  ConfigError(int line, const std::string &msg)
    : ValidationError("config line " + std::to_string(line) + ": " + msg), line_(line) {}
  int line() const { return line_; }

private:
  int line_;
};

namespace detail {

inline std::string trim(const std::string &s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos)
    return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string &s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(s);
  while (std::getline(is, item, ','))
    if (auto t = trim(item); !t.empty())
      out.push_back(t);
  return out;
}

struct ConfigValue {
  std::string text;
  int line;
};

class ConfigReader {
public:
  explicit ConfigReader(const ConfigValue &v) : v_(v) {}

  double number() const {
    try {
      std::size_t used = 0;
      const double d = std::stod(v_.text, &used);
      if (used == v_.text.size() && std::isfinite(d))
        return d;
    } catch (const std::exception &) {
    }
    throw ConfigError(v_.line, "expected a number, got '" + v_.text + "'");
  }

  long long integer() const {
    try {
      std::size_t used = 0;
      const long long n = std::stoll(v_.text, &used);
      if (used == v_.text.size())
        return n;
    } catch (const std::exception &) {
    }
    throw ConfigError(v_.line, "expected an integer, got '" + v_.text + "'");
  }

  std::uint64_t unsigned_integer() const {
    const long long n = integer();
    if (n < 0)
      throw ConfigError(v_.line, "expected a non-negative integer");
    return static_cast<std::uint64_t>(n);
  }

  bool boolean() const {
    if (v_.text == "true" || v_.text == "on" || v_.text == "yes" || v_.text == "1")
      return true;
    if (v_.text == "false" || v_.text == "off" || v_.text == "no" || v_.text == "0")
      return false;
    throw ConfigError(v_.line, "expected a boolean, got '" + v_.text + "'");
  }

  std::vector<double> numbers() const {
    std::vector<double> out;
    for (const auto &s : split_list(v_.text))
      out.push_back(ConfigReader({s, v_.line}).number());
    return out;
  }

  std::vector<std::uint64_t> unsigned_list() const {
    std::vector<std::uint64_t> out;
    for (const auto &s : split_list(v_.text))
      out.push_back(ConfigReader({s, v_.line}).unsigned_integer());
    return out;
  }

  const std::string &text() const { return v_.text; }
  int line() const { return v_.line; }

private:
  ConfigValue v_;
};

} // namespace detail

/// Parses configuration text on top of the defaults. Unknown sections or keys,
/// repeated keys and malformed values are rejected with their line number.
inline ExperimentConfig parse_config(std::istream &is, ExperimentConfig cfg = {}) {
  std::map<std::string, detail::ConfigValue> entries;
  std::string section, raw;
  int line_no = 0;
  while (std::getline(is, raw)) {
    ++line_no;
    std::string line = raw;
    if (const auto c = line.find_first_of("#;"); c != std::string::npos)
      line.erase(c);
    line = detail::trim(line);
    if (line.empty())
      continue;
    if (line.front() == '[') {
      if (line.back() != ']' || line.size() < 3)
        throw ConfigError(line_no, "malformed section header");
      section = detail::trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(line_no, "expected 'key = value'");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (key.empty())
      throw ConfigError(line_no, "empty key");
    if (section.empty())
      throw ConfigError(line_no, "key '" + key + "' outside any section");
    const std::string full = section + "." + key;
    if (!entries.emplace(full, detail::ConfigValue{value, line_no}).second)
      throw ConfigError(line_no, "duplicate key '" + full + "'");
  }

  using R = detail::ConfigReader;
  auto positive_index = [](const R &r) {
    const long long n = r.integer();
    if (n < 1)
      throw ConfigError(r.line(), "expected a positive integer");
    return static_cast<Index>(n);
  };
  auto nonneg = [](const R &r) {
    const double v = r.number();
    if (v < 0)
      throw ConfigError(r.line(), "expected a value >= 0");
    return v;
  };
  auto positive = [](const R &r) {
    const double v = r.number();
    if (!(v > 0))
      throw ConfigError(r.line(), "expected a value > 0");
    return v;
  };
  auto interval = [](const R &r, double &lo, double &hi) {
    const auto v = r.numbers();
    if (v.size() != 2)
      throw ConfigError(r.line(), "expected 'lo, hi'");
    lo = v[0];
    hi = v[1];
  };

  const std::map<std::string, std::function<void(const R &)>> handlers{
    {"image.rows", [&](const R &r) { cfg.rows = positive_index(r); }},
    {"image.cols", [&](const R &r) { cfg.cols = positive_index(r); }},
    {"image.frames", [&](const R &r) { cfg.frames = positive_index(r); }},
    {"phantom.grid_aligned", [&](const R &r) { cfg.grid_aligned = r.boolean(); }},
    {"phantom.t1_noise", [&](const R &r) { interval(r, cfg.tissue_noise.t1_lo, cfg.tissue_noise.t1_hi); }},
    {"phantom.t2_noise", [&](const R &r) { interval(r, cfg.tissue_noise.t2_lo, cfg.tissue_noise.t2_hi); }},
    {"phantom.b0_noise", [&](const R &r) { interval(r, cfg.tissue_noise.b0_lo, cfg.tissue_noise.b0_hi); }},
    {"sequence.variant",
     [&](const R &r) {
       if (r.text() == "literal")
         cfg.fa_variant = FaVariant::Literal;
       else if (r.text() == "corrected")
         cfg.fa_variant = FaVariant::Corrected;
       else
         throw ConfigError(r.line(), "variant must be 'literal' or 'corrected'");
     }},
    {"sequence.eta", [&](const R &r) { cfg.eta_sigma = nonneg(r); }},
    {"sequence.seed", [&](const R &r) { cfg.sequence_seed = r.unsigned_integer(); }},
    {"sequence.randomize_tr", [&](const R &r) { cfg.randomize_tr = r.boolean(); }},
    {"sampling.strategy",
     [&](const R &r) {
       for (auto s : {SamplingStrategy::Alternating, SamplingStrategy::Independent, SamplingStrategy::Epi,
                      SamplingStrategy::Full})
         if (to_string(s) == r.text()) {
           cfg.sampling = s;
           return;
         }
       throw ConfigError(r.line(), "strategy must be alternating, independent, epi or full");
     }},
    {"sampling.rows_per_frame", [&](const R &r) { cfg.rows_per_frame = positive_index(r); }},
    {"sampling.center", [&](const R &r) { cfg.center = static_cast<Index>(r.unsigned_integer()); }},
    {"sampling.power", [&](const R &r) { cfg.power = nonneg(r); }},
    {"dictionary.preset",
     [&](const R &r) {
       for (auto g : {GridPreset::Desk, GridPreset::Segmented, GridPreset::Custom})
         if (to_string(g) == r.text()) {
           cfg.grid = g;
           return;
         }
       throw ConfigError(r.line(), "preset must be desk, segmented or custom");
     }},
    {"dictionary.t1_steps", [&](const R &r) { cfg.grid_t1 = static_cast<int>(positive_index(r)); }},
    {"dictionary.t2_steps", [&](const R &r) { cfg.grid_t2 = static_cast<int>(positive_index(r)); }},
    {"dictionary.b0_steps", [&](const R &r) { cfg.grid_b0 = static_cast<int>(positive_index(r)); }},
    {"dictionary.t1", [&](const R &r) { cfg.custom_t1 = r.numbers(); }},
    {"dictionary.t2", [&](const R &r) { cfg.custom_t2 = r.numbers(); }},
    {"dictionary.b0", [&](const R &r) { cfg.custom_b0 = r.numbers(); }},
    {"dictionary.drop_t2_above_t1", [&](const R &r) { cfg.drop_t2_above_t1 = r.boolean(); }},
    {"cs.alpha_wavelet", [&](const R &r) { cfg.pipeline.cs.alpha_wavelet = nonneg(r); }},
    {"cs.alpha_tv", [&](const R &r) { cfg.pipeline.cs.alpha_tv = nonneg(r); }},
    {"cs.smooth_mu", [&](const R &r) { cfg.pipeline.cs.smooth_mu = positive(r); }},
    {"cs.max_iters", [&](const R &r) { cfg.pipeline.cs.max_iters = static_cast<int>(r.unsigned_integer()); }},
    {"cs.wavelet_levels", [&](const R &r) { cfg.pipeline.cs.wavelet_levels = static_cast<int>(positive_index(r)); }},
    {"cs.outer_iters", [&](const R &r) { cfg.pipeline.outer_iters = static_cast<int>(positive_index(r)); }},
    {"match.background",
     [&](const R &r) {
       const double v = nonneg(r);
       if (v >= 1)
         throw ConfigError(r.line(), "background must lie in [0, 1)");
       cfg.pipeline.background = v;
     }},
    {"metric.enabled", [&](const R &r) { cfg.metric = r.boolean(); }},
    {"metric.ridge",
     [&](const R &r) {
       if (r.text() == "auto")
         cfg.ridge.reset();
       else
         cfg.ridge = nonneg(r);
     }},
    {"metric.ridge_scale", [&](const R &r) { cfg.ridge_scale = nonneg(r); }},
    {"metric.train_perturbed", [&](const R &r) { cfg.train_perturbed = r.boolean(); }},
    {"metric.train_seed", [&](const R &r) { cfg.train_seed = r.unsigned_integer(); }},
    {"metric.train_phantoms", [&](const R &r) { cfg.train_phantoms = static_cast<int>(positive_index(r)); }},
    {"blip.iters", [&](const R &r) { cfg.pipeline.blip_iters = static_cast<int>(positive_index(r)); }},
    {"blip.step", [&](const R &r) { cfg.pipeline.blip_step = positive(r); }},
    {"noise.sigma", [&](const R &r) { cfg.noise_sigma = nonneg(r); }},
    {"noise.target_psnr", [&](const R &r) { cfg.noise_target_psnr = nonneg(r); }},
    {"experiment.methods",
     [&](const R &r) {
       cfg.methods.clear();
       for (const auto &m : detail::split_list(r.text())) {
         try {
           cfg.methods.push_back(parse_method(m));
         } catch (const ValidationError &e) {
           throw ConfigError(r.line(), e.what());
         }
       }
     }},
    {"experiment.seeds", [&](const R &r) { cfg.seeds = r.unsigned_list(); }},
    {"experiment.output", [&](const R &r) { cfg.output = r.text(); }},
    {"experiment.threads", [&](const R &r) { cfg.pipeline.threads = static_cast<int>(r.unsigned_integer()); }},
  };

  for (const auto &[key, value] : entries) {
    const auto h = handlers.find(key);
    if (h == handlers.end())
      throw ConfigError(value.line, "unknown key '" + key + "'");
    h->second(R(value));
  }
  cfg.validate();
  return cfg;
}

inline ExperimentConfig parse_config_text(const std::string &text, ExperimentConfig base = {}) {
  std::istringstream is(text);
  return parse_config(is, std::move(base));
}

/// Canonical text form; parse_config(write_config(c)) reproduces c.
inline void write_config(std::ostream &os, const ExperimentConfig &c) {
  std::ostringstream o;
  o.precision(17);
  auto list = [&o](const auto &v) {
    for (std::size_t i = 0; i < v.size(); ++i)
      o << (i ? ", " : "") << v[i];
  };
  auto boolean = [](bool b) { return b ? "true" : "false"; };
  o << "[image]\nrows = " << c.rows << "\ncols = " << c.cols << "\nframes = " << c.frames << "\n\n";
  o << "[phantom]\ngrid_aligned = " << boolean(c.grid_aligned) << "\nt1_noise = " << c.tissue_noise.t1_lo << ", "
    << c.tissue_noise.t1_hi << "\nt2_noise = " << c.tissue_noise.t2_lo << ", " << c.tissue_noise.t2_hi
    << "\nb0_noise = " << c.tissue_noise.b0_lo << ", " << c.tissue_noise.b0_hi << "\n\n";
  o << "[sequence]\nvariant = " << (c.fa_variant == FaVariant::Literal ? "literal" : "corrected")
    << "\neta = " << c.eta_sigma << "\nseed = " << c.sequence_seed << "\nrandomize_tr = " << boolean(c.randomize_tr)
    << "\n\n";
  o << "[sampling]\nstrategy = " << to_string(c.sampling) << "\nrows_per_frame = " << c.rows_per_frame
    << "\ncenter = " << c.center << "\npower = " << c.power << "\n\n";
  o << "[dictionary]\npreset = " << to_string(c.grid) << "\nt1_steps = " << c.grid_t1
    << "\nt2_steps = " << c.grid_t2 << "\nb0_steps = " << c.grid_b0 << "\n";
  if (!c.custom_t1.empty()) {
    o << "t1 = ";
    list(c.custom_t1);
    o << "\n";
  }
  if (!c.custom_t2.empty()) {
    o << "t2 = ";
    list(c.custom_t2);
    o << "\n";
  }
  if (!c.custom_b0.empty()) {
    o << "b0 = ";
    list(c.custom_b0);
    o << "\n";
  }
  o << "drop_t2_above_t1 = " << boolean(c.drop_t2_above_t1) << "\n\n";
  const CsConfig &cs = c.pipeline.cs;
  o << "[cs]\nalpha_wavelet = " << cs.alpha_wavelet << "\nalpha_tv = " << cs.alpha_tv
    << "\nsmooth_mu = " << cs.smooth_mu << "\nmax_iters = " << cs.max_iters
    << "\nwavelet_levels = " << cs.wavelet_levels << "\nouter_iters = " << c.pipeline.outer_iters << "\n\n";
  o << "[match]\nbackground = " << c.pipeline.background << "\n\n";
  o << "[metric]\nenabled = " << boolean(c.metric) << "\nridge = ";
  if (c.ridge)
    o << *c.ridge;
  else
    o << "auto";
  o << "\nridge_scale = " << c.ridge_scale << "\ntrain_perturbed = " << boolean(c.train_perturbed);
  o << "\ntrain_seed = " << c.train_seed << "\ntrain_phantoms = " << c.train_phantoms << "\n\n";
  o << "[blip]\niters = " << c.pipeline.blip_iters << "\nstep = " << c.pipeline.blip_step << "\n\n";
  o << "[noise]\nsigma = " << c.noise_sigma << "\ntarget_psnr = " << c.noise_target_psnr << "\n\n";
  o << "[experiment]\nmethods = ";
  std::vector<std::string> names;
  for (Method m : c.methods)
    names.push_back(to_string(m));
  list(names);
  o << "\nseeds = ";
  list(c.seeds);
  o << "\noutput = " << c.output << "\nthreads = " << c.pipeline.threads << "\n";
  os << o.str();
}

inline std::string config_text(const ExperimentConfig &c) {
  std::ostringstream os;
  write_config(os, c);
  return os.str();
}

} // namespace mrf
