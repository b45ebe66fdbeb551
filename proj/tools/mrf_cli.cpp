#include "mrf/commands.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>

namespace {

using namespace mrf;

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<int> threads;
  bool verbose = false;
};

SamplingStrategy parse_strategy(const std::string &s) {
  for (SamplingStrategy k :
       {SamplingStrategy::Alternating, SamplingStrategy::Independent, SamplingStrategy::Epi, SamplingStrategy::Full})
    if (to_string(k) == s)
      return k;
  throw ValidationError("unknown sampling strategy '" + s + "'");
}

int env_threads() {
  const char *e = std::getenv("MRF_THREADS");
  if (!e || !*e)
    return -1;
  char *end = nullptr;
  const long n = std::strtol(e, &end, 10);
  if (*end || n < 0)
    throw ValidationError("MRF_THREADS must be a non-negative integer");
  return static_cast<int>(n);
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Compressed-sensing MR fingerprinting with a learned matching metric"};
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--config", g.config, "Config file (key = value, [sections])");
  app.add_option("--seed", g.seed, "Phantom / acquisition seed; overrides the seed list for run and study");
  app.add_option("--out", g.out, "Output directory (default: experiment.output)");
  app.add_option("--threads", g.threads, "Worker threads, 0 = hardware (fallback: MRF_THREADS)")->check(
    CLI::NonNegativeNumber);
  app.add_flag("--verbose,-v", g.verbose, "Progress on stderr");

  std::optional<int> training;
  auto *phantom = app.add_subcommand("phantom", "Synthesize labels and parameter maps");
  phantom->add_option("--train", training, "Training phantom I (seed train_seed + I, perturbed tissue)")
    ->check(CLI::NonNegativeNumber);

  app.add_subcommand("dict", "Simulate the dictionary for the configured sequence and grid");

  std::string phantom_dir, strategy = "alternating";
  auto *acq = app.add_subcommand("acquire", "Render a phantom and sample k-space");
  acq->add_option("--phantom", phantom_dir, "Phantom directory")->required();
  acq->add_option("--strategy", strategy, "alternating, independent, epi or full");

  std::string acq_dir, dict_dir;
  std::vector<std::string> train_phantoms, train_acqs;
  auto *train = app.add_subcommand("train-metric", "Learn the RCA metric on training acquisitions");
  train->add_option("--phantom", train_phantoms, "Training phantom directories")->required();
  train->add_option("--acq", train_acqs, "Training acquisition directories, one per phantom")->required();
  train->add_option("--dict", dict_dir, "Dictionary directory")->required();

  std::string method = "csmrf";
  std::optional<std::string> metric_file;
  auto *recon = app.add_subcommand("reconstruct", "Estimate parameter maps from an acquisition");
  recon->add_option("--acq", acq_dir, "Acquisition directory")->required();
  recon->add_option("--dict", dict_dir, "Dictionary directory")->required();
  recon->add_option("--method", method, "oracle, mrf, csmrf, csmrf_ml or blip");
  recon->add_option("--metric", metric_file, "metric.bin for csmrf_ml");

  std::string est_dir, truth_dir, label = "estimate";
  auto *eval = app.add_subcommand("evaluate", "PSNR and SSIM of estimated maps against the truth");
  eval->add_option("--est", est_dir, "Estimate directory")->required();
  eval->add_option("--truth", truth_dir, "Truth (phantom) directory")->required();
  eval->add_option("--label", label, "Method label for the CSV");

  std::optional<std::string> export_truth;
  auto *exp = app.add_subcommand("export", "Write maps as 16-bit PGM images");
  exp->add_option("--est", est_dir, "Map directory")->required();
  exp->add_option("--truth", export_truth, "Truth directory for a shared display range");

  std::string study_kind;
  auto *study = app.add_subcommand("study", "Sweep one setting over all seeds");
  study->add_option("kind", study_kind, "ratio, length, strategy or metric")->required();

  app.add_subcommand("run", "Every configured method on every configured seed");

  CLI11_PARSE(app, argc, argv);

  try {
    ExperimentConfig cfg = g.config.empty() ? ExperimentConfig{} : load_config(g.config);
    if (g.threads)
      cfg.pipeline.threads = *g.threads;
    else if (const int t = env_threads(); t >= 0)
      cfg.pipeline.threads = t;
    if (g.seed)
      cfg.seeds = {*g.seed};
    const std::uint64_t seed = cfg.seeds.front();
    const fs::path out = g.out.empty() ? fs::path(cfg.output) : fs::path(g.out);
    cfg.validate();
    const Log log = g.verbose ? Log([](const std::string &s) { std::cerr << s << std::endl; }) : Log{};

    const CLI::App *sub = app.get_subcommands().front();
    const std::string name = sub->get_name();
    if (name == "phantom") {
      cmd_phantom(cfg, seed, out, training);
    } else if (name == "dict") {
      const Dictionary d = cmd_dict(cfg, out);
      if (log)
        log(std::to_string(d.size()) + " atoms");
    } else if (name == "acquire") {
      cmd_acquire(cfg, seed, phantom_dir, parse_strategy(strategy), out);
    } else if (name == "train-metric") {
      const MahalanobisMetric m = cmd_train_metric(cfg, {train_phantoms.begin(), train_phantoms.end()},
                                                   {train_acqs.begin(), train_acqs.end()}, dict_dir, out);
      if (log)
        log("ridge " + std::to_string(m.ridge));
    } else if (name == "reconstruct") {
      std::optional<fs::path> mf;
      if (metric_file)
        mf = *metric_file;
      const EstimateResult r = cmd_reconstruct(cfg, acq_dir, dict_dir, parse_method(method), mf, out);
      if (log && !r.warnings.empty())
        log(std::to_string(r.warnings.size()) + " frames ended on a failed line search");
    } else if (name == "evaluate") {
      const RunScore s = cmd_evaluate(cfg, est_dir, truth_dir, label, seed, out);
      for (std::size_t m = 0; m < 4; ++m)
        std::cout << kMapNames[m] << ": PSNR " << s.maps[m].psnr << " dB, SSIM " << s.maps[m].ssim << '\n';
    } else if (name == "export") {
      std::optional<fs::path> t;
      if (export_truth)
        t = *export_truth;
      cmd_export(est_dir, t, out);
    } else if (name == "study") {
      const StudyResult r = cmd_study(parse_study(study_kind), cfg, out, log);
      write_study_aggregate_csv(std::cout, r.aggregate);
    } else if (name == "run") {
      write_aggregate_csv(std::cout, aggregate(cmd_run(cfg, out, log)));
    }
  } catch (const std::exception &e) {
    std::cerr << "mrf: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
