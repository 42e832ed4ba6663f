#include "varinf/cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <sstream>

#include "varinf/checkpoint.hpp"
#include "varinf/errors.hpp"
#include "varinf/experiment.hpp"
#include "varinf/io.hpp"
#include "varinf/metrics.hpp"

namespace varinf {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

struct DataFlags {
  std::string config;
  std::string kind = "ring8";
  std::size_t size = 4096;
  double noise = 0.05;
  std::uint64_t seed = 0;
  std::string path;
};

void add_data_flags(CLI::App* cmd, DataFlags& f) {
  cmd->add_option("--config", f.config, "Take the dataset and eval block from this config");
  cmd->add_option("--dataset", f.kind, "Dataset kind (ring8, grid25, spiral, gmm-file, point-file)");
  cmd->add_option("--size", f.size, "Dataset rows");
  cmd->add_option("--noise", f.noise, "Component standard deviation");
  cmd->add_option("--data-seed", f.seed, "Dataset seed");
  cmd->add_option("--path", f.path, "File for gmm-file / point-file datasets");
}

ExperimentConfig config_for(const DataFlags& f) {
  if (!f.config.empty()) return load_config(f.config);
  ExperimentConfig c;
  c.dataset.kind = dataset_kind_from_string(f.kind);
  c.dataset.size = f.size;
  c.dataset.noise = f.noise;
  c.dataset.seed = f.seed;
  c.dataset.path = f.path;
  c.dataset.validate();
  return c;
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size()) throw ConfigError("not a number list: '" + text + "'");
    out.push_back(v);
  }
  if (out.empty()) throw ConfigError("empty number list");
  return out;
}

int cmd_train(const std::string& config_path, const std::vector<std::string>& overrides,
              std::ostream& out) {
  const ExperimentConfig config = load_config(config_path, overrides);
  const ExperimentResult r = run_experiment(config);
  std::size_t failed = 0;
  for (const auto& o : r.outcomes) {
    out << to_string(o.model) << " seed " << o.seed << ": ";
    if (o.ok) {
      out << "ok";
      for (const char* key : {"mode_coverage", "kl_est", "loglik"}) {
        auto it = o.final_metrics.find(key);
        if (it != o.final_metrics.end() && std::isfinite(it->second)) {
          out << " " << key << "=" << format_double(it->second);
        }
      }
    } else {
      ++failed;
      out << "FAILED (" << o.error << ")";
    }
    out << "\n";
  }
  out << "outputs in " << config.output_dir.string() << "\n";
  return failed == 0 ? 0 : 2;
}

int cmd_eval(const DataFlags& f, const std::string& ckpt_path, std::size_t samples,
             std::uint64_t seed, const std::string& out_path, std::ostream& out) {
  const ExperimentConfig config = config_for(f);
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  const Dataset data = make_dataset(config.dataset);
  EvalConfig ec = config.eval;
  ec.samples = samples;
  const EvalSetup eval = make_eval_setup(ec, data);
  Rng rng(seed, Stream::kEval);
  const Tensor generated = sample_checkpoint(ckpt, samples, rng);
  const SampleScores s = score_samples(eval, generated);
  json j = {{"checkpoint", ckpt_path},
            {"model", ckpt.meta.value("model", "")},
            {"samples", samples},
            {"mode_coverage", finite_or_null(s.mode_coverage)},
            {"captured_fraction", finite_or_null(s.captured_fraction)},
            {"kl_est", finite_or_null(s.kl_est)}};
  if (eval.modes) j["modes"] = eval.modes->centers.rows();
  out << j.dump(2) << "\n";
  if (!out_path.empty()) write_text(out_path, j.dump(2) + "\n");
  return 0;
}

struct ProbeFlags {
  std::string checkpoint;
  std::size_t directions = 5;
  std::string epsilons = "0.01,0.02,0.04";
  std::size_t samples = 1000000;
  std::size_t bins = 60;
  double lower = -1.5;
  double upper = 1.5;
  std::uint64_t seed = 0;
  std::string out_dir;
};

int cmd_probe_taylor(const ProbeFlags& f, std::ostream& out) {
  const Checkpoint ckpt = load_checkpoint(f.checkpoint);
  const Mlp gen = checkpoint_generator(ckpt);
  const std::vector<double> eps = parse_list(f.epsilons);
  const auto est = HistogramEstimator::uniform(gen.output_dim(), f.lower, f.upper, f.bins);
  est.validate();
  Rng dir_rng(f.seed, Stream::kProbe);
  json results = json::array();
  std::size_t in_band = 0;
  for (std::size_t d = 0; d < f.directions; ++d) {
    const auto direction = random_unit_direction(gen.param_count(), dir_rng);
    const TaylorProbeResult r = taylor_scaling_probe(gen, direction, eps, f.samples, est, f.seed + d);
    const bool ok = !r.inconclusive && r.slope >= 1.7 && r.slope <= 2.3;
    in_band += ok;
    out << "direction " << d << ": slope " << format_double(r.slope) << " r2 " << format_double(r.r2)
        << (r.inconclusive ? " (inconclusive)" : "") << "\n";
    results.push_back({{"direction", d},
                       {"slope", r.slope},
                       {"intercept", r.intercept},
                       {"r2", r.r2},
                       {"inconclusive", r.inconclusive}});
    if (!f.out_dir.empty()) {
      write_text(fs::path(f.out_dir) / ("direction-" + std::to_string(d) + ".csv"), taylor_probe_csv(r));
    }
  }
  out << in_band << "/" << f.directions << " directions with slope in [1.7, 2.3]\n";
  if (!f.out_dir.empty()) {
    write_text(fs::path(f.out_dir) / "summary.json",
               json({{"checkpoint", f.checkpoint}, {"epsilons", eps}, {"samples", f.samples},
                     {"directions", results}, {"in_band", in_band}})
                       .dump(2) + "\n");
  }
  return 0;
}

int cmd_check_bounds(std::size_t trials, std::uint64_t seed, std::size_t m, std::size_t n,
                     std::ostream& out) {
  const BoundSweep s = bound_sweep(trials, seed, m, n);
  out << s.holds << "/" << s.trials << " holds (min gap " << format_double(s.min_gap) << ")\n";
  return s.holds == s.trials ? 0 : 2;
}

int cmd_demo(const std::string& out_dir, std::ostream& out) {
  ExperimentConfig c;
  c.models = {ModelKind::kGan, ModelKind::kGanReg};
  c.seeds = {1};
  c.output_dir = out_dir;
  c.dataset.size = 1024;
  c.eval.interval = 100;
  c.eval.samples = 1024;
  c.eval.write_ppm = true;
  c.gan.generator_net.hidden = {32, 32};
  c.gan.discriminator_net.hidden = {32, 32};
  c.gan.periods = 300;
  c.gan.batch = 64;
  out << "demo: gan vs gan-reg on ring8, 300 periods\n";
  const ExperimentResult r = run_experiment(c);
  std::size_t failed = 0;
  for (const auto& o : r.outcomes) {
    out << to_string(o.model) << ": " << (o.ok ? "ok" : "FAILED " + o.error);
    if (o.ok) out << " mode_coverage=" << format_double(o.final_metrics.at("mode_coverage"));
    out << "\n";
    failed += !o.ok;
  }
  out << "outputs in " << out_dir << "\n";
  return failed == 0 ? 0 : 2;
}

}  // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"varinf: variational-inference view of VAE, GAN, AAE and ALI", "varinf"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  auto* train = app.add_subcommand("train", "Run an experiment config");
  train->add_option("--config", config_path, "Experiment JSON file")->required();
  train->add_option("--set", overrides, "Override a field: dotted.path=value (repeatable)");

  DataFlags eval_data;
  std::string eval_ckpt, eval_out;
  std::size_t eval_samples = 4096;
  std::uint64_t eval_seed = 0;
  auto* eval = app.add_subcommand("eval", "Score samples of a checkpoint against a dataset");
  eval->add_option("--checkpoint", eval_ckpt, "checkpoint.bin")->required();
  eval->add_option("--samples", eval_samples, "Samples to draw");
  eval->add_option("--seed", eval_seed, "Sampling seed");
  eval->add_option("--out", eval_out, "Also write the JSON result here");
  add_data_flags(eval, eval_data);

  ProbeFlags probe_flags;
  auto* probe = app.add_subcommand("probe", "Diagnostics on a trained checkpoint");
  probe->require_subcommand(1);
  auto* taylor = probe->add_subcommand("taylor", "KL vs perturbation size along random directions");
  taylor->add_option("--checkpoint", probe_flags.checkpoint, "checkpoint.bin")->required();
  taylor->add_option("--directions", probe_flags.directions, "Random unit directions");
  taylor->add_option("--epsilons", probe_flags.epsilons, "Comma-separated, increasing");
  taylor->add_option("--samples", probe_flags.samples, "Latent draws per cloud");
  taylor->add_option("--bins", probe_flags.bins, "Histogram bins per axis");
  taylor->add_option("--lower", probe_flags.lower, "Histogram window lower edge");
  taylor->add_option("--upper", probe_flags.upper, "Histogram window upper edge");
  taylor->add_option("--seed", probe_flags.seed, "Probe seed");
  taylor->add_option("--out", probe_flags.out_dir, "Directory for CSV and JSON results");

  std::size_t trials = 1000, m = 4, n = 4;
  std::uint64_t bound_seed = 0;
  auto* check = app.add_subcommand("check", "Property sweeps");
  check->require_subcommand(1);
  auto* bounds = check->add_subcommand("bounds", "Joint KL never below marginal KL");
  bounds->add_option("--trials", trials, "Random joint pairs");
  bounds->add_option("--seed", bound_seed, "Sweep seed");
  bounds->add_option("--rows", m, "Joint table rows");
  bounds->add_option("--cols", n, "Joint table columns");

  std::string demo_out = "runs/demo";
  auto* demo = app.add_subcommand("demo", "Tiny end-to-end run");
  demo->add_option("--out", demo_out, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 1;
  }

  try {
    if (*train) return cmd_train(config_path, overrides, out);
    if (*eval) return cmd_eval(eval_data, eval_ckpt, eval_samples, eval_seed, eval_out, out);
    if (*taylor) return cmd_probe_taylor(probe_flags, out);
    if (*bounds) return cmd_check_bounds(trials, bound_seed, m, n, out);
    if (*demo) return cmd_demo(demo_out, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  err << app.help();
  return 1;
}

}  // namespace varinf
