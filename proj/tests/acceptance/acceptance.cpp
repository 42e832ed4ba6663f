// One PASS/FAIL line per acceptance criterion.
//   acceptance [--out DIR] [--only N[,N...]]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "gradcheck.hpp"
#include "varinf/cli.hpp"
#include "varinf/datasets.hpp"
#include "varinf/em.hpp"
#include "varinf/errors.hpp"
#include "varinf/experiment.hpp"
#include "varinf/gan.hpp"
#include "varinf/io.hpp"
#include "varinf/metrics.hpp"

using namespace varinf;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  const char* name;
  double budget_seconds;
  std::function<Verdict(const fs::path&)> run;
};

std::string fmt(double v, int digits = 4) {
  std::ostringstream s;
  s.precision(digits);
  s << v;
  return s.str();
}

ExperimentConfig shipped(const std::string& name, const fs::path& out) {
  ExperimentConfig c = load_config(fs::path(VARINF_CONFIG_DIR) / name);
  c.output_dir = out;
  return c;
}

std::vector<double> final_values(const ExperimentResult& r, ModelKind model, const std::string& key) {
  std::vector<double> v;
  for (const auto& o : r.outcomes) {
    if (o.model != model) continue;
    if (!o.ok) throw std::runtime_error(to_string(model) + " seed " + std::to_string(o.seed) +
                                        " failed: " + o.error);
    v.push_back(o.final_metrics.at(key));
  }
  return v;
}

std::string join(const std::vector<double>& v, int digits = 3) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + fmt(v[i], digits);
  return s;
}

// 1. joint KL bounds marginal KL
Verdict bound_check(const fs::path&) {
  const BoundSweep s = bound_sweep(1000, 2024, 4, 4);
  return {s.holds == s.trials,
          std::to_string(s.holds) + "/" + std::to_string(s.trials) + " pairs, min gap " +
              fmt(s.min_gap)};
}

// 2. analytic gradients of every loss
Verdict gradient_oracle(const fs::path&) {
  const auto checks = gradcheck::run_loss_checks(20, 7);
  bool ok = !checks.empty();
  double worst = 0.0;
  std::string worst_name;
  for (const auto& c : checks) {
    ok = ok && c.instances >= 20 && c.max_error < 1e-4;
    if (c.max_error >= worst) worst = c.max_error, worst_name = c.name;
  }
  return {ok, std::to_string(checks.size()) + " losses x 20 instances, worst " + fmt(worst) +
                  " (" + worst_name + ")"};
}

// 3. EM on three separated blobs
Verdict em_recovery(const fs::path&) {
  const GmmModel truth({1.0 / 3, 1.0 / 3, 1.0 / 3}, Tensor({3, 2}, {0, 0, 4, 0, 2, 4}),
                       Tensor::matrix(3, 2, std::log(0.25)));
  std::size_t monotone = 0, recovered = 0;
  double worst_drop = 0.0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    Rng data_rng(seed, Stream::kData);
    const Tensor x = gmm_sample(truth, data_rng, 500).x;
    EmConfig cfg;
    cfg.seed = seed;
    const EmResult r = em_fit(x, 3, cfg);
    bool mono = true;
    for (std::size_t i = 1; i < r.loglik_history.size(); ++i) {
      const double drop = r.loglik_history[i - 1] - r.loglik_history[i];
      worst_drop = std::max(worst_drop, drop);
      if (drop > 1e-9) mono = false;
    }
    monotone += mono;
    std::vector<std::size_t> perm{0, 1, 2};
    double best = 1e300;
    do {
      double worst = 0.0;
      for (std::size_t k = 0; k < 3; ++k) {
        worst = std::max(worst, std::hypot(r.model.means.at(perm[k], 0) - truth.means.at(k, 0),
                                           r.model.means.at(perm[k], 1) - truth.means.at(k, 1)));
      }
      best = std::min(best, worst);
    } while (std::next_permutation(perm.begin(), perm.end()));
    recovered += best <= 0.2;
  }
  return {monotone == 10 && recovered >= 9,
          "monotone " + std::to_string(monotone) + "/10 (largest drop " + fmt(worst_drop) +
              "), means within 0.2 in " + std::to_string(recovered) + "/10"};
}

// 4. trained D against the density ratio of two fixed Gaussians
Verdict optimal_discriminator(const fs::path&) {
  const double mu_q = 1.0, sigma_q = 1.5;
  const GmmModel p({1.0}, Tensor({1, 1}, {0.0}), Tensor({1, 1}, {0.0}));
  const GmmModel q({1.0}, Tensor({1, 1}, {mu_q}), Tensor({1, 1}, {2.0 * std::log(sigma_q)}));

  GanConfig cfg;
  cfg.latent_dim = 1;
  cfg.discriminator_net = {{64, 64}, Activation::kTanh};
  Rng init(11, Stream::kInit);
  // G(z) = mu_q + sigma_q z, held fixed.
  Mlp gen = Mlp::zeros({{1, 1}, Activation::kIdentity, Activation::kIdentity});
  gen.params().values = {sigma_q, mu_q};
  GanModel model{gen, Mlp(make_spec(1, cfg.discriminator_net, 1), init), 1, std::nullopt};
  Optimizer opt({OptimizerKind::kAdam, 1e-3, 0.9, 0.9, 0.999, 1e-8},
                model.discriminator.param_count());
  Rng rng(11, Stream::kTrain);
  for (std::size_t step = 0; step < 4000; ++step) {
    const Tensor real = normal_noise(rng, {512, 1});
    const Tensor z = normal_noise(rng, {512, 1});
    Graph g;
    const DLossGraph r = build_d_loss(g, model, real, z);
    g.backward(r.loss);
    opt.step(model.discriminator.params(), g.grad(r.discriminator_params).values());
  }

  // Central 99% of the pooled mass, weighted as the pool itself.
  Rng eval_rng(11, Stream::kEval);
  const std::size_t n = 200000;
  std::vector<double> xs(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double e = eval_rng.normal();
    xs[i] = i % 2 ? e : mu_q + sigma_q * e;
  }
  std::vector<double> sorted = xs;
  std::sort(sorted.begin(), sorted.end());
  const double lo = sorted[n / 200], hi = sorted[n - 1 - n / 200];
  std::vector<double> kept;
  for (double v : xs) {
    if (v >= lo && v <= hi) kept.push_back(v);
  }
  const Tensor grid({kept.size(), 1}, kept);
  const auto d = discriminator_probs(model.discriminator, grid);
  double mae = 0.0, worst = 0.0;
  for (std::size_t i = 0; i < kept.size(); ++i) {
    const double err = std::abs(d[i] - optimal_d_reference(p, q, std::span(&kept[i], 1)));
    mae += err;
    worst = std::max(worst, err);
  }
  mae /= static_cast<double>(kept.size());
  return {mae <= 0.05, "MAE " + fmt(mae) + " on [" + fmt(lo, 3) + ", " + fmt(hi, 3) +
                           "], max abs error " + fmt(worst)};
}

// 5. regularized vs plain GAN on ring-8
Verdict regularizer_effect(const fs::path& out) {
  ExperimentConfig c = shipped("ring8_gan_vs_reg.json", out / "gan_vs_reg");
  c.models = {ModelKind::kGan, ModelKind::kGanReg};
  c.gan.lambda = 0.5;
  c.seeds = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  const ExperimentResult r = run_experiment(c);
  const auto plain = final_values(r, ModelKind::kGan, "mode_coverage");
  const auto reg = final_values(r, ModelKind::kGanReg, "mode_coverage");
  const double m_plain = spread(plain).median, m_reg = spread(reg).median;
  const auto all8 = [](const std::vector<double>& v) {
    return std::count_if(v.begin(), v.end(), [](double x) { return x >= 8.0; });
  };
  return {m_reg >= m_plain && all8(reg) >= all8(plain),
          "median coverage reg " + fmt(m_reg) + " vs plain " + fmt(m_plain) + "; all-8 runs " +
              std::to_string(all8(reg)) + " vs " + std::to_string(all8(plain)) + "; reg [" +
              join(reg) + "] plain [" + join(plain) + "]"};
}

// 6. KL estimate grows quadratically in the parameter step
Verdict taylor_scaling(const fs::path& out) {
  ExperimentConfig c = shipped("ring8_gan_vs_reg.json", out / "taylor");
  c.models = {ModelKind::kGanReg};
  c.seeds = {1};
  c.eval.write_samples = false;
  const ExperimentResult r = run_experiment(c);
  if (!r.outcomes.at(0).ok) return {false, "training failed: " + r.outcomes.at(0).error};
  const Mlp gen = checkpoint_generator(load_checkpoint(r.outcomes.at(0).directory / "checkpoint.bin"));
  const auto est = HistogramEstimator::uniform(2, -1.5, 1.5, 60);
  const std::vector<double> eps{0.01, 0.02, 0.04};
  Rng dir_rng(3, Stream::kProbe);
  std::size_t in_band = 0;
  std::vector<double> slopes;
  for (std::size_t d = 0; d < 5; ++d) {
    const auto direction = random_unit_direction(gen.param_count(), dir_rng);
    const auto probe = taylor_scaling_probe(gen, direction, eps, 1000000, est, 100 + d);
    slopes.push_back(probe.inconclusive ? std::nan("") : probe.slope);
    in_band += !probe.inconclusive && probe.slope >= 1.7 && probe.slope <= 2.3;
  }
  return {in_band >= 4, std::to_string(in_band) + "/5 slopes in [1.7, 2.3]: " + join(slopes)};
}

// 7. VAE sample quality
Verdict vae_quality(const fs::path& out) {
  const ExperimentResult r = run_experiment(shipped("ring8_vae.json", out / "vae"));
  const auto before = final_values(r, ModelKind::kVae, "kl_est_initial");
  const auto after = final_values(r, ModelKind::kVae, "kl_est");
  std::vector<double> ratio;
  std::size_t ok = 0;
  for (std::size_t i = 0; i < before.size(); ++i) {
    ratio.push_back(after[i] / before[i]);
    ok += ratio.back() <= 0.5;
  }
  return {ok == 5 && before.size() == 5,
          std::to_string(ok) + "/5 seeds at <= 50% of untrained KL, ratios " + join(ratio)};
}

// 8. AAE latent match and reconstruction
Verdict aae_quality(const fs::path& out) {
  const ExperimentResult r = run_experiment(shipped("ring8_aae.json", out / "aae"));
  const auto before = final_values(r, ModelKind::kAae, "latent_kl_initial");
  const auto after = final_values(r, ModelKind::kAae, "latent_kl");
  const auto rec = final_values(r, ModelKind::kAae, "recon_error");
  std::vector<double> ratio;
  std::size_t ok = 0;
  for (std::size_t i = 0; i < before.size(); ++i) {
    ratio.push_back(after[i] / before[i]);
    ok += ratio.back() <= 0.5 && rec[i] < 0.1;
  }
  return {ok == 5 && before.size() == 5, std::to_string(ok) + "/5 seeds; latent KL ratios " +
                                             join(ratio) + "; recon " + join(rec)};
}

// 9. ALI loss variants
Verdict ali_variants(const fs::path& out) {
  std::vector<double> medians;
  std::string detail;
  for (AliVariant v : {AliVariant::kPaper, AliVariant::kMinmaxA, AliVariant::kMinmaxB}) {
    ExperimentConfig c = shipped("ring8_ali.json", out / ("ali_" + to_string(v)));
    c.ali.variant = v;
    const auto cov = final_values(run_experiment(c), ModelKind::kAli, "mode_coverage");
    medians.push_back(spread(cov).median);
    detail += to_string(v) + " [" + join(cov) + "] ";
  }
  const double da = std::abs(medians[0] - medians[1]);
  const double db = std::abs(medians[0] - medians[2]);
  return {da <= 1.0 && db <= 1.0, "median coverage paper " + fmt(medians[0]) + ", minmax-a " +
                                      fmt(medians[1]) + ", minmax-b " + fmt(medians[2]) + "; " +
                                      detail};
}

// 10. repeated train gives identical metrics
Verdict reproducibility(const fs::path& out) {
  const std::string cfg = (fs::path(VARINF_CONFIG_DIR) / "smoke_gan.json").string();
  std::vector<std::string> texts;
  for (const char* run : {"a", "b"}) {
    const std::string dir = (out / "repro" / run).string();
    const std::string set = "output_dir=" + dir;
    const char* argv[] = {"varinf", "train", "--config", cfg.c_str(), "--set", set.c_str()};
    std::ostringstream sink;
    if (cli_main(6, argv, sink, sink) != 0) return {false, "train failed: " + sink.str()};
    texts.push_back(read_text(fs::path(dir) / "seed-1" / "metrics.csv"));
  }
  const bool same = texts[0] == texts[1] && !texts[0].empty();
  return {same, same ? "metrics.csv identical (" + std::to_string(texts[0].size()) + " bytes)"
                     : "metrics.csv differs"};
}

}  // namespace

int main(int argc, char** argv) {
  fs::path out = "acceptance_runs";
  std::vector<int> only;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--out" && i + 1 < argc) {
      out = argv[++i];
    } else if (a == "--only" && i + 1 < argc) {
      std::stringstream ss(argv[++i]);
      std::string tok;
      while (std::getline(ss, tok, ',')) only.push_back(std::stoi(tok));
    } else {
      std::cerr << "usage: acceptance [--out DIR] [--only N[,N...]]\n";
      return 1;
    }
  }
  fs::remove_all(out);
  fs::create_directories(out);

  const std::vector<Criterion> criteria{
      {1, "joint KL bounds marginal KL", 5, bound_check},
      {2, "loss gradients vs finite differences", 120, gradient_oracle},
      {3, "EM monotone and recovers means", 60, em_recovery},
      {4, "trained D matches optimal D", 120, optimal_discriminator},
      {5, "regularizer keeps mode coverage", 1800, regularizer_effect},
      {6, "Taylor slope of KL vs step", 300, taylor_scaling},
      {7, "VAE halves histogram KL", 300, vae_quality},
      {8, "AAE latent KL and reconstruction", 600, aae_quality},
      {9, "ALI variants comparable", 1800, ali_variants},
      {10, "train is reproducible", 60, reproducibility},
  };

  int failed = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.run(out);
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs < c.budget_seconds;
    const bool pass = v.pass && in_time;
    failed += !pass;
    std::printf("%s %2d %s: %s [%.1fs / %.0fs%s]\n", pass ? "PASS" : "FAIL", c.id, c.name,
                v.detail.c_str(), secs, c.budget_seconds, in_time ? "" : " over budget");
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
