#include <gtest/gtest.h>

#include <cmath>

#include "../common/gradcheck.hpp"
#include "test_support.hpp"
#include "varinf/datasets.hpp"
#include "varinf/errors.hpp"
#include "varinf/gan.hpp"

using namespace varinf;

namespace {

GanModel small_gan(std::uint64_t seed, std::size_t hidden = 8) {
  GanConfig cfg;
  cfg.generator_net.hidden = {hidden};
  cfg.discriminator_net.hidden = {hidden};
  Rng rng(seed, Stream::kInit);
  return GanModel::create(2, cfg, rng);
}

// Zero weights, constant bias: D(x) = sigmoid(bias) everywhere.
Mlp constant_discriminator(const GanModel& m, double logit) {
  Mlp d = Mlp::zeros(m.discriminator.spec());
  d.params().values.back() = logit;
  return d;
}

}  // namespace

TEST(DLoss, HalfDiscriminatorGivesTwoLogTwo) {
  GanModel m = small_gan(1);
  m.discriminator = Mlp::zeros(m.discriminator.spec());
  Rng rng(2);
  const double l = d_loss(m, varinf::testing::random_matrix(rng, 9, 2),
                          varinf::testing::random_matrix(rng, 9, 2));
  EXPECT_NEAR(l, 2.0 * std::log(2.0), 1e-12);
  EXPECT_NEAR(l, 1.3863, 1e-4);
}

TEST(DLoss, SaturatedDiscriminatorStaysFinite) {
  GanModel m = small_gan(3);
  Rng rng(4);
  for (double logit : {500.0, -500.0}) {
    m.discriminator = constant_discriminator(m, logit);
    EXPECT_TRUE(std::isfinite(d_loss(m, varinf::testing::random_matrix(rng, 5, 2),
                                     varinf::testing::random_matrix(rng, 5, 2))));
  }
  // Perfect on reals, wrong on fakes: one term at the clamp floor.
  m.discriminator = constant_discriminator(m, 500.0);
  const double l = d_loss(m, Tensor::matrix(3, 2), Tensor::matrix(3, 2));
  EXPECT_NEAR(l, -std::log(1e-7) - std::log(1.0 - 1e-7), 1e-9);
}

TEST(GLoss, StandardAtHalfIsLogTwo) {
  GanModel m = small_gan(5);
  m.discriminator = Mlp::zeros(m.discriminator.spec());
  Rng rng(6);
  EXPECT_NEAR(g_loss_standard(m, varinf::testing::random_matrix(rng, 7, 2)), std::log(2.0), 1e-12);
}

TEST(GLoss, StandardNearOneIsNearZero) {
  GanModel m = small_gan(7);
  m.discriminator = constant_discriminator(m, 100.0);
  Rng rng(8);
  const double l = g_loss_standard(m, varinf::testing::random_matrix(rng, 7, 2));
  EXPECT_NEAR(l, 1e-7, 1e-12);
}

TEST(GLoss, RegularizedAtSnapshotEqualsStandard) {
  GanModel m = small_gan(9);
  Rng rng(10);
  const Tensor z = varinf::testing::random_matrix(rng, 11, 2);
  const GLoss r = g_loss_regularized(m, z, 0.7);
  EXPECT_EQ(r.regularizer, 0.0);
  EXPECT_EQ(r.total, g_loss_standard(m, z));
}

TEST(GLoss, LambdaZeroIsBitIdentical) {
  GanModel m = small_gan(11);
  for (auto& v : m.generator.params().values) v += 0.3;
  Rng rng(12);
  const Tensor z = varinf::testing::random_matrix(rng, 11, 2);
  const GLoss r = g_loss_regularized(m, z, 0.0);
  EXPECT_GT(r.regularizer, 0.0);
  EXPECT_EQ(r.total, g_loss_standard(m, z));
}

TEST(GLoss, ConstantOffsetGivesLambdaTimesSquaredNorm) {
  GanModel m = small_gan(13);
  const std::vector<double> c{0.3, -1.2};
  const std::size_t n = m.generator.param_count();
  m.generator.params().values[n - 2] += c[0];  // output bias
  m.generator.params().values[n - 1] += c[1];
  Rng rng(14);
  const double lambda = 0.5;
  const GLoss r = g_loss_regularized(m, varinf::testing::random_matrix(rng, 13, 2), lambda);
  const double sq = c[0] * c[0] + c[1] * c[1];
  EXPECT_NEAR(r.regularizer, sq, 1e-12);
  EXPECT_NEAR(r.total - r.adversarial, lambda * sq, 1e-12);
}

TEST(GLoss, MissingSnapshotIsContractError) {
  GanModel m = small_gan(15);
  m.snapshot.reset();
  EXPECT_THROW(g_loss_regularized(m, Tensor::matrix(2, 2), 0.5), ContractError);
}

TEST(GanLosses, StopGradientDiscipline) {
  GanModel m = small_gan(16);
  for (auto& v : m.generator.params().values) v += 0.1;
  Rng rng(17);
  const Tensor x = varinf::testing::random_matrix(rng, 6, 2);
  const Tensor z = varinf::testing::random_matrix(rng, 6, 2);
  {
    Graph g;
    const DLossGraph r = build_d_loss(g, m, x, z);
    g.backward(r.loss);
    for (double v : g.grad(r.generator_params).values()) EXPECT_EQ(v, 0.0);
  }
  for (std::optional<double> lambda : {std::optional<double>{}, std::optional<double>{0.5}}) {
    Graph g;
    const GLossGraph r = build_g_loss(g, m, z, lambda);
    g.backward(r.loss);
    for (double v : g.grad(r.discriminator_params).values()) EXPECT_EQ(v, 0.0);
  }
}

TEST(GanLosses, GradientsMatchFiniteDifferences) {
  std::size_t seen = 0;
  for (const auto& c : gradcheck::run_loss_checks(20, 18)) {
    if (c.name != "d_loss" && c.name.rfind("g_loss", 0) != 0) continue;
    ++seen;
    EXPECT_EQ(c.instances, 20u) << c.name;
    EXPECT_LT(c.max_error, 1e-4) << c.name;
  }
  EXPECT_EQ(seen, 3u);
}

TEST(OptimalD, Examples) {
  const GmmModel p({1.0}, Tensor({1, 1}, {0.0}), Tensor::matrix(1, 1));
  const GmmModel q({1.0}, Tensor({1, 1}, {2.0}), Tensor::matrix(1, 1));
  const std::vector<double> one{1.0}, zero{0.0};
  EXPECT_NEAR(optimal_d_reference(p, q, one), 0.5, 1e-15);
  EXPECT_NEAR(optimal_d_reference(p, q, zero), 1.0 / (1.0 + std::exp(-2.0)), 1e-15);
  for (double x : {-3.0, 0.4, 9.0}) {
    const std::vector<double> xs{x};
    EXPECT_NEAR(optimal_d_reference(p, p, xs), 0.5, 1e-15);
  }
}

TEST(OptimalD, MatchesDensityRatioOracle) {
  const GmmModel p({0.4, 0.6}, Tensor({2, 1}, {-1.0, 1.5}), Tensor({2, 1}, {0.1, -0.5}));
  const GmmModel q({1.0}, Tensor({1, 1}, {0.3}), Tensor({1, 1}, {0.4}));
  for (double x = -3.0; x <= 3.0; x += 0.25) {
    const double pd = 0.4 * varinf::testing::normal_pdf(x, -1.0, std::exp(0.1)) +
                      0.6 * varinf::testing::normal_pdf(x, 1.5, std::exp(-0.5));
    const double qd = varinf::testing::normal_pdf(x, 0.3, std::exp(0.4));
    const std::vector<double> xs{x};
    EXPECT_NEAR(optimal_d_reference(p, q, xs), pd / (pd + qd), 1e-12);
  }
}

TEST(OptimalD, BothUnderflowIsDegenerate) {
  const GmmModel p({1.0}, Tensor({1, 1}, {0.0}), Tensor({1, 1}, {std::log(1e-300)}));
  const std::vector<double> x{1e200};
  EXPECT_THROW(optimal_d_reference(p, p, x), DegeneratePointError);
}

TEST(GanTrain, ZeroLearningRatesKeepEverythingConstant) {
  GanModel m = small_gan(19);
  GanConfig cfg;
  cfg.g_optimizer.learning_rate = 0.0;
  cfg.d_optimizer.learning_rate = 0.0;
  cfg.periods = 12;
  cfg.batch = 16;
  EvalSetup eval;
  eval.interval = 3;
  eval.samples = 64;
  const GanModel before = m;
  Rng rng(20);
  const GanRun run = gan_train(m, varinf::testing::random_matrix(rng, 40, 2), cfg, eval);
  EXPECT_EQ(m.generator.params(), before.generator.params());
  EXPECT_EQ(m.discriminator.params(), before.discriminator.params());
  for (double r : run.log.column("reg_term")) EXPECT_EQ(r, 0.0);
  for (double d : run.drift) EXPECT_EQ(d, 0.0);
  EXPECT_EQ(run.log.rows().size(), 4u);
}

TEST(GanTrain, SnapshotFrozenBetweenRefreshes) {
  GanModel m = small_gan(21);
  GanConfig cfg;
  cfg.periods = 10;
  cfg.batch = 16;
  cfg.snapshot_lag = 1000;  // never refreshed after the first step
  cfg.g_optimizer.learning_rate = 1e-2;
  EvalSetup eval;
  eval.interval = 0;
  const ParamVector initial = m.generator.params();
  Rng rng(22);
  const GanRun run = gan_train(m, varinf::testing::random_matrix(rng, 40, 2), cfg, eval);
  ASSERT_TRUE(m.snapshot.has_value());
  EXPECT_EQ(m.snapshot->params(), initial);
  EXPECT_NE(m.generator.params(), initial);
  EXPECT_TRUE(run.drift.empty());
}

TEST(GanTrain, DriftRecordedAtEveryRefresh) {
  GanModel m = small_gan(23);
  GanConfig cfg;
  cfg.periods = 10;
  cfg.g_steps = 2;
  cfg.snapshot_lag = 3;
  cfg.batch = 16;
  EvalSetup eval;
  eval.interval = 0;
  Rng rng(24);
  const GanRun run = gan_train(m, varinf::testing::random_matrix(rng, 40, 2), cfg, eval);
  // 20 generator steps, refreshes before steps 0,3,...,18 -> 6 after the first.
  EXPECT_EQ(run.drift.size(), 6u);
  for (double d : run.drift) EXPECT_GT(d, 0.0);
}

TEST(GanTrain, Deterministic) {
  auto once = [] {
    GanModel m = small_gan(25);
    GanConfig cfg;
    cfg.periods = 20;
    cfg.batch = 16;
    cfg.seed = 4;
    EvalSetup eval;
    eval.interval = 5;
    eval.samples = 128;
    eval.reference = make_dataset({DatasetKind::kRing8, 256, 0.05, 1, {}}).samples;
    eval.histogram = HistogramEstimator::uniform(2, -1.5, 1.5, 20);
    eval.modes = mode_spec_for(ring8_model());
    const GanRun run = gan_train(m, eval.reference, cfg, eval);
    return std::make_pair(run.log.to_csv(), m.generator.params().values);
  };
  EXPECT_EQ(once(), once());
}

TEST(GanTrain, NanAbortsWithDiagnostic) {
  GanModel m = small_gan(26);
  GanConfig cfg;
  cfg.periods = 3;
  cfg.batch = 4;
  EvalSetup eval;
  eval.interval = 0;
  Tensor data = Tensor::matrix(4, 2, std::nan(""));
  try {
    gan_train(m, data, cfg, eval);
    FAIL() << "expected DivergenceError";
  } catch (const DivergenceError& e) {
    EXPECT_NE(std::string(e.what()).find("checksum"), std::string::npos);
  }
}
