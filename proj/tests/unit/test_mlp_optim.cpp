#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <thread>

#include "test_support.hpp"
#include "varinf/checkpoint.hpp"
#include "varinf/errors.hpp"
#include "varinf/mlp.hpp"
#include "varinf/optim.hpp"

using namespace varinf;
using varinf::testing::central_differences;
using varinf::testing::relative_error;

namespace {

// Plain triple loops; independent of the Eigen path.
Tensor dense_forward(const MlpSpec& spec, const std::vector<double>& p, const Tensor& x) {
  std::vector<double> h(x.storage());
  std::size_t rows = x.rows(), offset = 0;
  for (std::size_t l = 0; l + 1 < spec.layer_sizes.size(); ++l) {
    const std::size_t n_in = spec.layer_sizes[l], n_out = spec.layer_sizes[l + 1];
    std::vector<double> next(rows * n_out, 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t o = 0; o < n_out; ++o) {
        double s = p[offset + n_in * n_out + o];
        for (std::size_t i = 0; i < n_in; ++i) s += h[r * n_in + i] * p[offset + i * n_out + o];
        const Activation a = l + 2 == spec.layer_sizes.size() ? spec.output : spec.hidden;
        if (a == Activation::kTanh) s = std::tanh(s);
        if (a == Activation::kRelu) s = std::max(s, 0.0);
        if (a == Activation::kSigmoid) s = 1.0 / (1.0 + std::exp(-s));
        next[r * n_out + o] = s;
      }
    }
    offset += (n_in + 1) * n_out;
    h = std::move(next);
  }
  return Tensor({rows, spec.layer_sizes.back()}, h);
}

double mse_loss(const Mlp& net, const std::vector<double>& w, const Tensor& x) {
  Graph g;
  NodeId p = g.constant(Tensor({w.size()}, w));
  return g.scalar(g.mean(g.square(net.apply(g, p, g.constant(x)))));
}

}  // namespace

TEST(Mlp, ParamCountMatchesLayerFormula) {
  Rng rng(1);
  Mlp net({{3, 5, 4, 2}, Activation::kTanh, Activation::kIdentity}, rng);
  EXPECT_EQ(net.param_count(), (3u + 1) * 5 + (5u + 1) * 4 + (4u + 1) * 2);
  EXPECT_NO_THROW(net.params().layout.validate());
  EXPECT_EQ(net.params().layout.total, net.param_count());
}

TEST(Mlp, InitWithinFanInBound) {
  Rng rng(2);
  Mlp net({{16, 8, 1}, Activation::kRelu, Activation::kIdentity}, rng);
  for (const auto& seg : net.params().layout.segments) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(net.spec().layer_sizes[seg.layer]));
    for (std::size_t i = 0; i < seg.size(); ++i) {
      EXPECT_LE(std::abs(net.params().values[seg.offset + i]), bound);
    }
  }
}

TEST(Mlp, IdentityLayerPassesInputThrough) {
  ParamVector p;
  p.values = {1, 0, 0, 1, 0, 0};  // W = I, b = 0
  Mlp net({{2, 2}, Activation::kIdentity, Activation::kIdentity}, p);
  const Tensor y = forward(net, Tensor::row({1.0, 2.0}));
  EXPECT_EQ(y.shape(), Shape{2});
  EXPECT_DOUBLE_EQ(y[0], 1.0);
  EXPECT_DOUBLE_EQ(y[1], 2.0);
}

TEST(Mlp, ZeroSigmoidNetOutputsHalf) {
  Mlp net = Mlp::zeros({{3, 4, 2}, Activation::kSigmoid, Activation::kSigmoid});
  Rng rng(3);
  const Tensor y = forward(net, varinf::testing::random_matrix(rng, 5, 3, 10.0));
  for (double v : y.values()) EXPECT_DOUBLE_EQ(v, 0.5);
}

TEST(Mlp, ForwardMatchesDenseOracle) {
  Rng rng(4);
  const MlpSpec spec{{3, 6, 2}, Activation::kTanh, Activation::kTanh};
  Mlp net(spec, rng);
  const Tensor x = varinf::testing::random_matrix(rng, 7, 3);
  const Tensor fast = forward(net, x);
  const Tensor oracle = dense_forward(spec, net.params().values, x);
  for (std::size_t i = 0; i < fast.size(); ++i) EXPECT_NEAR(fast[i], oracle[i], 1e-13);
  // Graph path agrees with the plain path.
  Graph g;
  const Tensor via_graph = g.value(net.apply(g, net.bind(g, false), g.constant(x)));
  EXPECT_EQ(via_graph, fast);
}

TEST(Mlp, InputWidthMismatchIsDimensionError) {
  Rng rng(5);
  Mlp net({{3, 2}, Activation::kRelu, Activation::kIdentity}, rng);
  EXPECT_THROW(forward(net, Tensor::matrix(2, 4)), DimensionError);
  Graph g;
  EXPECT_THROW(net.apply(g, net.bind(g, true), g.constant(Tensor::matrix(2, 4))),
               DimensionError);
}

// >= 100 random (net, input) pairs over every activation kind.
TEST(Mlp, BackwardMatchesCentralDifferences) {
  const Activation kinds[] = {Activation::kRelu, Activation::kTanh, Activation::kSigmoid,
                              Activation::kIdentity};
  Rng rng(6);
  int checked = 0;
  for (int trial = 0; trial < 120; ++trial) {
    const Activation hidden = kinds[trial % 4];
    const Activation output = kinds[(trial / 4) % 4];
    const MlpSpec spec{{2 + rng.index(3), 3 + rng.index(4), 1 + rng.index(3)}, hidden, output};
    Mlp net(spec, rng);
    const Tensor x = varinf::testing::random_matrix(rng, 1 + rng.index(4), spec.layer_sizes[0]);
    if (hidden == Activation::kRelu) {
      // Finite differences are meaningless across a ReLU kink; skip draws
      // with a pre-activation near zero.
      Graph probe;
      NodeId pre = probe.linear(probe.constant(x), net.bind(probe, false), 0,
                                spec.layer_sizes[0], spec.layer_sizes[1]);
      bool near_kink = false;
      for (double v : probe.value(pre).values()) near_kink |= std::abs(v) < 1e-2;
      if (near_kink) continue;
    }
    Graph g;
    NodeId p = net.bind(g, true);
    NodeId loss = g.mean(g.square(net.apply(g, p, g.constant(x))));
    g.backward(loss);
    const auto analytic = g.grad(p).storage();
    const auto numeric = central_differences(
        [&](const std::vector<double>& w) { return mse_loss(net, w, x); }, net.params().values);
    EXPECT_LT(relative_error(analytic, numeric), 1e-4) << "trial " << trial;
    ++checked;
  }
  EXPECT_GE(checked, 100);
}

TEST(Optimizer, SgdSingleStep) {
  Optimizer opt({OptimizerKind::kSgd, 0.1}, 1);
  std::vector<double> w{1.0};
  const std::vector<double> g{2.0};
  opt.step(std::span<double>(w), g);
  EXPECT_DOUBLE_EQ(w[0], 0.8);
  EXPECT_EQ(opt.steps(), 1u);
}

TEST(Optimizer, SgdZeroGradientLeavesParams) {
  Optimizer opt({OptimizerKind::kSgd, 0.1}, 2);
  std::vector<double> w{1.0, -3.0};
  opt.step(std::span<double>(w), std::vector<double>{0.0, 0.0});
  EXPECT_EQ(w, (std::vector<double>{1.0, -3.0}));
}

TEST(Optimizer, AdamFirstStepBiasCorrected) {
  // m = 0.2, v = 0.004; m_hat = 2, v_hat = 4; w -= 1e-3 * 2 / (2 + 1e-8).
  Optimizer opt({OptimizerKind::kAdam, 0.001, 0.9, 0.9, 0.999, 1e-8}, 1);
  std::vector<double> w{1.0};
  opt.step(std::span<double>(w), std::vector<double>{2.0});
  EXPECT_NEAR(w[0], 1.0 - 0.001 * 2.0 / (2.0 + 1e-8), 1e-15);
  EXPECT_NEAR(w[0], 0.999, 1e-8);
}

TEST(Optimizer, MomentumAccumulatesVelocity) {
  Optimizer opt({OptimizerKind::kMomentum, 0.1, 0.5}, 1);
  std::vector<double> w{0.0};
  opt.step(std::span<double>(w), std::vector<double>{1.0});  // v = 1
  opt.step(std::span<double>(w), std::vector<double>{1.0});  // v = 1.5
  EXPECT_DOUBLE_EQ(w[0], -0.1 - 0.15);
}

TEST(Optimizer, LengthMismatchIsContractError) {
  Optimizer opt({OptimizerKind::kSgd, 0.1}, 2);
  std::vector<double> w{1.0, 2.0};
  EXPECT_THROW(opt.step(std::span<double>(w), std::vector<double>{1.0}), ContractError);
}

TEST(Optimizer, StateIsolationAcrossInstances) {
  // Stepping one optimizer never changes what another produces.
  auto run = [](bool interleave) {
    Optimizer a({OptimizerKind::kAdam, 0.01}, 2), b({OptimizerKind::kAdam, 0.01}, 2);
    std::vector<double> wa{1.0, 1.0}, wb{5.0, -5.0};
    for (int i = 0; i < 10; ++i) {
      a.step(std::span<double>(wa), std::vector<double>{0.3, -0.2});
      if (interleave) b.step(std::span<double>(wb), std::vector<double>{9.0, 9.0});
    }
    return wa;
  };
  EXPECT_EQ(run(false), run(true));
}

TEST(Snapshot, IsDetachedFromLaterMutation) {
  Rng rng(7);
  Mlp net({{2, 3, 1}, Activation::kTanh, Activation::kIdentity}, rng);
  const NetSnapshot snap = snapshot(net.params());
  const std::vector<double> before = net.params().values;
  net.params().values[0] += 1.0;
  EXPECT_EQ(std::vector<double>(snap.values().begin(), snap.values().end()), before);
  const NetSnapshot again = snapshot(snap.params());
  EXPECT_EQ(again.params(), snap.params());
}

TEST(Snapshot, DistanceAfterSgdStepIsLrTimesGradNorm) {
  Rng rng(8);
  Mlp net({{2, 3, 1}, Activation::kTanh, Activation::kIdentity}, rng);
  const NetSnapshot snap = snapshot(net.params());
  std::vector<double> grad(net.param_count());
  double norm = 0.0;
  for (auto& g : grad) {
    g = rng.normal();
    norm += g * g;
  }
  Optimizer opt({OptimizerKind::kSgd, 0.05}, net.param_count());
  opt.step(net.params(), grad);
  EXPECT_NEAR(param_distance(net.params().values, snap.values()), 0.05 * std::sqrt(norm), 1e-12);
}

TEST(Determinism, SameSeedSameTrajectory) {
  auto train = [](std::uint64_t seed) {
    Rng init(seed, Stream::kInit), data(seed, Stream::kData);
    Mlp net({{2, 8, 1}, Activation::kTanh, Activation::kIdentity}, init);
    Optimizer opt({OptimizerKind::kAdam, 0.01}, net.param_count());
    for (int s = 0; s < 20; ++s) {
      const Tensor x = varinf::testing::random_matrix(data, 8, 2);
      Graph g;
      NodeId p = net.bind(g, true);
      g.backward(g.mean(g.square(net.apply(g, p, g.constant(x)))));
      opt.step(net.params(), g.grad(p).values());
    }
    return net.params().values;
  };
  EXPECT_EQ(train(3), train(3));
  EXPECT_NE(train(3), train(4));
}

TEST(Checkpoint, SaveLoadPreservesNetworks) {
  Rng rng(9);
  Mlp a({{2, 4, 2}, Activation::kRelu, Activation::kIdentity}, rng);
  Mlp b({{2, 3, 1}, Activation::kTanh, Activation::kSigmoid}, rng);
  Checkpoint ckpt;
  ckpt.add("generator", a);
  ckpt.add("discriminator", b);
  ckpt.meta = {{"model", "gan"}, {"latent_dim", 2}};
  const auto path = std::filesystem::temp_directory_path() / "varinf_ckpt_test.bin";
  save_checkpoint(path, ckpt);
  const Checkpoint back = load_checkpoint(path);
  EXPECT_EQ(back.mlp("generator").params(), a.params());
  EXPECT_EQ(back.mlp("discriminator").spec(), b.spec());
  EXPECT_EQ(back.meta.at("model"), "gan");
  std::filesystem::remove(path);
}

TEST(Checkpoint, HeaderLayoutIsLittleEndianFloat64) {
  Mlp net = Mlp::zeros({{1, 1}, Activation::kIdentity, Activation::kIdentity});
  net.params().values = {1.5, -2.0};
  Checkpoint ckpt;
  ckpt.add("net", net);
  const std::string bytes = encode_checkpoint(ckpt);
  EXPECT_EQ(bytes.substr(0, 8), "VARINFCK");
  EXPECT_EQ(static_cast<unsigned char>(bytes[8]), 1u);  // version, LE
  const std::string tail = bytes.substr(bytes.size() - 16);
  double v0;
  std::memcpy(&v0, tail.data(), 8);
  EXPECT_EQ(v0, 1.5);
  EXPECT_THROW(decode_checkpoint("XXXXXXXX"), ConfigError);
  EXPECT_THROW(decode_checkpoint(bytes.substr(0, bytes.size() - 3)), ConfigError);
}
