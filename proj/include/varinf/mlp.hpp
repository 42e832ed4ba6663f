#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "varinf/graph.hpp"
#include "varinf/rng.hpp"
#include "varinf/tensor.hpp"

namespace varinf {

enum class Activation { kRelu, kTanh, kSigmoid, kIdentity };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& name);

// Where one layer's weight matrix or bias vector sits inside a flat parameter
// array.
struct ParamSegment {
  enum class Kind { kWeight, kBias };
  std::size_t layer = 0;
  Kind kind = Kind::kWeight;
  std::size_t offset = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t size() const { return rows * cols; }
  friend bool operator==(const ParamSegment&, const ParamSegment&) = default;
};

struct ParamLayout {
  std::vector<ParamSegment> segments;
  std::size_t total = 0;

  // Per layer: weights (n_in x n_out, row-major) then bias (n_out).
  static ParamLayout for_layers(std::span<const std::size_t> layer_sizes);
  // Throws ContractError unless the segments tile [0, total) exactly.
  void validate() const;
  friend bool operator==(const ParamLayout&, const ParamLayout&) = default;
};

struct ParamVector {
  std::vector<double> values;
  ParamLayout layout;

  std::size_t size() const { return values.size(); }
  friend bool operator==(const ParamVector&, const ParamVector&) = default;
};

// Frozen copy of a parameter vector. There is no mutable access, so the
// values observed through a snapshot never change after it is taken.
class NetSnapshot {
 public:
  explicit NetSnapshot(ParamVector params) : params_(std::move(params)) {}
  const ParamVector& params() const { return params_; }
  std::span<const double> values() const { return params_.values; }
  std::size_t size() const { return params_.values.size(); }

 private:
  ParamVector params_;
};

NetSnapshot snapshot(const ParamVector& params);
// Euclidean distance between two parameter arrays of equal length.
double param_distance(std::span<const double> a, std::span<const double> b);

struct MlpSpec {
  std::vector<std::size_t> layer_sizes;  // input width first, output width last
  Activation hidden = Activation::kRelu;
  Activation output = Activation::kIdentity;
  friend bool operator==(const MlpSpec&, const MlpSpec&) = default;
};

// Hidden-layer shape shared by every network a trainer builds.
struct NetConfig {
  std::vector<std::size_t> hidden = {64, 64};
  Activation activation = Activation::kRelu;
};

MlpSpec make_spec(std::size_t in, const NetConfig& net, std::size_t out,
                  Activation output = Activation::kIdentity);

std::size_t mlp_param_count(std::span<const std::size_t> layer_sizes);

class Mlp {
 public:
  // Weights and biases drawn uniformly from +-1/sqrt(fan_in).
  Mlp(MlpSpec spec, Rng& init);
  Mlp(MlpSpec spec, ParamVector params);
  static Mlp zeros(MlpSpec spec);

  const MlpSpec& spec() const { return spec_; }
  std::size_t input_dim() const { return spec_.layer_sizes.front(); }
  std::size_t output_dim() const { return spec_.layer_sizes.back(); }
  std::size_t param_count() const { return params_.values.size(); }
  ParamVector& params() { return params_; }
  const ParamVector& params() const { return params_; }

  // Registers this network's parameters on `g`: as a parameter node when
  // trainable, else as a constant (no gradient ever reaches it).
  NodeId bind(Graph& g, bool trainable) const;
  // Builds the forward pass on `g` using the bound parameter node.
  NodeId apply(Graph& g, NodeId params, NodeId x) const;

 private:
  static void check_spec(const MlpSpec& spec);
  MlpSpec spec_;
  ParamVector params_;
};

// Evaluates a network without recording a graph. `params` may come from the
// network itself or from a snapshot with the same layout.
Tensor forward(const MlpSpec& spec, std::span<const double> params, const Tensor& input);
inline Tensor forward(const Mlp& net, const Tensor& input) {
  return forward(net.spec(), net.params().values, input);
}
inline Tensor forward(const Mlp& net, const NetSnapshot& snap, const Tensor& input) {
  return forward(net.spec(), snap.values(), input);
}

NodeId apply_activation(Graph& g, NodeId x, Activation a);

}  // namespace varinf
