#include "varinf/mlp.hpp"

#include <Eigen/Core>
#include <cmath>

#include "varinf/errors.hpp"

namespace varinf {

std::string to_string(Activation a) {
  switch (a) {
    case Activation::kRelu:
      return "relu";
    case Activation::kTanh:
      return "tanh";
    case Activation::kSigmoid:
      return "sigmoid";
    case Activation::kIdentity:
      return "identity";
  }
  return "identity";
}

Activation activation_from_string(const std::string& name) {
  if (name == "relu") return Activation::kRelu;
  if (name == "tanh") return Activation::kTanh;
  if (name == "sigmoid") return Activation::kSigmoid;
  if (name == "identity") return Activation::kIdentity;
  throw ConfigError("unknown activation '" + name + "'");
}

ParamLayout ParamLayout::for_layers(std::span<const std::size_t> layer_sizes) {
  ParamLayout layout;
  std::size_t offset = 0;
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    const std::size_t n_in = layer_sizes[l], n_out = layer_sizes[l + 1];
    layout.segments.push_back({l, ParamSegment::Kind::kWeight, offset, n_in, n_out});
    offset += n_in * n_out;
    layout.segments.push_back({l, ParamSegment::Kind::kBias, offset, 1, n_out});
    offset += n_out;
  }
  layout.total = offset;
  return layout;
}

void ParamLayout::validate() const {
  std::size_t expected = 0;
  for (const auto& s : segments) {
    if (s.offset != expected) throw ContractError("parameter layout has a gap or overlap");
    expected += s.size();
  }
  if (expected != total) throw ContractError("parameter layout does not cover the vector");
}

NetSnapshot snapshot(const ParamVector& params) { return NetSnapshot(params); }

double param_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("param_distance: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

MlpSpec make_spec(std::size_t in, const NetConfig& net, std::size_t out, Activation output) {
  MlpSpec spec;
  spec.layer_sizes.push_back(in);
  spec.layer_sizes.insert(spec.layer_sizes.end(), net.hidden.begin(), net.hidden.end());
  spec.layer_sizes.push_back(out);
  spec.hidden = net.activation;
  spec.output = output;
  return spec;
}

std::size_t mlp_param_count(std::span<const std::size_t> layer_sizes) {
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    n += (layer_sizes[l] + 1) * layer_sizes[l + 1];
  }
  return n;
}

void Mlp::check_spec(const MlpSpec& spec) {
  if (spec.layer_sizes.size() < 2) throw ContractError("mlp needs at least two layer sizes");
  for (std::size_t s : spec.layer_sizes) {
    if (s == 0) throw ContractError("mlp layer sizes must be positive");
  }
}

Mlp::Mlp(MlpSpec spec, Rng& init) : spec_(std::move(spec)) {
  check_spec(spec_);
  params_.layout = ParamLayout::for_layers(spec_.layer_sizes);
  params_.values.resize(params_.layout.total);
  for (const auto& seg : params_.layout.segments) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(spec_.layer_sizes[seg.layer]));
    for (std::size_t i = 0; i < seg.size(); ++i) {
      params_.values[seg.offset + i] = init.uniform(-bound, bound);
    }
  }
}

Mlp::Mlp(MlpSpec spec, ParamVector params) : spec_(std::move(spec)), params_(std::move(params)) {
  check_spec(spec_);
  const ParamLayout expected = ParamLayout::for_layers(spec_.layer_sizes);
  if (params_.layout.segments.empty()) params_.layout = expected;
  if (!(params_.layout == expected) || params_.values.size() != expected.total) {
    throw DimensionError("mlp: parameter vector does not match layer sizes");
  }
}

Mlp Mlp::zeros(MlpSpec spec) {
  ParamVector p;
  p.layout = ParamLayout::for_layers(spec.layer_sizes);
  p.values.assign(p.layout.total, 0.0);
  return Mlp(std::move(spec), std::move(p));
}

NodeId Mlp::bind(Graph& g, bool trainable) const {
  Tensor t(Shape{params_.values.size()}, params_.values);
  return trainable ? g.parameter(std::move(t)) : g.constant(std::move(t));
}

NodeId apply_activation(Graph& g, NodeId x, Activation a) {
  switch (a) {
    case Activation::kRelu:
      return g.relu(x);
    case Activation::kTanh:
      return g.tanh(x);
    case Activation::kSigmoid:
      return g.sigmoid(x);
    case Activation::kIdentity:
      return x;
  }
  return x;
}

NodeId Mlp::apply(Graph& g, NodeId params, NodeId x) const {
  if (g.value(x).cols() != input_dim()) {
    throw DimensionError("mlp: input width " + std::to_string(g.value(x).cols()) +
                         ", expected " + std::to_string(input_dim()));
  }
  const auto& sizes = spec_.layer_sizes;
  std::size_t offset = 0;
  NodeId h = x;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    h = g.linear(h, params, offset, sizes[l], sizes[l + 1]);
    offset += (sizes[l] + 1) * sizes[l + 1];
    h = apply_activation(g, h, l + 2 == sizes.size() ? spec_.output : spec_.hidden);
  }
  return h;
}

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void activate(RowMat& m, Activation a) {
  switch (a) {
    case Activation::kRelu:
      m = m.unaryExpr([](double v) { return v < 0.0 ? 0.0 : v; });
      break;
    case Activation::kTanh:
      m = m.unaryExpr([](double v) { return std::tanh(v); });
      break;
    case Activation::kSigmoid:
      m = m.unaryExpr([](double v) {
        return v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
      });
      break;
    case Activation::kIdentity:
      break;
  }
}

}  // namespace

Tensor forward(const MlpSpec& spec, std::span<const double> params, const Tensor& input) {
  const auto& sizes = spec.layer_sizes;
  if (input.cols() != sizes.front()) {
    throw DimensionError("forward: input width " + std::to_string(input.cols()) +
                         ", expected " + std::to_string(sizes.front()));
  }
  if (params.size() != mlp_param_count(sizes)) {
    throw DimensionError("forward: parameter count mismatch");
  }
  const auto rows = static_cast<Eigen::Index>(input.rows());
  RowMat h = Eigen::Map<const RowMat>(input.data(), rows, sizes.front());
  std::size_t offset = 0;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const auto n_in = static_cast<Eigen::Index>(sizes[l]);
    const auto n_out = static_cast<Eigen::Index>(sizes[l + 1]);
    Eigen::Map<const RowMat> W(params.data() + offset, n_in, n_out);
    Eigen::Map<const Eigen::RowVectorXd> b(params.data() + offset + n_in * n_out, n_out);
    RowMat next = h * W;
    next.rowwise() += b;
    activate(next, l + 2 == sizes.size() ? spec.output : spec.hidden);
    h = std::move(next);
    offset += static_cast<std::size_t>((n_in + 1) * n_out);
  }
  Shape out_shape = input.shape().empty() ? Shape{sizes.back()} : input.shape();
  out_shape.back() = sizes.back();
  return Tensor(std::move(out_shape), std::vector<double>(h.data(), h.data() + h.size()));
}

}  // namespace varinf
