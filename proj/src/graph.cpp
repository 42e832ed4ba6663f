#include "varinf/graph.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "varinf/errors.hpp"

namespace varinf {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

template <class F>
Tensor map_values(const Tensor& a, F f) {
  Tensor out(a.shape());
  const double* in = a.data();
  double* o = out.data();
  for (std::size_t i = 0; i < a.size(); ++i) o[i] = f(in[i]);
  return out;
}

template <class F>
Tensor zip_values(const Tensor& a, const Tensor& b, F f) {
  require_same_shape(a, b, "elementwise op");
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i], b[i]);
  return out;
}

Shape with_cols(const Shape& s, std::size_t cols) {
  Shape out = s.empty() ? Shape{cols} : s;
  out.back() = cols;
  return out;
}

}  // namespace

Graph::Node Graph::make_node(Op op, NodeId in0, NodeId in1) {
  Node n;
  n.op = op;
  n.in0 = in0;
  n.in1 = in1;
  return n;
}

const Graph::Node& Graph::node(NodeId id) const {
  if (id.index >= nodes_.size()) throw ContractError("graph: invalid node id");
  return nodes_[id.index];
}

NodeId Graph::push(Node n) {
  nodes_.push_back(std::move(n));
  return NodeId{nodes_.size() - 1};
}

NodeId Graph::constant(Tensor value) {
  Node n = make_node(Op::kConstant, NodeId{}, NodeId{});
  n.value = std::move(value);
  return push(std::move(n));
}

NodeId Graph::parameter(Tensor value) {
  Node n = make_node(Op::kParameter, NodeId{}, NodeId{});
  n.value = std::move(value);
  n.needs_grad = true;
  return push(std::move(n));
}

NodeId Graph::unary(Op op, NodeId a, Tensor out, double a0, double a1) {
  Node n = make_node(op, a, NodeId{});
  n.a0 = a0;
  n.a1 = a1;
  n.needs_grad = node(a).needs_grad;
  n.value = std::move(out);
  return push(std::move(n));
}

NodeId Graph::binary(Op op, NodeId a, NodeId b, Tensor out) {
  Node n = make_node(op, a, b);
  n.needs_grad = node(a).needs_grad || node(b).needs_grad;
  n.value = std::move(out);
  return push(std::move(n));
}

NodeId Graph::linear(NodeId x, NodeId params, std::size_t offset, std::size_t n_in,
                     std::size_t n_out) {
  const Tensor& xv = value(x);
  const Tensor& pv = value(params);
  if (xv.cols() != n_in) {
    throw DimensionError("linear: input width " + std::to_string(xv.cols()) + ", expected " +
                         std::to_string(n_in));
  }
  if (offset + n_in * n_out + n_out > pv.size()) {
    throw DimensionError("linear: parameter segment exceeds parameter vector");
  }
  const std::size_t rows = xv.rows();
  Tensor out(with_cols(xv.shape(), n_out));
  ConstMap X(xv.data(), rows, n_in);
  ConstMap W(pv.data() + offset, n_in, n_out);
  Eigen::Map<const Eigen::RowVectorXd> b(pv.data() + offset + n_in * n_out, n_out);
  MutMap Y(out.data(), rows, n_out);
  Y.noalias() = X * W;
  Y.rowwise() += b;

  Node n = make_node(Op::kLinear, x, params);
  n.s0 = offset;
  n.s1 = n_in;
  n.s2 = n_out;
  n.needs_grad = node(x).needs_grad || node(params).needs_grad;
  n.value = std::move(out);
  return push(std::move(n));
}

NodeId Graph::add(NodeId a, NodeId b) {
  return binary(Op::kAdd, a, b, zip_values(value(a), value(b), std::plus<>{}));
}
NodeId Graph::sub(NodeId a, NodeId b) {
  return binary(Op::kSub, a, b, zip_values(value(a), value(b), std::minus<>{}));
}
NodeId Graph::mul(NodeId a, NodeId b) {
  return binary(Op::kMul, a, b, zip_values(value(a), value(b), std::multiplies<>{}));
}
NodeId Graph::add_scalar(NodeId a, double c) {
  return unary(Op::kAddScalar, a, map_values(value(a), [c](double v) { return v + c; }), c);
}
NodeId Graph::scale(NodeId a, double c) {
  return unary(Op::kScale, a, map_values(value(a), [c](double v) { return v * c; }), c);
}
NodeId Graph::relu(NodeId a) {
  return unary(Op::kRelu, a, map_values(value(a), [](double v) { return v < 0.0 ? 0.0 : v; }));
}
NodeId Graph::tanh(NodeId a) {
  return unary(Op::kTanh, a, map_values(value(a), [](double v) { return std::tanh(v); }));
}
NodeId Graph::sigmoid(NodeId a) {
  return unary(Op::kSigmoid, a, map_values(value(a), [](double v) {
                 return v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
               }));
}
NodeId Graph::exp(NodeId a) {
  return unary(Op::kExp, a, map_values(value(a), [](double v) { return std::exp(v); }));
}
NodeId Graph::log(NodeId a) {
  return unary(Op::kLog, a, map_values(value(a), [](double v) { return std::log(v); }));
}
NodeId Graph::square(NodeId a) {
  return unary(Op::kSquare, a, map_values(value(a), [](double v) { return v * v; }));
}
NodeId Graph::clamp(NodeId a, double lo, double hi) {
  if (!(lo <= hi)) throw ContractError("clamp: lo > hi");
  return unary(Op::kClamp, a, map_values(value(a), [=](double v) { return std::clamp(v, lo, hi); }),
               lo, hi);
}

NodeId Graph::sum(NodeId a) {
  const Tensor& v = value(a);
  double s = 0.0;
  for (double x : v.values()) s += x;
  return unary(Op::kSum, a, Tensor::scalar(s));
}

NodeId Graph::mean(NodeId a) {
  const Tensor& v = value(a);
  if (v.size() == 0) throw ContractError("mean of empty tensor");
  double s = 0.0;
  for (double x : v.values()) s += x;
  return unary(Op::kMean, a, Tensor::scalar(s / static_cast<double>(v.size())));
}

NodeId Graph::row_sum(NodeId a) {
  const Tensor& v = value(a);
  Tensor out(with_cols(v.shape(), 1));
  for (std::size_t r = 0; r < v.rows(); ++r) {
    double s = 0.0;
    for (double x : v.row_span(r)) s += x;
    out[r] = s;
  }
  return unary(Op::kRowSum, a, std::move(out));
}

NodeId Graph::concat_cols(NodeId a, NodeId b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  if (av.rows() != bv.rows()) throw DimensionError("concat_cols: row count mismatch");
  const std::size_t ca = av.cols(), cb = bv.cols();
  Tensor out(with_cols(av.shape(), ca + cb));
  for (std::size_t r = 0; r < av.rows(); ++r) {
    std::copy_n(av.data() + r * ca, ca, out.data() + r * (ca + cb));
    std::copy_n(bv.data() + r * cb, cb, out.data() + r * (ca + cb) + ca);
  }
  return binary(Op::kConcatCols, a, b, std::move(out));
}

NodeId Graph::slice_cols(NodeId a, std::size_t begin, std::size_t end) {
  const Tensor& av = value(a);
  if (begin >= end || end > av.cols()) throw DimensionError("slice_cols: bad column range");
  const std::size_t w = end - begin;
  Tensor out(with_cols(av.shape(), w));
  for (std::size_t r = 0; r < av.rows(); ++r) {
    std::copy_n(av.data() + r * av.cols() + begin, w, out.data() + r * w);
  }
  NodeId id = unary(Op::kSliceCols, a, std::move(out));
  nodes_[id.index].s0 = begin;
  nodes_[id.index].s1 = end;
  return id;
}

Tensor& Graph::grad_buffer(std::size_t index) {
  Node& n = nodes_[index];
  if (n.grad.size() != n.value.size() || n.grad.shape() != n.value.shape()) {
    n.grad = Tensor(n.value.shape(), 0.0);
  }
  return n.grad;
}

Tensor Graph::grad(NodeId id) const {
  const Node& n = node(id);
  if (n.grad.shape() == n.value.shape() && n.grad.size() == n.value.size()) return n.grad;
  return Tensor(n.value.shape(), 0.0);
}

void Graph::backward(NodeId loss) {
  const Node& l = node(loss);
  if (l.value.size() != 1) {
    throw ContractError("backward: loss must be scalar, got shape " +
                        shape_string(l.value.shape()));
  }
  for (auto& n : nodes_) n.grad = Tensor();
  if (!l.needs_grad) return;
  grad_buffer(loss.index)[0] = 1.0;
  for (std::size_t i = loss.index + 1; i-- > 0;) {
    if (nodes_[i].needs_grad && nodes_[i].grad.size() == nodes_[i].value.size() &&
        nodes_[i].value.size() > 0) {
      backprop_node(i);
    }
  }
}

void Graph::backprop_node(std::size_t index) {
  // Copy the small header; value/grad are referenced by index because
  // grad_buffer never reallocates the node vector.
  const Op op = nodes_[index].op;
  const NodeId in0 = nodes_[index].in0;
  const NodeId in1 = nodes_[index].in1;
  const Tensor& g = nodes_[index].grad;
  const Tensor& y = nodes_[index].value;
  auto wants = [&](NodeId id) { return id.index < nodes_.size() && nodes_[id.index].needs_grad; };

  switch (op) {
    case Op::kConstant:
    case Op::kParameter:
      return;
    case Op::kLinear: {
      const std::size_t offset = nodes_[index].s0;
      const std::size_t n_in = nodes_[index].s1;
      const std::size_t n_out = nodes_[index].s2;
      const Tensor& xv = nodes_[in0.index].value;
      const Tensor& pv = nodes_[in1.index].value;
      const std::size_t rows = xv.rows();
      ConstMap G(g.data(), rows, n_out);
      if (wants(in0)) {
        ConstMap W(pv.data() + offset, n_in, n_out);
        MutMap GX(grad_buffer(in0.index).data(), rows, n_in);
        GX.noalias() += G * W.transpose();
      }
      if (wants(in1)) {
        ConstMap X(xv.data(), rows, n_in);
        Tensor& gp = grad_buffer(in1.index);
        MutMap GW(gp.data() + offset, n_in, n_out);
        GW.noalias() += X.transpose() * G;
        Eigen::Map<Eigen::RowVectorXd> gb(gp.data() + offset + n_in * n_out, n_out);
        gb += G.colwise().sum();
      }
      return;
    }
    case Op::kAdd:
    case Op::kSub: {
      const double sign = op == Op::kAdd ? 1.0 : -1.0;
      if (wants(in0)) {
        Tensor& ga = grad_buffer(in0.index);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      }
      if (wants(in1)) {
        Tensor& gb = grad_buffer(in1.index);
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += sign * g[i];
      }
      return;
    }
    case Op::kMul: {
      const Tensor& av = nodes_[in0.index].value;
      const Tensor& bv = nodes_[in1.index].value;
      if (wants(in0)) {
        Tensor& ga = grad_buffer(in0.index);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
      }
      if (wants(in1)) {
        Tensor& gb = grad_buffer(in1.index);
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
      }
      return;
    }
    case Op::kConcatCols: {
      const std::size_t ca = nodes_[in0.index].value.cols();
      const std::size_t cb = nodes_[in1.index].value.cols();
      const std::size_t rows = y.rows();
      if (wants(in0)) {
        Tensor& ga = grad_buffer(in0.index);
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t k = 0; k < ca; ++k) ga[r * ca + k] += g[r * (ca + cb) + k];
        }
      }
      if (wants(in1)) {
        Tensor& gb = grad_buffer(in1.index);
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t k = 0; k < cb; ++k) gb[r * cb + k] += g[r * (ca + cb) + ca + k];
        }
      }
      return;
    }
    default:
      break;
  }

  // Remaining ops are unary.
  if (!wants(in0)) return;
  const Tensor& av = nodes_[in0.index].value;
  Tensor& ga = grad_buffer(in0.index);
  const double c = nodes_[index].a0;
  switch (op) {
    case Op::kAddScalar:
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      break;
    case Op::kScale:
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += c * g[i];
      break;
    case Op::kRelu:
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += av[i] > 0.0 ? g[i] : 0.0;
      break;
    case Op::kTanh:
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (1.0 - y[i] * y[i]);
      break;
    case Op::kSigmoid:
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i] * (1.0 - y[i]);
      break;
    case Op::kExp:
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i];
      break;
    case Op::kLog:
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / av[i];
      break;
    case Op::kSquare:
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += 2.0 * av[i] * g[i];
      break;
    case Op::kClamp: {
      const double lo = nodes_[index].a0, hi = nodes_[index].a1;
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (av[i] >= lo && av[i] <= hi) ga[i] += g[i];
      }
      break;
    }
    case Op::kSum:
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[0];
      break;
    case Op::kMean: {
      const double s = g[0] / static_cast<double>(ga.size());
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += s;
      break;
    }
    case Op::kRowSum: {
      const std::size_t cols = av.cols();
      for (std::size_t r = 0; r < av.rows(); ++r) {
        for (std::size_t k = 0; k < cols; ++k) ga[r * cols + k] += g[r];
      }
      break;
    }
    case Op::kSliceCols: {
      const std::size_t begin = nodes_[index].s0;
      const std::size_t w = nodes_[index].s1 - begin;
      const std::size_t cols = av.cols();
      for (std::size_t r = 0; r < av.rows(); ++r) {
        for (std::size_t k = 0; k < w; ++k) ga[r * cols + begin + k] += g[r * w + k];
      }
      break;
    }
    default:
      break;
  }
}

}  // namespace varinf
