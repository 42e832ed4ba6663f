#pragma once

#include <cstddef>
#include <limits>
#include <vector>

#include "varinf/tensor.hpp"

namespace varinf {

struct NodeId {
  std::size_t index = std::numeric_limits<std::size_t>::max();
  friend bool operator==(NodeId, NodeId) = default;
};

// Reverse-mode autodiff tape. Nodes are appended in evaluation order, so the
// node vector is always a valid topological order and the graph is acyclic by
// construction. A Graph is meant to be built for one loss evaluation and then
// discarded.
//
// Leaves are either constants (never receive gradient) or parameters. A node
// requires gradient iff one of its inputs does; stop-gradient is therefore just
// "bind as constant" or detach().
class Graph {
 public:
  enum class Op {
    kConstant,
    kParameter,
    kLinear,
    kAdd,
    kSub,
    kMul,
    kAddScalar,
    kScale,
    kRelu,
    kTanh,
    kSigmoid,
    kExp,
    kLog,
    kSquare,
    kClamp,
    kSum,
    kMean,
    kRowSum,
    kConcatCols,
    kSliceCols,
  };

  NodeId constant(Tensor value);
  NodeId parameter(Tensor value);

  // y = x W + b where W (n_in x n_out, row-major) followed by b (n_out) live in
  // the flat parameter node `params` starting at `offset`.
  NodeId linear(NodeId x, NodeId params, std::size_t offset, std::size_t n_in,
                std::size_t n_out);

  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);
  NodeId add_scalar(NodeId a, double c);
  NodeId scale(NodeId a, double c);
  NodeId relu(NodeId a);
  NodeId tanh(NodeId a);
  NodeId sigmoid(NodeId a);
  NodeId exp(NodeId a);
  NodeId log(NodeId a);
  NodeId square(NodeId a);
  NodeId clamp(NodeId a, double lo, double hi);
  NodeId sum(NodeId a);
  NodeId mean(NodeId a);
  NodeId row_sum(NodeId a);
  NodeId concat_cols(NodeId a, NodeId b);
  NodeId slice_cols(NodeId a, std::size_t begin, std::size_t end);
  NodeId detach(NodeId a) { return constant(value(a)); }

  // Populates gradients of `loss` (which must hold exactly one value) with
  // respect to every node that requires gradient. Calling it again recomputes
  // from scratch.
  void backward(NodeId loss);

  const Tensor& value(NodeId id) const { return node(id).value; }
  double scalar(NodeId id) const { return node(id).value.item(); }
  bool requires_grad(NodeId id) const { return node(id).needs_grad; }
  // d loss / d node after backward(); all zeros if the node was not reached.
  Tensor grad(NodeId id) const;
  std::size_t size() const { return nodes_.size(); }
  Op op(NodeId id) const { return node(id).op; }

 private:
  struct Node {
    Op op = Op::kConstant;
    NodeId in0, in1;
    std::size_t s0 = 0, s1 = 0, s2 = 0;
    double a0 = 0.0, a1 = 0.0;
    bool needs_grad = false;
    Tensor value;
    Tensor grad;
  };

  static Node make_node(Op op, NodeId in0, NodeId in1);
  const Node& node(NodeId id) const;
  NodeId push(Node n);
  NodeId unary(Op op, NodeId a, Tensor out, double a0 = 0.0, double a1 = 0.0);
  NodeId binary(Op op, NodeId a, NodeId b, Tensor out);
  Tensor& grad_buffer(std::size_t index);
  void backprop_node(std::size_t index);

  std::vector<Node> nodes_;
};

}  // namespace varinf
