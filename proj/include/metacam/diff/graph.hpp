// Copyright 2026 The metacam Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <initializer_list>
#include <span>
#include <vector>

#include "metacam/diff/tensor.hpp"

namespace metacam::diff {

class Graph;

/// Handle to a node in a Graph. Cheap to copy; valid while the graph lives.
struct Var {
  Graph* graph = nullptr;
  std::int32_t id = -1;

  bool valid() const { return graph != nullptr && id >= 0; }
  const Tensor& tensor() const;
  const Shape& shape() const { return tensor().shape(); }
  double item() const { return tensor().item(); }
};

enum class Op : std::uint8_t {
  kInput,
  kAdd,
  kSub,
  kMul,
  kMatmul,
  kTranspose,
  kConcat,
  kSlice,
  kReshape,
  kConv1d,
  kConv1dInputGrad,
  kConv1dWeightGrad,
  kTanh,
  kSigmoid,
  kSoftplus,
  kSoftmax,
  kLogSumExp,
  kAbs,
  kSign,
  kSum,
  kMean,
  kScale,
};

/// Reverse-mode tape over dense tensors.
///
/// Nodes are appended in topological order and values are computed eagerly,
/// so forward() is a cache lookup. backward() expresses every adjoint as a
/// composition of the same primitives and appends the result to the tape;
/// with create_graph the returned gradients stay connected and a second
/// backward through them yields exact second-order derivatives.
///
/// A graph is confined to one thread. It is append-only: node values are
/// never mutated, which is what makes gradients-of-gradients sound.
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  std::size_t size() const { return nodes_.size(); }

  /// Leaf holding an externally supplied value (parameter or constant).
  Var input(Tensor value);
  Var scalar(double value) { return input(Tensor::scalar(value)); }

  // Elementwise; shapes must match exactly (no broadcasting).
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);

  Var matmul(Var a, Var b);  // rank-2 x rank-2
  Var transpose(Var a);      // rank-2

  Var concat(std::span<const Var> parts, std::int64_t axis);
  Var concat(std::initializer_list<Var> parts, std::int64_t axis) {
    return concat(std::span<const Var>(parts.begin(), parts.size()), axis);
  }
  Var slice(Var a, std::int64_t axis, std::int64_t start, std::int64_t len);
  Var reshape(Var a, Shape shape);

  /// 1-D convolution, channels-first. x: [Cin, W], w: [Cout, Cin*K].
  /// Output [Cout, Wout] with Wout = (W - kernel) / stride + 1.
  Var conv1d(Var x, Var w, std::int64_t kernel, std::int64_t stride);

  Var tanh(Var a);
  Var sigmoid(Var a);
  Var softplus(Var a);
  Var softmax(Var a);    // over the last axis; rank 1 or 2
  Var logsumexp(Var a);  // rank 1 -> scalar
  Var abs(Var a);
  Var sign(Var a);  // derivative treated as 0 everywhere
  Var sum(Var a);   // -> scalar
  Var mean(Var a);  // -> scalar
  Var scale(Var a, double factor);

  /// Broadcast a scalar node to the given shape (composition helper).
  Var broadcast(Var scalar_node, const Shape& shape);
  /// Tile a length-C vector across n columns, giving [C, n].
  Var broadcast_cols(Var vec, std::int64_t cols);

  const Tensor& value(Var v) const;

  /// d(output)/d(x) for every x in wrt. output must be scalar-shaped.
  ///
  /// wrt nodes unreachable from output yield zero tensors, not errors:
  /// losses computed with some parameter sets frozen are legitimate.
  /// With create_graph the results are live graph nodes (differentiable
  /// again); without it they are detached leaves holding the same values.
  std::vector<Var> backward(Var output, std::span<const Var> wrt,
                            bool create_graph = false);
  std::vector<Var> backward(Var output, std::initializer_list<Var> wrt,
                            bool create_graph = false) {
    return backward(output, std::span<const Var>(wrt.begin(), wrt.size()),
                    create_graph);
  }

 private:
  struct Node {
    Op op;
    Tensor value;
    std::vector<std::int32_t> inputs;
    // Op-specific attributes (axis/start/len, kernel/stride, scale factor).
    std::int64_t i0 = 0, i1 = 0, i2 = 0;
    double f0 = 0.0;
  };

  Var emplace(Op op, Tensor value, std::vector<std::int32_t> inputs,
              std::int64_t i0 = 0, std::int64_t i1 = 0, std::int64_t i2 = 0,
              double f0 = 0.0);
  const Node& node(std::int32_t id) const { return nodes_[static_cast<std::size_t>(id)]; }
  void check_same_graph(Var v) const;

  // Appends the adjoint contributions of node `id` given its adjoint node.
  void accumulate_vjps(std::int32_t id, Var adjoint, std::vector<Var>& adj);

  Var conv1d_input_grad(Var gy, Var w, std::int64_t kernel, std::int64_t stride,
                        std::int64_t in_width);
  Var conv1d_weight_grad(Var x, Var gy, std::int64_t kernel, std::int64_t stride);

  std::vector<Node> nodes_;
};

// Operator sugar for graph-connected tensors.
inline Var operator+(Var a, Var b) { return a.graph->add(a, b); }
inline Var operator-(Var a, Var b) { return a.graph->sub(a, b); }
inline Var operator*(Var a, Var b) { return a.graph->mul(a, b); }

}  // namespace metacam::diff
