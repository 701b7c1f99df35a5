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

#include "metacam/diff/graph.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace metacam::diff {

namespace {

[[noreturn]] void op_shape_error(const char* op, const Tensor& a, const Tensor& b) {
  throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                              shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

[[noreturn]] void op_rank_error(const char* op, const Tensor& a) {
  throw std::invalid_argument(std::string(op) + ": unsupported shape " +
                              shape_str(a.shape()));
}

}  // namespace

const Tensor& Var::tensor() const {
  if (!valid()) throw std::logic_error("use of invalid Var");
  return graph->value(*this);
}

Var Graph::emplace(Op op, Tensor value, std::vector<std::int32_t> inputs,
                   std::int64_t i0, std::int64_t i1, std::int64_t i2, double f0) {
  Node n;
  n.op = op;
  n.value = std::move(value);
  n.inputs = std::move(inputs);
  n.i0 = i0;
  n.i1 = i1;
  n.i2 = i2;
  n.f0 = f0;
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<std::int32_t>(nodes_.size() - 1)};
}

void Graph::check_same_graph(Var v) const {
  if (v.graph != this || v.id < 0 ||
      v.id >= static_cast<std::int32_t>(nodes_.size())) {
    throw std::logic_error("Var does not belong to this graph");
  }
}

const Tensor& Graph::value(Var v) const {
  check_same_graph(v);
  return nodes_[static_cast<std::size_t>(v.id)].value;
}

Var Graph::input(Tensor value) { return emplace(Op::kInput, std::move(value), {}); }

Var Graph::add(Var a, Var b) {
  check_same_graph(a);
  check_same_graph(b);
  const Tensor& ta = a.tensor();
  const Tensor& tb = b.tensor();
  if (!ta.same_shape(tb)) op_shape_error("add", ta, tb);
  Tensor out = ta;
  for (std::int64_t i = 0; i < out.numel(); ++i) out[i] += tb[i];
  return emplace(Op::kAdd, std::move(out), {a.id, b.id});
}

Var Graph::sub(Var a, Var b) {
  check_same_graph(a);
  check_same_graph(b);
  const Tensor& ta = a.tensor();
  const Tensor& tb = b.tensor();
  if (!ta.same_shape(tb)) op_shape_error("sub", ta, tb);
  Tensor out = ta;
  for (std::int64_t i = 0; i < out.numel(); ++i) out[i] -= tb[i];
  return emplace(Op::kSub, std::move(out), {a.id, b.id});
}

Var Graph::mul(Var a, Var b) {
  check_same_graph(a);
  check_same_graph(b);
  const Tensor& ta = a.tensor();
  const Tensor& tb = b.tensor();
  if (!ta.same_shape(tb)) op_shape_error("mul", ta, tb);
  Tensor out = ta;
  for (std::int64_t i = 0; i < out.numel(); ++i) out[i] *= tb[i];
  return emplace(Op::kMul, std::move(out), {a.id, b.id});
}

Var Graph::matmul(Var a, Var b) {
  check_same_graph(a);
  check_same_graph(b);
  const Tensor& ta = a.tensor();
  const Tensor& tb = b.tensor();
  if (ta.rank() != 2 || tb.rank() != 2 || ta.shape()[1] != tb.shape()[0]) {
    op_shape_error("matmul", ta, tb);
  }
  const std::int64_t m = ta.shape()[0], k = ta.shape()[1], n = tb.shape()[1];
  Tensor out = Tensor::zeros({m, n});
  const double* pa = ta.data();
  const double* pb = tb.data();
  double* po = out.data();
  for (std::int64_t i = 0; i < m; ++i) {
    for (std::int64_t kk = 0; kk < k; ++kk) {
      const double av = pa[i * k + kk];
      if (av == 0.0) continue;
      const double* brow = pb + kk * n;
      double* orow = po + i * n;
      for (std::int64_t j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
  return emplace(Op::kMatmul, std::move(out), {a.id, b.id});
}

Var Graph::transpose(Var a) {
  check_same_graph(a);
  const Tensor& ta = a.tensor();
  if (ta.rank() != 2) op_rank_error("transpose", ta);
  const std::int64_t m = ta.shape()[0], n = ta.shape()[1];
  Tensor out = Tensor::zeros({n, m});
  for (std::int64_t i = 0; i < m; ++i)
    for (std::int64_t j = 0; j < n; ++j) out[j * m + i] = ta[i * n + j];
  return emplace(Op::kTranspose, std::move(out), {a.id});
}

Var Graph::concat(std::span<const Var> parts, std::int64_t axis) {
  if (parts.empty()) throw std::invalid_argument("concat: no inputs");
  for (Var p : parts) check_same_graph(p);
  const Tensor& first = parts[0].tensor();
  const std::int64_t rank = first.rank();
  if (axis < 0 || axis >= rank) op_rank_error("concat", first);

  Shape out_shape = first.shape();
  for (std::size_t p = 1; p < parts.size(); ++p) {
    const Tensor& t = parts[p].tensor();
    if (t.rank() != rank) op_shape_error("concat", first, t);
    for (std::int64_t d = 0; d < rank; ++d) {
      if (d == axis) continue;
      if (t.shape()[d] != first.shape()[d]) op_shape_error("concat", first, t);
    }
    out_shape[axis] += t.shape()[axis];
  }

  // outer = product of extents before axis, inner = after.
  std::int64_t outer = 1, inner = 1;
  for (std::int64_t d = 0; d < axis; ++d) outer *= first.shape()[d];
  for (std::int64_t d = axis + 1; d < rank; ++d) inner *= first.shape()[d];

  Tensor out = Tensor::zeros(out_shape);
  const std::int64_t out_axis = out_shape[axis];
  std::int64_t offset = 0;
  std::vector<std::int32_t> ids;
  ids.reserve(parts.size());
  for (Var p : parts) {
    const Tensor& t = p.tensor();
    const std::int64_t ax = t.shape()[axis];
    for (std::int64_t o = 0; o < outer; ++o) {
      const double* src = t.data() + o * ax * inner;
      double* dst = out.data() + (o * out_axis + offset) * inner;
      std::copy(src, src + ax * inner, dst);
    }
    offset += ax;
    ids.push_back(p.id);
  }
  return emplace(Op::kConcat, std::move(out), std::move(ids), axis);
}

Var Graph::slice(Var a, std::int64_t axis, std::int64_t start, std::int64_t len) {
  check_same_graph(a);
  const Tensor& ta = a.tensor();
  const std::int64_t rank = ta.rank();
  if (axis < 0 || axis >= rank) op_rank_error("slice", ta);
  if (start < 0 || len <= 0 || start + len > ta.shape()[axis]) {
    throw std::invalid_argument("slice: range [" + std::to_string(start) + ", " +
                                std::to_string(start + len) + ") out of bounds for " +
                                shape_str(ta.shape()));
  }
  std::int64_t outer = 1, inner = 1;
  for (std::int64_t d = 0; d < axis; ++d) outer *= ta.shape()[d];
  for (std::int64_t d = axis + 1; d < rank; ++d) inner *= ta.shape()[d];

  Shape out_shape = ta.shape();
  out_shape[axis] = len;
  Tensor out = Tensor::zeros(out_shape);
  const std::int64_t in_axis = ta.shape()[axis];
  for (std::int64_t o = 0; o < outer; ++o) {
    const double* src = ta.data() + (o * in_axis + start) * inner;
    std::copy(src, src + len * inner, out.data() + o * len * inner);
  }
  return emplace(Op::kSlice, std::move(out), {a.id}, axis, start, len);
}

Var Graph::reshape(Var a, Shape shape) {
  check_same_graph(a);
  const Tensor& ta = a.tensor();
  if (shape_numel(shape) != ta.numel()) {
    throw std::invalid_argument("reshape: cannot view " + shape_str(ta.shape()) +
                                " as " + shape_str(shape));
  }
  Tensor out(shape, std::vector<double>(ta.data(), ta.data() + ta.numel()));
  return emplace(Op::kReshape, std::move(out), {a.id});
}

Var Graph::conv1d(Var x, Var w, std::int64_t kernel, std::int64_t stride) {
  check_same_graph(x);
  check_same_graph(w);
  const Tensor& tx = x.tensor();
  const Tensor& tw = w.tensor();
  if (tx.rank() != 2 || tw.rank() != 2) op_shape_error("conv1d", tx, tw);
  const std::int64_t cin = tx.shape()[0], width = tx.shape()[1];
  if (tw.shape()[1] != cin * kernel || width < kernel || stride <= 0) {
    op_shape_error("conv1d", tx, tw);
  }
  const std::int64_t cout = tw.shape()[0];
  const std::int64_t wout = (width - kernel) / stride + 1;
  Tensor out = Tensor::zeros({cout, wout});
  for (std::int64_t o = 0; o < cout; ++o) {
    const double* wrow = tw.data() + o * cin * kernel;
    for (std::int64_t j = 0; j < wout; ++j) {
      double acc = 0.0;
      for (std::int64_t c = 0; c < cin; ++c) {
        const double* xrow = tx.data() + c * width + j * stride;
        const double* wk = wrow + c * kernel;
        for (std::int64_t t = 0; t < kernel; ++t) acc += wk[t] * xrow[t];
      }
      out[o * wout + j] = acc;
    }
  }
  return emplace(Op::kConv1d, std::move(out), {x.id, w.id}, kernel, stride);
}

Var Graph::conv1d_input_grad(Var gy, Var w, std::int64_t kernel,
                             std::int64_t stride, std::int64_t in_width) {
  check_same_graph(gy);
  check_same_graph(w);
  const Tensor& tg = gy.tensor();
  const Tensor& tw = w.tensor();
  const std::int64_t cout = tg.shape()[0], wout = tg.shape()[1];
  const std::int64_t cin = tw.shape()[1] / kernel;
  Tensor out = Tensor::zeros({cin, in_width});
  for (std::int64_t o = 0; o < cout; ++o) {
    const double* wrow = tw.data() + o * cin * kernel;
    for (std::int64_t j = 0; j < wout; ++j) {
      const double g = tg[o * wout + j];
      if (g == 0.0) continue;
      for (std::int64_t c = 0; c < cin; ++c) {
        double* xrow = out.data() + c * in_width + j * stride;
        const double* wk = wrow + c * kernel;
        for (std::int64_t t = 0; t < kernel; ++t) xrow[t] += g * wk[t];
      }
    }
  }
  return emplace(Op::kConv1dInputGrad, std::move(out), {gy.id, w.id}, kernel,
                 stride, in_width);
}

Var Graph::conv1d_weight_grad(Var x, Var gy, std::int64_t kernel,
                              std::int64_t stride) {
  check_same_graph(x);
  check_same_graph(gy);
  const Tensor& tx = x.tensor();
  const Tensor& tg = gy.tensor();
  const std::int64_t cin = tx.shape()[0], width = tx.shape()[1];
  const std::int64_t cout = tg.shape()[0], wout = tg.shape()[1];
  Tensor out = Tensor::zeros({cout, cin * kernel});
  for (std::int64_t o = 0; o < cout; ++o) {
    double* wrow = out.data() + o * cin * kernel;
    for (std::int64_t j = 0; j < wout; ++j) {
      const double g = tg[o * wout + j];
      if (g == 0.0) continue;
      for (std::int64_t c = 0; c < cin; ++c) {
        const double* xrow = tx.data() + c * width + j * stride;
        double* wk = wrow + c * kernel;
        for (std::int64_t t = 0; t < kernel; ++t) wk[t] += g * xrow[t];
      }
    }
  }
  return emplace(Op::kConv1dWeightGrad, std::move(out), {x.id, gy.id}, kernel,
                 stride);
}

Var Graph::tanh(Var a) {
  check_same_graph(a);
  Tensor out = a.tensor();
  for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = std::tanh(out[i]);
  return emplace(Op::kTanh, std::move(out), {a.id});
}

Var Graph::sigmoid(Var a) {
  check_same_graph(a);
  Tensor out = a.tensor();
  for (std::int64_t i = 0; i < out.numel(); ++i) {
    // Evaluate through exp(-|x|) so neither branch overflows.
    const double x = out[i];
    const double e = std::exp(-std::abs(x));
    out[i] = x >= 0.0 ? 1.0 / (1.0 + e) : e / (1.0 + e);
  }
  return emplace(Op::kSigmoid, std::move(out), {a.id});
}

Var Graph::softplus(Var a) {
  check_same_graph(a);
  Tensor out = a.tensor();
  for (std::int64_t i = 0; i < out.numel(); ++i) {
    const double x = out[i];
    out[i] = std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
  }
  return emplace(Op::kSoftplus, std::move(out), {a.id});
}

Var Graph::softmax(Var a) {
  check_same_graph(a);
  const Tensor& ta = a.tensor();
  if (ta.rank() < 1 || ta.rank() > 2) op_rank_error("softmax", ta);
  const std::int64_t cols = ta.shape()[ta.rank() - 1];
  const std::int64_t rows = ta.numel() / cols;
  Tensor out = ta;
  for (std::int64_t r = 0; r < rows; ++r) {
    double* row = out.data() + r * cols;
    double mx = row[0];
    for (std::int64_t j = 1; j < cols; ++j) mx = std::max(mx, row[j]);
    double denom = 0.0;
    for (std::int64_t j = 0; j < cols; ++j) {
      row[j] = std::exp(row[j] - mx);
      denom += row[j];
    }
    for (std::int64_t j = 0; j < cols; ++j) row[j] /= denom;
  }
  return emplace(Op::kSoftmax, std::move(out), {a.id});
}

Var Graph::logsumexp(Var a) {
  check_same_graph(a);
  const Tensor& ta = a.tensor();
  if (ta.rank() != 1) op_rank_error("logsumexp", ta);
  double mx = ta[0];
  for (std::int64_t i = 1; i < ta.numel(); ++i) mx = std::max(mx, ta[i]);
  double acc = 0.0;
  for (std::int64_t i = 0; i < ta.numel(); ++i) acc += std::exp(ta[i] - mx);
  return emplace(Op::kLogSumExp, Tensor::scalar(mx + std::log(acc)), {a.id});
}

Var Graph::abs(Var a) {
  check_same_graph(a);
  Tensor out = a.tensor();
  for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = std::abs(out[i]);
  return emplace(Op::kAbs, std::move(out), {a.id});
}

Var Graph::sign(Var a) {
  check_same_graph(a);
  Tensor out = a.tensor();
  for (std::int64_t i = 0; i < out.numel(); ++i) {
    out[i] = out[i] > 0.0 ? 1.0 : (out[i] < 0.0 ? -1.0 : 0.0);
  }
  return emplace(Op::kSign, std::move(out), {a.id});
}

Var Graph::sum(Var a) {
  check_same_graph(a);
  const Tensor& ta = a.tensor();
  double acc = 0.0;
  for (std::int64_t i = 0; i < ta.numel(); ++i) acc += ta[i];
  return emplace(Op::kSum, Tensor::scalar(acc), {a.id});
}

Var Graph::mean(Var a) {
  check_same_graph(a);
  const Tensor& ta = a.tensor();
  double acc = 0.0;
  for (std::int64_t i = 0; i < ta.numel(); ++i) acc += ta[i];
  return emplace(Op::kMean, Tensor::scalar(acc / static_cast<double>(ta.numel())),
                 {a.id});
}

Var Graph::scale(Var a, double factor) {
  check_same_graph(a);
  Tensor out = a.tensor();
  for (std::int64_t i = 0; i < out.numel(); ++i) out[i] *= factor;
  return emplace(Op::kScale, std::move(out), {a.id}, 0, 0, 0, factor);
}

Var Graph::broadcast(Var scalar_node, const Shape& shape) {
  const std::int64_t n = shape_numel(shape);
  Var row = reshape(scalar_node, {1, 1});
  Var tiled = matmul(row, input(Tensor::full({1, n}, 1.0)));
  return reshape(tiled, shape);
}

Var Graph::broadcast_cols(Var vec, std::int64_t cols) {
  const Tensor& tv = vec.tensor();
  Var col = reshape(vec, {tv.numel(), 1});
  return matmul(col, input(Tensor::full({1, cols}, 1.0)));
}

void Graph::accumulate_vjps(std::int32_t id, Var g, std::vector<Var>& adj) {
  // Copies, not references: appending VJP nodes reallocates nodes_.
  struct NodeView {
    Op op;
    std::vector<std::int32_t> inputs;
    std::int64_t i0, i1, i2;
    double f0;
    Shape shape;
  };
  const NodeView n = [&] {
    const Node& src = nodes_[static_cast<std::size_t>(id)];
    return NodeView{src.op, src.inputs, src.i0, src.i1, src.i2, src.f0,
                    src.value.shape()};
  }();
  auto input_shape = [&](std::size_t k) {
    return nodes_[static_cast<std::size_t>(n.inputs[k])].value.shape();
  };
  Var self{this, id};

  auto contribute = [&](std::int32_t input_id, Var c) {
    Var& slot = adj[static_cast<std::size_t>(input_id)];
    slot = slot.valid() ? add(slot, c) : c;
  };

  switch (n.op) {
    case Op::kInput:
      break;
    case Op::kAdd:
      contribute(n.inputs[0], g);
      contribute(n.inputs[1], g);
      break;
    case Op::kSub:
      contribute(n.inputs[0], g);
      contribute(n.inputs[1], scale(g, -1.0));
      break;
    case Op::kMul:
      contribute(n.inputs[0], mul(g, Var{this, n.inputs[1]}));
      contribute(n.inputs[1], mul(g, Var{this, n.inputs[0]}));
      break;
    case Op::kMatmul:
      contribute(n.inputs[0], matmul(g, transpose(Var{this, n.inputs[1]})));
      contribute(n.inputs[1], matmul(transpose(Var{this, n.inputs[0]}), g));
      break;
    case Op::kTranspose:
      contribute(n.inputs[0], transpose(g));
      break;
    case Op::kConcat: {
      std::int64_t offset = 0;
      for (std::int32_t in : n.inputs) {
        const std::int64_t ax = nodes_[static_cast<std::size_t>(in)].value.shape()[n.i0];
        contribute(in, slice(g, n.i0, offset, ax));
        offset += ax;
      }
      break;
    }
    case Op::kSlice: {
      // Pad the adjoint back to the input extent with zero constants.
      const Shape in_shape = input_shape(0);
      const std::int64_t axis = n.i0, start = n.i1, len = n.i2;
      const std::int64_t total = in_shape[axis];
      std::vector<Var> parts;
      if (start > 0) {
        Shape s = in_shape;
        s[axis] = start;
        parts.push_back(input(Tensor::zeros(s)));
      }
      parts.push_back(g);
      if (start + len < total) {
        Shape s = in_shape;
        s[axis] = total - start - len;
        parts.push_back(input(Tensor::zeros(s)));
      }
      contribute(n.inputs[0],
                 parts.size() == 1 ? parts[0] : concat(parts, axis));
      break;
    }
    case Op::kReshape:
      contribute(n.inputs[0], reshape(g, input_shape(0)));
      break;
    case Op::kConv1d: {
      Var x{this, n.inputs[0]}, w{this, n.inputs[1]};
      const std::int64_t in_width = x.tensor().shape()[1];
      contribute(n.inputs[0], conv1d_input_grad(g, w, n.i0, n.i1, in_width));
      contribute(n.inputs[1], conv1d_weight_grad(x, g, n.i0, n.i1));
      break;
    }
    case Op::kConv1dInputGrad: {
      // Bilinear in (gy, w); both adjoints are in-family ops.
      Var gy{this, n.inputs[0]}, w{this, n.inputs[1]};
      contribute(n.inputs[0], conv1d(g, w, n.i0, n.i1));
      contribute(n.inputs[1], conv1d_weight_grad(g, gy, n.i0, n.i1));
      break;
    }
    case Op::kConv1dWeightGrad: {
      Var x{this, n.inputs[0]}, gy{this, n.inputs[1]};
      const std::int64_t in_width = x.tensor().shape()[1];
      contribute(n.inputs[0], conv1d_input_grad(gy, g, n.i0, n.i1, in_width));
      contribute(n.inputs[1], conv1d(x, g, n.i0, n.i1));
      break;
    }
    case Op::kTanh: {
      Var ones = input(Tensor::full(n.shape, 1.0));
      contribute(n.inputs[0], mul(g, sub(ones, mul(self, self))));
      break;
    }
    case Op::kSigmoid: {
      Var ones = input(Tensor::full(n.shape, 1.0));
      contribute(n.inputs[0], mul(g, mul(self, sub(ones, self))));
      break;
    }
    case Op::kSoftplus:
      contribute(n.inputs[0], mul(g, sigmoid(Var{this, n.inputs[0]})));
      break;
    case Op::kSoftmax: {
      // g' = y * (g - rowsum(g * y)) broadcast back over each row.
      const Shape orig = n.shape;
      const std::int64_t cols = orig[orig.size() - 1];
      const std::int64_t rows = shape_numel(orig) / cols;
      Var y2 = reshape(self, {rows, cols});
      Var g2 = reshape(g, {rows, cols});
      Var gy = mul(g2, y2);
      Var rowsum = matmul(gy, input(Tensor::full({cols, 1}, 1.0)));
      Var spread = matmul(rowsum, input(Tensor::full({1, cols}, 1.0)));
      contribute(n.inputs[0], reshape(mul(y2, sub(g2, spread)), orig));
      break;
    }
    case Op::kLogSumExp: {
      const Shape in_shape = input_shape(0);
      contribute(n.inputs[0],
                 mul(broadcast(g, in_shape), softmax(Var{this, n.inputs[0]})));
      break;
    }
    case Op::kAbs:
      contribute(n.inputs[0], mul(g, sign(Var{this, n.inputs[0]})));
      break;
    case Op::kSign:
      // d(sign)/dx = 0 almost everywhere; no contribution.
      break;
    case Op::kSum: {
      const Shape in_shape = input_shape(0);
      contribute(n.inputs[0], broadcast(g, in_shape));
      break;
    }
    case Op::kMean: {
      const Shape in_shape = input_shape(0);
      contribute(n.inputs[0],
                 scale(broadcast(g, in_shape),
                       1.0 / static_cast<double>(shape_numel(in_shape))));
      break;
    }
    case Op::kScale:
      contribute(n.inputs[0], scale(g, n.f0));
      break;
  }
}

std::vector<Var> Graph::backward(Var output, std::span<const Var> wrt,
                                 bool create_graph) {
  check_same_graph(output);
  for (Var v : wrt) check_same_graph(v);
  if (output.tensor().numel() != 1) {
    throw std::invalid_argument("backward: output must be scalar-shaped, got " +
                                shape_str(output.tensor().shape()));
  }

  // Only ancestors of `output` can receive adjoints; mark them so the
  // reverse sweep skips dead nodes (including ones from earlier backwards).
  const std::size_t frontier = static_cast<std::size_t>(output.id) + 1;
  std::vector<bool> needed(frontier, false);
  needed[static_cast<std::size_t>(output.id)] = true;
  for (std::int32_t id = output.id; id >= 0; --id) {
    if (!needed[static_cast<std::size_t>(id)]) continue;
    for (std::int32_t in : nodes_[static_cast<std::size_t>(id)].inputs) {
      needed[static_cast<std::size_t>(in)] = true;
    }
  }

  std::vector<Var> adj(frontier);
  adj[static_cast<std::size_t>(output.id)] =
      input(Tensor::full(output.tensor().shape(), 1.0));
  for (std::int32_t id = output.id; id >= 0; --id) {
    if (!needed[static_cast<std::size_t>(id)]) continue;
    Var g = adj[static_cast<std::size_t>(id)];
    if (!g.valid()) continue;  // reachable from inputs but not on a live path
    accumulate_vjps(id, g, adj);
  }

  std::vector<Var> result;
  result.reserve(wrt.size());
  for (Var v : wrt) {
    Var g = static_cast<std::size_t>(v.id) < frontier
                ? adj[static_cast<std::size_t>(v.id)]
                : Var{};
    if (!g.valid()) {
      result.push_back(input(Tensor::zeros(v.tensor().shape())));
    } else if (create_graph) {
      result.push_back(g);
    } else {
      result.push_back(input(g.tensor()));  // detached copy of the value
    }
  }
  return result;
}

}  // namespace metacam::diff
