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
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "metacam/diff/graph.hpp"
#include "metacam/diff/tensor.hpp"

namespace metacam::diff {

/// Named collection of parameter tensors with a stable iteration order
/// (insertion order, preserved across save/load) plus optional Adam state.
class ParamSet {
 public:
  ParamSet() = default;

  void add(std::string name, Tensor value);
  bool contains(std::string_view name) const;
  Tensor& get(std::string_view name);
  const Tensor& get(std::string_view name) const;

  std::size_t size() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }
  Tensor& at(std::size_t i) { return values_[i]; }
  const Tensor& at(std::size_t i) const { return values_[i]; }

  /// Subset whose names start with `prefix`, in iteration order.
  std::vector<std::size_t> indices_with_prefix(std::string_view prefix) const;

  /// Lift every parameter into `g` as leaf nodes, in iteration order.
  std::vector<Var> lift(Graph& g) const;

  /// Binary checkpoint: one-line JSON manifest (format version, names,
  /// shapes, dtype) followed by raw little-endian f64 arrays in manifest
  /// order. Round-trips bit-exactly.
  void save(const std::string& path) const;
  static ParamSet load(const std::string& path);

  /// Serialized bytes (same format as save); handy for hashing.
  std::vector<std::uint8_t> serialize() const;

 private:
  friend bool adam_step(ParamSet&, std::span<const Tensor>,
                        std::span<const double>, double, double, double);
  struct AdamState {
    std::vector<Tensor> m;
    std::vector<Tensor> v;
    std::int64_t step = 0;
  };

  std::vector<std::string> names_;
  std::vector<Tensor> values_;
  std::unordered_map<std::string, std::size_t> index_;
  std::optional<AdamState> adam_;
};

/// Differentiable gradient-descent step: returns theta' = theta - lr * grad
/// as new nodes in the graph that `params` lives in. The originals are
/// untouched and theta' stays graph-connected to theta, so a later backward
/// can differentiate through the update.
std::vector<Var> sgd_step_diff(std::span<const Var> params,
                               std::span<const Var> grads, double lr);

/// Standard Adam with bias correction, applied in place to raw values.
/// Returns false (and leaves params and state untouched) if any gradient
/// is non-finite.
bool adam_step(ParamSet& params, std::span<const Tensor> grads, double lr,
               double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

/// Adam with one learning rate per tensor (e.g. different rates for the
/// RGB and depth parameter groups). Shares the single Adam state.
bool adam_step(ParamSet& params, std::span<const Tensor> grads,
               std::span<const double> lrs, double beta1 = 0.9,
               double beta2 = 0.999, double eps = 1e-8);

/// FNV-1a over the serialized checkpoint bytes; used by the freezing checks.
std::uint64_t param_hash(const ParamSet& params);

}  // namespace metacam::diff
