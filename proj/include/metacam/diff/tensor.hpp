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
#include <span>
#include <string>
#include <vector>

namespace metacam::diff {

using Shape = std::vector<std::int64_t>;

std::int64_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Dense row-major array of 64-bit floats. Plain value type: the graph
/// machinery lives in Graph/Var, a Tensor is just shape + data.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> data);

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double value);
  static Tensor scalar(double value);
  /// Length-n vector (rank 1).
  static Tensor vector(std::vector<double> data);

  const Shape& shape() const { return shape_; }
  std::int64_t rank() const { return static_cast<std::int64_t>(shape_.size()); }
  std::int64_t numel() const { return static_cast<std::int64_t>(data_.size()); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::span<const double> values() const { return data_; }
  std::span<double> values() { return data_; }

  double& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
  double operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

  /// Value of a rank-0 or single-element tensor.
  double item() const;

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  bool all_finite() const;

 private:
  Shape shape_;
  std::vector<double> data_;
};

}  // namespace metacam::diff
