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

#include "metacam/diff/tensor.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace metacam::diff {

std::int64_t shape_numel(const Shape& shape) {
  std::int64_t n = 1;
  for (std::int64_t e : shape) n *= e;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  for (std::int64_t e : shape_) {
    if (e <= 0) throw std::invalid_argument("tensor extents must be positive");
  }
  if (shape_numel(shape_) != static_cast<std::int64_t>(data_.size())) {
    throw std::invalid_argument("tensor data length does not match shape " +
                                shape_str(shape_));
  }
}

Tensor Tensor::zeros(Shape shape) {
  const auto n = static_cast<std::size_t>(shape_numel(shape));
  return Tensor(std::move(shape), std::vector<double>(n, 0.0));
}

Tensor Tensor::full(Shape shape, double value) {
  const auto n = static_cast<std::size_t>(shape_numel(shape));
  return Tensor(std::move(shape), std::vector<double>(n, value));
}

Tensor Tensor::scalar(double value) { return Tensor(Shape{}, {value}); }

Tensor Tensor::vector(std::vector<double> data) {
  Shape shape{static_cast<std::int64_t>(data.size())};
  return Tensor(std::move(shape), std::move(data));
}

double Tensor::item() const {
  if (data_.size() != 1) {
    throw std::logic_error("item() on tensor of shape " + shape_str(shape_));
  }
  return data_[0];
}

bool Tensor::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace metacam::diff
