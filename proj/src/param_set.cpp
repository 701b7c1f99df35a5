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

#include "metacam/diff/param_set.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace metacam::diff {

namespace {

constexpr const char* kFormatTag = "metacam.params.v1";

void append_f64_le(std::vector<std::uint8_t>& out, double x) {
  const auto bits = std::bit_cast<std::uint64_t>(x);
  for (int b = 0; b < 8; ++b) {
    out.push_back(static_cast<std::uint8_t>((bits >> (8 * b)) & 0xffu));
  }
}

double read_f64_le(const std::uint8_t* p) {
  std::uint64_t bits = 0;
  for (int b = 0; b < 8; ++b) {
    bits |= static_cast<std::uint64_t>(p[b]) << (8 * b);
  }
  return std::bit_cast<double>(bits);
}

}  // namespace

void ParamSet::add(std::string name, Tensor value) {
  if (name.empty()) throw std::invalid_argument("ParamSet: empty name");
  if (index_.count(name)) {
    throw std::invalid_argument("ParamSet: duplicate name '" + name + "'");
  }
  index_.emplace(name, names_.size());
  names_.push_back(std::move(name));
  values_.push_back(std::move(value));
}

bool ParamSet::contains(std::string_view name) const {
  return index_.count(std::string(name)) != 0;
}

Tensor& ParamSet::get(std::string_view name) {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) {
    throw std::out_of_range("ParamSet: no parameter '" + std::string(name) + "'");
  }
  return values_[it->second];
}

const Tensor& ParamSet::get(std::string_view name) const {
  return const_cast<ParamSet*>(this)->get(name);
}

std::vector<std::size_t> ParamSet::indices_with_prefix(std::string_view prefix) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i].size() >= prefix.size() &&
        std::string_view(names_[i]).substr(0, prefix.size()) == prefix) {
      out.push_back(i);
    }
  }
  return out;
}

std::vector<Var> ParamSet::lift(Graph& g) const {
  std::vector<Var> out;
  out.reserve(values_.size());
  for (const Tensor& t : values_) out.push_back(g.input(t));
  return out;
}

std::vector<std::uint8_t> ParamSet::serialize() const {
  nlohmann::json manifest;
  manifest["format"] = kFormatTag;
  auto tensors = nlohmann::json::array();
  for (std::size_t i = 0; i < names_.size(); ++i) {
    nlohmann::json entry;
    entry["name"] = names_[i];
    entry["shape"] = values_[i].shape();
    tensors.push_back(std::move(entry));
  }
  manifest["tensors"] = std::move(tensors);

  const std::string header = manifest.dump();
  std::vector<std::uint8_t> bytes(header.begin(), header.end());
  bytes.push_back('\n');
  for (const Tensor& t : values_) {
    for (std::int64_t i = 0; i < t.numel(); ++i) append_f64_le(bytes, t[i]);
  }
  return bytes;
}

void ParamSet::save(const std::string& path) const {
  const std::vector<std::uint8_t> bytes = serialize();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("ParamSet: cannot open '" + path + "' for write");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("ParamSet: short write to '" + path + "'");
}

ParamSet ParamSet::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("ParamSet: cannot open '" + path + "'");
  std::string header;
  if (!std::getline(in, header)) {
    throw std::runtime_error("ParamSet: '" + path + "' is empty");
  }

  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(header);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("ParamSet: bad manifest in '" + path + "': " + e.what());
  }
  if (!manifest.contains("format") || manifest["format"] != kFormatTag) {
    throw std::runtime_error("ParamSet: '" + path + "' has unsupported format '" +
                             manifest.value("format", std::string("<missing>")) + "'");
  }

  ParamSet ps;
  for (const auto& entry : manifest.at("tensors")) {
    const std::string name = entry.at("name").get<std::string>();
    const Shape shape = entry.at("shape").get<Shape>();
    const std::int64_t n = shape_numel(shape);
    std::vector<std::uint8_t> raw(static_cast<std::size_t>(n) * 8);
    in.read(reinterpret_cast<char*>(raw.data()),
            static_cast<std::streamsize>(raw.size()));
    if (in.gcount() != static_cast<std::streamsize>(raw.size())) {
      throw std::runtime_error("ParamSet: '" + path + "' truncated at tensor '" +
                               name + "'");
    }
    std::vector<double> data(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) {
      data[static_cast<std::size_t>(i)] = read_f64_le(raw.data() + i * 8);
    }
    ps.add(name, Tensor(shape, std::move(data)));
  }
  return ps;
}

std::vector<Var> sgd_step_diff(std::span<const Var> params,
                               std::span<const Var> grads, double lr) {
  if (params.size() != grads.size()) {
    throw std::invalid_argument("sgd_step_diff: " + std::to_string(params.size()) +
                                " params vs " + std::to_string(grads.size()) +
                                " grads");
  }
  std::vector<Var> out;
  out.reserve(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    Graph* g = params[i].graph;
    out.push_back(g->sub(params[i], g->scale(grads[i], lr)));
  }
  return out;
}

bool adam_step(ParamSet& params, std::span<const Tensor> grads, double lr,
               double beta1, double beta2, double eps) {
  const std::vector<double> lrs(params.size(), lr);
  return adam_step(params, grads, lrs, beta1, beta2, eps);
}

bool adam_step(ParamSet& params, std::span<const Tensor> grads,
               std::span<const double> lrs, double beta1, double beta2,
               double eps) {
  if (grads.size() != params.size() || lrs.size() != params.size()) {
    throw std::invalid_argument("adam_step: " + std::to_string(params.size()) +
                                " params vs " + std::to_string(grads.size()) +
                                " grads and " + std::to_string(lrs.size()) +
                                " rates");
  }
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (!grads[i].same_shape(params.at(i))) {
      throw std::invalid_argument("adam_step: grad shape " +
                                  shape_str(grads[i].shape()) + " vs param " +
                                  shape_str(params.at(i).shape()));
    }
    if (!grads[i].all_finite()) return false;
  }

  if (!params.adam_) {
    ParamSet::AdamState state;
    for (std::size_t i = 0; i < params.size(); ++i) {
      state.m.push_back(Tensor::zeros(params.at(i).shape()));
      state.v.push_back(Tensor::zeros(params.at(i).shape()));
    }
    params.adam_ = std::move(state);
  }

  ParamSet::AdamState& st = *params.adam_;
  st.step += 1;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(st.step));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(st.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& theta = params.at(i);
    Tensor& m = st.m[i];
    Tensor& v = st.v[i];
    const Tensor& grad = grads[i];
    for (std::int64_t j = 0; j < theta.numel(); ++j) {
      m[j] = beta1 * m[j] + (1.0 - beta1) * grad[j];
      v[j] = beta2 * v[j] + (1.0 - beta2) * grad[j] * grad[j];
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      theta[j] -= lrs[i] * mhat / (std::sqrt(vhat) + eps);
    }
  }
  return true;
}

std::uint64_t param_hash(const ParamSet& params) {
  const std::vector<std::uint8_t> bytes = params.serialize();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace metacam::diff
