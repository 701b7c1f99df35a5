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

#include "metacam/perception.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "metacam/rng.hpp"

namespace metacam::perception {

namespace {

Tensor glorot(Rng& rng, std::int64_t rows, std::int64_t cols, double fan_in,
              double fan_out) {
  const double limit = std::sqrt(6.0 / (fan_in + fan_out));
  Tensor t = Tensor::zeros({rows, cols});
  for (std::int64_t i = 0; i < t.numel(); ++i) {
    t.data()[i] = rng.uniform(-limit, limit);
  }
  return t;
}

Var find_var(const ParamSet& params, std::span<const Var> lifted,
             std::string_view name) {
  if (lifted.size() != params.size()) {
    throw std::invalid_argument("lifted parameter list has " +
                                std::to_string(lifted.size()) + " entries for " +
                                std::to_string(params.size()) + " parameters");
  }
  const auto& names = params.names();
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return lifted[i];
  }
  throw std::out_of_range("parameter '" + std::string(name) + "' not found");
}

Tensor normal_tensor(Rng& rng, std::int64_t channels) {
  Tensor t = Tensor::zeros({channels, 1});
  for (std::int64_t i = 0; i < channels; ++i) t.data()[i] = rng.normal();
  return t;
}

}  // namespace

int conv_out_len(int in_len, int kernel, int stride) {
  if (in_len < kernel || stride <= 0) return 0;
  return (in_len - kernel) / stride + 1;
}

EncoderDims encoder_dims(const EncoderConfig& cfg) {
  EncoderDims d;
  d.l1 = conv_out_len(cfg.width, cfg.kernel, cfg.stride);
  d.l2 = conv_out_len(d.l1, cfg.kernel, cfg.stride);
  d.flat = cfg.conv2_channels * d.l2;
  if (cfg.width <= 0 || cfg.conv1_channels <= 0 || cfg.conv2_channels <= 0 ||
      cfg.feature_dim <= 0 || d.l1 <= 0 || d.l2 <= 0) {
    throw std::invalid_argument(
        "encoder config degenerate: width " + std::to_string(cfg.width) +
        ", kernel " + std::to_string(cfg.kernel) + ", stride " +
        std::to_string(cfg.stride) + " leaves conv outputs " +
        std::to_string(d.l1) + " and " + std::to_string(d.l2));
  }
  return d;
}

void init_encoder_params(ParamSet& params, const std::string& prefix,
                         Channel channel, const EncoderConfig& cfg, Rng& rng) {
  const EncoderDims dims = encoder_dims(cfg);
  const int cin = channel_count(channel);
  const int k = cfg.kernel, c1 = cfg.conv1_channels, c2 = cfg.conv2_channels;
  params.add(prefix + "conv1.w",
             glorot(rng, c1, cin * k, cin * k, static_cast<double>(c1) * k));
  params.add(prefix + "conv1.b", Tensor::zeros({c1, 1}));
  params.add(prefix + "conv2.w",
             glorot(rng, c2, c1 * k, static_cast<double>(c1) * k,
                    static_cast<double>(c2) * k));
  params.add(prefix + "conv2.b", Tensor::zeros({c2, 1}));
  params.add(prefix + "dense.w",
             glorot(rng, cfg.feature_dim, dims.flat, dims.flat, cfg.feature_dim));
  params.add(prefix + "dense.b", Tensor::zeros({cfg.feature_dim, 1}));
}

void init_at_params(ParamSet& params, const std::string& prefix,
                    const EncoderConfig& cfg, double raw_init) {
  params.add(prefix + "l1.eps", Tensor::full({cfg.conv1_channels, 1}, raw_init));
  params.add(prefix + "l1.rho", Tensor::full({cfg.conv1_channels, 1}, raw_init));
  params.add(prefix + "l2.eps", Tensor::full({cfg.conv2_channels, 1}, raw_init));
  params.add(prefix + "l2.rho", Tensor::full({cfg.conv2_channels, 1}, raw_init));
}

EncoderVars encoder_vars(const ParamSet& params, std::span<const Var> lifted,
                         std::string_view prefix) {
  const std::string p(prefix);
  return EncoderVars{find_var(params, lifted, p + "conv1.w"),
                     find_var(params, lifted, p + "conv1.b"),
                     find_var(params, lifted, p + "conv2.w"),
                     find_var(params, lifted, p + "conv2.b"),
                     find_var(params, lifted, p + "dense.w"),
                     find_var(params, lifted, p + "dense.b")};
}

AtVars at_vars(const ParamSet& params, std::span<const Var> lifted,
               std::string_view prefix) {
  const std::string p(prefix);
  return AtVars{find_var(params, lifted, p + "l1.eps"),
                find_var(params, lifted, p + "l1.rho"),
                find_var(params, lifted, p + "l2.eps"),
                find_var(params, lifted, p + "l2.rho")};
}

AtSample sample_at_with_noise(Graph& g, const AtVars& at, const Tensor& n_eps1,
                              const Tensor& n_rho1, const Tensor& n_eps2,
                              const Tensor& n_rho2) {
  const auto draw_eps = [&](Var raw, const Tensor& noise) {
    Var ones = g.input(Tensor::full(raw.tensor().shape(), 1.0));
    return g.add(ones, g.mul(g.softplus(raw), g.input(noise)));
  };
  const auto draw_rho = [&](Var raw, const Tensor& noise) {
    return g.mul(g.softplus(raw), g.input(noise));
  };
  return AtSample{draw_eps(at.l1_eps, n_eps1), draw_rho(at.l1_rho, n_rho1),
                  draw_eps(at.l2_eps, n_eps2), draw_rho(at.l2_rho, n_rho2)};
}

AtSample sample_at(Graph& g, const AtVars& at, Rng& rng) {
  const std::int64_t c1 = at.l1_eps.tensor().shape()[0];
  const std::int64_t c2 = at.l2_eps.tensor().shape()[0];
  const Tensor n_eps1 = normal_tensor(rng, c1);
  const Tensor n_rho1 = normal_tensor(rng, c1);
  const Tensor n_eps2 = normal_tensor(rng, c2);
  const Tensor n_rho2 = normal_tensor(rng, c2);
  return sample_at_with_noise(g, at, n_eps1, n_rho1, n_eps2, n_rho2);
}

Var modulate(Graph& g, Var z, Var eps, Var rho) {
  const std::int64_t cols = z.tensor().shape().at(1);
  return g.add(g.mul(g.broadcast_cols(eps, cols), z),
               g.broadcast_cols(rho, cols));
}

Tensor rgb_tensor(const world::Observation& obs) {
  const std::int64_t w = obs.width;
  Tensor t = Tensor::zeros({kRgbChannels, w});
  for (std::int64_t j = 0; j < w; ++j) {
    for (std::int64_t c = 0; c < kRgbChannels; ++c) {
      t.data()[c * w + j] = obs.rgb[static_cast<std::size_t>(j * 3 + c)];
    }
  }
  return t;
}

Tensor depth_tensor(const world::Observation& obs) {
  const std::int64_t w = obs.width;
  Tensor t = Tensor::zeros({kDepthChannels, w});
  for (std::int64_t j = 0; j < w; ++j) {
    t.data()[j] = obs.depth[static_cast<std::size_t>(j)] / kDepthScale;
  }
  return t;
}

Tensor obs_tensor(const world::Observation& obs, Channel channel) {
  return channel == Channel::kRgb ? rgb_tensor(obs) : depth_tensor(obs);
}

Var encode(Graph& g, const EncoderConfig& cfg, const EncoderVars& p, Var x,
           const AtSample* at) {
  const EncoderDims dims = encoder_dims(cfg);
  const diff::Shape& xs = x.tensor().shape();
  if (xs.size() != 2 || xs[1] != cfg.width) {
    throw std::invalid_argument("encoder expects a [channels x " +
                                std::to_string(cfg.width) + "] input, got " +
                                diff::shape_str(xs));
  }
  Var z1 = g.add(g.conv1d(x, p.conv1_w, cfg.kernel, cfg.stride),
                 g.broadcast_cols(p.conv1_b, dims.l1));
  if (at != nullptr) z1 = modulate(g, z1, at->eps1, at->rho1);
  Var h1 = g.tanh(z1);
  Var z2 = g.add(g.conv1d(h1, p.conv2_w, cfg.kernel, cfg.stride),
                 g.broadcast_cols(p.conv2_b, dims.l2));
  if (at != nullptr) z2 = modulate(g, z2, at->eps2, at->rho2);
  Var h2 = g.tanh(z2);
  Var flat = g.reshape(h2, {dims.flat, 1});
  Var out = g.add(g.matmul(p.dense_w, flat), p.dense_b);
  Var feat = g.reshape(out, {cfg.feature_dim});
  if (!feat.tensor().all_finite()) {
    throw std::runtime_error("encoder produced non-finite activations");
  }
  return feat;
}

Tensor encode_eager(const ParamSet& params, std::string_view prefix,
                    const EncoderConfig& cfg, const world::Observation& obs,
                    Channel channel) {
  Graph g;
  const std::vector<Var> lifted = params.lift(g);
  const EncoderVars p = encoder_vars(params, lifted, prefix);
  Var x = g.input(obs_tensor(obs, channel));
  return encode(g, cfg, p, x).tensor();
}

Tensor encode_eager_at(const ParamSet& params, std::string_view prefix,
                       std::string_view at_prefix, const EncoderConfig& cfg,
                       const world::Observation& obs, Channel channel,
                       Rng& rng) {
  Graph g;
  const std::vector<Var> lifted = params.lift(g);
  const EncoderVars p = encoder_vars(params, lifted, prefix);
  const AtVars at = at_vars(params, lifted, at_prefix);
  const AtSample s = sample_at(g, at, rng);
  Var x = g.input(obs_tensor(obs, channel));
  return encode(g, cfg, p, x, &s).tensor();
}

Var feature_loss(Graph& g, Var reference, Var trainee) {
  return g.sum(g.abs(g.sub(reference, trainee)));
}

}  // namespace metacam::perception
