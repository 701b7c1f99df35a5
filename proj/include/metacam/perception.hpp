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
//
// Visual perception: small two-convolution encoders for RGB and depth
// observations, optional channelwise affine-transformation (AT) layers that
// perturb intermediate activations with learned Gaussian scale/bias noise,
// and the L1 feature-matching loss. Everything is expressed as graph nodes
// so gradients (including gradients of gradients) flow through encoders,
// noise reparameterization, and losses alike.

#pragma once

#include <span>
#include <string>
#include <string_view>

#include "metacam/diff/graph.hpp"
#include "metacam/diff/param_set.hpp"
#include "metacam/diff/tensor.hpp"
#include "metacam/world.hpp"

namespace metacam {
class Rng;
}

namespace metacam::perception {

using diff::Graph;
using diff::ParamSet;
using diff::Tensor;
using diff::Var;

enum class Channel { kRgb, kDepth };

constexpr int kRgbChannels = 3;
constexpr int kDepthChannels = 1;
/// Depth readings are divided by this before encoding, mapping the default
/// 10 m sensing range onto [0, 1].
constexpr double kDepthScale = 10.0;

inline int channel_count(Channel c) { return c == Channel::kRgb ? kRgbChannels : kDepthChannels; }

/// Geometry of one encoder head: conv(in->c1) -> tanh -> conv(c1->c2) ->
/// tanh -> dense(feature_dim). Both convolutions share kernel and stride.
struct EncoderConfig {
  int width = 64;
  int conv1_channels = 16;
  int conv2_channels = 32;
  int kernel = 5;
  int stride = 2;
  int feature_dim = 64;
};

/// Output length of a valid (no padding) 1-D convolution.
int conv_out_len(int in_len, int kernel, int stride);

/// Layer geometry derived from a config; throws std::invalid_argument if a
/// convolution output would be empty.
struct EncoderDims {
  int l1 = 0;    // spatial length after conv1
  int l2 = 0;    // spatial length after conv2
  int flat = 0;  // dense fan-in (conv2_channels * l2)
};
EncoderDims encoder_dims(const EncoderConfig& cfg);

/// Adds the six tensors of one encoder head to `params` under `prefix`
/// ("rgb." or "depth."): conv1.w, conv1.b, conv2.w, conv2.b, dense.w,
/// dense.b. Weights are Glorot-uniform from `rng`; biases start at zero.
void init_encoder_params(ParamSet& params, const std::string& prefix,
                         Channel channel, const EncoderConfig& cfg, Rng& rng);

/// Adds the four AT hyperparameter tensors for one encoder head to `params`
/// under `prefix` ("at.rgb." or "at.depth."): l1.eps, l1.rho, l2.eps,
/// l2.rho, shaped [C,1] per conv layer. Raw values pass through softplus at
/// use, so `raw_init` = -2 gives initial noise stds near 0.13.
void init_at_params(ParamSet& params, const std::string& prefix,
                    const EncoderConfig& cfg, double raw_init = -2.0);

/// One encoder head's parameters lifted into a graph.
struct EncoderVars {
  Var conv1_w, conv1_b, conv2_w, conv2_b, dense_w, dense_b;
};

/// One encoder head's AT hyperparameters lifted into a graph.
struct AtVars {
  Var l1_eps, l1_rho, l2_eps, l2_rho;
};

/// Picks the six encoder nodes for `prefix` out of `lifted`, which must be
/// parallel to params iteration order (e.g. the result of params.lift(g) or
/// of a differentiable update applied to it).
EncoderVars encoder_vars(const ParamSet& params, std::span<const Var> lifted,
                         std::string_view prefix);
AtVars at_vars(const ParamSet& params, std::span<const Var> lifted,
               std::string_view prefix);

/// One realization of the AT noise: channelwise scale and bias per conv
/// layer, graph-connected to the hyperparameters they were sampled from.
struct AtSample {
  Var eps1, rho1, eps2, rho2;  // [C1,1], [C1,1], [C2,1], [C2,1]
};

/// Reparameterized draw: eps = 1 + softplus(raw_eps) * n, rho =
/// softplus(raw_rho) * n', with n, n' standard normal from `rng` (drawn in
/// the fixed order l1.eps, l1.rho, l2.eps, l2.rho). Gradients flow to the
/// raw hyperparameters through softplus and the multiplication.
AtSample sample_at(Graph& g, const AtVars& at, Rng& rng);

/// Same, but with caller-supplied noise tensors (zero noise gives the exact
/// identity: eps = 1, rho = 0).
AtSample sample_at_with_noise(Graph& g, const AtVars& at, const Tensor& n_eps1,
                              const Tensor& n_rho1, const Tensor& n_eps2,
                              const Tensor& n_rho2);

/// Channelwise affine modulation: out[c, s] = eps[c] * z[c, s] + rho[c].
/// `z` is [C, S]; `eps` and `rho` are [C, 1].
Var modulate(Graph& g, Var z, Var eps, Var rho);

/// De-interleaves the ray-major RGB buffer into a [3, W] tensor.
Tensor rgb_tensor(const world::Observation& obs);
/// Depth as a [1, W] tensor scaled by 1/kDepthScale.
Tensor depth_tensor(const world::Observation& obs);
Tensor obs_tensor(const world::Observation& obs, Channel channel);

/// Full forward pass over an already-lifted [C_in, W] input node. With `at`
/// non-null the sampled scale/bias modulates each convolution output before
/// its tanh. Returns the [feature_dim] feature vector node. Throws
/// std::invalid_argument on width/channel mismatch and std::runtime_error
/// if the output is non-finite.
Var encode(Graph& g, const EncoderConfig& cfg, const EncoderVars& p, Var x,
           const AtSample* at = nullptr);

/// Convenience wrapper: lifts params into a private graph and returns the
/// feature values. Deterministic given (params, obs).
Tensor encode_eager(const ParamSet& params, std::string_view prefix,
                    const EncoderConfig& cfg, const world::Observation& obs,
                    Channel channel);

/// As encode_eager but with AT noise drawn from `rng` using the
/// hyperparameters stored under `at_prefix`.
Tensor encode_eager_at(const ParamSet& params, std::string_view prefix,
                       std::string_view at_prefix, const EncoderConfig& cfg,
                       const world::Observation& obs, Channel channel,
                       Rng& rng);

/// Sum of absolute differences between two equally-shaped feature nodes.
Var feature_loss(Graph& g, Var reference, Var trainee);

}  // namespace metacam::perception
