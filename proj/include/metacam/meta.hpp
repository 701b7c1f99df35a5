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
// Camera-configuration generalization trainers. Both retrain only the two
// perception encoders against features produced by a frozen reference
// encoder pair; the navigator is never touched.
//
//  * Few-shot meta-learning (MAML): inner differentiable gradient descent
//    on per-task support frames, outer Adam step on post-adaptation query
//    losses, with exact second-order gradients by default.
//  * Learning-to-learn affine transformation (AT): each iteration takes one
//    noisy-encoder gradient step on a pseudo-seen domain, then moves the AT
//    hyperparameters to minimize the pseudo-unseen loss of the *updated*
//    encoders evaluated without AT.
//  * Test-time few-shot adaptation: plain gradient descent on k paired
//    frames from the target camera.

#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "metacam/diff/graph.hpp"
#include "metacam/diff/param_set.hpp"
#include "metacam/diff/tensor.hpp"
#include "metacam/episodes.hpp"
#include "metacam/perception.hpp"
#include "metacam/rng.hpp"
#include "metacam/world.hpp"

namespace metacam::meta {

using diff::Graph;
using diff::ParamSet;
using diff::Tensor;
using diff::Var;

// ---------------------------------------------------------------------------
// Task sampling

/// One adaptation task: k support and k query frames from a single
/// (world, episode, camera) triple, rendered under both the reference and
/// the task camera at identical agent states. Support and query states are
/// distinct by construction.
struct MetaTask {
  world::CameraConfig cam;
  std::int32_t world_id = 0;
  std::int32_t episode_id = 0;
  std::vector<episodes::PairedFrame> support;
  std::vector<episodes::PairedFrame> query;
};

/// Uniform distribution over (seen camera config) x (episode index).
struct TaskDistribution {
  std::vector<world::CameraConfig> configs;
  const episodes::Dataset* dataset = nullptr;
  std::vector<std::size_t> episode_indices;  // into dataset->episodes
  world::CameraConfig reference_cam;
};

/// Throws std::invalid_argument unless there is at least one config, all
/// configs are distinct, the dataset is set, and every episode index is in
/// range.
void validate(const TaskDistribution& dist);

/// Draws (config, episode) uniformly, renders 2*shots paired frames at
/// distinct rollout states, and splits them into support (first k) and
/// query (last k). Throws if the episode rollout has fewer than 2*shots
/// states.
MetaTask sample_task(const TaskDistribution& dist, int shots, Rng& rng);

// ---------------------------------------------------------------------------
// Differentiable gradient descent

using LossFn = std::function<Var(std::span<const Var>)>;

/// `steps` rounds of v <- v - lr * dL/dv, recorded on the graph. With
/// `create_graph` the returned vars remain differentiable with respect to
/// the starting vars through every step (exact second order); without it
/// each step's gradient enters as a constant, so the chain reduces to the
/// first-order approximation. When `losses` is non-null it receives
/// steps + 1 entries: the loss before each step and once more after the
/// last. Throws std::runtime_error if any evaluated loss is non-finite.
std::vector<Var> differentiable_gd(Graph& g, std::span<const Var> vars,
                                   double lr, int steps, const LossFn& loss_fn,
                                   bool create_graph,
                                   std::vector<double>* losses = nullptr);

// ---------------------------------------------------------------------------
// Feature-matching losses against the frozen reference encoders

/// Per-frame loss targets: the frozen reference encoders' feature vectors
/// on the reference-camera observations. Computed eagerly once; they enter
/// later graphs as constants.
struct FrameTargets {
  Tensor rgb;    // [feature_dim]
  Tensor depth;  // [feature_dim]
};
std::vector<FrameTargets> reference_targets(
    const ParamSet& reference, const perception::EncoderConfig& enc_cfg,
    std::span<const episodes::PairedFrame> frames);

/// Mean L1 feature loss of one encoder head over a frame set: the head
/// (given as in-graph vars) encodes each frame's target-camera observation;
/// the target is the frozen reference feature of the same state. With `at`
/// non-null, frame i is encoded with noise sample at[i].
Var feature_match_loss(Graph& g, const perception::EncoderConfig& enc_cfg,
                       const perception::EncoderVars& enc,
                       perception::Channel channel,
                       std::span<const episodes::PairedFrame> frames,
                       std::span<const FrameTargets> targets,
                       std::span<const perception::AtSample> at = {});

// ---------------------------------------------------------------------------
// MAML

struct MamlConfig {
  double alpha = 2e-4;  // inner rate, RGB head
  double beta = 2e-4;   // inner rate, depth head
  double gamma = 2e-4;  // outer rate, RGB head
  double delta = 2e-4;  // outer rate, depth head
  int shots = 3;
  int inner_steps = 10;
  int task_batch = 4;
  bool second_order = true;
};

/// Throws std::invalid_argument on non-positive rates, shots < 1, or
/// steps < 1.
void validate(const MamlConfig& cfg);

/// Adapted parameter list plus the support-loss traces of the inner run.
struct InnerAdaptResult {
  std::vector<Var> lifted;  // full params order; rgb./depth. entries adapted
  std::vector<double> rgb_losses;    // inner_steps + 1 entries
  std::vector<double> depth_losses;  // inner_steps + 1 entries
};

/// Runs cfg.inner_steps of differentiable gradient descent on the task's
/// support set: the RGB head descends its feature-matching loss at rate
/// alpha, the depth head its own at rate beta. `lifted` must be
/// params.lift(g). With cfg.second_order the returned vars stay
/// graph-connected to the originals.
InnerAdaptResult maml_inner_adapt(Graph& g, const ParamSet& params,
                                  std::span<const Var> lifted,
                                  const perception::EncoderConfig& enc_cfg,
                                  const MetaTask& task, const MamlConfig& cfg,
                                  const ParamSet& reference);

/// Per-task numbers reported by the outer step.
struct TaskStats {
  double query_rgb_loss = 0.0;
  double query_depth_loss = 0.0;
  std::vector<double> support_rgb_losses;
  std::vector<double> support_depth_losses;
};

/// Gradient of the summed post-adaptation query losses over the batch with
/// respect to every tensor in `params` (zeros for tensors outside the two
/// encoder heads). Tasks are processed in index order on independent
/// graphs. Throws std::runtime_error on a non-finite meta-loss.
std::vector<Tensor> maml_meta_gradient(const ParamSet& params,
                                       const ParamSet& reference,
                                       const perception::EncoderConfig& enc_cfg,
                                       std::span<const MetaTask> tasks,
                                       const MamlConfig& cfg,
                                       std::vector<TaskStats>* stats = nullptr);

struct OuterStepStats {
  double meta_loss = 0.0;  // sum of per-task query losses (both heads)
  double rgb_grad_norm = 0.0;
  double depth_grad_norm = 0.0;
  std::vector<TaskStats> tasks;
};

/// One meta-update: maml_meta_gradient over the batch, then Adam at rate
/// gamma for "rgb." tensors and delta for "depth." tensors (others frozen).
OuterStepStats maml_outer_step(ParamSet& params, const ParamSet& reference,
                               const perception::EncoderConfig& enc_cfg,
                               std::span<const MetaTask> tasks,
                               const MamlConfig& cfg);

/// Full training loop: `outer_steps` batches of cfg.task_batch tasks drawn
/// from `dist`. Appends one JSON line per outer step to `log_path` (no log
/// if empty): iteration, meta loss, per-head grad norms, wall time.
void maml_train(ParamSet& params, const ParamSet& reference,
                const perception::EncoderConfig& enc_cfg,
                const TaskDistribution& dist, const MamlConfig& cfg,
                int outer_steps, Rng& rng, const std::string& log_path = "");

// ---------------------------------------------------------------------------
// Learning-to-learn affine transformation

/// The K seen domains an AT iteration draws its pseudo-seen/pseudo-unseen
/// pair from. Same shape as TaskDistribution but requires K >= 2.
struct DomainSet {
  std::vector<world::CameraConfig> domains;
  const episodes::Dataset* dataset = nullptr;
  std::vector<std::size_t> episode_indices;
  world::CameraConfig reference_cam;
};

/// Throws std::invalid_argument unless K >= 2 with distinct domains, the
/// dataset is set, and every episode index is in range.
void validate(const DomainSet& domains);

struct AtTrainConfig {
  double eta = 2e-4;   // RGB rate (encoder step and its AT hyperparameters)
  double zeta = 2e-4;  // depth rate
  int iterations = 1;
  int shots = 3;  // frames per sampled domain task
};

/// Throws std::invalid_argument on non-positive rates, iterations < 1, or
/// shots < 1.
void validate(const AtTrainConfig& cfg);

struct AtIterationTrace {
  std::size_t ps_domain = 0;  // index into domains.domains
  std::size_t pu_domain = 0;
  double ps_rgb_loss = 0.0;  // pseudo-seen, AT active, before the step
  double ps_depth_loss = 0.0;
  double pu_rgb_loss = 0.0;  // pseudo-unseen, AT removed, after the step
  double pu_depth_loss = 0.0;
  double at_rgb_grad_norm = 0.0;
  double at_depth_grad_norm = 0.0;
  /// True iff the pseudo-unseen branch encoded with AT noise. The
  /// implementation never does; tests assert it stays false.
  bool pseudo_unseen_used_at = false;
};

/// One Algorithm-2 iteration over params holding "rgb.", "depth.",
/// "at.rgb." and "at.depth." tensors:
///   1. draw pseudo-seen != pseudo-unseen domains and one task from each;
///   2. step the encoders (rates eta/zeta) on the pseudo-seen losses
///      computed with AT noise active, one fresh sample per frame;
///   3. evaluate the pseudo-unseen losses on the *updated* encoders with
///      AT removed, and step the AT hyperparameters on their gradient,
///      which flows through the update of step 2.
/// The encoders keep their step-2 values. Throws std::runtime_error on
/// non-finite losses or gradients.
AtIterationTrace at_train_iteration(ParamSet& params, const ParamSet& reference,
                                    const perception::EncoderConfig& enc_cfg,
                                    const DomainSet& domains,
                                    const AtTrainConfig& cfg, Rng& rng);

/// cfg.iterations sequential iterations. Appends one JSON line per
/// iteration to `log_path` (no log if empty): iteration, the four branch
/// losses, AT grad norms, wall time.
void at_train(ParamSet& params, const ParamSet& reference,
              const perception::EncoderConfig& enc_cfg,
              const DomainSet& domains, const AtTrainConfig& cfg, Rng& rng,
              const std::string& log_path = "");

// ---------------------------------------------------------------------------
// Test-time adaptation

struct AdaptTrace {
  std::vector<double> rgb_losses;    // steps + 1 entries
  std::vector<double> depth_losses;  // steps + 1 entries
};

/// The MAML test-time procedure: plain (non-differentiable-chain) gradient
/// descent of the two encoder heads on the feature-matching loss over the
/// given frames, `steps` iterations at rates alpha/beta. Mutates the
/// encoder tensors of `params` in place; everything else is untouched.
/// steps == 0 evaluates the losses once and changes nothing.
AdaptTrace few_shot_adapt(ParamSet& params, const ParamSet& reference,
                          const perception::EncoderConfig& enc_cfg,
                          std::span<const episodes::PairedFrame> frames,
                          double alpha, double beta, int steps);

}  // namespace metacam::meta
