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

#include "metacam/meta.hpp"

#include <chrono>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace metacam::meta {
namespace {

using perception::AtSample;
using perception::Channel;
using perception::EncoderConfig;
using perception::EncoderVars;

bool same_config(const world::CameraConfig& a, const world::CameraConfig& b) {
  return a.height == b.height && a.hfov_deg == b.hfov_deg &&
         a.width == b.width && a.d_max == b.d_max;
}

void check_domain_list(const std::vector<world::CameraConfig>& configs,
                       const episodes::Dataset* dataset,
                       const std::vector<std::size_t>& episode_indices,
                       std::size_t min_configs, const char* what) {
  if (configs.size() < min_configs) {
    throw std::invalid_argument(std::string(what) + ": need at least " +
                                std::to_string(min_configs) +
                                " camera configs, got " +
                                std::to_string(configs.size()));
  }
  for (std::size_t i = 0; i < configs.size(); ++i) {
    world::validate(configs[i]);
    for (std::size_t j = i + 1; j < configs.size(); ++j) {
      if (same_config(configs[i], configs[j])) {
        throw std::invalid_argument(std::string(what) +
                                    ": camera configs must be distinct");
      }
    }
  }
  if (dataset == nullptr) {
    throw std::invalid_argument(std::string(what) + ": dataset is null");
  }
  if (episode_indices.empty()) {
    throw std::invalid_argument(std::string(what) + ": no episode indices");
  }
  for (std::size_t idx : episode_indices) {
    if (idx >= dataset->episodes.size()) {
      throw std::invalid_argument(std::string(what) + ": episode index " +
                                  std::to_string(idx) + " out of range (" +
                                  std::to_string(dataset->episodes.size()) +
                                  " episodes)");
    }
  }
}

const world::WorldSpec& world_of(const episodes::Dataset& dataset,
                                 const episodes::Episode& ep) {
  if (ep.world_id < 0 ||
      static_cast<std::size_t>(ep.world_id) >= dataset.worlds.size()) {
    throw std::invalid_argument("dataset has no world with index " +
                                std::to_string(ep.world_id));
  }
  return dataset.worlds[static_cast<std::size_t>(ep.world_id)];
}

MetaTask sample_task_for(const episodes::Dataset& dataset,
                         const std::vector<std::size_t>& episode_indices,
                         const world::CameraConfig& cam,
                         const world::CameraConfig& reference_cam, int shots,
                         Rng& rng) {
  if (shots < 1) {
    throw std::invalid_argument("sample_task: shots must be >= 1, got " +
                                std::to_string(shots));
  }
  const std::size_t pick =
      episode_indices[rng.uniform_index(episode_indices.size())];
  const episodes::Episode& ep = dataset.episodes[pick];
  const world::WorldSpec& w = world_of(dataset, ep);
  // One draw of 2k frames guarantees distinct states. The frames arrive in
  // path order, so split even/odd to keep support and query balanced along
  // the trajectory.
  std::vector<episodes::PairedFrame> frames = episodes::sample_paired_frames(
      w, ep, reference_cam, cam, 2 * shots, rng.next_u64());
  MetaTask task;
  task.cam = cam;
  task.world_id = ep.world_id;
  task.episode_id = ep.id;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    (i % 2 == 0 ? task.support : task.query).push_back(std::move(frames[i]));
  }
  return task;
}

/// A full parameter list with the entries at `idx` replaced by `sub`.
std::vector<Var> substitute(std::span<const Var> lifted,
                            const std::vector<std::size_t>& idx,
                            std::span<const Var> sub) {
  std::vector<Var> full(lifted.begin(), lifted.end());
  for (std::size_t i = 0; i < idx.size(); ++i) full[idx[i]] = sub[i];
  return full;
}

double l2_norm(std::span<const Tensor> grads,
               const std::vector<std::size_t>& idx) {
  double sq = 0.0;
  for (std::size_t i : idx) {
    const Tensor& t = grads[i];
    for (std::int64_t j = 0; j < t.numel(); ++j) sq += t[j] * t[j];
  }
  return std::sqrt(sq);
}

/// Descends one encoder head on its feature-matching loss over `frames`,
/// returning the full parameter list with that head's entries adapted.
/// Shared by the MAML inner loop, the AT pseudo-seen step, and test-time
/// adaptation; they differ only in rates, steps, AT samples, and whether
/// the chain stays differentiable.
std::vector<Var> adapt_head(Graph& g, const ParamSet& params,
                            std::span<const Var> lifted,
                            const EncoderConfig& enc_cfg, Channel channel,
                            std::string_view prefix,
                            std::span<const episodes::PairedFrame> frames,
                            std::span<const FrameTargets> targets,
                            std::span<const AtSample> at, double lr, int steps,
                            bool create_graph, std::vector<double>* losses) {
  const std::vector<std::size_t> idx = params.indices_with_prefix(prefix);
  if (idx.empty()) {
    throw std::invalid_argument("adapt_head: no parameters with prefix '" +
                                std::string(prefix) + "'");
  }
  std::vector<Var> sub;
  sub.reserve(idx.size());
  for (std::size_t i : idx) sub.push_back(lifted[i]);

  const LossFn loss_fn = [&](std::span<const Var> cur) -> Var {
    const std::vector<Var> full = substitute(lifted, idx, cur);
    const EncoderVars enc = perception::encoder_vars(params, full, prefix);
    return feature_match_loss(g, enc_cfg, enc, channel, frames, targets, at);
  };
  const std::vector<Var> adapted =
      differentiable_gd(g, sub, lr, steps, loss_fn, create_graph, losses);
  return substitute(lifted, idx, adapted);
}

void append_json_line(const std::string& path, const nlohmann::json& line) {
  if (path.empty()) return;
  std::ofstream out(path, std::ios::app);
  if (!out) {
    throw std::runtime_error("cannot open training log '" + path + "'");
  }
  out << line.dump() << '\n';
}

double elapsed_ms(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double, std::milli>(
             std::chrono::steady_clock::now() - since)
      .count();
}

}  // namespace

// ---------------------------------------------------------------------------
// Task sampling

void validate(const TaskDistribution& dist) {
  check_domain_list(dist.configs, dist.dataset, dist.episode_indices, 1,
                    "TaskDistribution");
  world::validate(dist.reference_cam);
}

MetaTask sample_task(const TaskDistribution& dist, int shots, Rng& rng) {
  validate(dist);
  const world::CameraConfig cam =
      dist.configs[rng.uniform_index(dist.configs.size())];
  return sample_task_for(*dist.dataset, dist.episode_indices, cam,
                         dist.reference_cam, shots, rng);
}

// ---------------------------------------------------------------------------
// Differentiable gradient descent

std::vector<Var> differentiable_gd(Graph& g, std::span<const Var> vars,
                                   double lr, int steps, const LossFn& loss_fn,
                                   bool create_graph,
                                   std::vector<double>* losses) {
  if (steps < 0) {
    throw std::invalid_argument("differentiable_gd: steps must be >= 0, got " +
                                std::to_string(steps));
  }
  if (!std::isfinite(lr)) {
    throw std::invalid_argument("differentiable_gd: non-finite learning rate");
  }
  std::vector<Var> cur(vars.begin(), vars.end());
  for (int step = 0; step < steps; ++step) {
    const Var loss = loss_fn(cur);
    const double value = loss.item();
    if (!std::isfinite(value)) {
      throw std::runtime_error("differentiable_gd: non-finite loss at step " +
                               std::to_string(step));
    }
    if (losses != nullptr) losses->push_back(value);
    const std::vector<Var> grads = g.backward(loss, cur, create_graph);
    cur = diff::sgd_step_diff(cur, grads, lr);
  }
  if (losses != nullptr) {
    const double final_value = loss_fn(cur).item();
    if (!std::isfinite(final_value)) {
      throw std::runtime_error(
          "differentiable_gd: non-finite loss after final step");
    }
    losses->push_back(final_value);
  }
  return cur;
}

// ---------------------------------------------------------------------------
// Feature-matching losses

std::vector<FrameTargets> reference_targets(
    const ParamSet& reference, const EncoderConfig& enc_cfg,
    std::span<const episodes::PairedFrame> frames) {
  std::vector<FrameTargets> targets;
  targets.reserve(frames.size());
  for (const episodes::PairedFrame& f : frames) {
    targets.push_back(FrameTargets{
        perception::encode_eager(reference, "rgb.", enc_cfg, f.reference,
                                 Channel::kRgb),
        perception::encode_eager(reference, "depth.", enc_cfg, f.reference,
                                 Channel::kDepth)});
  }
  return targets;
}

Var feature_match_loss(Graph& g, const EncoderConfig& enc_cfg,
                       const EncoderVars& enc, Channel channel,
                       std::span<const episodes::PairedFrame> frames,
                       std::span<const FrameTargets> targets,
                       std::span<const AtSample> at) {
  if (frames.empty()) {
    throw std::invalid_argument("feature_match_loss: empty frame set");
  }
  if (targets.size() != frames.size()) {
    throw std::invalid_argument("feature_match_loss: " +
                                std::to_string(frames.size()) + " frames vs " +
                                std::to_string(targets.size()) + " targets");
  }
  if (!at.empty() && at.size() != frames.size()) {
    throw std::invalid_argument("feature_match_loss: " +
                                std::to_string(frames.size()) + " frames vs " +
                                std::to_string(at.size()) + " AT samples");
  }
  Var total;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const Var x = g.input(perception::obs_tensor(frames[i].target, channel));
    const AtSample* sample = at.empty() ? nullptr : &at[i];
    const Var feat = perception::encode(g, enc_cfg, enc, x, sample);
    const Var target = g.input(channel == Channel::kRgb ? targets[i].rgb
                                                        : targets[i].depth);
    const Var term = perception::feature_loss(g, target, feat);
    total = total.valid() ? g.add(total, term) : term;
  }
  return g.scale(total, 1.0 / static_cast<double>(frames.size()));
}

// ---------------------------------------------------------------------------
// MAML

void validate(const MamlConfig& cfg) {
  if (!(cfg.alpha > 0) || !(cfg.beta > 0) || !(cfg.gamma > 0) ||
      !(cfg.delta > 0)) {
    throw std::invalid_argument("MamlConfig: rates must be > 0");
  }
  if (cfg.shots < 1) {
    throw std::invalid_argument("MamlConfig: shots must be >= 1, got " +
                                std::to_string(cfg.shots));
  }
  if (cfg.inner_steps < 1) {
    throw std::invalid_argument("MamlConfig: inner_steps must be >= 1, got " +
                                std::to_string(cfg.inner_steps));
  }
  if (cfg.task_batch < 1) {
    throw std::invalid_argument("MamlConfig: task_batch must be >= 1, got " +
                                std::to_string(cfg.task_batch));
  }
}

InnerAdaptResult maml_inner_adapt(Graph& g, const ParamSet& params,
                                  std::span<const Var> lifted,
                                  const EncoderConfig& enc_cfg,
                                  const MetaTask& task, const MamlConfig& cfg,
                                  const ParamSet& reference) {
  if (task.support.empty()) {
    throw std::invalid_argument("maml_inner_adapt: empty support set");
  }
  if (lifted.size() != params.size()) {
    throw std::invalid_argument("maml_inner_adapt: lifted size " +
                                std::to_string(lifted.size()) + " vs " +
                                std::to_string(params.size()) + " params");
  }
  const std::vector<FrameTargets> targets =
      reference_targets(reference, enc_cfg, task.support);
  InnerAdaptResult result;
  std::vector<Var> full =
      adapt_head(g, params, lifted, enc_cfg, Channel::kRgb, "rgb.",
                 task.support, targets, {}, cfg.alpha, cfg.inner_steps,
                 cfg.second_order, &result.rgb_losses);
  full = adapt_head(g, params, full, enc_cfg, Channel::kDepth, "depth.",
                    task.support, targets, {}, cfg.beta, cfg.inner_steps,
                    cfg.second_order, &result.depth_losses);
  result.lifted = std::move(full);
  return result;
}

std::vector<Tensor> maml_meta_gradient(const ParamSet& params,
                                       const ParamSet& reference,
                                       const EncoderConfig& enc_cfg,
                                       std::span<const MetaTask> tasks,
                                       const MamlConfig& cfg,
                                       std::vector<TaskStats>* stats) {
  validate(cfg);
  if (tasks.empty()) {
    throw std::invalid_argument("maml_meta_gradient: empty task batch");
  }
  std::vector<Tensor> acc;
  acc.reserve(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    acc.push_back(Tensor::zeros(params.at(i).shape()));
  }
  for (const MetaTask& task : tasks) {
    Graph g;
    const std::vector<Var> lifted = params.lift(g);
    const InnerAdaptResult inner =
        maml_inner_adapt(g, params, lifted, enc_cfg, task, cfg, reference);
    const std::vector<FrameTargets> query_targets =
        reference_targets(reference, enc_cfg, task.query);
    const EncoderVars enc_rgb =
        perception::encoder_vars(params, inner.lifted, "rgb.");
    const EncoderVars enc_depth =
        perception::encoder_vars(params, inner.lifted, "depth.");
    const Var q_rgb = feature_match_loss(g, enc_cfg, enc_rgb, Channel::kRgb,
                                         task.query, query_targets);
    const Var q_depth = feature_match_loss(
        g, enc_cfg, enc_depth, Channel::kDepth, task.query, query_targets);
    const Var q_total = g.add(q_rgb, q_depth);
    if (!std::isfinite(q_total.item())) {
      throw std::runtime_error("maml_meta_gradient: non-finite meta-loss");
    }
    const std::vector<Var> grads =
        g.backward(q_total, lifted, /*create_graph=*/false);
    for (std::size_t i = 0; i < acc.size(); ++i) {
      const Tensor& gt = grads[i].tensor();
      for (std::int64_t j = 0; j < acc[i].numel(); ++j) acc[i][j] += gt[j];
    }
    if (stats != nullptr) {
      stats->push_back(TaskStats{q_rgb.item(), q_depth.item(),
                                 inner.rgb_losses, inner.depth_losses});
    }
  }
  return acc;
}

OuterStepStats maml_outer_step(ParamSet& params, const ParamSet& reference,
                               const EncoderConfig& enc_cfg,
                               std::span<const MetaTask> tasks,
                               const MamlConfig& cfg) {
  OuterStepStats out;
  const std::vector<Tensor> grads = maml_meta_gradient(
      params, reference, enc_cfg, tasks, cfg, &out.tasks);
  for (const TaskStats& t : out.tasks) {
    out.meta_loss += t.query_rgb_loss + t.query_depth_loss;
  }
  out.rgb_grad_norm = l2_norm(grads, params.indices_with_prefix("rgb."));
  out.depth_grad_norm = l2_norm(grads, params.indices_with_prefix("depth."));
  // Per-tensor rates: gamma for the RGB head, delta for the depth head,
  // zero for everything else (e.g. a navigator sharing the ParamSet).
  std::vector<double> lrs(params.size(), 0.0);
  for (std::size_t i : params.indices_with_prefix("rgb.")) lrs[i] = cfg.gamma;
  for (std::size_t i : params.indices_with_prefix("depth.")) {
    lrs[i] = cfg.delta;
  }
  if (!diff::adam_step(params, grads, lrs)) {
    throw std::runtime_error("maml_outer_step: non-finite meta-gradient");
  }
  return out;
}

void maml_train(ParamSet& params, const ParamSet& reference,
                const EncoderConfig& enc_cfg, const TaskDistribution& dist,
                const MamlConfig& cfg, int outer_steps, Rng& rng,
                const std::string& log_path) {
  validate(cfg);
  validate(dist);
  if (outer_steps < 0) {
    throw std::invalid_argument("maml_train: outer_steps must be >= 0");
  }
  for (int step = 0; step < outer_steps; ++step) {
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<MetaTask> tasks;
    tasks.reserve(static_cast<std::size_t>(cfg.task_batch));
    for (int t = 0; t < cfg.task_batch; ++t) {
      tasks.push_back(sample_task(dist, cfg.shots, rng));
    }
    const OuterStepStats stats =
        maml_outer_step(params, reference, enc_cfg, tasks, cfg);
    double l_r = 0.0, l_d = 0.0;
    for (const TaskStats& t : stats.tasks) {
      l_r += t.query_rgb_loss;
      l_d += t.query_depth_loss;
    }
    append_json_line(log_path,
                     {{"iteration", step},
                      {"l_r", l_r},
                      {"l_d", l_d},
                      {"meta_loss", stats.meta_loss},
                      {"rgb_grad_norm", stats.rgb_grad_norm},
                      {"depth_grad_norm", stats.depth_grad_norm},
                      {"wall_ms", elapsed_ms(t0)}});
  }
}

// ---------------------------------------------------------------------------
// Learning-to-learn affine transformation

void validate(const DomainSet& domains) {
  check_domain_list(domains.domains, domains.dataset, domains.episode_indices,
                    2, "DomainSet");
  world::validate(domains.reference_cam);
}

void validate(const AtTrainConfig& cfg) {
  if (!(cfg.eta > 0) || !(cfg.zeta > 0)) {
    throw std::invalid_argument("AtTrainConfig: rates must be > 0");
  }
  if (cfg.iterations < 1) {
    throw std::invalid_argument("AtTrainConfig: iterations must be >= 1");
  }
  if (cfg.shots < 1) {
    throw std::invalid_argument("AtTrainConfig: shots must be >= 1");
  }
}

AtIterationTrace at_train_iteration(ParamSet& params,
                                    const ParamSet& reference,
                                    const EncoderConfig& enc_cfg,
                                    const DomainSet& domains,
                                    const AtTrainConfig& cfg, Rng& rng) {
  validate(domains);
  validate(cfg);
  AtIterationTrace trace;
  const std::size_t k = domains.domains.size();
  // Non-overlapping draw: pick ps uniformly, then pu uniformly among the
  // other k-1 domains.
  trace.ps_domain = rng.uniform_index(k);
  trace.pu_domain = (trace.ps_domain + 1 + rng.uniform_index(k - 1)) % k;

  const MetaTask ps_task = sample_task_for(
      *domains.dataset, domains.episode_indices, domains.domains[trace.ps_domain],
      domains.reference_cam, cfg.shots, rng);
  const MetaTask pu_task = sample_task_for(
      *domains.dataset, domains.episode_indices, domains.domains[trace.pu_domain],
      domains.reference_cam, cfg.shots, rng);
  const std::vector<FrameTargets> ps_targets =
      reference_targets(reference, enc_cfg, ps_task.support);
  const std::vector<FrameTargets> pu_targets =
      reference_targets(reference, enc_cfg, pu_task.support);

  Graph g;
  const std::vector<Var> lifted = params.lift(g);
  const perception::AtVars at_rgb = perception::at_vars(params, lifted, "at.rgb.");
  const perception::AtVars at_depth =
      perception::at_vars(params, lifted, "at.depth.");
  // One fresh noise sample per pseudo-seen frame; draw order is all RGB
  // frames, then all depth frames.
  std::vector<AtSample> rgb_samples, depth_samples;
  for (std::size_t i = 0; i < ps_task.support.size(); ++i) {
    rgb_samples.push_back(perception::sample_at(g, at_rgb, rng));
  }
  for (std::size_t i = 0; i < ps_task.support.size(); ++i) {
    depth_samples.push_back(perception::sample_at(g, at_depth, rng));
  }

  // Step 2: one gradient step of each head on the pseudo-seen loss with AT
  // active, kept differentiable so step 3 can reach the AT hyperparameters.
  std::vector<double> rgb_losses, depth_losses;
  std::vector<Var> adapted =
      adapt_head(g, params, lifted, enc_cfg, Channel::kRgb, "rgb.",
                 ps_task.support, ps_targets, rgb_samples, cfg.eta, 1,
                 /*create_graph=*/true, &rgb_losses);
  adapted = adapt_head(g, params, adapted, enc_cfg, Channel::kDepth, "depth.",
                       ps_task.support, ps_targets, depth_samples, cfg.zeta, 1,
                       /*create_graph=*/true, &depth_losses);
  trace.ps_rgb_loss = rgb_losses.front();
  trace.ps_depth_loss = depth_losses.front();

  // Step 3: pseudo-unseen losses on the updated encoders with AT removed.
  const std::span<const AtSample> no_at;
  trace.pseudo_unseen_used_at = !no_at.empty();
  const EncoderVars enc_rgb = perception::encoder_vars(params, adapted, "rgb.");
  const EncoderVars enc_depth =
      perception::encoder_vars(params, adapted, "depth.");
  const Var pu_rgb = feature_match_loss(g, enc_cfg, enc_rgb, Channel::kRgb,
                                        pu_task.support, pu_targets, no_at);
  const Var pu_depth = feature_match_loss(g, enc_cfg, enc_depth,
                                          Channel::kDepth, pu_task.support,
                                          pu_targets, no_at);
  trace.pu_rgb_loss = pu_rgb.item();
  trace.pu_depth_loss = pu_depth.item();
  if (!std::isfinite(trace.pu_rgb_loss) || !std::isfinite(trace.pu_depth_loss)) {
    throw std::runtime_error("at_train_iteration: non-finite pseudo-unseen loss");
  }

  const Var pu_total = g.add(pu_rgb, pu_depth);
  const std::vector<std::size_t> at_rgb_idx =
      params.indices_with_prefix("at.rgb.");
  const std::vector<std::size_t> at_depth_idx =
      params.indices_with_prefix("at.depth.");
  std::vector<Var> wrt;
  for (std::size_t i : at_rgb_idx) wrt.push_back(lifted[i]);
  for (std::size_t i : at_depth_idx) wrt.push_back(lifted[i]);
  const std::vector<Var> at_grads =
      g.backward(pu_total, wrt, /*create_graph=*/false);

  double rgb_sq = 0.0, depth_sq = 0.0;
  for (std::size_t i = 0; i < wrt.size(); ++i) {
    const Tensor& gt = at_grads[i].tensor();
    if (!gt.all_finite()) {
      throw std::runtime_error("at_train_iteration: non-finite AT gradient");
    }
    double sq = 0.0;
    for (std::int64_t j = 0; j < gt.numel(); ++j) sq += gt[j] * gt[j];
    (i < at_rgb_idx.size() ? rgb_sq : depth_sq) += sq;
  }
  trace.at_rgb_grad_norm = std::sqrt(rgb_sq);
  trace.at_depth_grad_norm = std::sqrt(depth_sq);

  // Commit: encoders keep their step-2 values; AT hyperparameters take a
  // plain gradient step at the head's rate.
  for (std::size_t i : params.indices_with_prefix("rgb.")) {
    params.at(i) = adapted[i].tensor();
  }
  for (std::size_t i : params.indices_with_prefix("depth.")) {
    params.at(i) = adapted[i].tensor();
  }
  for (std::size_t i = 0; i < wrt.size(); ++i) {
    const bool is_rgb = i < at_rgb_idx.size();
    const std::size_t pi =
        is_rgb ? at_rgb_idx[i] : at_depth_idx[i - at_rgb_idx.size()];
    const double rate = is_rgb ? cfg.eta : cfg.zeta;
    Tensor& theta = params.at(pi);
    const Tensor& gt = at_grads[i].tensor();
    for (std::int64_t j = 0; j < theta.numel(); ++j) theta[j] -= rate * gt[j];
  }
  return trace;
}

void at_train(ParamSet& params, const ParamSet& reference,
              const EncoderConfig& enc_cfg, const DomainSet& domains,
              const AtTrainConfig& cfg, Rng& rng,
              const std::string& log_path) {
  validate(domains);
  validate(cfg);
  for (int it = 0; it < cfg.iterations; ++it) {
    const auto t0 = std::chrono::steady_clock::now();
    const AtIterationTrace trace =
        at_train_iteration(params, reference, enc_cfg, domains, cfg, rng);
    append_json_line(log_path,
                     {{"iteration", it},
                      {"l_ps_rgb", trace.ps_rgb_loss},
                      {"l_ps_depth", trace.ps_depth_loss},
                      {"l_pu_rgb", trace.pu_rgb_loss},
                      {"l_pu_depth", trace.pu_depth_loss},
                      {"at_rgb_grad_norm", trace.at_rgb_grad_norm},
                      {"at_depth_grad_norm", trace.at_depth_grad_norm},
                      {"wall_ms", elapsed_ms(t0)}});
  }
}

// ---------------------------------------------------------------------------
// Test-time adaptation

AdaptTrace few_shot_adapt(ParamSet& params, const ParamSet& reference,
                          const EncoderConfig& enc_cfg,
                          std::span<const episodes::PairedFrame> frames,
                          double alpha, double beta, int steps) {
  if (frames.empty()) {
    throw std::invalid_argument("few_shot_adapt: empty frame set");
  }
  const std::vector<FrameTargets> targets =
      reference_targets(reference, enc_cfg, frames);
  Graph g;
  const std::vector<Var> lifted = params.lift(g);
  AdaptTrace trace;
  std::vector<Var> full = adapt_head(
      g, params, lifted, enc_cfg, Channel::kRgb, "rgb.", frames, targets, {},
      alpha, steps, /*create_graph=*/false, &trace.rgb_losses);
  full = adapt_head(g, params, full, enc_cfg, Channel::kDepth, "depth.",
                    frames, targets, {}, beta, steps, /*create_graph=*/false,
                    &trace.depth_losses);
  for (std::size_t i : params.indices_with_prefix("rgb.")) {
    params.at(i) = full[i].tensor();
  }
  for (std::size_t i : params.indices_with_prefix("depth.")) {
    params.at(i) = full[i].tensor();
  }
  return trace;
}

}  // namespace metacam::meta
