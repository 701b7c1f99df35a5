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

#include "metacam/navigator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <memory>
#include <stdexcept>

#include <json.hpp>

#include "metacam/rng.hpp"

namespace metacam::navigator {

using world::Action;
using world::AgentState;
using world::CameraConfig;
using world::WorldSpec;

namespace {

Tensor glorot(Rng& rng, std::int64_t rows, std::int64_t cols) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Tensor t = Tensor::zeros({rows, cols});
  for (auto& v : t.values()) v = rng.uniform(-limit, limit);
  return t;
}

void add_gru(ParamSet& params, const std::string& prefix, int in_dim,
             int hidden, Rng& rng) {
  for (const char* gate : {"z", "r", "n"}) {
    params.add(prefix + "w" + gate, glorot(rng, hidden, in_dim));
    params.add(prefix + "u" + gate, glorot(rng, hidden, hidden));
    params.add(prefix + "b" + gate, Tensor::zeros({hidden, 1}));
  }
}

void add_lstm(ParamSet& params, const std::string& prefix, int in_dim,
              int hidden, Rng& rng) {
  for (const char* gate : {"i", "f", "g", "o"}) {
    params.add(prefix + "w" + gate, glorot(rng, hidden, in_dim));
    params.add(prefix + "u" + gate, glorot(rng, hidden, hidden));
    params.add(prefix + "b" + gate, Tensor::zeros({hidden, 1}));
  }
}

/// Column-vector view of a rank-1 or [d, 1] feature node.
Var as_column(Graph& g, Var v) {
  const diff::Shape& s = v.tensor().shape();
  if (s.size() == 1) return g.reshape(v, {s[0], 1});
  return v;
}

Var affine(Graph& g, const VarLookup& p, const std::string& prefix,
           const std::string& gate, Var x, Var h) {
  return g.add(g.add(g.matmul(p(prefix + "w" + gate), x),
                     g.matmul(p(prefix + "u" + gate), h)),
               p(prefix + "b" + gate));
}

void check_tokens(const NavigatorConfig& cfg,
                  std::span<const std::int32_t> tokens) {
  if (tokens.empty()) {
    throw std::invalid_argument("instruction must contain at least one token");
  }
  for (std::int32_t t : tokens) {
    if (t < 0 || t >= cfg.vocab) {
      throw std::out_of_range("token id " + std::to_string(t) +
                              " outside vocabulary of " +
                              std::to_string(cfg.vocab));
    }
  }
}

}  // namespace

std::string param_prefix(Kind kind) {
  return kind == Kind::kSeq2seq ? "nav.seq2seq." : "nav.cma.";
}

void init_navigator_params(ParamSet& params, const NavigatorConfig& cfg,
                           Rng& rng) {
  const std::string p = param_prefix(cfg.kind);
  params.add(p + "embed", glorot(rng, cfg.vocab, cfg.embed_dim));
  if (cfg.kind == Kind::kSeq2seq) {
    add_lstm(params, p + "instr.", cfg.embed_dim, cfg.instr_hidden, rng);
    const int gru_in = 2 * cfg.feature_dim + cfg.instr_hidden;
    add_gru(params, p + "act.", gru_in, cfg.state_hidden, rng);
  } else {
    add_lstm(params, p + "instr_f.", cfg.embed_dim, cfg.instr_hidden, rng);
    add_lstm(params, p + "instr_b.", cfg.embed_dim, cfg.instr_hidden, rng);
    params.add(p + "aembed", glorot(rng, cfg.actions, cfg.action_embed_dim));
    const int obs_in = 2 * cfg.feature_dim + cfg.action_embed_dim;
    add_gru(params, p + "obs.", obs_in, cfg.state_hidden, rng);
    const int omega_dim = 2 * cfg.instr_hidden;
    params.add(p + "att_instr.wq", glorot(rng, omega_dim, cfg.state_hidden));
    params.add(p + "att_rgb.wq", glorot(rng, cfg.feature_dim, omega_dim));
    params.add(p + "att_depth.wq", glorot(rng, cfg.feature_dim, omega_dim));
    const int act_in = omega_dim + 2 * cfg.feature_dim + cfg.action_embed_dim +
                       cfg.state_hidden;
    add_gru(params, p + "act.", act_in, cfg.state_hidden, rng);
  }
  params.add(p + "head.w", glorot(rng, cfg.actions, cfg.state_hidden));
  params.add(p + "head.b", Tensor::zeros({cfg.actions, 1}));
}

VarLookup::VarLookup(const ParamSet& params, std::span<const Var> lifted) {
  if (lifted.size() != params.size()) {
    throw std::invalid_argument("lifted parameter list has " +
                                std::to_string(lifted.size()) + " entries for " +
                                std::to_string(params.size()) + " parameters");
  }
  const auto& names = params.names();
  for (std::size_t i = 0; i < names.size(); ++i) map_.emplace(names[i], lifted[i]);
}

Var VarLookup::operator()(std::string_view name) const {
  const auto it = map_.find(std::string(name));
  if (it == map_.end()) {
    throw std::out_of_range("parameter '" + std::string(name) + "' not found");
  }
  return it->second;
}

LstmState lstm_step(Graph& g, const VarLookup& p, const std::string& prefix,
                    Var x, LstmState s) {
  Var i = g.sigmoid(affine(g, p, prefix, "i", x, s.h));
  Var f = g.sigmoid(affine(g, p, prefix, "f", x, s.h));
  Var cand = g.tanh(affine(g, p, prefix, "g", x, s.h));
  Var o = g.sigmoid(affine(g, p, prefix, "o", x, s.h));
  Var c = g.add(g.mul(f, s.c), g.mul(i, cand));
  return LstmState{g.mul(o, g.tanh(c)), c};
}

Var gru_step(Graph& g, const VarLookup& p, const std::string& prefix, Var x,
             Var h) {
  Var z = g.sigmoid(affine(g, p, prefix, "z", x, h));
  Var r = g.sigmoid(affine(g, p, prefix, "r", x, h));
  Var n = g.tanh(g.add(g.add(g.matmul(p(prefix + "wn"), x),
                             g.matmul(p(prefix + "un"), g.mul(r, h))),
                       p(prefix + "bn")));
  Var one = g.input(Tensor::full(z.tensor().shape(), 1.0));
  return g.add(g.mul(g.sub(one, z), n), g.mul(z, h));
}

Var embed_lookup(Graph& g, Var table, std::int64_t id) {
  return g.transpose(g.slice(table, 0, id, 1));
}

Var encode_instruction_seq2seq(Graph& g, const VarLookup& p,
                               const NavigatorConfig& cfg,
                               std::span<const std::int32_t> tokens) {
  check_tokens(cfg, tokens);
  const std::string prefix = param_prefix(cfg.kind) + "instr.";
  Var table = p(param_prefix(cfg.kind) + "embed");
  LstmState s{g.input(Tensor::zeros({cfg.instr_hidden, 1})),
              g.input(Tensor::zeros({cfg.instr_hidden, 1}))};
  for (std::int32_t t : tokens) {
    s = lstm_step(g, p, prefix, embed_lookup(g, table, t), s);
  }
  return s.h;
}

Var encode_instruction_cma(Graph& g, const VarLookup& p,
                           const NavigatorConfig& cfg,
                           std::span<const std::int32_t> tokens) {
  check_tokens(cfg, tokens);
  const std::string base = param_prefix(cfg.kind);
  Var table = p(base + "embed");
  const std::size_t n = tokens.size();

  std::vector<Var> fwd, bwd(n, Var{});
  LstmState s{g.input(Tensor::zeros({cfg.instr_hidden, 1})),
              g.input(Tensor::zeros({cfg.instr_hidden, 1}))};
  for (std::size_t t = 0; t < n; ++t) {
    s = lstm_step(g, p, base + "instr_f.", embed_lookup(g, table, tokens[t]), s);
    fwd.push_back(s.h);
  }
  s = LstmState{g.input(Tensor::zeros({cfg.instr_hidden, 1})),
                g.input(Tensor::zeros({cfg.instr_hidden, 1}))};
  for (std::size_t t = n; t-- > 0;) {
    s = lstm_step(g, p, base + "instr_b.", embed_lookup(g, table, tokens[t]), s);
    bwd[t] = s.h;
  }

  std::vector<Var> rows;
  rows.reserve(n);
  for (std::size_t t = 0; t < n; ++t) {
    rows.push_back(g.transpose(g.concat({fwd[t], bwd[t]}, 0)));
  }
  return g.concat(rows, 0);
}

Var attention(Graph& g, Var query, Var keys, Var values) {
  const diff::Shape& ks = keys.tensor().shape();
  if (ks.size() != 2 || ks[0] < 1) {
    throw std::invalid_argument("attention requires at least one key, got " +
                                diff::shape_str(ks));
  }
  const std::int64_t n = ks[0], dk = ks[1];
  Var scores = g.scale(g.matmul(keys, query), 1.0 / std::sqrt(static_cast<double>(dk)));
  Var weights = g.softmax(g.reshape(scores, {n}));
  return g.transpose(g.matmul(g.reshape(weights, {1, n}), values));
}

Seq2seqStep seq2seq_step(Graph& g, const VarLookup& p,
                         const NavigatorConfig& /*cfg*/, Var rgb_feat,
                         Var depth_feat, Var omega, Var h_prev) {
  const std::string base = param_prefix(Kind::kSeq2seq);
  Var x = g.concat({as_column(g, rgb_feat), as_column(g, depth_feat), omega}, 0);
  Var h = gru_step(g, p, base + "act.", x, h_prev);
  Var logits = g.add(g.matmul(p(base + "head.w"), h), p(base + "head.b"));
  return Seq2seqStep{h, logits};
}

CmaStep cma_step(Graph& g, const VarLookup& p, const NavigatorConfig& /*cfg*/,
                 Var rgb_feat, Var depth_feat, Var omega_rows,
                 std::int64_t prev_action, Var h_obs_prev, Var h_act_prev) {
  const std::string base = param_prefix(Kind::kCma);
  Var rgb = as_column(g, rgb_feat);
  Var depth = as_column(g, depth_feat);
  Var aemb = embed_lookup(g, p(base + "aembed"), prev_action);

  Var h_obs = gru_step(g, p, base + "obs.",
                       g.concat({rgb, depth, aemb}, 0), h_obs_prev);

  Var omega_hat = attention(g, g.matmul(p(base + "att_instr.wq"), h_obs),
                            omega_rows, omega_rows);
  Var rgb_hat = attention(g, g.matmul(p(base + "att_rgb.wq"), omega_hat),
                          g.transpose(rgb), g.transpose(rgb));
  Var depth_hat = attention(g, g.matmul(p(base + "att_depth.wq"), omega_hat),
                            g.transpose(depth), g.transpose(depth));

  Var h_act = gru_step(g, p, base + "act.",
                       g.concat({omega_hat, rgb_hat, depth_hat, aemb, h_obs}, 0),
                       h_act_prev);
  Var logits = g.add(g.matmul(p(base + "head.w"), h_act), p(base + "head.b"));
  return CmaStep{h_obs, h_act, logits};
}

world::Action argmax_action(const Tensor& logits) {
  std::int64_t best = 0;
  for (std::int64_t i = 1; i < logits.numel(); ++i) {
    if (logits[i] > logits[best]) best = i;
  }
  return static_cast<world::Action>(best);
}

namespace {

/// Policy state threaded through a closed-loop run (one graph per run).
struct PolicyRun {
  Graph g;
  std::vector<Var> lifted;
  std::unique_ptr<VarLookup> lookup;
  perception::EncoderVars rgb_enc, depth_enc;
  Var instruction;  // omega [H,1] (seq2seq) or Omega rows [L,2H] (CMA)
  Var h_obs, h_act;
  std::int64_t prev_action = static_cast<std::int64_t>(Action::Stop);
};

std::unique_ptr<PolicyRun> start_run(const ParamSet& params,
                                     const NavigatorConfig& nav_cfg,
                                     std::span<const std::int32_t> tokens) {
  auto run = std::make_unique<PolicyRun>();
  run->lifted = params.lift(run->g);
  run->lookup = std::make_unique<VarLookup>(params, run->lifted);
  run->rgb_enc = perception::encoder_vars(params, run->lifted, "rgb.");
  run->depth_enc = perception::encoder_vars(params, run->lifted, "depth.");
  if (nav_cfg.kind == Kind::kSeq2seq) {
    run->instruction = encode_instruction_seq2seq(run->g, *run->lookup, nav_cfg, tokens);
  } else {
    run->instruction = encode_instruction_cma(run->g, *run->lookup, nav_cfg, tokens);
    run->h_obs = run->g.input(Tensor::zeros({nav_cfg.state_hidden, 1}));
  }
  run->h_act = run->g.input(Tensor::zeros({nav_cfg.state_hidden, 1}));
  return run;
}

world::Action policy_action(PolicyRun& run, const NavigatorConfig& nav_cfg,
                            const perception::EncoderConfig& enc_cfg,
                            const world::Observation& obs) {
  Graph& g = run.g;
  Var rgb = perception::encode(g, enc_cfg, run.rgb_enc,
                               g.input(perception::rgb_tensor(obs)));
  Var depth = perception::encode(g, enc_cfg, run.depth_enc,
                                 g.input(perception::depth_tensor(obs)));
  if (nav_cfg.kind == Kind::kSeq2seq) {
    const Seq2seqStep out = seq2seq_step(g, *run.lookup, nav_cfg, rgb, depth,
                                         run.instruction, run.h_act);
    run.h_act = out.h;
    return argmax_action(out.logits.tensor());
  }
  const CmaStep out = cma_step(g, *run.lookup, nav_cfg, rgb, depth,
                               run.instruction, run.prev_action, run.h_obs,
                               run.h_act);
  run.h_obs = out.h_obs;
  run.h_act = out.h_act;
  return argmax_action(out.logits.tensor());
}

/// One recorded step of a demonstration: where the agent was, what the
/// oracle said to do there, and which action had been executed before.
struct StepRecord {
  AgentState state;
  world::Action label;
  world::Action prev;
};

struct Demonstration {
  const WorldSpec* world = nullptr;
  std::vector<std::int32_t> tokens;
  std::vector<StepRecord> steps;
};

/// Mixture rollout for data collection: executes the oracle action with
/// probability `teacher_prob`, the greedy policy otherwise, and labels every
/// visited state with the oracle action.
Demonstration collect_demonstration(const ParamSet& params,
                                    const NavigatorConfig& nav_cfg,
                                    const perception::EncoderConfig& enc_cfg,
                                    const WorldSpec& w,
                                    const episodes::Episode& ep,
                                    const CameraConfig& cam,
                                    double teacher_prob, int step_limit,
                                    Rng& rng) {
  Demonstration demo;
  demo.world = &w;
  demo.tokens = ep.tokens;
  world::OraclePlanner planner(w, ep.goal_x, ep.goal_y);
  auto run = start_run(params, nav_cfg, ep.tokens);
  AgentState state = ep.start;
  world::Action prev = Action::Stop;
  for (int t = 0; t < step_limit; ++t) {
    const world::Observation obs = world::raycast(w, state, cam);
    const world::Action label = planner.action_at(state);
    const world::Action from_policy = policy_action(*run, nav_cfg, enc_cfg, obs);
    const world::Action executed =
        rng.uniform() < teacher_prob ? label : from_policy;
    demo.steps.push_back(StepRecord{state, label, prev});
    run->prev_action = static_cast<std::int64_t>(executed);
    prev = executed;
    if (executed == Action::Stop) break;
    state = world::step(w, state, executed);
  }
  return demo;
}

/// Mean stepwise cross-entropy of the policy against a demonstration's
/// oracle labels, built on `g` with `lifted` parameters.
Var demonstration_loss(Graph& g, const ParamSet& params,
                       std::span<const Var> lifted,
                       const NavigatorConfig& nav_cfg,
                       const perception::EncoderConfig& enc_cfg,
                       const Demonstration& demo, const CameraConfig& cam) {
  const VarLookup p(params, lifted);
  const perception::EncoderVars rgb_enc =
      perception::encoder_vars(params, lifted, "rgb.");
  const perception::EncoderVars depth_enc =
      perception::encoder_vars(params, lifted, "depth.");

  Var instruction = nav_cfg.kind == Kind::kSeq2seq
                        ? encode_instruction_seq2seq(g, p, nav_cfg, demo.tokens)
                        : encode_instruction_cma(g, p, nav_cfg, demo.tokens);
  Var h_obs = g.input(Tensor::zeros({nav_cfg.state_hidden, 1}));
  Var h_act = g.input(Tensor::zeros({nav_cfg.state_hidden, 1}));

  Var total = g.scalar(0.0);
  for (const StepRecord& rec : demo.steps) {
    const world::Observation obs = world::raycast(*demo.world, rec.state, cam);
    Var rgb = perception::encode(g, enc_cfg, rgb_enc,
                                 g.input(perception::rgb_tensor(obs)));
    Var depth = perception::encode(g, enc_cfg, depth_enc,
                                   g.input(perception::depth_tensor(obs)));
    Var logits;
    if (nav_cfg.kind == Kind::kSeq2seq) {
      const Seq2seqStep out =
          seq2seq_step(g, p, nav_cfg, rgb, depth, instruction, h_act);
      h_act = out.h;
      logits = out.logits;
    } else {
      const CmaStep out =
          cma_step(g, p, nav_cfg, rgb, depth, instruction,
                   static_cast<std::int64_t>(rec.prev), h_obs, h_act);
      h_obs = out.h_obs;
      h_act = out.h_act;
      logits = out.logits;
    }
    Var flat = g.reshape(logits, {nav_cfg.actions});
    Var picked = g.sum(g.slice(flat, 0, static_cast<std::int64_t>(rec.label), 1));
    total = g.add(total, g.sub(g.logsumexp(flat), picked));
  }
  return g.scale(total, 1.0 / static_cast<double>(demo.steps.size()));
}

}  // namespace

Trajectory rollout(const ParamSet& params, const NavigatorConfig& nav_cfg,
                   const perception::EncoderConfig& enc_cfg,
                   const world::WorldSpec& w, const episodes::Episode& ep,
                   const world::CameraConfig& cam, int step_limit) {
  Trajectory traj;
  traj.states.push_back(ep.start);
  auto run = start_run(params, nav_cfg, ep.tokens);
  AgentState state = ep.start;
  for (int t = 0; t < step_limit; ++t) {
    const world::Observation obs = world::raycast(w, state, cam);
    const world::Action a = policy_action(*run, nav_cfg, enc_cfg, obs);
    run->prev_action = static_cast<std::int64_t>(a);
    traj.actions.push_back(a);
    if (a == Action::Stop) {
      traj.states.push_back(state);
      traj.stopped = true;
      break;
    }
    state = world::step(w, state, a);
    traj.states.push_back(state);
  }
  return traj;
}

PretrainResult pretrain(ParamSet& params, const NavigatorConfig& nav_cfg,
                        const perception::EncoderConfig& enc_cfg,
                        const episodes::Dataset& ds,
                        const world::CameraConfig& cam,
                        const PretrainConfig& cfg) {
  const std::vector<std::size_t> train = ds.split_indices("train");
  if (train.empty()) {
    throw std::invalid_argument("pretraining requires a nonempty train split");
  }
  Rng root(cfg.seed);
  PretrainResult result;
  std::vector<Demonstration> aggregate;
  nlohmann::json log;
  log["epochs"] = nlohmann::json::array();

  int epoch_index = 0;
  for (int round = 0; round < cfg.rounds; ++round) {
    const int exponent = round + (nav_cfg.kind == Kind::kCma ? 1 : 0);
    const double teacher_prob = std::pow(0.75, exponent);
    result.teacher_probs.push_back(teacher_prob);

    Rng collect_rng = root.fork(100 + static_cast<std::uint64_t>(round));
    for (std::size_t idx : train) {
      const episodes::Episode& ep = ds.episodes[idx];
      aggregate.push_back(collect_demonstration(
          params, nav_cfg, enc_cfg, ds.worlds[static_cast<std::size_t>(ep.world_id)],
          ep, cam, teacher_prob, cfg.step_limit, collect_rng));
    }

    const int base = cfg.epochs / cfg.rounds;
    const int round_epochs = base + (round < cfg.epochs % cfg.rounds ? 1 : 0);
    for (int e = 0; e < round_epochs; ++e, ++epoch_index) {
      Rng shuffle_rng = root.fork(1000 + static_cast<std::uint64_t>(epoch_index));
      std::vector<std::size_t> order(aggregate.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      for (std::size_t i = order.size(); i > 1; --i) {
        std::swap(order[i - 1], order[shuffle_rng.uniform_index(i)]);
      }

      double loss_sum = 0.0;
      for (std::size_t i : order) {
        Graph g;
        const std::vector<Var> lifted = params.lift(g);
        Var loss = demonstration_loss(g, params, lifted, nav_cfg, enc_cfg,
                                      aggregate[i], cam);
        const double loss_value = loss.item();
        if (!std::isfinite(loss_value)) {
          throw std::runtime_error(
              "pretraining diverged: non-finite loss in round " +
              std::to_string(round) + ", epoch " + std::to_string(epoch_index) +
              ", demonstration " + std::to_string(i));
        }
        const std::vector<Var> grads = g.backward(loss, lifted);
        std::vector<Tensor> grad_values;
        grad_values.reserve(grads.size());
        for (const Var& gv : grads) grad_values.push_back(gv.tensor());
        if (!diff::adam_step(params, grad_values, cfg.lr)) {
          throw std::runtime_error(
              "pretraining diverged: non-finite gradient in round " +
              std::to_string(round) + ", epoch " + std::to_string(epoch_index) +
              ", demonstration " + std::to_string(i));
        }
        loss_sum += loss_value;
      }
      const double mean_loss = loss_sum / static_cast<double>(aggregate.size());
      result.epoch_losses.push_back(mean_loss);
      log["epochs"].push_back({{"epoch", epoch_index},
                               {"round", round},
                               {"teacher_prob", teacher_prob},
                               {"loss", mean_loss}});
    }
  }
  result.trajectories = static_cast<std::int64_t>(aggregate.size());
  log["teacher_probs"] = result.teacher_probs;
  log["trajectories"] = result.trajectories;
  if (!cfg.log_path.empty()) {
    std::ofstream out(cfg.log_path);
    if (!out) {
      throw std::runtime_error("cannot write training log to " + cfg.log_path);
    }
    out << log.dump(2) << "\n";
  }
  return result;
}

}  // namespace metacam::navigator
