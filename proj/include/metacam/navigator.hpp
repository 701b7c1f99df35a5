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
// Navigation policies: a sequence-to-sequence GRU navigator and a
// cross-modal-attention (CMA) navigator, their instruction encoders, greedy
// closed-loop rollouts, and imitation pretraining with a decaying
// oracle-mixture (DAgger) schedule. Policies consume the perception
// module's feature vectors and emit logits over the four world actions,
// indexed by the world::Action enum (Stop, Forward, TurnLeft, TurnRight).

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "metacam/diff/graph.hpp"
#include "metacam/diff/param_set.hpp"
#include "metacam/episodes.hpp"
#include "metacam/perception.hpp"
#include "metacam/world.hpp"

namespace metacam {
class Rng;
}

namespace metacam::navigator {

using diff::Graph;
using diff::ParamSet;
using diff::Tensor;
using diff::Var;

enum class Kind { kSeq2seq, kCma };

/// Checkpoint prefix for a navigator's parameters.
std::string param_prefix(Kind kind);  // "nav.seq2seq." / "nav.cma."

struct NavigatorConfig {
  Kind kind = Kind::kSeq2seq;
  int vocab = 64;
  int embed_dim = 32;        // token embedding width
  int instr_hidden = 64;     // instruction LSTM hidden (per direction for CMA)
  int state_hidden = 128;    // observation/action GRU hidden
  int action_embed_dim = 16; // previous-action embedding width (CMA)
  int feature_dim = 64;      // perception feature width D
  int actions = 4;
};

/// Adds every tensor of the configured navigator to `params` under
/// param_prefix(cfg.kind). Weight matrices are Glorot-uniform; biases zero.
void init_navigator_params(ParamSet& params, const NavigatorConfig& cfg,
                           Rng& rng);

/// Name-indexed access to lifted parameters (lifted must parallel the
/// params iteration order).
class VarLookup {
 public:
  VarLookup(const ParamSet& params, std::span<const Var> lifted);
  Var operator()(std::string_view name) const;  // throws std::out_of_range

 private:
  std::unordered_map<std::string, Var> map_;
};

/// One LSTM step (gates i, f, g, o; peephole-free). Parameters live under
/// `prefix` as {wi, ui, bi, wf, uf, bf, wg, ug, bg, wo, uo, bo}.
struct LstmState {
  Var h, c;
};
LstmState lstm_step(Graph& g, const VarLookup& p, const std::string& prefix,
                    Var x, LstmState s);

/// One GRU step (update z, reset r, candidate n; h' = (1-z)*n + z*h).
/// Parameters live under `prefix` as {wz, uz, bz, wr, ur, br, wn, un, bn}.
Var gru_step(Graph& g, const VarLookup& p, const std::string& prefix, Var x,
             Var h);

/// Embedding-table row `id` as a column vector [E, 1].
Var embed_lookup(Graph& g, Var table, std::int64_t id);

/// Final hidden state of the instruction LSTM, shaped [instr_hidden, 1].
Var encode_instruction_seq2seq(Graph& g, const VarLookup& p,
                               const NavigatorConfig& cfg,
                               std::span<const std::int32_t> tokens);

/// Per-token concatenated forward/backward LSTM states, shaped
/// [L, 2 * instr_hidden].
Var encode_instruction_cma(Graph& g, const VarLookup& p,
                           const NavigatorConfig& cfg,
                           std::span<const std::int32_t> tokens);

/// Scaled dot-product attention. `query` is [d_k, 1], `keys` [N, d_k],
/// `values` [N, d_v]; weights = softmax(keys . query / sqrt(d_k)); returns
/// weights^T . values as [d_v, 1]. With N = 1 the weight is exactly 1 and
/// the context equals the value bitwise.
Var attention(Graph& g, Var query, Var keys, Var values);

/// One seq2seq decision: h' = GRU([rgb, depth, omega], h); logits =
/// head.w h' + head.b, shaped [actions, 1] indexed by world::Action.
struct Seq2seqStep {
  Var h, logits;
};
Seq2seqStep seq2seq_step(Graph& g, const VarLookup& p,
                         const NavigatorConfig& cfg, Var rgb_feat,
                         Var depth_feat, Var omega, Var h_prev);

/// One CMA decision: the observation GRU tracks [rgb, depth, prev-action
/// embedding]; attention pools the instruction rows against it; visual
/// attention re-weights the (single-slot) features; the action GRU consumes
/// all of it and feeds the head.
struct CmaStep {
  Var h_obs, h_act, logits;
};
CmaStep cma_step(Graph& g, const VarLookup& p, const NavigatorConfig& cfg,
                 Var rgb_feat, Var depth_feat, Var omega_rows,
                 std::int64_t prev_action, Var h_obs_prev, Var h_act_prev);

/// Greedy action choice: maximum logit, first index on ties (so the
/// tie-break order matches the oracle's Stop < Forward < TurnLeft <
/// TurnRight).
world::Action argmax_action(const Tensor& logits);

/// Closed-loop execution record. `states` has one more entry than
/// `actions`; actions[i] was taken in states[i]. `stopped` is true iff the
/// policy emitted Stop (rather than exhausting the step limit).
struct Trajectory {
  std::vector<world::AgentState> states;
  std::vector<world::Action> actions;
  bool stopped = false;
};

/// Greedy rollout of the configured navigator from the episode start.
/// Deterministic given (params, episode, cam). `params` must hold the
/// navigator under its prefix and encoders under "rgb." / "depth.".
Trajectory rollout(const ParamSet& params, const NavigatorConfig& nav_cfg,
                   const perception::EncoderConfig& enc_cfg,
                   const world::WorldSpec& w, const episodes::Episode& ep,
                   const world::CameraConfig& cam, int step_limit = 200);

struct PretrainConfig {
  int rounds = 4;         // oracle-mixture data-collection rounds
  int epochs = 30;        // total optimization epochs, spread over rounds
  int step_limit = 200;
  double lr = 2e-4;
  std::uint64_t seed = 0;
  std::string log_path;   // JSON training log (empty = no log)
};

struct PretrainResult {
  std::vector<double> teacher_probs;  // per round
  std::vector<double> epoch_losses;   // mean per-step cross-entropy
  std::int64_t trajectories = 0;      // aggregated demonstration count
};

/// DAgger-style imitation pretraining at the reference camera: round n
/// collects rollouts that execute the oracle action with probability
/// 0.75^n (seq2seq) or 0.75^(n+1) (CMA) and the current policy otherwise,
/// labels every visited state with the oracle action, and Adam-trains the
/// navigator and both encoders on the aggregate by stepwise cross-entropy.
/// Throws std::runtime_error with diagnostics if the loss turns non-finite.
PretrainResult pretrain(ParamSet& params, const NavigatorConfig& nav_cfg,
                        const perception::EncoderConfig& enc_cfg,
                        const episodes::Dataset& ds,
                        const world::CameraConfig& cam,
                        const PretrainConfig& cfg);

}  // namespace metacam::navigator
