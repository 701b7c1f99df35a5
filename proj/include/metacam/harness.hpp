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
// Evaluation metrics (TL, NE, OR, SR, SPL), experiment orchestration for
// the three methods (frozen baseline, few-shot meta-learning, affine
// transformation), JSON run configuration, report writing, and the
// command-line interface. A run is a pure function of its RunConfig:
// reports and checkpoints are byte-identical across reruns.

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "metacam/diff/param_set.hpp"
#include "metacam/episodes.hpp"
#include "metacam/meta.hpp"
#include "metacam/navigator.hpp"
#include "metacam/perception.hpp"
#include "metacam/world.hpp"

namespace metacam::harness {

using diff::ParamSet;

// ---------------------------------------------------------------------------
// Metrics

/// Per-episode navigation metrics.
///   tl  - trajectory length: sum of consecutive position distances.
///   ne  - navigation error: distance from the final position to the goal.
///   oracle_success (OR) - some trajectory point came within the threshold.
///   success (SR) - the agent *stopped* within the threshold; running out
///                  of steps near the goal does not count.
///   spl - SR weighted by path efficiency: SR * l / max(tl, l) with l the
///         reference length (tl = 0 on a success degenerates to SPL = SR).
struct EpisodeMetrics {
  std::int32_t episode_id = 0;
  double tl = 0.0;
  double ne = 0.0;
  bool oracle_success = false;
  bool success = false;
  double spl = 0.0;
};

/// Throws std::invalid_argument on an empty trajectory.
EpisodeMetrics compute_metrics(const navigator::Trajectory& traj,
                               const episodes::Episode& ep, double threshold);

/// Episode rows (ordered by episode id) plus their means.
struct MetricsRecord {
  std::vector<EpisodeMetrics> rows;
  double tl = 0.0;
  double ne = 0.0;
  double oracle_rate = 0.0;
  double success_rate = 0.0;
  double spl = 0.0;
};

/// Sorts rows by episode id and fills in the means.
MetricsRecord aggregate(std::vector<EpisodeMetrics> rows);

/// Greedy-rollout evaluation of every episode in `split` under `cam`.
/// Throws std::invalid_argument if the split is empty or an episode
/// references a world the dataset does not carry.
MetricsRecord evaluate(const ParamSet& params,
                       const navigator::NavigatorConfig& nav_cfg,
                       const perception::EncoderConfig& enc_cfg,
                       const episodes::Dataset& ds, std::string_view split,
                       const world::CameraConfig& cam, double threshold,
                       int step_limit = 200);

/// Ground truth for the metric pipeline: replays the oracle planner as the
/// policy. Scores SR = SPL = 1 and TL equal to the reference length by
/// construction.
MetricsRecord evaluate_oracle(const episodes::Dataset& ds,
                              std::string_view split, double threshold);

// ---------------------------------------------------------------------------
// Run configuration

enum class Method { kBaseline, kMaml, kAt };
const char* method_name(Method m);

/// Synthetic-benchmark generation parameters (the gen-data stage).
struct DataConfig {
  std::uint64_t seed = 2026;
  int train_episodes = 200;
  int val_seen_episodes = 50;
  int val_unseen_episodes = 50;
  int train_worlds = 20;
  int unseen_worlds = 5;
  int world_size = 16;
};

/// Everything a run depends on. Loaded from a single JSON document and
/// validated against the shipped schema; errors name the offending key
/// (e.g. "test_cam.height").
struct RunConfig {
  navigator::NavigatorConfig nav;  // vocab/feature_dim filled during load
  Method method = Method::kBaseline;
  std::uint64_t seed = 2026;
  double success_threshold = 3.0;
  int step_limit = 200;
  std::string out_dir;

  std::string dataset_path;
  std::string reference_checkpoint;  // pretrained navigator + encoders
  std::string checkpoint_in;         // stage input model ("" when unused)

  DataConfig data;
  world::CameraConfig reference_cam;
  world::CameraConfig test_cam;
  std::vector<world::CameraConfig> train_cams;
  perception::EncoderConfig encoder;

  navigator::PretrainConfig pretrain;  // seed and log_path set per stage
  meta::MamlConfig maml;
  int maml_outer_steps = 300;
  bool maml_warm_start = false;  // start meta-encoders from the reference
  meta::AtTrainConfig at;
  bool at_warm_start = false;
  int adapt_shots = 3;
  int adapt_steps = 10;
};

RunConfig default_run_config();
/// The calibrated single-core benchmark (configs/benchmark.json): width-32
/// sensors, HFOV family (train 90/120/150 deg, test 60 deg at 1.5 m), sized so
/// pretraining and the method runs fit interactive time budgets. The success
/// threshold in this config was chosen from pilot sweeps of the pretrained
/// navigator; see README.md ("Benchmark calibration").
RunConfig benchmark_run_config();
nlohmann::json run_config_to_json(const RunConfig& cfg);
/// Throws std::invalid_argument naming the offending key on missing keys,
/// type mismatches, unknown keys, or cross-field inconsistencies.
RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::string& path);

// ---------------------------------------------------------------------------
// Stages and orchestration
//
// Stage outputs land in cfg.out_dir under fixed names:
//   gen-data    -> cfg.dataset_path
//   pretrain    -> pretrained.bin, pretrain_log.jsonl
//   meta-train  -> meta.bin, meta_log.jsonl
//   adapt       -> adapted.bin, adapt_log.jsonl
//   eval        -> report.json, report.csv

void gen_data_stage(const RunConfig& cfg);
void pretrain_stage(const RunConfig& cfg);
/// Requires method maml or at; reads cfg.reference_checkpoint.
void meta_train_stage(const RunConfig& cfg);
/// Requires method maml; reads cfg.checkpoint_in and cfg.reference_checkpoint.
void adapt_stage(const RunConfig& cfg);
/// Evaluates cfg.checkpoint_in at cfg.test_cam on val_seen and val_unseen.
nlohmann::json eval_stage(const RunConfig& cfg);

/// Full pipeline for the configured method, chained in memory from the
/// pretrained model in cfg.reference_checkpoint:
///   baseline - evaluate it at the test camera as-is;
///   maml     - meta-train over the seen cameras, k-shot adapt at the test
///              camera, evaluate;
///   at       - AT-train over the seen cameras, evaluate with AT removed
///              and no adaptation.
/// Writes report.json / report.csv to cfg.out_dir and returns the report.
/// A stage failure is rethrown naming the stage and seed.
nlohmann::json run_experiment(const RunConfig& cfg);

/// Merges single-run reports into one comparison table (methods x splits,
/// columns TL/NE/OR/SR/SPL); writes comparison.csv to out_dir and returns
/// the merged document.
nlohmann::json comparison_report(std::span<const std::string> report_paths,
                                 const std::string& out_dir);

/// Hash of the tensors under `prefix` only (e.g. the frozen navigator).
std::uint64_t prefix_hash(const ParamSet& params, std::string_view prefix);

/// Entry point behind the `metacam` binary; also callable from tests.
/// Returns 0 on success; on failure prints "error: ..." (one line) to
/// stderr and returns nonzero.
int run_cli(int argc, const char* const* argv);

}  // namespace metacam::harness
