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

#include "metacam/harness.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <iostream>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "metacam/rng.hpp"

namespace metacam::harness {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

double dist(double ax, double ay, double bx, double by) {
  return std::hypot(ax - bx, ay - by);
}

const world::WorldSpec& world_for(const episodes::Dataset& ds,
                                  const episodes::Episode& ep) {
  if (ep.world_id < 0 ||
      static_cast<std::size_t>(ep.world_id) >= ds.worlds.size()) {
    throw std::invalid_argument("episode " + std::to_string(ep.id) +
                                " references missing world " +
                                std::to_string(ep.world_id));
  }
  return ds.worlds[static_cast<std::size_t>(ep.world_id)];
}

}  // namespace

// ---------------------------------------------------------------------------
// Metrics

EpisodeMetrics compute_metrics(const navigator::Trajectory& traj,
                               const episodes::Episode& ep, double threshold) {
  if (traj.states.empty()) {
    throw std::invalid_argument("compute_metrics: empty trajectory");
  }
  if (!(threshold > 0.0)) {
    throw std::invalid_argument("compute_metrics: threshold must be positive");
  }
  EpisodeMetrics m;
  m.episode_id = ep.id;
  double closest = dist(traj.states.front().x, traj.states.front().y,
                        ep.goal_x, ep.goal_y);
  for (std::size_t i = 1; i < traj.states.size(); ++i) {
    const auto& a = traj.states[i - 1];
    const auto& b = traj.states[i];
    m.tl += dist(a.x, a.y, b.x, b.y);
    closest = std::min(closest, dist(b.x, b.y, ep.goal_x, ep.goal_y));
  }
  m.ne = dist(traj.states.back().x, traj.states.back().y, ep.goal_x, ep.goal_y);
  m.oracle_success = closest <= threshold;
  m.success = traj.stopped && m.ne <= threshold;
  if (m.success) {
    const double denom = std::max(m.tl, ep.reference_length);
    m.spl = denom > 0.0 ? ep.reference_length / denom : 1.0;
  }
  return m;
}

MetricsRecord aggregate(std::vector<EpisodeMetrics> rows) {
  std::sort(rows.begin(), rows.end(),
            [](const EpisodeMetrics& a, const EpisodeMetrics& b) {
              return a.episode_id < b.episode_id;
            });
  MetricsRecord rec;
  rec.rows = std::move(rows);
  if (rec.rows.empty()) {
    return rec;
  }
  for (const EpisodeMetrics& r : rec.rows) {
    rec.tl += r.tl;
    rec.ne += r.ne;
    rec.oracle_rate += r.oracle_success ? 1.0 : 0.0;
    rec.success_rate += r.success ? 1.0 : 0.0;
    rec.spl += r.spl;
  }
  const double n = static_cast<double>(rec.rows.size());
  rec.tl /= n;
  rec.ne /= n;
  rec.oracle_rate /= n;
  rec.success_rate /= n;
  rec.spl /= n;
  return rec;
}

MetricsRecord evaluate(const ParamSet& params,
                       const navigator::NavigatorConfig& nav_cfg,
                       const perception::EncoderConfig& enc_cfg,
                       const episodes::Dataset& ds, std::string_view split,
                       const world::CameraConfig& cam, double threshold,
                       int step_limit) {
  const auto indices = ds.split_indices(split);
  if (indices.empty()) {
    throw std::invalid_argument("evaluate: split \"" + std::string(split) +
                                "\" has no episodes");
  }
  std::vector<EpisodeMetrics> rows;
  rows.reserve(indices.size());
  for (std::size_t i : indices) {
    const episodes::Episode& ep = ds.episodes[i];
    const navigator::Trajectory traj = navigator::rollout(
        params, nav_cfg, enc_cfg, world_for(ds, ep), ep, cam, step_limit);
    rows.push_back(compute_metrics(traj, ep, threshold));
  }
  return aggregate(std::move(rows));
}

MetricsRecord evaluate_oracle(const episodes::Dataset& ds,
                              std::string_view split, double threshold) {
  const auto indices = ds.split_indices(split);
  if (indices.empty()) {
    throw std::invalid_argument("evaluate_oracle: split \"" +
                                std::string(split) + "\" has no episodes");
  }
  std::vector<EpisodeMetrics> rows;
  rows.reserve(indices.size());
  for (std::size_t i : indices) {
    const episodes::Episode& ep = ds.episodes[i];
    navigator::Trajectory traj;
    traj.states = episodes::reference_states(world_for(ds, ep), ep);
    for (std::size_t s = 1; s < traj.states.size(); ++s) {
      const auto& a = traj.states[s - 1];
      const auto& b = traj.states[s];
      if (a.x != b.x || a.y != b.y) {
        traj.actions.push_back(world::Action::Forward);
      } else {
        const double turn =
            std::fmod(b.heading_deg - a.heading_deg + 360.0, 360.0);
        traj.actions.push_back(std::abs(turn - world::kTurnDeg) < 1e-9
                                   ? world::Action::TurnLeft
                                   : world::Action::TurnRight);
      }
    }
    traj.actions.push_back(world::Action::Stop);
    traj.states.push_back(traj.states.back());
    traj.stopped = true;
    rows.push_back(compute_metrics(traj, ep, threshold));
  }
  return aggregate(std::move(rows));
}

// ---------------------------------------------------------------------------
// Run configuration

const char* method_name(Method m) {
  switch (m) {
    case Method::kBaseline:
      return "baseline";
    case Method::kMaml:
      return "maml";
    case Method::kAt:
      return "at";
  }
  return "unknown";
}

namespace {

const char* kind_name(navigator::Kind k) {
  return k == navigator::Kind::kSeq2seq ? "seq2seq" : "cma";
}

std::string join_key(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

[[noreturn]] void key_error(const std::string& key, const std::string& what) {
  throw std::invalid_argument("config key \"" + key + "\" " + what);
}

const json& member(const json& obj, const std::string& path,
                   const std::string& key) {
  const auto it = obj.find(key);
  if (it == obj.end()) {
    throw std::invalid_argument("missing required config key \"" +
                                join_key(path, key) + "\"");
  }
  return *it;
}

void check_keys(const json& obj, const std::string& path,
                std::initializer_list<std::string_view> allowed) {
  for (const auto& item : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), item.key()) ==
        allowed.end()) {
      throw std::invalid_argument("unknown config key \"" +
                                  join_key(path, item.key()) + "\"");
    }
  }
}

const json& object_member(const json& obj, const std::string& path,
                          const std::string& key) {
  const json& v = member(obj, path, key);
  if (!v.is_object()) {
    key_error(join_key(path, key), "must be an object");
  }
  return v;
}

double num_member(const json& obj, const std::string& path,
                  const std::string& key) {
  const json& v = member(obj, path, key);
  if (!v.is_number()) {
    key_error(join_key(path, key), "must be a number");
  }
  return v.get<double>();
}

int int_member(const json& obj, const std::string& path,
               const std::string& key) {
  const json& v = member(obj, path, key);
  if (!v.is_number_integer()) {
    key_error(join_key(path, key), "must be an integer");
  }
  const auto wide = v.get<std::int64_t>();
  if (wide < std::numeric_limits<int>::min() ||
      wide > std::numeric_limits<int>::max()) {
    key_error(join_key(path, key), "is out of range for a 32-bit integer");
  }
  return static_cast<int>(wide);
}

int positive_int_member(const json& obj, const std::string& path,
                        const std::string& key, int min_value = 1) {
  const int v = int_member(obj, path, key);
  if (v < min_value) {
    key_error(join_key(path, key),
              "must be at least " + std::to_string(min_value));
  }
  return v;
}

std::uint64_t uint_member(const json& obj, const std::string& path,
                          const std::string& key) {
  const json& v = member(obj, path, key);
  if (!v.is_number_unsigned()) {
    key_error(join_key(path, key), "must be a non-negative integer");
  }
  return v.get<std::uint64_t>();
}

bool bool_member(const json& obj, const std::string& path,
                 const std::string& key) {
  const json& v = member(obj, path, key);
  if (!v.is_boolean()) {
    key_error(join_key(path, key), "must be a boolean");
  }
  return v.get<bool>();
}

std::string string_member(const json& obj, const std::string& path,
                          const std::string& key) {
  const json& v = member(obj, path, key);
  if (!v.is_string()) {
    key_error(join_key(path, key), "must be a string");
  }
  return v.get<std::string>();
}

world::CameraConfig camera_from(const json& obj, const std::string& full) {
  if (!obj.is_object()) {
    key_error(full, "must be an object");
  }
  check_keys(obj, full, {"height", "hfov_deg", "width", "d_max"});
  world::CameraConfig cam;
  cam.height = num_member(obj, full, "height");
  cam.hfov_deg = num_member(obj, full, "hfov_deg");
  cam.width = int_member(obj, full, "width");
  cam.d_max = num_member(obj, full, "d_max");
  try {
    world::validate(cam);
  } catch (const std::exception& e) {
    key_error(full, std::string("is invalid: ") + e.what());
  }
  return cam;
}

json camera_to_json(const world::CameraConfig& cam) {
  return json{{"height", cam.height},
              {"hfov_deg", cam.hfov_deg},
              {"width", cam.width},
              {"d_max", cam.d_max}};
}

bool same_camera(const world::CameraConfig& a, const world::CameraConfig& b) {
  return a.height == b.height && a.hfov_deg == b.hfov_deg &&
         a.width == b.width && a.d_max == b.d_max;
}

}  // namespace

RunConfig default_run_config() {
  RunConfig cfg;
  cfg.out_dir = "runs/default";
  cfg.dataset_path = "data/benchmark.jsonl";
  cfg.reference_cam = {1.5, 90.0, 64, 10.0};
  cfg.test_cam = {0.2, 90.0, 64, 10.0};
  cfg.train_cams = {{0.5, 90.0, 64, 10.0},
                    {1.0, 90.0, 64, 10.0},
                    {1.5, 90.0, 64, 10.0}};
  cfg.nav.vocab = static_cast<int>(episodes::vocabulary().size());
  cfg.nav.feature_dim = cfg.encoder.feature_dim;
  cfg.nav.actions = world::kActionCount;
  cfg.at.iterations = 500;
  return cfg;
}

RunConfig benchmark_run_config() {
  RunConfig cfg = default_run_config();
  cfg.out_dir = "runs/benchmark";
  cfg.dataset_path = "data/benchmark_small.jsonl";
  cfg.reference_cam = {1.5, 90.0, 32, 10.0};
  cfg.test_cam = {1.5, 60.0, 32, 10.0};
  cfg.train_cams = {{1.5, 90.0, 32, 10.0},
                    {1.5, 120.0, 32, 10.0},
                    {1.5, 150.0, 32, 10.0}};
  cfg.encoder = {32, 12, 16, 5, 2, 32};
  cfg.nav.feature_dim = cfg.encoder.feature_dim;
  cfg.nav.embed_dim = 16;
  cfg.nav.instr_hidden = 32;
  cfg.nav.state_hidden = 96;
  cfg.nav.action_embed_dim = 8;
  cfg.data = {2026, 480, 30, 30, 8, 4, 12};
  cfg.pretrain.rounds = 4;
  cfg.pretrain.epochs = 20;
  cfg.pretrain.lr = 1e-3;
  cfg.success_threshold = 3.5;
  cfg.maml_outer_steps = 300;
  cfg.maml_warm_start = true;
  cfg.at.iterations = 2000;
  cfg.at_warm_start = true;
  return cfg;
}

json run_config_to_json(const RunConfig& cfg) {
  json j;
  j["format"] = 1;
  j["method"] = method_name(cfg.method);
  j["navigator"] = kind_name(cfg.nav.kind);
  j["seed"] = cfg.seed;
  j["success_threshold"] = cfg.success_threshold;
  j["step_limit"] = cfg.step_limit;
  j["out_dir"] = cfg.out_dir;
  j["dataset"] = cfg.dataset_path;
  j["reference_checkpoint"] = cfg.reference_checkpoint;
  j["checkpoint_in"] = cfg.checkpoint_in;
  j["data"] = json{{"seed", cfg.data.seed},
                   {"train_episodes", cfg.data.train_episodes},
                   {"val_seen_episodes", cfg.data.val_seen_episodes},
                   {"val_unseen_episodes", cfg.data.val_unseen_episodes},
                   {"train_worlds", cfg.data.train_worlds},
                   {"unseen_worlds", cfg.data.unseen_worlds},
                   {"world_size", cfg.data.world_size}};
  j["reference_cam"] = camera_to_json(cfg.reference_cam);
  j["test_cam"] = camera_to_json(cfg.test_cam);
  json cams = json::array();
  for (const auto& cam : cfg.train_cams) {
    cams.push_back(camera_to_json(cam));
  }
  j["train_cams"] = std::move(cams);
  j["encoder"] = json{{"width", cfg.encoder.width},
                      {"conv1_channels", cfg.encoder.conv1_channels},
                      {"conv2_channels", cfg.encoder.conv2_channels},
                      {"kernel", cfg.encoder.kernel},
                      {"stride", cfg.encoder.stride},
                      {"feature_dim", cfg.encoder.feature_dim}};
  j["navigator_dims"] = json{{"embed_dim", cfg.nav.embed_dim},
                             {"instr_hidden", cfg.nav.instr_hidden},
                             {"state_hidden", cfg.nav.state_hidden},
                             {"action_embed_dim", cfg.nav.action_embed_dim}};
  j["pretrain"] = json{{"rounds", cfg.pretrain.rounds},
                       {"epochs", cfg.pretrain.epochs},
                       {"step_limit", cfg.pretrain.step_limit},
                       {"lr", cfg.pretrain.lr}};
  j["maml"] = json{{"alpha", cfg.maml.alpha},
                   {"beta", cfg.maml.beta},
                   {"gamma", cfg.maml.gamma},
                   {"delta", cfg.maml.delta},
                   {"shots", cfg.maml.shots},
                   {"inner_steps", cfg.maml.inner_steps},
                   {"task_batch", cfg.maml.task_batch},
                   {"second_order", cfg.maml.second_order},
                   {"outer_steps", cfg.maml_outer_steps},
                   {"warm_start", cfg.maml_warm_start}};
  j["at"] = json{{"eta", cfg.at.eta},
                 {"zeta", cfg.at.zeta},
                 {"iterations", cfg.at.iterations},
                 {"shots", cfg.at.shots},
                 {"warm_start", cfg.at_warm_start}};
  j["adapt"] = json{{"shots", cfg.adapt_shots}, {"steps", cfg.adapt_steps}};
  return j;
}

RunConfig run_config_from_json(const json& j) {
  if (!j.is_object()) {
    throw std::invalid_argument("config root must be a JSON object");
  }
  check_keys(j, "",
             {"format", "method", "navigator", "seed", "success_threshold",
              "step_limit", "out_dir", "dataset", "reference_checkpoint",
              "checkpoint_in", "data", "reference_cam", "test_cam",
              "train_cams", "encoder", "navigator_dims", "pretrain", "maml",
              "at", "adapt"});
  RunConfig cfg;
  if (int_member(j, "", "format") != 1) {
    key_error("format", "must be 1");
  }

  const std::string method = string_member(j, "", "method");
  if (method == "baseline") {
    cfg.method = Method::kBaseline;
  } else if (method == "maml") {
    cfg.method = Method::kMaml;
  } else if (method == "at") {
    cfg.method = Method::kAt;
  } else {
    key_error("method", "must be one of \"baseline\", \"maml\", \"at\"");
  }

  const std::string kind = string_member(j, "", "navigator");
  if (kind == "seq2seq") {
    cfg.nav.kind = navigator::Kind::kSeq2seq;
  } else if (kind == "cma") {
    cfg.nav.kind = navigator::Kind::kCma;
  } else {
    key_error("navigator", "must be one of \"seq2seq\", \"cma\"");
  }

  cfg.seed = uint_member(j, "", "seed");
  cfg.success_threshold = num_member(j, "", "success_threshold");
  if (!(cfg.success_threshold > 0.0)) {
    key_error("success_threshold", "must be positive");
  }
  cfg.step_limit = positive_int_member(j, "", "step_limit");
  cfg.out_dir = string_member(j, "", "out_dir");
  if (cfg.out_dir.empty()) {
    key_error("out_dir", "must be a non-empty path");
  }
  cfg.dataset_path = string_member(j, "", "dataset");
  if (cfg.dataset_path.empty()) {
    key_error("dataset", "must be a non-empty path");
  }
  cfg.reference_checkpoint = string_member(j, "", "reference_checkpoint");
  cfg.checkpoint_in = string_member(j, "", "checkpoint_in");

  {
    const json& d = object_member(j, "", "data");
    check_keys(d, "data",
               {"seed", "train_episodes", "val_seen_episodes",
                "val_unseen_episodes", "train_worlds", "unseen_worlds",
                "world_size"});
    cfg.data.seed = uint_member(d, "data", "seed");
    cfg.data.train_episodes = positive_int_member(d, "data", "train_episodes");
    cfg.data.val_seen_episodes =
        positive_int_member(d, "data", "val_seen_episodes");
    cfg.data.val_unseen_episodes =
        positive_int_member(d, "data", "val_unseen_episodes");
    cfg.data.train_worlds = positive_int_member(d, "data", "train_worlds");
    cfg.data.unseen_worlds = positive_int_member(d, "data", "unseen_worlds");
    cfg.data.world_size = positive_int_member(d, "data", "world_size", 8);
  }

  cfg.reference_cam = camera_from(member(j, "", "reference_cam"),
                                  "reference_cam");
  cfg.test_cam = camera_from(member(j, "", "test_cam"), "test_cam");
  {
    const json& arr = member(j, "", "train_cams");
    if (!arr.is_array() || arr.empty()) {
      key_error("train_cams", "must be a non-empty array");
    }
    for (std::size_t i = 0; i < arr.size(); ++i) {
      cfg.train_cams.push_back(
          camera_from(arr[i], "train_cams[" + std::to_string(i) + "]"));
    }
    for (std::size_t a = 0; a < cfg.train_cams.size(); ++a) {
      for (std::size_t b = a + 1; b < cfg.train_cams.size(); ++b) {
        if (same_camera(cfg.train_cams[a], cfg.train_cams[b])) {
          key_error("train_cams", "must not contain duplicate cameras");
        }
      }
    }
  }

  {
    const json& e = object_member(j, "", "encoder");
    check_keys(e, "encoder",
               {"width", "conv1_channels", "conv2_channels", "kernel",
                "stride", "feature_dim"});
    cfg.encoder.width = positive_int_member(e, "encoder", "width", 8);
    cfg.encoder.conv1_channels =
        positive_int_member(e, "encoder", "conv1_channels");
    cfg.encoder.conv2_channels =
        positive_int_member(e, "encoder", "conv2_channels");
    cfg.encoder.kernel = positive_int_member(e, "encoder", "kernel");
    cfg.encoder.stride = positive_int_member(e, "encoder", "stride");
    cfg.encoder.feature_dim = positive_int_member(e, "encoder", "feature_dim");
    try {
      perception::encoder_dims(cfg.encoder);
    } catch (const std::exception& ex) {
      key_error("encoder", std::string("is invalid: ") + ex.what());
    }
  }

  if (cfg.reference_cam.width != cfg.encoder.width) {
    key_error("reference_cam.width", "must equal encoder.width");
  }
  if (cfg.test_cam.width != cfg.encoder.width) {
    key_error("test_cam.width", "must equal encoder.width");
  }
  for (std::size_t i = 0; i < cfg.train_cams.size(); ++i) {
    if (cfg.train_cams[i].width != cfg.encoder.width) {
      key_error("train_cams[" + std::to_string(i) + "].width",
                "must equal encoder.width");
    }
  }

  {
    const json& n = object_member(j, "", "navigator_dims");
    check_keys(n, "navigator_dims",
               {"embed_dim", "instr_hidden", "state_hidden",
                "action_embed_dim"});
    cfg.nav.embed_dim = positive_int_member(n, "navigator_dims", "embed_dim");
    cfg.nav.instr_hidden =
        positive_int_member(n, "navigator_dims", "instr_hidden");
    cfg.nav.state_hidden =
        positive_int_member(n, "navigator_dims", "state_hidden");
    cfg.nav.action_embed_dim =
        positive_int_member(n, "navigator_dims", "action_embed_dim");
  }
  cfg.nav.vocab = static_cast<int>(episodes::vocabulary().size());
  cfg.nav.feature_dim = cfg.encoder.feature_dim;
  cfg.nav.actions = world::kActionCount;

  {
    const json& p = object_member(j, "", "pretrain");
    check_keys(p, "pretrain", {"rounds", "epochs", "step_limit", "lr"});
    cfg.pretrain.rounds = positive_int_member(p, "pretrain", "rounds");
    cfg.pretrain.epochs = positive_int_member(p, "pretrain", "epochs");
    cfg.pretrain.step_limit = positive_int_member(p, "pretrain", "step_limit");
    cfg.pretrain.lr = num_member(p, "pretrain", "lr");
    if (!(cfg.pretrain.lr > 0.0)) {
      key_error("pretrain.lr", "must be positive");
    }
  }

  {
    const json& m = object_member(j, "", "maml");
    check_keys(m, "maml",
               {"alpha", "beta", "gamma", "delta", "shots", "inner_steps",
                "task_batch", "second_order", "outer_steps", "warm_start"});
    cfg.maml.alpha = num_member(m, "maml", "alpha");
    cfg.maml.beta = num_member(m, "maml", "beta");
    cfg.maml.gamma = num_member(m, "maml", "gamma");
    cfg.maml.delta = num_member(m, "maml", "delta");
    cfg.maml.shots = int_member(m, "maml", "shots");
    cfg.maml.inner_steps = int_member(m, "maml", "inner_steps");
    cfg.maml.task_batch = int_member(m, "maml", "task_batch");
    cfg.maml.second_order = bool_member(m, "maml", "second_order");
    cfg.maml_outer_steps = positive_int_member(m, "maml", "outer_steps");
    cfg.maml_warm_start = bool_member(m, "maml", "warm_start");
    try {
      meta::validate(cfg.maml);
    } catch (const std::exception& ex) {
      key_error("maml", std::string("is invalid: ") + ex.what());
    }
  }

  {
    const json& a = object_member(j, "", "at");
    check_keys(a, "at", {"eta", "zeta", "iterations", "shots", "warm_start"});
    cfg.at.eta = num_member(a, "at", "eta");
    cfg.at.zeta = num_member(a, "at", "zeta");
    cfg.at.iterations = int_member(a, "at", "iterations");
    cfg.at.shots = int_member(a, "at", "shots");
    cfg.at_warm_start = bool_member(a, "at", "warm_start");
    try {
      meta::validate(cfg.at);
    } catch (const std::exception& ex) {
      key_error("at", std::string("is invalid: ") + ex.what());
    }
  }

  {
    const json& a = object_member(j, "", "adapt");
    check_keys(a, "adapt", {"shots", "steps"});
    cfg.adapt_shots = positive_int_member(a, "adapt", "shots");
    cfg.adapt_steps = positive_int_member(a, "adapt", "steps", 0);
  }

  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::invalid_argument("cannot open config file \"" + path + "\"");
  }
  json j;
  try {
    j = json::parse(in);
  } catch (const std::exception& e) {
    throw std::invalid_argument("config file \"" + path +
                                "\" is not valid JSON: " + e.what());
  }
  return run_config_from_json(j);
}

// ---------------------------------------------------------------------------
// Checkpoint helpers

std::uint64_t prefix_hash(const ParamSet& params, std::string_view prefix) {
  ParamSet sub;
  for (std::size_t i : params.indices_with_prefix(prefix)) {
    sub.add(params.names()[i], params.at(i));
  }
  return diff::param_hash(sub);
}

namespace {

bool has_prefix(std::string_view name, std::string_view prefix) {
  return name.substr(0, prefix.size()) == prefix;
}

std::uint64_t encoder_hash(const ParamSet& params) {
  ParamSet sub;
  for (const char* prefix : {"rgb.", "depth."}) {
    for (std::size_t i : params.indices_with_prefix(prefix)) {
      sub.add(params.names()[i], params.at(i));
    }
  }
  return diff::param_hash(sub);
}

std::string hash_string(std::uint64_t h) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "0x%016" PRIx64, h);
  return buf;
}

ParamSet load_checkpoint(const std::string& path, const char* role) {
  if (path.empty()) {
    throw std::invalid_argument(std::string(role) +
                                " checkpoint path is empty");
  }
  return ParamSet::load(path);
}

/// Copy without the AT hyperparameter tensors; evaluation never applies AT.
ParamSet strip_at(const ParamSet& in) {
  ParamSet out;
  for (std::size_t i = 0; i < in.size(); ++i) {
    if (!has_prefix(in.names()[i], "at.")) {
      out.add(in.names()[i], in.at(i));
    }
  }
  return out;
}

fs::path ensure_out_dir(const RunConfig& cfg) {
  fs::path out(cfg.out_dir);
  fs::create_directories(out);
  return out;
}

void add_encoders(ParamSet& params, const perception::EncoderConfig& enc,
                  Rng& rng) {
  perception::init_encoder_params(params, "rgb.", perception::Channel::kRgb,
                                  enc, rng);
  perception::init_encoder_params(params, "depth.",
                                  perception::Channel::kDepth, enc, rng);
}

/// Meta model: fresh (or reference-copied) encoders plus everything else,
/// navigator included, carried over from the reference checkpoint.
ParamSet init_meta_model(const RunConfig& cfg, const ParamSet& ref, Rng& rng,
                         bool warm_start) {
  ParamSet model;
  if (warm_start) {
    for (std::size_t i = 0; i < ref.size(); ++i) {
      const std::string& name = ref.names()[i];
      if (has_prefix(name, "rgb.") || has_prefix(name, "depth.")) {
        model.add(name, ref.at(i));
      }
    }
    if (model.size() == 0) {
      throw std::invalid_argument(
          "reference checkpoint has no encoder parameters to warm-start from");
    }
  } else {
    add_encoders(model, cfg.encoder, rng);
  }
  for (std::size_t i = 0; i < ref.size(); ++i) {
    const std::string& name = ref.names()[i];
    if (!has_prefix(name, "rgb.") && !has_prefix(name, "depth.") &&
        !has_prefix(name, "at.")) {
      model.add(name, ref.at(i));
    }
  }
  return model;
}

void require_navigator(const ParamSet& params,
                       const navigator::NavigatorConfig& nav) {
  if (params.indices_with_prefix(navigator::param_prefix(nav.kind)).empty()) {
    throw std::invalid_argument(
        std::string("checkpoint holds no parameters for navigator \"") +
        kind_name(nav.kind) + "\"");
  }
}

std::vector<std::size_t> train_indices(const episodes::Dataset& ds) {
  auto idx = ds.split_indices("train");
  if (idx.empty()) {
    throw std::invalid_argument("dataset has no train episodes");
  }
  return idx;
}

/// Meta-training shared by the meta-train stage and run_experiment.
ParamSet train_meta_model(const RunConfig& cfg, const episodes::Dataset& ds,
                          const ParamSet& ref, const std::string& log_path) {
  Rng rng(cfg.seed);
  const auto idx = train_indices(ds);
  if (cfg.method == Method::kMaml) {
    ParamSet model = init_meta_model(cfg, ref, rng, cfg.maml_warm_start);
    meta::TaskDistribution dist{cfg.train_cams, &ds, idx, cfg.reference_cam};
    meta::maml_train(model, ref, cfg.encoder, dist, cfg.maml,
                     cfg.maml_outer_steps, rng, log_path);
    return model;
  }
  if (cfg.method == Method::kAt) {
    ParamSet model = init_meta_model(cfg, ref, rng, cfg.at_warm_start);
    perception::init_at_params(model, "at.rgb.", cfg.encoder);
    perception::init_at_params(model, "at.depth.", cfg.encoder);
    meta::DomainSet domains{cfg.train_cams, &ds, idx, cfg.reference_cam};
    meta::at_train(model, ref, cfg.encoder, domains, cfg.at, rng, log_path);
    return model;
  }
  throw std::invalid_argument("meta-train requires method \"maml\" or \"at\"");
}

/// Few-shot adaptation at the test camera shared by the adapt stage and
/// run_experiment: k paired frames from one train-split episode.
meta::AdaptTrace adapt_model(ParamSet& model, const RunConfig& cfg,
                             const episodes::Dataset& ds, const ParamSet& ref,
                             const std::string& log_path) {
  Rng rng(cfg.seed);
  const auto idx = train_indices(ds);
  const episodes::Episode& ep =
      ds.episodes[idx[rng.uniform_index(idx.size())]];
  const auto frames = episodes::sample_paired_frames(
      world_for(ds, ep), ep, cfg.reference_cam, cfg.test_cam, cfg.adapt_shots,
      rng.next_u64());
  const meta::AdaptTrace trace =
      meta::few_shot_adapt(model, ref, cfg.encoder, frames, cfg.maml.alpha,
                           cfg.maml.beta, cfg.adapt_steps);
  if (!log_path.empty()) {
    std::ofstream log(log_path, std::ios::trunc);
    for (std::size_t s = 0; s < trace.rgb_losses.size(); ++s) {
      const json line{{"step", s},
                      {"l_r", trace.rgb_losses[s]},
                      {"l_d", trace.depth_losses[s]}};
      log << line.dump() << "\n";
    }
  }
  return trace;
}

json split_to_json(const MetricsRecord& rec) {
  json rows = json::array();
  for (const EpisodeMetrics& r : rec.rows) {
    rows.push_back(json{{"episode_id", r.episode_id},
                        {"tl", r.tl},
                        {"ne", r.ne},
                        {"or", r.oracle_success},
                        {"sr", r.success},
                        {"spl", r.spl}});
  }
  return json{{"episodes", rec.rows.size()},
              {"mean", json{{"tl", rec.tl},
                            {"ne", rec.ne},
                            {"or", rec.oracle_rate},
                            {"sr", rec.success_rate},
                            {"spl", rec.spl}}},
              {"rows", std::move(rows)}};
}

json build_report(const RunConfig& cfg, const ParamSet& model,
                  const MetricsRecord& val_seen,
                  const MetricsRecord& val_unseen) {
  json report;
  report["format"] = 1;
  report["method"] = method_name(cfg.method);
  report["navigator"] = kind_name(cfg.nav.kind);
  report["seed"] = cfg.seed;
  report["success_threshold"] = cfg.success_threshold;
  report["step_limit"] = cfg.step_limit;
  report["sr_requires_stop"] = true;
  report["notes"] =
      "success requires an explicit stop within the threshold; running out "
      "of steps near the goal scores OR but not SR";
  report["at_params_loaded_for_eval"] = false;
  report["navigator_param_hash"] = hash_string(
      prefix_hash(model, navigator::param_prefix(cfg.nav.kind)));
  report["encoder_param_hash"] = hash_string(encoder_hash(model));
  report["reference_cam"] = camera_to_json(cfg.reference_cam);
  report["test_cam"] = camera_to_json(cfg.test_cam);
  json cams = json::array();
  for (const auto& cam : cfg.train_cams) {
    cams.push_back(camera_to_json(cam));
  }
  report["train_cams"] = std::move(cams);
  report["splits"] = json{{"val_seen", split_to_json(val_seen)},
                          {"val_unseen", split_to_json(val_unseen)}};
  report["config"] = run_config_to_json(cfg);
  return report;
}

std::string fmt6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot write \"" + path.string() + "\"");
  }
  out << text;
}

void write_report_files(const json& report, const fs::path& out_dir) {
  write_text_file(out_dir / "report.json", report.dump(2) + "\n");
  std::string csv = "split,tl,ne,or,sr,spl,episodes\n";
  for (const char* split : {"val_seen", "val_unseen"}) {
    const json& s = report.at("splits").at(split);
    const json& mean = s.at("mean");
    csv += std::string(split) + "," + fmt6(mean.at("tl").get<double>()) + "," +
           fmt6(mean.at("ne").get<double>()) + "," +
           fmt6(mean.at("or").get<double>()) + "," +
           fmt6(mean.at("sr").get<double>()) + "," +
           fmt6(mean.at("spl").get<double>()) + "," +
           std::to_string(s.at("episodes").get<std::size_t>()) + "\n";
  }
  write_text_file(out_dir / "report.csv", csv);
}

template <typename F>
auto run_stage(const RunConfig& cfg, const char* name, F&& fn)
    -> decltype(fn()) {
  try {
    return fn();
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("stage ") + name + " failed (seed " +
                             std::to_string(cfg.seed) + "): " + e.what());
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Stages

void gen_data_stage(const RunConfig& cfg) {
  const DataConfig& d = cfg.data;
  const episodes::Dataset ds = episodes::make_standard_dataset(
      d.seed, d.train_episodes, d.val_seen_episodes, d.val_unseen_episodes,
      d.train_worlds, d.unseen_worlds, d.world_size);
  const fs::path path(cfg.dataset_path);
  if (path.has_parent_path()) {
    fs::create_directories(path.parent_path());
  }
  episodes::save_dataset(ds, cfg.dataset_path);
}

void pretrain_stage(const RunConfig& cfg) {
  const episodes::Dataset ds = episodes::load_dataset(cfg.dataset_path);
  const fs::path out = ensure_out_dir(cfg);
  ParamSet params;
  Rng rng(cfg.seed);
  add_encoders(params, cfg.encoder, rng);
  navigator::init_navigator_params(params, cfg.nav, rng);
  navigator::PretrainConfig pc = cfg.pretrain;
  pc.seed = cfg.seed;
  pc.log_path = (out / "pretrain_log.jsonl").string();
  navigator::pretrain(params, cfg.nav, cfg.encoder, ds, cfg.reference_cam, pc);
  params.save((out / "pretrained.bin").string());
}

void meta_train_stage(const RunConfig& cfg) {
  const episodes::Dataset ds = episodes::load_dataset(cfg.dataset_path);
  const fs::path out = ensure_out_dir(cfg);
  const ParamSet ref = load_checkpoint(cfg.reference_checkpoint, "reference");
  const ParamSet model =
      train_meta_model(cfg, ds, ref, (out / "meta_log.jsonl").string());
  model.save((out / "meta.bin").string());
}

void adapt_stage(const RunConfig& cfg) {
  if (cfg.method != Method::kMaml) {
    throw std::invalid_argument("adapt requires method \"maml\"");
  }
  const episodes::Dataset ds = episodes::load_dataset(cfg.dataset_path);
  const fs::path out = ensure_out_dir(cfg);
  ParamSet model = load_checkpoint(cfg.checkpoint_in, "input");
  const ParamSet ref = load_checkpoint(cfg.reference_checkpoint, "reference");
  adapt_model(model, cfg, ds, ref, (out / "adapt_log.jsonl").string());
  model.save((out / "adapted.bin").string());
}

nlohmann::json eval_stage(const RunConfig& cfg) {
  const episodes::Dataset ds = episodes::load_dataset(cfg.dataset_path);
  const fs::path out = ensure_out_dir(cfg);
  const ParamSet model = strip_at(load_checkpoint(cfg.checkpoint_in, "input"));
  require_navigator(model, cfg.nav);
  const MetricsRecord val_seen =
      evaluate(model, cfg.nav, cfg.encoder, ds, "val_seen", cfg.test_cam,
               cfg.success_threshold, cfg.step_limit);
  const MetricsRecord val_unseen =
      evaluate(model, cfg.nav, cfg.encoder, ds, "val_unseen", cfg.test_cam,
               cfg.success_threshold, cfg.step_limit);
  const json report = build_report(cfg, model, val_seen, val_unseen);
  write_report_files(report, out);
  return report;
}

nlohmann::json run_experiment(const RunConfig& cfg) {
  const fs::path out = ensure_out_dir(cfg);
  const episodes::Dataset ds = run_stage(cfg, "load-dataset", [&] {
    return episodes::load_dataset(cfg.dataset_path);
  });
  const ParamSet ref = run_stage(cfg, "load-reference", [&] {
    return load_checkpoint(cfg.reference_checkpoint, "reference");
  });
  ParamSet model = strip_at(ref);
  if (cfg.method == Method::kMaml) {
    model = run_stage(cfg, "meta-train", [&] {
      ParamSet trained =
          train_meta_model(cfg, ds, ref, (out / "meta_log.jsonl").string());
      trained.save((out / "meta.bin").string());
      return trained;
    });
    run_stage(cfg, "adapt", [&] {
      adapt_model(model, cfg, ds, ref, (out / "adapt_log.jsonl").string());
      model.save((out / "adapted.bin").string());
      return 0;
    });
  } else if (cfg.method == Method::kAt) {
    model = run_stage(cfg, "at-train", [&] {
      ParamSet trained =
          train_meta_model(cfg, ds, ref, (out / "meta_log.jsonl").string());
      trained.save((out / "meta.bin").string());
      return strip_at(trained);
    });
  }
  require_navigator(model, cfg.nav);
  const MetricsRecord val_seen = run_stage(cfg, "evaluate-val-seen", [&] {
    return evaluate(model, cfg.nav, cfg.encoder, ds, "val_seen", cfg.test_cam,
                    cfg.success_threshold, cfg.step_limit);
  });
  const MetricsRecord val_unseen = run_stage(cfg, "evaluate-val-unseen", [&] {
    return evaluate(model, cfg.nav, cfg.encoder, ds, "val_unseen",
                    cfg.test_cam, cfg.success_threshold, cfg.step_limit);
  });
  const json report = build_report(cfg, model, val_seen, val_unseen);
  write_report_files(report, out);
  return report;
}

nlohmann::json comparison_report(std::span<const std::string> report_paths,
                                 const std::string& out_dir) {
  if (report_paths.empty()) {
    throw std::invalid_argument("comparison_report: no input reports");
  }
  json doc;
  doc["format"] = 1;
  json rows = json::array();
  std::string csv = "method,navigator,seed,split,tl,ne,or,sr,spl,episodes\n";
  for (const std::string& path : report_paths) {
    std::ifstream in(path);
    if (!in) {
      throw std::invalid_argument("cannot open report \"" + path + "\"");
    }
    json report;
    try {
      report = json::parse(in);
    } catch (const std::exception& e) {
      throw std::invalid_argument("report \"" + path +
                                  "\" is not valid JSON: " + e.what());
    }
    for (const char* key : {"method", "navigator", "seed", "splits"}) {
      if (!report.contains(key)) {
        throw std::invalid_argument("report \"" + path +
                                    "\" is missing key \"" + key + "\"");
      }
    }
    for (const auto& item : report.at("splits").items()) {
      const json& mean = item.value().at("mean");
      const json row{{"method", report.at("method")},
                     {"navigator", report.at("navigator")},
                     {"seed", report.at("seed")},
                     {"split", item.key()},
                     {"tl", mean.at("tl")},
                     {"ne", mean.at("ne")},
                     {"or", mean.at("or")},
                     {"sr", mean.at("sr")},
                     {"spl", mean.at("spl")},
                     {"episodes", item.value().at("episodes")}};
      rows.push_back(row);
      csv += report.at("method").get<std::string>() + "," +
             report.at("navigator").get<std::string>() + "," +
             std::to_string(report.at("seed").get<std::uint64_t>()) + "," +
             item.key() + "," + fmt6(mean.at("tl").get<double>()) + "," +
             fmt6(mean.at("ne").get<double>()) + "," +
             fmt6(mean.at("or").get<double>()) + "," +
             fmt6(mean.at("sr").get<double>()) + "," +
             fmt6(mean.at("spl").get<double>()) + "," +
             std::to_string(item.value().at("episodes").get<std::size_t>()) +
             "\n";
    }
  }
  doc["rows"] = std::move(rows);
  fs::path out(out_dir);
  fs::create_directories(out);
  write_text_file(out / "comparison.csv", csv);
  return doc;
}

// ---------------------------------------------------------------------------
// Command-line interface

namespace {

struct CommonArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
};

void add_common(CLI::App* sub, CommonArgs& args) {
  sub->add_option("--config", args.config, "Run-configuration JSON file")
      ->required();
  sub->add_option("--seed", args.seed,
                  "Override the run seed from the config file");
  sub->add_option("--out", args.out,
                  "Override the output directory from the config file");
}

RunConfig load_with_overrides(const CommonArgs& args) {
  RunConfig cfg = load_run_config(args.config);
  if (args.seed) {
    cfg.seed = *args.seed;
  }
  if (!args.out.empty()) {
    cfg.out_dir = args.out;
  }
  return cfg;
}

std::string one_line(std::string text) {
  std::replace(text.begin(), text.end(), '\n', ' ');
  return text;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{
      "metacam: camera-configuration generalization benchmark for "
      "vision-and-language navigation"};
  app.require_subcommand(1);

  CommonArgs gen_args, pre_args, meta_args, adapt_args, eval_args, rep_args;
  std::vector<std::string> report_inputs;

  CLI::App* s_gen = app.add_subcommand(
      "gen-data", "Generate the synthetic benchmark dataset");
  add_common(s_gen, gen_args);
  CLI::App* s_pre = app.add_subcommand(
      "pretrain",
      "Behavior-clone the navigator at the reference camera; writes "
      "pretrained.bin");
  add_common(s_pre, pre_args);
  CLI::App* s_meta = app.add_subcommand(
      "meta-train",
      "Meta-train the perception encoders over the seen cameras (method "
      "maml or at); writes meta.bin");
  add_common(s_meta, meta_args);
  CLI::App* s_adapt = app.add_subcommand(
      "adapt",
      "Few-shot adapt the encoders at the test camera (method maml); writes "
      "adapted.bin");
  add_common(s_adapt, adapt_args);
  CLI::App* s_eval = app.add_subcommand(
      "eval",
      "Evaluate checkpoint_in at the test camera; writes report.json and "
      "report.csv");
  add_common(s_eval, eval_args);
  CLI::App* s_rep = app.add_subcommand(
      "report", "Merge run reports into one comparison table");
  add_common(s_rep, rep_args);
  s_rep->add_option("--in", report_inputs, "report.json files to merge")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      return app.exit(e);  // --help and friends
    }
    std::cerr << "error: " << one_line(e.what()) << "\n";
    return 2;
  }

  try {
    if (app.got_subcommand(s_gen)) {
      const RunConfig cfg = load_with_overrides(gen_args);
      gen_data_stage(cfg);
      std::cout << "wrote " << cfg.dataset_path << "\n";
    } else if (app.got_subcommand(s_pre)) {
      const RunConfig cfg = load_with_overrides(pre_args);
      pretrain_stage(cfg);
      std::cout << "wrote " << (fs::path(cfg.out_dir) / "pretrained.bin").string()
                << "\n";
    } else if (app.got_subcommand(s_meta)) {
      const RunConfig cfg = load_with_overrides(meta_args);
      meta_train_stage(cfg);
      std::cout << "wrote " << (fs::path(cfg.out_dir) / "meta.bin").string()
                << "\n";
    } else if (app.got_subcommand(s_adapt)) {
      const RunConfig cfg = load_with_overrides(adapt_args);
      adapt_stage(cfg);
      std::cout << "wrote " << (fs::path(cfg.out_dir) / "adapted.bin").string()
                << "\n";
    } else if (app.got_subcommand(s_eval)) {
      const RunConfig cfg = load_with_overrides(eval_args);
      const json report = eval_stage(cfg);
      for (const auto& item : report.at("splits").items()) {
        const json& mean = item.value().at("mean");
        std::cout << item.key() << " sr=" << fmt6(mean.at("sr").get<double>())
                  << " spl=" << fmt6(mean.at("spl").get<double>())
                  << " ne=" << fmt6(mean.at("ne").get<double>()) << "\n";
      }
    } else if (app.got_subcommand(s_rep)) {
      const RunConfig cfg = load_with_overrides(rep_args);
      comparison_report(report_inputs, cfg.out_dir);
      std::cout << "wrote "
                << (fs::path(cfg.out_dir) / "comparison.csv").string() << "\n";
    }
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << one_line(e.what()) << "\n";
    return 1;
  }
}

}  // namespace metacam::harness
