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

#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "metacam/world.hpp"

namespace metacam::episodes {

inline constexpr int kMaxInstructionLen = 32;
inline constexpr int kMinEpisodeActions = 20;
inline constexpr int kMaxEpisodeActions = 80;
/// Episodes never start within this straight-line distance of the goal, so
/// a do-nothing policy cannot score successes under the standard 3 m
/// evaluation threshold.
inline constexpr double kMinStartGoalSeparation = 3.0;

/// Fixed 64-word instruction vocabulary (movement verbs, turn directions,
/// landmark nouns, stop phrases). Token 0 is the padding word.
const std::vector<std::string>& vocabulary();
std::int32_t token_id(std::string_view word);

/// Landmark names with their band-uniform colors.
struct LandmarkStyle {
  const char* name;
  world::Color color;
};
const std::vector<LandmarkStyle>& landmark_palette();

struct Episode {
  std::int32_t id = 0;
  std::int32_t world_id = 0;
  std::uint64_t seed = 0;
  std::string split;  // train | val_seen | val_unseen
  world::AgentState start;
  double goal_x = 0.0, goal_y = 0.0;
  std::vector<std::int32_t> tokens;
  std::vector<std::pair<double, double>> path;  // positions, turns collapsed
  double reference_length = 0.0;
};

/// Seeded maze (recursive division plus extra doorways for loops) with 4-8
/// full-height landmarks on wall cells. Free space is connected.
world::WorldSpec generate_world(std::uint64_t seed, int size);

/// Samples start/goal whose optimal action count lies in [20, 80], rolls
/// out the oracle, and templates an instruction over turns taken and
/// landmarks passed. Deterministic per (world, seed). Throws after bounded
/// retries if the world admits no such episode.
Episode generate_episode(const world::WorldSpec& world, std::uint64_t seed);

/// The oracle rollout restated: start plus the state after every action
/// (turns included), ending at the state where the oracle says Stop.
std::vector<world::AgentState> reference_states(const world::WorldSpec& world,
                                                const Episode& episode);

/// Instruction templating, reusable as a test oracle: one clause per
/// straight segment, turn words from consecutive segment directions, and
/// "past the <name> marker" for each landmark first coming within 1 m of
/// the path, in path order.
std::vector<std::int32_t> instruction_tokens(
    const world::WorldSpec& world, double start_heading_deg,
    const std::vector<std::pair<double, double>>& path);

struct PairedFrame {
  world::AgentState state;
  world::Observation reference;  // rendered with the reference camera
  world::Observation target;     // rendered with the shifted camera
};

/// k distinct states drawn uniformly (seeded) from the reference rollout,
/// each rendered under both cameras at the identical state.
std::vector<PairedFrame> sample_paired_frames(const world::WorldSpec& world,
                                              const Episode& episode,
                                              const world::CameraConfig& ref_cam,
                                              const world::CameraConfig& tgt_cam,
                                              int k, std::uint64_t seed);

struct Dataset {
  std::vector<std::string> vocab;
  std::vector<world::WorldSpec> worlds;
  std::vector<Episode> episodes;

  std::vector<std::size_t> split_indices(std::string_view split) const;
};

/// 20 training worlds + 5 held-out worlds; 200 train episodes and 50
/// val-seen episodes on the training worlds (fresh episode seeds), 50
/// val-unseen episodes on the held-out worlds.
Dataset make_standard_dataset(std::uint64_t seed, int n_train = 200,
                              int n_val_seen = 50, int n_val_unseen = 50,
                              int n_train_worlds = 20, int n_unseen_worlds = 5,
                              int world_size = 16);

/// JSON-lines: a header line (format version, vocabulary, full world
/// documents) then one episode per line. load(save(x)) == x exactly.
void save_dataset(const Dataset& dataset, const std::string& path);
Dataset load_dataset(const std::string& path);

}  // namespace metacam::episodes
