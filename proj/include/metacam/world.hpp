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

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace metacam {
class Rng;
}

namespace metacam::world {

/// Ceiling of the 2.5D world; every obstacle height lives in (0, kHMax].
inline constexpr double kHMax = 2.0;
/// Vertical texture bands per wall cell; band k spans
/// [k*kHMax/kBands, (k+1)*kHMax/kBands).
inline constexpr int kBands = 8;
inline constexpr double kCellSize = 1.0;   // meters
inline constexpr double kForwardStep = 0.25;  // meters
inline constexpr double kTurnDeg = 15.0;
/// Radius at which the planner considers the goal reached. Deliberately
/// tighter than the evaluation success threshold so reference paths stop
/// close to the goal instead of on the success boundary.
inline constexpr double kPlannerStopRadius = 0.5;

struct Color {
  double r = 0.0, g = 0.0, b = 0.0;
};

struct Cell {
  double height = 0.0;  // 0 = free space
  std::array<Color, kBands> bands{};
};

struct Landmark {
  int cx = 0, cy = 0;  // wall cell holding the landmark
  std::string name;    // instruction-vocabulary token
};

struct WorldSpec {
  int size = 0;  // N: the grid is N x N cells of 1 m
  std::uint64_t seed = 0;
  std::vector<Cell> cells;  // row-major, index y*size + x
  std::vector<Landmark> landmarks;

  bool in_bounds(int x, int y) const {
    return x >= 0 && x < size && y >= 0 && y < size;
  }
  const Cell& cell(int x, int y) const {
    return cells[static_cast<std::size_t>(y) * static_cast<std::size_t>(size) + static_cast<std::size_t>(x)];
  }
  Cell& cell(int x, int y) {
    return cells[static_cast<std::size_t>(y) * static_cast<std::size_t>(size) + static_cast<std::size_t>(x)];
  }
  double height_at(int x, int y) const {
    return in_bounds(x, y) ? cell(x, y).height : kHMax;
  }
  bool free_at(int x, int y) const {
    return in_bounds(x, y) && cell(x, y).height == 0.0;
  }
};

/// An empty square room: free interior of the given extent wrapped in
/// full-height boundary walls (grid is interior+2 on each axis).
WorldSpec make_room(int interior, std::uint64_t texture_seed = 0);

/// Standard wall texture: one hue per cell, brightness ramp across bands.
void paint_wall(Cell& cell, metacam::Rng& rng);
/// Landmark texture: one saturated color repeated across every band, so any
/// camera height observes the same signature.
void paint_landmark(Cell& cell, const Color& color);

struct CameraConfig {
  double height = 1.5;   // meters, in (0, kHMax)
  double hfov_deg = 90;  // in (0, 180)
  int width = 64;        // rays, >= 8
  double d_max = 10.0;   // depth clip, meters
};

void validate(const CameraConfig& cam);

struct AgentState {
  double x = 0.0, y = 0.0;   // meters
  double heading_deg = 0.0;  // [0, 360); 0 = +x, counterclockwise positive
};

/// RGB is ray-major: ray j occupies rgb[3j .. 3j+2]; angles follow
/// heading + hfov*(j/(W-1) - 1/2).
struct Observation {
  int width = 0;
  std::vector<double> rgb;    // width*3, values in [0,1]
  std::vector<double> depth;  // width, values in (0, d_max]
};

/// Tie-break order for the planner: Stop < Forward < TurnLeft < TurnRight.
enum class Action : std::uint8_t { Stop = 0, Forward = 1, TurnLeft = 2, TurnRight = 3 };

inline constexpr int kActionCount = 4;
const char* action_name(Action a);

bool state_valid(const WorldSpec& world, const AgentState& state);

/// Pure renderer; identical inputs give bit-identical observations.
Observation raycast(const WorldSpec& world, const AgentState& state,
                    const CameraConfig& cam);

/// Forward moves 0.25 m along heading unless the destination cell carries
/// any obstacle (then no-op); turns rotate 15 degrees; Stop is identity.
AgentState step(const WorldSpec& world, const AgentState& state, Action action);

/// Shortest-path cost-to-go field over the (0.25 m, 15 deg) state lattice,
/// computed once per (world, goal) by multi-source BFS from every lattice
/// state within stop_radius of the goal.
class OraclePlanner {
 public:
  OraclePlanner(const WorldSpec& world, double goal_x, double goal_y,
                double stop_radius = kPlannerStopRadius);

  /// First action of a shortest action sequence reaching the stop radius.
  /// Throws if the goal is unreachable from the (snapped) state.
  Action action_at(const AgentState& state) const;

  /// Remaining optimal action count from the (snapped) state; -1 if the
  /// goal set is unreachable from it.
  std::int32_t cost_at(const AgentState& state) const;

  double goal_x() const { return goal_x_; }
  double goal_y() const { return goal_y_; }
  double stop_radius() const { return stop_radius_; }

 private:
  std::int64_t snap_index(const AgentState& state) const;
  std::int64_t index_of(int px, int py, int ph) const;
  bool lattice_free(int px, int py) const;

  const WorldSpec* world_;
  double goal_x_, goal_y_, stop_radius_;
  int lattice_n_;                  // positions per axis (size * 4 + 1)
  std::vector<std::int32_t> cost_;  // -1 = unreachable
};

/// One-shot convenience wrapper over OraclePlanner.
Action oracle_action(const WorldSpec& world, const AgentState& state,
                     double goal_x, double goal_y,
                     double stop_radius = kPlannerStopRadius);

/// Versioned JSON document (grid heights, textures, landmarks); exact
/// round-trip including float values.
std::string world_to_json(const WorldSpec& world);
WorldSpec world_from_json(const std::string& text);

}  // namespace metacam::world
