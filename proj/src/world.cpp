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

#include "metacam/world.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include <json.hpp>

#include "metacam/rng.hpp"

namespace metacam::world {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr int kHeadings = 24;  // 360 / 15

double deg_to_rad(double deg) { return deg * (kPi / 180.0); }

int cell_of(double coord) { return static_cast<int>(std::floor(coord)); }

}  // namespace

const char* action_name(Action a) {
  switch (a) {
    case Action::Stop: return "Stop";
    case Action::Forward: return "Forward";
    case Action::TurnLeft: return "TurnLeft";
    case Action::TurnRight: return "TurnRight";
  }
  return "?";
}

void validate(const CameraConfig& cam) {
  if (!(cam.height > 0.0 && cam.height < kHMax)) {
    throw std::invalid_argument("camera height " + std::to_string(cam.height) +
                                " outside (0, " + std::to_string(kHMax) + ")");
  }
  if (!(cam.hfov_deg > 0.0 && cam.hfov_deg < 180.0)) {
    throw std::invalid_argument("camera hfov " + std::to_string(cam.hfov_deg) +
                                " outside (0, 180)");
  }
  if (cam.width < 8) {
    throw std::invalid_argument("camera width " + std::to_string(cam.width) +
                                " below 8");
  }
  if (!(cam.d_max > 0.0)) {
    throw std::invalid_argument("camera d_max must be positive");
  }
}

bool state_valid(const WorldSpec& world, const AgentState& state) {
  const int cx = cell_of(state.x);
  const int cy = cell_of(state.y);
  return world.free_at(cx, cy);
}

WorldSpec make_room(int interior, std::uint64_t texture_seed) {
  if (interior < 1) throw std::invalid_argument("room interior must be >= 1");
  WorldSpec w;
  w.size = interior + 2;
  w.seed = texture_seed;
  w.cells.assign(static_cast<std::size_t>(w.size) * static_cast<std::size_t>(w.size), Cell{});
  Rng rng(texture_seed);
  for (int y = 0; y < w.size; ++y) {
    for (int x = 0; x < w.size; ++x) {
      if (x == 0 || y == 0 || x == w.size - 1 || y == w.size - 1) {
        Cell& c = w.cell(x, y);
        c.height = kHMax;
        paint_wall(c, rng);
      }
    }
  }
  return w;
}

void paint_wall(Cell& cell, Rng& rng) {
  // One hue per cell with a per-band brightness ramp: cameras at different
  // heights sample different brightness of the same hue, so the mapping
  // between camera configurations stays learnable.
  const Color base{0.25 + 0.75 * rng.uniform(), 0.25 + 0.75 * rng.uniform(),
                   0.25 + 0.75 * rng.uniform()};
  for (int k = 0; k < kBands; ++k) {
    const double ramp = 0.35 + 0.6 * static_cast<double>(k) / (kBands - 1);
    cell.bands[static_cast<std::size_t>(k)] =
        Color{base.r * ramp, base.g * ramp, base.b * ramp};
  }
}

void paint_landmark(Cell& cell, const Color& color) {
  for (int k = 0; k < kBands; ++k) {
    cell.bands[static_cast<std::size_t>(k)] = color;
  }
}

Observation raycast(const WorldSpec& world, const AgentState& state,
                    const CameraConfig& cam) {
  validate(cam);
  if (!state_valid(world, state)) {
    throw std::invalid_argument("raycast: agent at (" + std::to_string(state.x) +
                                ", " + std::to_string(state.y) +
                                ") is inside a blocking cell");
  }

  const int band = std::min(kBands - 1,
                            static_cast<int>(std::floor(cam.height * kBands / kHMax)));
  const double inf = std::numeric_limits<double>::infinity();

  Observation obs;
  obs.width = cam.width;
  obs.rgb.assign(static_cast<std::size_t>(cam.width) * 3, 0.0);
  obs.depth.assign(static_cast<std::size_t>(cam.width), cam.d_max);

  for (int j = 0; j < cam.width; ++j) {
    const double angle =
        state.heading_deg +
        cam.hfov_deg * (static_cast<double>(j) / (cam.width - 1) - 0.5);
    const double rad = deg_to_rad(angle);
    const double dx = std::cos(rad);
    const double dy = std::sin(rad);

    int ix = cell_of(state.x);
    int iy = cell_of(state.y);
    int step_x = 0, step_y = 0;
    double t_max_x = inf, t_max_y = inf, t_delta_x = inf, t_delta_y = inf;
    if (dx > 1e-15) {
      step_x = 1;
      t_delta_x = 1.0 / dx;
      t_max_x = (static_cast<double>(ix) + 1.0 - state.x) / dx;
    } else if (dx < -1e-15) {
      step_x = -1;
      t_delta_x = -1.0 / dx;
      t_max_x = (static_cast<double>(ix) - state.x) / dx;
    }
    if (dy > 1e-15) {
      step_y = 1;
      t_delta_y = 1.0 / dy;
      t_max_y = (static_cast<double>(iy) + 1.0 - state.y) / dy;
    } else if (dy < -1e-15) {
      step_y = -1;
      t_delta_y = -1.0 / dy;
      t_max_y = (static_cast<double>(iy) - state.y) / dy;
    }

    while (true) {
      double t;
      if (t_max_x < t_max_y) {
        t = t_max_x;
        t_max_x += t_delta_x;
        ix += step_x;
      } else {
        t = t_max_y;
        t_max_y += t_delta_y;
        iy += step_y;
      }
      if (t > cam.d_max || !world.in_bounds(ix, iy)) break;  // clipped
      const Cell& c = world.cell(ix, iy);
      if (c.height >= cam.height) {
        obs.depth[static_cast<std::size_t>(j)] = t;
        const Color& col = c.bands[static_cast<std::size_t>(band)];
        obs.rgb[static_cast<std::size_t>(j) * 3 + 0] = col.r;
        obs.rgb[static_cast<std::size_t>(j) * 3 + 1] = col.g;
        obs.rgb[static_cast<std::size_t>(j) * 3 + 2] = col.b;
        break;
      }
    }
  }
  return obs;
}

AgentState step(const WorldSpec& world, const AgentState& state, Action action) {
  AgentState next = state;
  switch (action) {
    case Action::Stop:
      break;
    case Action::TurnLeft:
      next.heading_deg += kTurnDeg;
      if (next.heading_deg >= 360.0) next.heading_deg -= 360.0;
      break;
    case Action::TurnRight:
      next.heading_deg -= kTurnDeg;
      if (next.heading_deg < 0.0) next.heading_deg += 360.0;
      break;
    case Action::Forward: {
      const double rad = deg_to_rad(state.heading_deg);
      const double nx = state.x + kForwardStep * std::cos(rad);
      const double ny = state.y + kForwardStep * std::sin(rad);
      const int cx = cell_of(nx);
      const int cy = cell_of(ny);
      // Any obstacle blocks motion, even one shorter than the camera.
      if (world.in_bounds(cx, cy) && world.cell(cx, cy).height == 0.0) {
        next.x = nx;
        next.y = ny;
      }
      break;
    }
  }
  return next;
}

std::int64_t OraclePlanner::index_of(int px, int py, int ph) const {
  return (static_cast<std::int64_t>(py) * lattice_n_ + px) * kHeadings + ph;
}

bool OraclePlanner::lattice_free(int px, int py) const {
  if (px < 0 || py < 0 || px >= lattice_n_ || py >= lattice_n_) return false;
  return world_->free_at(px / 4, py / 4);
}

OraclePlanner::OraclePlanner(const WorldSpec& world, double goal_x, double goal_y,
                             double stop_radius)
    : world_(&world),
      goal_x_(goal_x),
      goal_y_(goal_y),
      stop_radius_(stop_radius),
      lattice_n_(world.size * 4 + 1) {
  const std::int64_t total =
      static_cast<std::int64_t>(lattice_n_) * lattice_n_ * kHeadings;
  cost_.assign(static_cast<std::size_t>(total), -1);

  std::vector<std::int64_t> queue;
  queue.reserve(1024);

  // Seed: every free lattice position within the stop radius, any heading.
  const int lo_x = std::max(0, static_cast<int>(std::floor((goal_x - stop_radius) * 4)));
  const int hi_x = std::min(lattice_n_ - 1, static_cast<int>(std::ceil((goal_x + stop_radius) * 4)));
  const int lo_y = std::max(0, static_cast<int>(std::floor((goal_y - stop_radius) * 4)));
  const int hi_y = std::min(lattice_n_ - 1, static_cast<int>(std::ceil((goal_y + stop_radius) * 4)));
  for (int py = lo_y; py <= hi_y; ++py) {
    for (int px = lo_x; px <= hi_x; ++px) {
      if (!lattice_free(px, py)) continue;
      const double ddx = px * 0.25 - goal_x;
      const double ddy = py * 0.25 - goal_y;
      if (ddx * ddx + ddy * ddy > stop_radius * stop_radius) continue;
      for (int ph = 0; ph < kHeadings; ++ph) {
        const std::int64_t id = index_of(px, py, ph);
        cost_[static_cast<std::size_t>(id)] = 0;
        queue.push_back(id);
      }
    }
  }

  // Multi-source BFS along reversed action edges: turns are self-inverse,
  // the reverse of Forward is the 0.25 m cell behind at the same heading.
  static constexpr int kDx[4] = {1, 0, -1, 0};
  static constexpr int kDy[4] = {0, 1, 0, -1};
  for (std::size_t head = 0; head < queue.size(); ++head) {
    const std::int64_t id = queue[head];
    const int ph = static_cast<int>(id % kHeadings);
    const std::int64_t pos = id / kHeadings;
    const int px = static_cast<int>(pos % lattice_n_);
    const int py = static_cast<int>(pos / lattice_n_);
    const std::int32_t next_cost = cost_[static_cast<std::size_t>(id)] + 1;

    auto relax = [&](std::int64_t nid) {
      std::int32_t& slot = cost_[static_cast<std::size_t>(nid)];
      if (slot < 0) {
        slot = next_cost;
        queue.push_back(nid);
      }
    };

    relax(index_of(px, py, (ph + 1) % kHeadings));
    relax(index_of(px, py, (ph + kHeadings - 1) % kHeadings));
    if (ph % 6 == 0) {
      const int bx = px - kDx[ph / 6];
      const int by = py - kDy[ph / 6];
      if (lattice_free(bx, by)) relax(index_of(bx, by, ph));
    }
  }
}

std::int64_t OraclePlanner::snap_index(const AgentState& state) const {
  int px = static_cast<int>(std::llround(state.x * 4.0));
  int py = static_cast<int>(std::llround(state.y * 4.0));
  const int ph = static_cast<int>(std::llround(state.heading_deg / kTurnDeg)) % kHeadings;
  if (!lattice_free(px, py)) {
    // Rounding near a cell edge can land inside a wall; fall back to the
    // nearest free corner of the surrounding lattice square.
    double best = std::numeric_limits<double>::infinity();
    int bx = -1, by = -1;
    for (int cy = static_cast<int>(std::floor(state.y * 4.0));
         cy <= static_cast<int>(std::ceil(state.y * 4.0)); ++cy) {
      for (int cx = static_cast<int>(std::floor(state.x * 4.0));
           cx <= static_cast<int>(std::ceil(state.x * 4.0)); ++cx) {
        if (!lattice_free(cx, cy)) continue;
        const double ddx = cx * 0.25 - state.x;
        const double ddy = cy * 0.25 - state.y;
        const double d2 = ddx * ddx + ddy * ddy;
        if (d2 < best) {
          best = d2;
          bx = cx;
          by = cy;
        }
      }
    }
    if (bx < 0) {
      throw std::invalid_argument("planner: state has no free lattice point nearby");
    }
    px = bx;
    py = by;
  }
  return index_of(px, py, ph);
}

std::int32_t OraclePlanner::cost_at(const AgentState& state) const {
  const double ddx = state.x - goal_x_;
  const double ddy = state.y - goal_y_;
  if (ddx * ddx + ddy * ddy <= stop_radius_ * stop_radius_) return 0;
  return cost_[static_cast<std::size_t>(snap_index(state))];
}

Action OraclePlanner::action_at(const AgentState& state) const {
  const double ddx = state.x - goal_x_;
  const double ddy = state.y - goal_y_;
  if (ddx * ddx + ddy * ddy <= stop_radius_ * stop_radius_) return Action::Stop;

  const std::int64_t id = snap_index(state);
  if (cost_[static_cast<std::size_t>(id)] < 0) {
    throw std::runtime_error("planner: goal unreachable from state");
  }
  const int ph = static_cast<int>(id % kHeadings);
  const std::int64_t pos = id / kHeadings;
  const int px = static_cast<int>(pos % lattice_n_);
  const int py = static_cast<int>(pos / lattice_n_);

  static constexpr int kDx[4] = {1, 0, -1, 0};
  static constexpr int kDy[4] = {0, 1, 0, -1};

  // Candidates in tie-break order (Stop handled above).
  Action best_action = Action::Stop;
  std::int32_t best_cost = -1;
  auto consider = [&](Action a, std::int64_t nid) {
    const std::int32_t c = cost_[static_cast<std::size_t>(nid)];
    if (c < 0) return;
    if (best_cost < 0 || c < best_cost) {
      best_cost = c;
      best_action = a;
    }
  };
  if (ph % 6 == 0) {
    const int fx = px + kDx[ph / 6];
    const int fy = py + kDy[ph / 6];
    if (lattice_free(fx, fy)) consider(Action::Forward, index_of(fx, fy, ph));
  }
  consider(Action::TurnLeft, index_of(px, py, (ph + 1) % kHeadings));
  consider(Action::TurnRight, index_of(px, py, (ph + kHeadings - 1) % kHeadings));
  if (best_cost < 0) {
    throw std::runtime_error("planner: no successor makes progress");
  }
  return best_action;
}

Action oracle_action(const WorldSpec& world, const AgentState& state,
                     double goal_x, double goal_y, double stop_radius) {
  return OraclePlanner(world, goal_x, goal_y, stop_radius).action_at(state);
}

std::string world_to_json(const WorldSpec& world) {
  nlohmann::json doc;
  doc["format"] = "metacam.world.v1";
  doc["size"] = world.size;
  doc["seed"] = world.seed;
  auto cells = nlohmann::json::array();
  for (int y = 0; y < world.size; ++y) {
    for (int x = 0; x < world.size; ++x) {
      const Cell& c = world.cell(x, y);
      if (c.height == 0.0) continue;
      nlohmann::json jc;
      jc["x"] = x;
      jc["y"] = y;
      jc["h"] = c.height;
      auto bands = nlohmann::json::array();
      for (const Color& col : c.bands) {
        bands.push_back(nlohmann::json::array({col.r, col.g, col.b}));
      }
      jc["bands"] = std::move(bands);
      cells.push_back(std::move(jc));
    }
  }
  doc["cells"] = std::move(cells);
  auto landmarks = nlohmann::json::array();
  for (const Landmark& lm : world.landmarks) {
    landmarks.push_back({{"x", lm.cx}, {"y", lm.cy}, {"name", lm.name}});
  }
  doc["landmarks"] = std::move(landmarks);
  return doc.dump();
}

WorldSpec world_from_json(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("world JSON is malformed: ") + e.what());
  }
  if (!doc.contains("format") || doc["format"] != "metacam.world.v1") {
    throw std::runtime_error("world JSON has unsupported format '" +
                             doc.value("format", std::string("<missing>")) + "'");
  }
  WorldSpec w;
  w.size = doc.at("size").get<int>();
  w.seed = doc.at("seed").get<std::uint64_t>();
  if (w.size < 3) throw std::runtime_error("world size must be >= 3");
  w.cells.assign(static_cast<std::size_t>(w.size) * static_cast<std::size_t>(w.size), Cell{});
  for (const auto& jc : doc.at("cells")) {
    const int x = jc.at("x").get<int>();
    const int y = jc.at("y").get<int>();
    if (!w.in_bounds(x, y)) throw std::runtime_error("world JSON cell out of bounds");
    Cell& c = w.cell(x, y);
    c.height = jc.at("h").get<double>();
    const auto& bands = jc.at("bands");
    for (int k = 0; k < kBands; ++k) {
      c.bands[static_cast<std::size_t>(k)] =
          Color{bands.at(k).at(0).get<double>(), bands.at(k).at(1).get<double>(),
                bands.at(k).at(2).get<double>()};
    }
  }
  for (const auto& jl : doc.at("landmarks")) {
    w.landmarks.push_back(Landmark{jl.at("x").get<int>(), jl.at("y").get<int>(),
                                   jl.at("name").get<std::string>()});
  }
  return w;
}

}  // namespace metacam::world
