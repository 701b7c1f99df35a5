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

#include "metacam/episodes.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <stdexcept>

#include <json.hpp>

#include "metacam/rng.hpp"

namespace metacam::episodes {

using world::Action;
using world::AgentState;
using world::Cell;
using world::Color;
using world::Landmark;
using world::OraclePlanner;
using world::WorldSpec;

const std::vector<std::string>& vocabulary() {
  static const std::vector<std::string> words = {
      "<pad>",  "go",      "forward", "turn",   "left",   "right",  "around",
      "past",   "the",     "marker",  "and",    "stop",   "at",     "end",
      "then",   "walk",    "move",    "ahead",  "straight", "until", "you",
      "reach",  "ruby",    "amber",   "jade",   "teal",   "azure",  "violet",
      "coral",  "ivory",   "red",     "orange", "yellow", "green",  "blue",
      "purple", "pink",    "white",   "black",  "gray",   "wall",   "corner",
      "hall",   "room",    "door",    "floor",  "block",  "pillar", "sign",
      "light",  "near",    "far",     "beside", "along",  "toward", "away",
      "keep",   "going",   "take",    "a",      "step",   "back",   "pause",
      "wait",
  };
  return words;
}

std::int32_t token_id(std::string_view word) {
  const auto& words = vocabulary();
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (words[i] == word) return static_cast<std::int32_t>(i);
  }
  throw std::out_of_range("word '" + std::string(word) + "' is not in the vocabulary");
}

const std::vector<LandmarkStyle>& landmark_palette() {
  static const std::vector<LandmarkStyle> palette = {
      {"ruby", {0.88, 0.08, 0.14}},  {"amber", {0.95, 0.65, 0.05}},
      {"jade", {0.05, 0.75, 0.35}},  {"teal", {0.05, 0.62, 0.62}},
      {"azure", {0.10, 0.45, 0.92}}, {"violet", {0.55, 0.15, 0.85}},
      {"coral", {0.97, 0.45, 0.40}}, {"ivory", {0.96, 0.94, 0.86}},
  };
  return palette;
}

namespace {

constexpr double kLandmarkMention = 1.0;  // meters from path to warrant a mention

const double kWallHeights[] = {0.3, 0.6, 1.0, 2.0};

struct Region {
  int x0, y0, x1, y1;  // half-open cell ranges
};

void divide(WorldSpec& w, Rng& rng, Region r) {
  const int width = r.x1 - r.x0;
  const int height = r.y1 - r.y0;
  if (width <= 2 && height <= 2) return;
  const bool vertical = width > height || (width == height && rng.uniform() < 0.5);
  if (vertical) {
    // Wall at x = wx spanning the region, one door left open.
    const int wx = r.x0 + 1 + static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(width - 2)));
    const int door = r.y0 + static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(height)));
    const double h = kWallHeights[rng.uniform_index(4)];
    for (int y = r.y0; y < r.y1; ++y) {
      if (y == door) continue;
      Cell& c = w.cell(wx, y);
      c.height = h;
      paint_wall(c, rng);
    }
    divide(w, rng, Region{r.x0, r.y0, wx, r.y1});
    divide(w, rng, Region{wx + 1, r.y0, r.x1, r.y1});
  } else {
    const int wy = r.y0 + 1 + static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(height - 2)));
    const int door = r.x0 + static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(width)));
    const double h = kWallHeights[rng.uniform_index(4)];
    for (int x = r.x0; x < r.x1; ++x) {
      if (x == door) continue;
      Cell& c = w.cell(x, wy);
      c.height = h;
      paint_wall(c, rng);
    }
    divide(w, rng, Region{r.x0, r.y0, r.x1, wy});
    divide(w, rng, Region{r.x0, wy + 1, r.x1, r.y1});
  }
}

double dist(double ax, double ay, double bx, double by) {
  return std::hypot(ax - bx, ay - by);
}

// Labels the free cells by 4-connected component; returns the component count.
int label_components(const WorldSpec& w, std::vector<int>& label) {
  label.assign(static_cast<std::size_t>(w.size) * static_cast<std::size_t>(w.size), -1);
  int components = 0;
  for (int sy = 0; sy < w.size; ++sy) {
    for (int sx = 0; sx < w.size; ++sx) {
      if (w.cell(sx, sy).height > 0.0 || label[static_cast<std::size_t>(sy * w.size + sx)] >= 0) {
        continue;
      }
      std::vector<std::pair<int, int>> stack{{sx, sy}};
      label[static_cast<std::size_t>(sy * w.size + sx)] = components;
      while (!stack.empty()) {
        const auto [x, y] = stack.back();
        stack.pop_back();
        static constexpr int kDx[] = {1, -1, 0, 0};
        static constexpr int kDy[] = {0, 0, 1, -1};
        for (int d = 0; d < 4; ++d) {
          const int nx = x + kDx[d], ny = y + kDy[d];
          if (!w.in_bounds(nx, ny) || w.cell(nx, ny).height > 0.0) continue;
          int& slot = label[static_cast<std::size_t>(ny * w.size + nx)];
          if (slot < 0) {
            slot = components;
            stack.push_back({nx, ny});
          }
        }
      }
      ++components;
    }
  }
  return components;
}

int direction_of(double dx, double dy) {
  // Cardinal headings only: 0 (+x), 90 (+y), 180 (-x), 270 (-y).
  if (std::abs(dx) > std::abs(dy)) return dx > 0 ? 0 : 180;
  return dy > 0 ? 90 : 270;
}

}  // namespace

WorldSpec generate_world(std::uint64_t seed, int size) {
  if (size < 8) {
    throw std::invalid_argument("world size " + std::to_string(size) + " below 8");
  }
  Rng rng(seed);
  WorldSpec w;
  w.size = size;
  w.seed = seed;
  w.cells.assign(static_cast<std::size_t>(size) * static_cast<std::size_t>(size), Cell{});
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      if (x == 0 || y == 0 || x == size - 1 || y == size - 1) {
        Cell& c = w.cell(x, y);
        c.height = world::kHMax;
        paint_wall(c, rng);
      }
    }
  }

  divide(w, rng, Region{1, 1, size - 1, size - 1});

  // Extra doorways turn the division tree into a graph with loops; removing
  // walls can only add connectivity.
  for (int y = 1; y < size - 1; ++y) {
    for (int x = 1; x < size - 1; ++x) {
      if (w.cell(x, y).height > 0.0 && rng.uniform() < 0.10) {
        w.cell(x, y) = Cell{};
      }
    }
  }

  // A doorway left by one wall can be sealed by a later perpendicular wall.
  // Knock out walls that touch two components (or extend into one) until
  // every free cell is mutually reachable.
  std::vector<int> label;
  int components = label_components(w, label);
  while (components > 1) {
    std::vector<std::pair<int, int>> bridges, extensions;
    for (int y = 1; y < size - 1; ++y) {
      for (int x = 1; x < size - 1; ++x) {
        if (w.cell(x, y).height == 0.0) continue;
        int first = -1;
        bool bridge = false, touches = false;
        static constexpr int kDx[] = {1, -1, 0, 0};
        static constexpr int kDy[] = {0, 0, 1, -1};
        for (int d = 0; d < 4; ++d) {
          const int nx = x + kDx[d], ny = y + kDy[d];
          if (!w.in_bounds(nx, ny) || w.cell(nx, ny).height > 0.0) continue;
          const int l = label[static_cast<std::size_t>(ny * size + nx)];
          touches = true;
          if (first < 0) first = l;
          else if (l != first) bridge = true;
        }
        if (bridge) bridges.push_back({x, y});
        else if (touches) extensions.push_back({x, y});
      }
    }
    auto& pool = bridges.empty() ? extensions : bridges;
    const auto [bx, by] = pool[rng.uniform_index(pool.size())];
    w.cell(bx, by) = Cell{};
    components = label_components(w, label);
  }

  // Landmarks: full-height so every camera height can see them, spread out,
  // each adjacent to free space so they are actually observable.
  std::vector<std::pair<int, int>> candidates;
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      if (w.cell(x, y).height == 0.0) continue;
      const bool exposed = w.free_at(x + 1, y) || w.free_at(x - 1, y) ||
                           w.free_at(x, y + 1) || w.free_at(x, y - 1);
      if (exposed) candidates.push_back({x, y});
    }
  }
  for (std::size_t i = candidates.size(); i > 1; --i) {
    std::swap(candidates[i - 1], candidates[rng.uniform_index(i)]);
  }
  const std::size_t want = 4 + rng.uniform_index(5);  // 4..8
  const auto& palette = landmark_palette();
  std::vector<std::size_t> styles(palette.size());
  for (std::size_t i = 0; i < styles.size(); ++i) styles[i] = i;
  for (std::size_t i = styles.size(); i > 1; --i) {
    std::swap(styles[i - 1], styles[rng.uniform_index(i)]);
  }
  for (const auto& [cx, cy] : candidates) {
    if (w.landmarks.size() >= want) break;
    bool spread = true;
    for (const Landmark& lm : w.landmarks) {
      if (dist(cx, cy, lm.cx, lm.cy) < 3.0) {
        spread = false;
        break;
      }
    }
    if (!spread) continue;
    const LandmarkStyle& style = palette[styles[w.landmarks.size()]];
    Cell& c = w.cell(cx, cy);
    c.height = world::kHMax;
    paint_landmark(c, style.color);
    w.landmarks.push_back(Landmark{cx, cy, style.name});
  }
  return w;
}

std::vector<std::int32_t> instruction_tokens(
    const WorldSpec& w, double start_heading_deg,
    const std::vector<std::pair<double, double>>& path) {
  static const std::int32_t kGo = token_id("go");
  static const std::int32_t kForwardTok = token_id("forward");
  static const std::int32_t kTurn = token_id("turn");
  static const std::int32_t kLeft = token_id("left");
  static const std::int32_t kRight = token_id("right");
  static const std::int32_t kAround = token_id("around");
  static const std::int32_t kPast = token_id("past");
  static const std::int32_t kThe = token_id("the");
  static const std::int32_t kMarker = token_id("marker");
  static const std::int32_t kAnd = token_id("and");
  static const std::int32_t kStop = token_id("stop");

  // Straight segments: group consecutive path steps by cardinal direction.
  struct Segment {
    int dir;
    std::size_t first, last;  // inclusive path-point range
  };
  std::vector<Segment> segments;
  for (std::size_t i = 0; i + 1 < path.size(); ++i) {
    const int d = direction_of(path[i + 1].first - path[i].first,
                               path[i + 1].second - path[i].second);
    if (!segments.empty() && segments.back().dir == d) {
      segments.back().last = i + 1;
    } else {
      segments.push_back(Segment{d, i, i + 1});
    }
  }

  std::vector<bool> mentioned(w.landmarks.size(), false);
  std::vector<std::int32_t> tokens;
  int prev_dir = static_cast<int>(std::llround(start_heading_deg / 90.0)) * 90 % 360;
  for (const Segment& seg : segments) {
    const int delta = ((seg.dir - prev_dir) % 360 + 360) % 360;
    if (delta == 90) {
      tokens.insert(tokens.end(), {kTurn, kLeft});
    } else if (delta == 270) {
      tokens.insert(tokens.end(), {kTurn, kRight});
    } else if (delta == 180) {
      tokens.insert(tokens.end(), {kTurn, kAround});
    }
    prev_dir = seg.dir;
    tokens.insert(tokens.end(), {kGo, kForwardTok});
    // Landmarks first coming within mention range during this segment,
    // ordered by the point where they first do.
    for (std::size_t p = seg.first; p <= seg.last; ++p) {
      for (std::size_t li = 0; li < w.landmarks.size(); ++li) {
        if (mentioned[li]) continue;
        const Landmark& lm = w.landmarks[li];
        if (dist(path[p].first, path[p].second, lm.cx + 0.5, lm.cy + 0.5) <=
            kLandmarkMention) {
          mentioned[li] = true;
          tokens.insert(tokens.end(), {kPast, kThe, token_id(lm.name), kMarker});
        }
      }
    }
  }
  tokens.insert(tokens.end(), {kAnd, kStop});
  return tokens;
}

namespace {

struct Rollout {
  std::vector<AgentState> states;  // start + one per action
  std::vector<Action> actions;
};

Rollout roll_oracle(const WorldSpec& w, const OraclePlanner& planner,
                    const AgentState& start, int max_actions = 4 * kMaxEpisodeActions) {
  Rollout r;
  r.states.push_back(start);
  AgentState cur = start;
  for (int i = 0; i < max_actions; ++i) {
    const Action a = planner.action_at(cur);
    if (a == Action::Stop) return r;
    cur = world::step(w, cur, a);
    r.actions.push_back(a);
    r.states.push_back(cur);
  }
  throw std::runtime_error("oracle rollout exceeded the action budget");
}

std::vector<std::pair<double, double>> dedup_positions(
    const std::vector<AgentState>& states) {
  std::vector<std::pair<double, double>> path;
  for (const AgentState& s : states) {
    if (path.empty() || path.back().first != s.x || path.back().second != s.y) {
      path.push_back({s.x, s.y});
    }
  }
  return path;
}

std::vector<std::pair<int, int>> free_cells(const WorldSpec& w) {
  std::vector<std::pair<int, int>> cells;
  for (int y = 0; y < w.size; ++y) {
    for (int x = 0; x < w.size; ++x) {
      if (w.cell(x, y).height == 0.0) cells.push_back({x, y});
    }
  }
  return cells;
}

}  // namespace

Episode generate_episode(const WorldSpec& w, std::uint64_t seed) {
  Rng rng(seed ^ (w.seed * 0x9e3779b97f4a7c15ULL));
  const std::vector<std::pair<int, int>> cells = free_cells(w);
  if (cells.empty()) throw std::invalid_argument("world has no free cells");

  for (int attempt = 0; attempt < 200; ++attempt) {
    const auto [sx, sy] = cells[rng.uniform_index(cells.size())];
    const auto [gx, gy] = cells[rng.uniform_index(cells.size())];
    const double heading = 90.0 * static_cast<double>(rng.uniform_index(4));
    const AgentState start{sx + 0.5, sy + 0.5, heading};
    const double goal_x = gx + 0.5, goal_y = gy + 0.5;

    if (dist(start.x, start.y, goal_x, goal_y) <= kMinStartGoalSeparation) {
      continue;
    }
    const OraclePlanner planner(w, goal_x, goal_y);
    const std::int32_t cost = planner.cost_at(start);
    if (cost < kMinEpisodeActions || cost > kMaxEpisodeActions) continue;

    const Rollout rollout = roll_oracle(w, planner, start);
    const auto path = dedup_positions(rollout.states);
    double length = 0.0;
    for (std::size_t i = 0; i + 1 < path.size(); ++i) {
      length += dist(path[i].first, path[i].second, path[i + 1].first,
                     path[i + 1].second);
    }
    const std::vector<std::int32_t> tokens = instruction_tokens(w, heading, path);
    if (tokens.size() > kMaxInstructionLen || tokens.size() < 3) continue;

    Episode ep;
    ep.seed = seed;
    ep.start = start;
    ep.goal_x = goal_x;
    ep.goal_y = goal_y;
    ep.tokens = tokens;
    ep.path = path;
    ep.reference_length = length;
    return ep;
  }
  throw std::runtime_error("episode sampling failed after 200 attempts (seed " +
                           std::to_string(seed) + ")");
}

std::vector<AgentState> reference_states(const WorldSpec& w, const Episode& ep) {
  const OraclePlanner planner(w, ep.goal_x, ep.goal_y);
  return roll_oracle(w, planner, ep.start).states;
}

std::vector<PairedFrame> sample_paired_frames(const WorldSpec& w,
                                              const Episode& ep,
                                              const world::CameraConfig& ref_cam,
                                              const world::CameraConfig& tgt_cam,
                                              int k, std::uint64_t seed) {
  if (k < 1) throw std::invalid_argument("paired frames: k must be >= 1");
  const std::vector<AgentState> states = reference_states(w, ep);
  if (static_cast<std::size_t>(k) > states.size()) {
    throw std::invalid_argument("paired frames: k = " + std::to_string(k) +
                                " exceeds rollout length " +
                                std::to_string(states.size()));
  }
  // Distinct indices via partial Fisher-Yates, then path order.
  std::vector<std::size_t> idx(states.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  Rng rng(seed);
  for (int i = 0; i < k; ++i) {
    const std::size_t j = i + rng.uniform_index(idx.size() - static_cast<std::size_t>(i));
    std::swap(idx[static_cast<std::size_t>(i)], idx[j]);
  }
  idx.resize(static_cast<std::size_t>(k));
  std::sort(idx.begin(), idx.end());

  std::vector<PairedFrame> frames;
  frames.reserve(idx.size());
  for (std::size_t i : idx) {
    PairedFrame f;
    f.state = states[i];
    f.reference = world::raycast(w, states[i], ref_cam);
    f.target = world::raycast(w, states[i], tgt_cam);
    frames.push_back(std::move(f));
  }
  return frames;
}

std::vector<std::size_t> Dataset::split_indices(std::string_view split) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < episodes.size(); ++i) {
    if (episodes[i].split == split) out.push_back(i);
  }
  return out;
}

Dataset make_standard_dataset(std::uint64_t seed, int n_train, int n_val_seen,
                              int n_val_unseen, int n_train_worlds,
                              int n_unseen_worlds, int world_size) {
  Rng rng(seed);
  Dataset ds;
  ds.vocab = vocabulary();
  for (int i = 0; i < n_train_worlds + n_unseen_worlds; ++i) {
    ds.worlds.push_back(generate_world(rng.next_u64(), world_size));
  }

  std::int32_t next_id = 0;
  auto emit = [&](const char* split, int count, int world_lo, int world_count) {
    for (int i = 0; i < count; ++i) {
      const std::int32_t wid = world_lo + (i % world_count);
      Episode ep = generate_episode(ds.worlds[static_cast<std::size_t>(wid)],
                                    rng.next_u64());
      ep.id = next_id++;
      ep.world_id = wid;
      ep.split = split;
      ds.episodes.push_back(std::move(ep));
    }
  };
  emit("train", n_train, 0, n_train_worlds);
  emit("val_seen", n_val_seen, 0, n_train_worlds);
  emit("val_unseen", n_val_unseen, n_train_worlds, n_unseen_worlds);
  return ds;
}

namespace {

nlohmann::json episode_to_json(const Episode& ep) {
  nlohmann::json j;
  j["id"] = ep.id;
  j["world"] = ep.world_id;
  j["seed"] = ep.seed;
  j["split"] = ep.split;
  j["start"] = {{"x", ep.start.x}, {"y", ep.start.y}, {"heading", ep.start.heading_deg}};
  j["goal"] = nlohmann::json::array({ep.goal_x, ep.goal_y});
  j["tokens"] = ep.tokens;
  auto path = nlohmann::json::array();
  for (const auto& [x, y] : ep.path) path.push_back(nlohmann::json::array({x, y}));
  j["path"] = std::move(path);
  j["length"] = ep.reference_length;
  return j;
}

Episode episode_from_json(const nlohmann::json& j) {
  Episode ep;
  ep.id = j.at("id").get<std::int32_t>();
  ep.world_id = j.at("world").get<std::int32_t>();
  ep.seed = j.at("seed").get<std::uint64_t>();
  ep.split = j.at("split").get<std::string>();
  ep.start.x = j.at("start").at("x").get<double>();
  ep.start.y = j.at("start").at("y").get<double>();
  ep.start.heading_deg = j.at("start").at("heading").get<double>();
  ep.goal_x = j.at("goal").at(0).get<double>();
  ep.goal_y = j.at("goal").at(1).get<double>();
  ep.tokens = j.at("tokens").get<std::vector<std::int32_t>>();
  for (const auto& p : j.at("path")) {
    ep.path.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
  }
  ep.reference_length = j.at("length").get<double>();
  return ep;
}

}  // namespace

void save_dataset(const Dataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for write");
  nlohmann::json header;
  header["format"] = "metacam.dataset.v1";
  header["vocabulary"] = ds.vocab;
  auto worlds = nlohmann::json::array();
  for (const WorldSpec& w : ds.worlds) {
    worlds.push_back(nlohmann::json::parse(world_to_json(w)));
  }
  header["worlds"] = std::move(worlds);
  out << header.dump() << '\n';
  for (const Episode& ep : ds.episodes) {
    out << episode_to_json(ep).dump() << '\n';
  }
  if (!out) throw std::runtime_error("short write to '" + path + "'");
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open dataset '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) return Dataset{};  // empty file, empty dataset

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("dataset '" + path + "' line 1: " + e.what());
  }
  if (!header.contains("format") || header["format"] != "metacam.dataset.v1") {
    throw std::runtime_error("dataset '" + path + "' has unsupported format '" +
                             header.value("format", std::string("<missing>")) + "'");
  }
  Dataset ds;
  ds.vocab = header.at("vocabulary").get<std::vector<std::string>>();
  for (const auto& jw : header.at("worlds")) {
    ds.worlds.push_back(world::world_from_json(jw.dump()));
  }
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      Episode ep = episode_from_json(nlohmann::json::parse(line));
      if (ep.world_id < 0 ||
          static_cast<std::size_t>(ep.world_id) >= ds.worlds.size()) {
        throw std::runtime_error("world id out of range");
      }
      ds.episodes.push_back(std::move(ep));
    } catch (const std::exception& e) {
      throw std::runtime_error("dataset '" + path + "' line " +
                               std::to_string(line_no) + ": " + e.what());
    }
  }
  return ds;
}

}  // namespace metacam::episodes
