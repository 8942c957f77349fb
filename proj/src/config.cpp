#include "colc/config.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <set>
#include <string>

#include "colc/error.hpp"

namespace colc {
namespace {

// Reads fields out of one JSON object, remembering which keys were used so
// leftovers can be reported.
class Section {
 public:
  Section(const nlohmann::json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + ": expected an object");
  }

  template <typename T>
  void read(const char* key, T& out) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->template get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError(field(key) + ": wrong type");
    }
  }

  bool has(const char* key) const { return j_.contains(key); }

  Section child(const char* key) {
    seen_.insert(key);
    return Section(j_.at(key), field(key));
  }

  std::string field(const char* key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) throw ConfigError(field(key.c_str()) + ": unknown field");
    }
  }

 private:
  std::string where() const { return path_.empty() ? "config" : path_; }

  const nlohmann::json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void require(bool ok, const std::string& field, const std::string& message) {
  if (!ok) throw ConfigError(field + ": " + message);
}

}  // namespace

int ScenarioConfig::latency_frames(double latency_ms) const {
  return static_cast<int>(std::lround(latency_ms / scene.frame_period_ms));
}

int ScenarioConfig::latency_frames() const { return latency_frames(channel.latency_ms); }

LidarOptions ScenarioConfig::lidar() const {
  LidarOptions o;
  o.density = scene.density;
  o.range = scene.lidar_range;
  o.ground_inner_radius = scene.ground_inner_radius;
  o.azimuth_bin_deg = scene.azimuth_bin_deg;
  return o;
}

void ScenarioConfig::validate() const {
  scene.validate();
  require(eval_scenes >= 1, "eval_scenes", "must be >= 1");
  require(eval_frames >= 1, "eval_frames", "must be >= 1");
  try {
    grid.validate();
  } catch (const ParameterError& e) {
    throw ConfigError(std::string("grid: ") + e.what());
  }
  require(patch.p >= 1, "patch", "must be >= 1");
  require(grid.H % patch.p == 0, "grid.H",
          "must be divisible by patch edge " + std::to_string(patch.p));
  require(grid.W % patch.p == 0, "grid.W",
          "must be divisible by patch edge " + std::to_string(patch.p));
  try {
    sampling.validate();
  } catch (const ParameterError& e) {
    throw ConfigError(e.what());
  }
  require(codebook.K >= 1, "codebook.K", "must be >= 1");
  require(codebook.iters >= 1, "codebook.iters", "must be >= 1");
  require(codebook.path.has_value() || codebook.train_scenes >= 1,
          "codebook.train_scenes", "must be >= 1 when no codebook path is given");
  require(tau_o >= 0.0 && tau_o <= 1.0, "tau_o", "must be in [0, 1]");
  require(channel.pose_noise_m >= 0.0, "channel.pose_noise_m", "must be >= 0");
  require(channel.pose_noise_rad >= 0.0, "channel.pose_noise_rad", "must be >= 0");
  require(channel.latency_ms >= 0.0, "channel.latency_ms", "must be >= 0");
  require(channel.icp_max_iters >= 1, "channel.icp_max_iters", "must be >= 1");
  require(channel.icp_tol >= 0.0, "channel.icp_tol", "must be >= 0");

  double max_latency = channel.latency_ms;
  for (const double v : sweep.latency_ms) {
    require(v >= 0.0, "sweep.latency_ms", "entries must be >= 0");
    max_latency = std::max(max_latency, v);
  }
  require(scene.frames >= eval_frames + latency_frames(max_latency), "scene.frames",
          "must be >= eval_frames + latency in frames (" +
              std::to_string(eval_frames + latency_frames(max_latency)) + ")");
  for (const double v : sweep.r_bg) {
    require(v > 0.0 && v <= 1.0, "sweep.r_bg", "entries must be in (0, 1]");
  }
  for (const double v : sweep.pose_noise_m) {
    require(v >= 0.0, "sweep.pose_noise_m", "entries must be >= 0");
  }
}

ScenarioConfig config_from_json(const nlohmann::json& j) {
  ScenarioConfig c;
  Section root(j, "");
  root.read("name", c.name);
  root.read("seed", c.seed);
  root.read("eval_scenes", c.eval_scenes);
  root.read("eval_frames", c.eval_frames);
  root.read("tau_o", c.tau_o);
  root.read("record_wall_time", c.record_wall_time);

  if (root.has("scene")) {
    Section s = root.child("scene");
    s.read("agents", c.scene.agents);
    s.read("boxes", c.scene.boxes);
    std::array<double, 2> bounds{c.scene.bounds_x, c.scene.bounds_y};
    s.read("bounds", bounds);
    c.scene.bounds_x = bounds[0];
    c.scene.bounds_y = bounds[1];
    s.read("frames", c.scene.frames);
    s.read("density", c.scene.density);
    s.read("lidar_range", c.scene.lidar_range);
    s.read("ground_inner_radius", c.scene.ground_inner_radius);
    s.read("azimuth_bin_deg", c.scene.azimuth_bin_deg);
    s.read("frame_period_ms", c.scene.frame_period_ms);
    s.read("agent_spread", c.scene.agent_spread);
    s.read("max_agent_speed", c.scene.max_agent_speed);
    s.read("max_box_speed", c.scene.max_box_speed);
    s.finish();
  }
  if (root.has("grid")) {
    Section g = root.child("grid");
    g.read("x_min", c.grid.x_min);
    g.read("y_min", c.grid.y_min);
    g.read("cell", c.grid.cell);
    g.read("H", c.grid.H);
    g.read("W", c.grid.W);
    g.read("C", c.grid.C);
    g.finish();
  }
  root.read("patch", c.patch.p);
  if (root.has("sampling")) {
    Section s = root.child("sampling");
    s.read("tau_s", c.sampling.tau_s);
    s.read("r_fg", c.sampling.r_fg);
    s.read("r_bg", c.sampling.r_bg);
    std::string fg = std::string(to_string(c.sampling.fg_method));
    std::string bg = std::string(to_string(c.sampling.bg_method));
    std::string scorer = std::string(to_string(c.scorer));
    s.read("fg_method", fg);
    s.read("bg_method", bg);
    s.read("scorer", scorer);
    s.read("include_surroundings", c.sampling.include_surroundings);
    s.read("surround_radius", c.sampling.surround_radius);
    s.finish();
    try {
      c.sampling.fg_method = parse_sampling_method(fg);
    } catch (const ParameterError& e) {
      throw ConfigError(std::string("sampling.fg_method: ") + e.what());
    }
    try {
      c.sampling.bg_method = parse_sampling_method(bg);
    } catch (const ParameterError& e) {
      throw ConfigError(std::string("sampling.bg_method: ") + e.what());
    }
    try {
      c.scorer = parse_scorer(scorer);
    } catch (const ParameterError& e) {
      throw ConfigError(std::string("sampling.scorer: ") + e.what());
    }
  }
  if (root.has("codebook")) {
    Section s = root.child("codebook");
    s.read("K", c.codebook.K);
    s.read("iters", c.codebook.iters);
    s.read("train_scenes", c.codebook.train_scenes);
    s.read("reserve_empty_code", c.codebook.reserve_empty_code);
    std::string path;
    s.read("path", path);
    if (!path.empty()) c.codebook.path = path;
    s.finish();
  }
  if (root.has("channel")) {
    Section s = root.child("channel");
    s.read("pose_noise_m", c.channel.pose_noise_m);
    s.read("pose_noise_rad", c.channel.pose_noise_rad);
    s.read("latency_ms", c.channel.latency_ms);
    s.read("icp", c.channel.icp);
    s.read("icp_max_iters", c.channel.icp_max_iters);
    s.read("icp_tol", c.channel.icp_tol);
    s.read("icp_max_dist", c.channel.icp_max_dist);
    s.finish();
  }
  if (root.has("loss")) {
    Section s = root.child("loss");
    s.read("beta", c.loss.beta);
    s.read("lambda", c.loss.lambda);
    s.read("gamma1", c.loss.gamma1);
    s.read("gamma2", c.loss.gamma2);
    s.finish();
  }
  if (root.has("ablation")) {
    Section s = root.child("ablation");
    s.read("sef", c.ablation.sparse_early_fusion);
    s.read("pc", c.ablation.completion);
    s.read("acf", c.ablation.adaptive_fusion);
    s.finish();
  }
  if (root.has("sweep")) {
    Section s = root.child("sweep");
    s.read("r_bg", c.sweep.r_bg);
    s.read("pose_noise_m", c.sweep.pose_noise_m);
    s.read("latency_ms", c.sweep.latency_ms);
    s.finish();
  }
  root.finish();
  c.validate();
  return c;
}

nlohmann::json config_to_json(const ScenarioConfig& c) {
  nlohmann::json j;
  j["name"] = c.name;
  j["seed"] = c.seed;
  j["eval_scenes"] = c.eval_scenes;
  j["eval_frames"] = c.eval_frames;
  j["tau_o"] = c.tau_o;
  j["record_wall_time"] = c.record_wall_time;
  j["scene"] = {{"agents", c.scene.agents},
                {"boxes", c.scene.boxes},
                {"bounds", {c.scene.bounds_x, c.scene.bounds_y}},
                {"frames", c.scene.frames},
                {"density", c.scene.density},
                {"lidar_range", c.scene.lidar_range},
                {"ground_inner_radius", c.scene.ground_inner_radius},
                {"azimuth_bin_deg", c.scene.azimuth_bin_deg},
                {"frame_period_ms", c.scene.frame_period_ms},
                {"agent_spread", c.scene.agent_spread},
                {"max_agent_speed", c.scene.max_agent_speed},
                {"max_box_speed", c.scene.max_box_speed}};
  j["grid"] = {{"x_min", c.grid.x_min}, {"y_min", c.grid.y_min},
               {"cell", c.grid.cell},   {"H", c.grid.H},
               {"W", c.grid.W},         {"C", c.grid.C}};
  j["patch"] = c.patch.p;
  j["sampling"] = {{"tau_s", c.sampling.tau_s},
                   {"r_fg", c.sampling.r_fg},
                   {"r_bg", c.sampling.r_bg},
                   {"fg_method", to_string(c.sampling.fg_method)},
                   {"bg_method", to_string(c.sampling.bg_method)},
                   {"scorer", to_string(c.scorer)},
                   {"include_surroundings", c.sampling.include_surroundings},
                   {"surround_radius", c.sampling.surround_radius}};
  j["codebook"] = {{"K", c.codebook.K},
                   {"iters", c.codebook.iters},
                   {"train_scenes", c.codebook.train_scenes},
                   {"reserve_empty_code", c.codebook.reserve_empty_code}};
  if (c.codebook.path) j["codebook"]["path"] = c.codebook.path->string();
  j["channel"] = {{"pose_noise_m", c.channel.pose_noise_m},
                  {"pose_noise_rad", c.channel.pose_noise_rad},
                  {"latency_ms", c.channel.latency_ms},
                  {"icp", c.channel.icp},
                  {"icp_max_iters", c.channel.icp_max_iters},
                  {"icp_tol", c.channel.icp_tol},
                  {"icp_max_dist", c.channel.icp_max_dist}};
  j["loss"] = {{"beta", c.loss.beta},
               {"lambda", c.loss.lambda},
               {"gamma1", c.loss.gamma1},
               {"gamma2", c.loss.gamma2}};
  j["ablation"] = {{"sef", c.ablation.sparse_early_fusion},
                   {"pc", c.ablation.completion},
                   {"acf", c.ablation.adaptive_fusion}};
  j["sweep"] = {{"r_bg", c.sweep.r_bg},
                {"pose_noise_m", c.sweep.pose_noise_m},
                {"latency_ms", c.sweep.latency_ms}};
  return j;
}

ScenarioConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": invalid JSON: " + e.what());
  }
  try {
    return config_from_json(j);
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

}  // namespace colc
