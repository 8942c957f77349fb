#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "colc/faps.hpp"
#include "colc/fusion.hpp"
#include "colc/pillars.hpp"
#include "colc/scenegen.hpp"

namespace colc {

struct ChannelParams {
  double pose_noise_m = 0.0;    // std of tx, ty noise
  double pose_noise_rad = 0.0;  // std of yaw noise
  double latency_ms = 0.0;
  bool icp = false;
  int icp_max_iters = 30;
  double icp_tol = 1e-6;
  double icp_max_dist = 0.0;  // <= 0: no correspondence gate
};

struct CodebookParams {
  std::size_t K = 128;
  int iters = 20;
  int train_scenes = 8;
  bool reserve_empty_code = true;
  /// Load instead of training when set.
  std::optional<std::filesystem::path> path;
};

struct LossWeights {
  double beta = 0.25;
  double lambda = 10.0;
  double gamma1 = 1000.0;
  double gamma2 = 10.0;
};

struct SweepLists {
  std::vector<double> r_bg;
  std::vector<double> pose_noise_m;
  std::vector<double> latency_ms;
};

struct ScenarioConfig {
  std::string name = "default";
  std::uint64_t seed = 1;
  SceneParams scene;
  int eval_scenes = 20;
  /// Rows are produced for the last `eval_frames` frames of each scene.
  int eval_frames = 1;
  GridSpec grid;
  PatchLayout patch;
  SamplingPolicy sampling;
  ScorerKind scorer = ScorerKind::kOracle;
  CodebookParams codebook;
  double tau_o = 0.5;
  ChannelParams channel;
  LossWeights loss;
  FusionSwitches ablation;
  /// When false the wall_ms column is written as 0 so output is
  /// reproducible byte for byte.
  bool record_wall_time = false;
  SweepLists sweep;

  /// Latency rounded to whole frames.
  int latency_frames() const;
  int latency_frames(double latency_ms) const;
  LidarOptions lidar() const;

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

/// Unknown keys are rejected so typos do not silently fall back to
/// defaults.
ScenarioConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ScenarioConfig& config);
ScenarioConfig load_config(const std::filesystem::path& path);

}  // namespace colc
