#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "colc/geometry.hpp"

namespace colc {

/// Oriented vehicle box on the ground plane.
struct BoxLabel {
  std::array<double, 3> center{};  // meters; z is the vertical center
  std::array<double, 3> size{};    // length (along yaw), width, height
  double yaw = 0.0;
  std::array<double, 2> velocity{};  // m/s, world frame

  /// Half-open containment: [-l/2, l/2) on each local axis.
  bool contains(const Point3& p) const;

  friend bool operator==(const BoxLabel&, const BoxLabel&) = default;
};

/// Re-expresses a box through a rigid transform (center and yaw move,
/// velocity is rotated).
BoxLabel transform_box(const BoxLabel& box, const RigidTransform& t);

struct SceneParams {
  int agents = 3;
  int boxes = 30;
  double bounds_x = 80.0;  // full extent, centered on the origin
  double bounds_y = 80.0;
  int frames = 6;
  double density = 10.0;  // points per m^2
  double lidar_range = 40.0;
  double ground_inner_radius = 2.0;
  double azimuth_bin_deg = 0.2;
  double frame_period_ms = 100.0;
  /// Agents start within this radius of the origin so their views overlap.
  double agent_spread = 15.0;
  double max_agent_speed = 5.0;
  double max_box_speed = 8.0;

  void validate() const;
};

struct AgentTrack {
  AgentId id = 0;
  std::vector<RigidTransform> poses;  // agent -> world, one per frame

  friend bool operator==(const AgentTrack&, const AgentTrack&) = default;
};

struct Scene {
  std::uint64_t seed = 0;
  int frames = 0;
  double bounds_x = 0.0;
  double bounds_y = 0.0;
  std::vector<AgentTrack> agents;
  /// boxes[b][f] is box b at frame f, in world coordinates.
  std::vector<std::vector<BoxLabel>> boxes;

  const AgentTrack& agent(AgentId id) const;
  /// All boxes at `frame`, world frame.
  std::vector<BoxLabel> boxes_at(int frame) const;
  /// All boxes at `frame`, expressed in the given agent's frame.
  std::vector<BoxLabel> boxes_in_agent_frame(AgentId id, int frame) const;

  friend bool operator==(const Scene&, const Scene&) = default;
};

/// Places agents and constant-velocity boxes at random inside the bounds.
/// Boxes stay inside the bounds for every frame and never cover an agent
/// origin. Throws GenerationError when placement keeps failing.
Scene generate_scene(const SceneParams& params, std::uint64_t seed);

struct LidarOptions {
  double density = 10.0;
  double range = 40.0;
  double ground_inner_radius = 2.0;
  double azimuth_bin_deg = 0.2;
};

/// Simulated sweep for one agent at one frame, in that agent's frame.
/// Box side faces facing the sensor are sampled at `density`, a ground
/// annulus is sampled uniformly, and a per-azimuth-bin first-hit buffer
/// removes anything behind the nearest box.
PointCloud simulate_lidar(const Scene& scene, AgentId agent, int frame,
                          const LidarOptions& options);

using SaliencyScores = std::vector<double>;

/// 1.0 for points inside any box, 0.0 otherwise.
SaliencyScores label_foreground(const PointCloud& cloud,
                                std::span<const BoxLabel> boxes);

nlohmann::json scene_to_json(const Scene& scene);
Scene scene_from_json(const nlohmann::json& j);

}  // namespace colc
