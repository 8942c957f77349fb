#include "colc/scenegen.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <string>

#include "colc/error.hpp"
#include "colc/random.hpp"

namespace colc {
namespace {

constexpr double kPi = std::numbers::pi;
constexpr int kMaxPlacementAttempts = 2000;
// Face samples sit this far inside the box so containment labels them.
constexpr double kFaceInset = 0.01;
constexpr double kGroundZStd = 0.02;

struct Local2 {
  double x, y;
};

Local2 to_box_local(const BoxLabel& box, double x, double y) {
  const double c = std::cos(box.yaw);
  const double s = std::sin(box.yaw);
  const double dx = x - box.center[0];
  const double dy = y - box.center[1];
  return {c * dx + s * dy, -s * dx + c * dy};
}

// Distance along the unit ray from the origin at which it enters the box
// footprint, or +inf when it misses.
double ray_box_entry(const BoxLabel& box, double dir_x, double dir_y) {
  const double c = std::cos(box.yaw);
  const double s = std::sin(box.yaw);
  const Local2 o = to_box_local(box, 0.0, 0.0);
  const double d[2] = {c * dir_x + s * dir_y, -s * dir_x + c * dir_y};
  const double org[2] = {o.x, o.y};
  const double half[2] = {box.size[0] / 2.0, box.size[1] / 2.0};
  double t_min = -std::numeric_limits<double>::infinity();
  double t_max = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 2; ++a) {
    if (d[a] == 0.0) {
      if (org[a] < -half[a] || org[a] > half[a]) {
        return std::numeric_limits<double>::infinity();
      }
      continue;
    }
    double t1 = (-half[a] - org[a]) / d[a];
    double t2 = (half[a] - org[a]) / d[a];
    if (t1 > t2) std::swap(t1, t2);
    t_min = std::max(t_min, t1);
    t_max = std::min(t_max, t2);
  }
  if (t_max < std::max(t_min, 0.0)) {
    return std::numeric_limits<double>::infinity();
  }
  return std::max(t_min, 0.0);
}

int stochastic_round(double expected, std::mt19937_64& rng) {
  const double base = std::floor(expected);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  return static_cast<int>(base) + (u(rng) < expected - base ? 1 : 0);
}

bool inside_bounds(double x, double y, double bx, double by) {
  return x >= -bx / 2.0 && x < bx / 2.0 && y >= -by / 2.0 && y < by / 2.0;
}

}  // namespace

bool BoxLabel::contains(const Point3& p) const {
  const Local2 l = to_box_local(*this, p.x, p.y);
  const double lz = p.z - center[2];
  return l.x >= -size[0] / 2.0 && l.x < size[0] / 2.0 &&
         l.y >= -size[1] / 2.0 && l.y < size[1] / 2.0 &&
         lz >= -size[2] / 2.0 && lz < size[2] / 2.0;
}

BoxLabel transform_box(const BoxLabel& box, const RigidTransform& t) {
  BoxLabel out = box;
  const Point3 c = t.apply({box.center[0], box.center[1], box.center[2], 0.0});
  out.center = {c.x, c.y, c.z};
  out.yaw = normalize_angle(box.yaw + t.yaw);
  const double cs = std::cos(t.yaw);
  const double sn = std::sin(t.yaw);
  out.velocity = {cs * box.velocity[0] - sn * box.velocity[1],
                  sn * box.velocity[0] + cs * box.velocity[1]};
  return out;
}

void SceneParams::validate() const {
  if (agents < 2) throw ConfigError("scene.agents: need at least 2 agents");
  if (boxes < 0) throw ConfigError("scene.boxes: must be >= 0");
  if (frames < 1) throw ConfigError("scene.frames: must be >= 1");
  if (!(bounds_x > 0.0) || !(bounds_y > 0.0)) {
    throw ConfigError("scene.bounds: extents must be positive");
  }
  if (!(density > 0.0)) throw ConfigError("scene.density: must be > 0");
  if (!(lidar_range > ground_inner_radius) || !(ground_inner_radius >= 0.0)) {
    throw ConfigError("scene.lidar_range: must exceed ground_inner_radius");
  }
  if (!(azimuth_bin_deg > 0.0) || azimuth_bin_deg > 90.0) {
    throw ConfigError("scene.azimuth_bin_deg: must be in (0, 90]");
  }
  if (!(frame_period_ms > 0.0)) {
    throw ConfigError("scene.frame_period_ms: must be > 0");
  }
  if (agent_spread < 0.0 || max_agent_speed < 0.0 || max_box_speed < 0.0) {
    throw ConfigError("scene: spreads and speeds must be >= 0");
  }
}

const AgentTrack& Scene::agent(AgentId id) const {
  for (const auto& a : agents) {
    if (a.id == id) return a;
  }
  throw InputError("unknown agent id " + std::to_string(id));
}

std::vector<BoxLabel> Scene::boxes_at(int frame) const {
  if (frame < 0 || frame >= frames) {
    throw InputError("frame " + std::to_string(frame) + " out of range");
  }
  std::vector<BoxLabel> out;
  out.reserve(boxes.size());
  for (const auto& track : boxes) out.push_back(track[static_cast<std::size_t>(frame)]);
  return out;
}

std::vector<BoxLabel> Scene::boxes_in_agent_frame(AgentId id, int frame) const {
  const RigidTransform to_local =
      invert(agent(id).poses.at(static_cast<std::size_t>(frame)));
  auto out = boxes_at(frame);
  for (auto& b : out) b = transform_box(b, to_local);
  return out;
}

Scene generate_scene(const SceneParams& params, std::uint64_t seed) {
  params.validate();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };
  const double dt = params.frame_period_ms / 1000.0;

  Scene scene;
  scene.seed = seed;
  scene.frames = params.frames;
  scene.bounds_x = params.bounds_x;
  scene.bounds_y = params.bounds_y;

  for (int i = 0; i < params.agents; ++i) {
    bool placed = false;
    for (int attempt = 0; attempt < kMaxPlacementAttempts && !placed; ++attempt) {
      const double r = params.agent_spread * std::sqrt(unit(rng));
      const double theta = uniform(-kPi, kPi);
      const double heading = uniform(-kPi, kPi);
      const double speed = uniform(0.0, params.max_agent_speed);
      AgentTrack track{i, {}};
      bool ok = true;
      for (int f = 0; f < params.frames && ok; ++f) {
        const double x = r * std::cos(theta) + std::cos(heading) * speed * dt * f;
        const double y = r * std::sin(theta) + std::sin(heading) * speed * dt * f;
        ok = inside_bounds(x, y, params.bounds_x, params.bounds_y);
        track.poses.push_back({normalize_angle(heading), x, y, 0.0});
      }
      // Keep agents a few meters apart at frame 0.
      for (const auto& other : scene.agents) {
        if (!ok) break;
        const double dx = other.poses[0].tx - track.poses[0].tx;
        const double dy = other.poses[0].ty - track.poses[0].ty;
        ok = dx * dx + dy * dy >= 25.0;
      }
      if (ok) {
        scene.agents.push_back(std::move(track));
        placed = true;
      }
    }
    if (!placed) {
      throw GenerationError("could not place agent " + std::to_string(i));
    }
  }

  for (int b = 0; b < params.boxes; ++b) {
    bool placed = false;
    for (int attempt = 0; attempt < kMaxPlacementAttempts && !placed; ++attempt) {
      BoxLabel box;
      box.size = {uniform(3.9, 5.0), uniform(1.7, 2.1), uniform(1.4, 1.9)};
      box.yaw = uniform(-kPi, kPi);
      const double speed = uniform(0.0, params.max_box_speed);
      box.velocity = {speed * std::cos(box.yaw), speed * std::sin(box.yaw)};
      box.center = {uniform(-params.bounds_x / 2.0, params.bounds_x / 2.0),
                    uniform(-params.bounds_y / 2.0, params.bounds_y / 2.0),
                    box.size[2] / 2.0};
      std::vector<BoxLabel> track;
      bool ok = true;
      const double radius = std::hypot(box.size[0], box.size[1]) / 2.0;
      for (int f = 0; f < params.frames && ok; ++f) {
        BoxLabel at = box;
        at.center[0] += box.velocity[0] * dt * f;
        at.center[1] += box.velocity[1] * dt * f;
        ok = inside_bounds(at.center[0], at.center[1], params.bounds_x,
                           params.bounds_y);
        for (const auto& agent : scene.agents) {
          if (!ok) break;
          const auto& pose = agent.poses[static_cast<std::size_t>(f)];
          const double d = std::hypot(pose.tx - at.center[0], pose.ty - at.center[1]);
          ok = d > radius + 1.0;
        }
        for (const auto& other : scene.boxes) {
          if (!ok) break;
          const auto& o = other[static_cast<std::size_t>(f)];
          const double other_radius = std::hypot(o.size[0], o.size[1]) / 2.0;
          ok = std::hypot(o.center[0] - at.center[0], o.center[1] - at.center[1]) >
               radius + other_radius;
        }
        track.push_back(at);
      }
      if (ok) {
        scene.boxes.push_back(std::move(track));
        placed = true;
      }
    }
    if (!placed) {
      throw GenerationError("could not place box " + std::to_string(b) +
                            " after " + std::to_string(kMaxPlacementAttempts) +
                            " attempts");
    }
  }
  return scene;
}

PointCloud simulate_lidar(const Scene& scene, AgentId agent_id, int frame,
                          const LidarOptions& options) {
  scene.agent(agent_id);  // throws for unknown ids
  if (frame < 0 || frame >= scene.frames) {
    throw InputError("simulate_lidar: frame " + std::to_string(frame) +
                     " out of range");
  }
  if (!(options.density > 0.0) || !(options.azimuth_bin_deg > 0.0) ||
      !(options.range > options.ground_inner_radius)) {
    throw ParameterError("simulate_lidar: invalid lidar options");
  }
  const std::vector<BoxLabel> boxes = scene.boxes_in_agent_frame(agent_id, frame);

  const double bin_width = options.azimuth_bin_deg * kPi / 180.0;
  const auto bins = static_cast<std::size_t>(std::ceil(2.0 * kPi / bin_width));
  auto bin_of = [&](double x, double y) {
    const auto b = static_cast<std::size_t>((std::atan2(y, x) + kPi) / bin_width);
    return std::min(b, bins - 1);
  };

  // First-hit buffer from the ray through each bin center.
  std::vector<double> hit_range(bins, std::numeric_limits<double>::infinity());
  std::vector<int> hit_box(bins, -1);
  for (std::size_t b = 0; b < bins; ++b) {
    const double theta = -kPi + (static_cast<double>(b) + 0.5) * bin_width;
    const double dx = std::cos(theta);
    const double dy = std::sin(theta);
    for (std::size_t k = 0; k < boxes.size(); ++k) {
      const double t = ray_box_entry(boxes[k], dx, dy);
      if (t < hit_range[b]) {
        hit_range[b] = t;
        hit_box[b] = static_cast<int>(k);
      }
    }
  }

  std::mt19937_64 rng(derive_seed(scene.seed, {static_cast<std::uint64_t>(agent_id),
                                               static_cast<std::uint64_t>(frame)}));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  PointCloud cloud;
  cloud.frame = agent_id;

  for (std::size_t k = 0; k < boxes.size(); ++k) {
    const BoxLabel& box = boxes[k];
    const double c = std::cos(box.yaw);
    const double s = std::sin(box.yaw);
    const double reach = std::hypot(box.size[0], box.size[1]) / 2.0;
    if (std::hypot(box.center[0], box.center[1]) - reach > options.range) continue;
    const double bottom = box.center[2] - box.size[2] / 2.0;
    // Faces: (+x, -x, +y, -y) in the box frame.
    for (int face = 0; face < 4; ++face) {
      const bool along_x = face < 2;
      const double sign = (face % 2 == 0) ? 1.0 : -1.0;
      const double nx_l = along_x ? sign : 0.0;
      const double ny_l = along_x ? 0.0 : sign;
      const double offset = (along_x ? box.size[0] : box.size[1]) / 2.0;
      const double span = along_x ? box.size[1] : box.size[0];
      const double nx = c * nx_l - s * ny_l;
      const double ny = s * nx_l + c * ny_l;
      const double fx = box.center[0] + nx * offset;
      const double fy = box.center[1] + ny * offset;
      if (nx * (0.0 - fx) + ny * (0.0 - fy) <= 0.0) continue;  // back face
      const double tx = -ny;
      const double ty = nx;
      const int n = stochastic_round(span * box.size[2] * options.density, rng);
      for (int i = 0; i < n; ++i) {
        const double u = (unit(rng) - 0.5) * (span - 2.0 * kFaceInset);
        const double v = kFaceInset + unit(rng) * (box.size[2] - 2.0 * kFaceInset);
        const double intensity = 0.2 + 0.6 * unit(rng);
        const double x = fx - nx * kFaceInset + tx * u;
        const double y = fy - ny * kFaceInset + ty * u;
        if (std::hypot(x, y) > options.range) continue;
        if (hit_box[bin_of(x, y)] != static_cast<int>(k)) continue;
        cloud.points.push_back({x, y, bottom + v, intensity});
      }
    }
  }

  const double r0 = options.ground_inner_radius;
  const double r1 = options.range;
  const int ground_n = stochastic_round(kPi * (r1 * r1 - r0 * r0) * options.density, rng);
  std::normal_distribution<double> jitter(0.0, kGroundZStd);
  for (int i = 0; i < ground_n; ++i) {
    const double r = std::sqrt(r0 * r0 + unit(rng) * (r1 * r1 - r0 * r0));
    const double theta = -kPi + 2.0 * kPi * unit(rng);
    const double z = jitter(rng);
    const double intensity = 0.3 * unit(rng);
    const double x = r * std::cos(theta);
    const double y = r * std::sin(theta);
    if (hit_range[bin_of(x, y)] <= r) continue;
    cloud.points.push_back({x, y, z, intensity});
  }
  return cloud;
}

SaliencyScores label_foreground(const PointCloud& cloud,
                                std::span<const BoxLabel> boxes) {
  SaliencyScores scores(cloud.size(), 0.0);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    for (const auto& box : boxes) {
      if (box.contains(cloud.points[i])) {
        scores[i] = 1.0;
        break;
      }
    }
  }
  return scores;
}

// ---------------------------------------------------------------------------
// JSON

nlohmann::json scene_to_json(const Scene& scene) {
  nlohmann::json j;
  j["seed"] = scene.seed;
  j["frames"] = scene.frames;
  j["bounds"] = {scene.bounds_x, scene.bounds_y};
  j["agents"] = nlohmann::json::array();
  for (const auto& a : scene.agents) {
    nlohmann::json poses = nlohmann::json::array();
    for (const auto& p : a.poses) poses.push_back({p.yaw, p.tx, p.ty, p.tz});
    j["agents"].push_back({{"id", a.id}, {"poses", poses}});
  }
  j["boxes"] = nlohmann::json::array();
  for (const auto& track : scene.boxes) {
    nlohmann::json frames = nlohmann::json::array();
    for (const auto& b : track) {
      frames.push_back({{"center", b.center},
                        {"size", b.size},
                        {"yaw", b.yaw},
                        {"velocity", b.velocity}});
    }
    j["boxes"].push_back(frames);
  }
  return j;
}

Scene scene_from_json(const nlohmann::json& j) {
  try {
    Scene scene;
    scene.seed = j.at("seed").get<std::uint64_t>();
    scene.frames = j.at("frames").get<int>();
    scene.bounds_x = j.at("bounds").at(0).get<double>();
    scene.bounds_y = j.at("bounds").at(1).get<double>();
    for (const auto& a : j.at("agents")) {
      AgentTrack track;
      track.id = a.at("id").get<int>();
      for (const auto& p : a.at("poses")) {
        track.poses.push_back({p.at(0).get<double>(), p.at(1).get<double>(),
                               p.at(2).get<double>(), p.at(3).get<double>()});
      }
      if (static_cast<int>(track.poses.size()) != scene.frames) {
        throw InputError("agent " + std::to_string(track.id) +
                         " lacks a pose for every frame");
      }
      scene.agents.push_back(std::move(track));
    }
    for (const auto& t : j.at("boxes")) {
      std::vector<BoxLabel> track;
      for (const auto& b : t) {
        BoxLabel box;
        box.center = b.at("center").get<std::array<double, 3>>();
        box.size = b.at("size").get<std::array<double, 3>>();
        box.yaw = b.at("yaw").get<double>();
        box.velocity = b.at("velocity").get<std::array<double, 2>>();
        track.push_back(box);
      }
      scene.boxes.push_back(std::move(track));
    }
    return scene;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("scene json: ") + e.what());
  }
}

}  // namespace colc
