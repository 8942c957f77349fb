#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "colc/geometry.hpp"
#include "colc/scenegen.hpp"

namespace colc {

enum class SamplingMethod { kFarthest, kRandom };
enum class ScorerKind { kOracle, kHeuristic };

SamplingMethod parse_sampling_method(std::string_view name);
std::string_view to_string(SamplingMethod method);
ScorerKind parse_scorer(std::string_view name);
std::string_view to_string(ScorerKind kind);

struct SamplingPolicy {
  double tau_s = 0.5;
  double r_fg = 0.2;
  double r_bg = 0.1;
  SamplingMethod fg_method = SamplingMethod::kFarthest;
  SamplingMethod bg_method = SamplingMethod::kRandom;
  /// Foreground-plus-surroundings mode: background points within
  /// `surround_radius` of a foreground point join the foreground set.
  bool include_surroundings = false;
  double surround_radius = 2.0;

  void validate() const;
};

/// A neighbor's transmission. `element_count` is always 4 x points, since
/// each point carries x, y, z and intensity as 32-bit floats.
struct Message {
  PointCloud cloud;
  RigidTransform sender_pose;
  int frame = 0;
  std::size_t element_count = 0;
};

inline constexpr std::size_t kElementsPerPoint = 4;

/// Oracle scoring delegates to `label_foreground`; heuristic scoring uses
/// height above the estimated ground and local point density.
SaliencyScores score_points(const PointCloud& cloud, ScorerKind scorer,
                            std::optional<std::span<const BoxLabel>> boxes);

struct Partition {
  std::vector<std::size_t> fg;
  std::vector<std::size_t> bg;
};

/// fg holds indices with score strictly above `tau_s`, bg the rest, both
/// ascending.
Partition partition(const PointCloud& cloud, const SaliencyScores& scores,
                    double tau_s);

/// Greedy farthest-point sampling seeded at index 0. Ties go to the lowest
/// index; indices are returned in selection order.
std::vector<std::size_t> fps(const PointCloud& points, std::size_t count);
std::vector<std::size_t> fps(std::span<const Point3> points, std::size_t count);

/// Uniform sampling without replacement, sorted ascending.
std::vector<std::size_t> rps(std::size_t population, std::size_t count,
                             std::uint64_t seed);
inline std::vector<std::size_t> rps(const PointCloud& points, std::size_t count,
                                    std::uint64_t seed) {
  return rps(points.size(), count, seed);
}

/// ceil(ratio * n), clamped to n.
std::size_t sample_count(double ratio, std::size_t n);

Message sample_message(const PointCloud& cloud, const SaliencyScores& scores,
                       const SamplingPolicy& policy,
                       const RigidTransform& sender_pose, int frame,
                       std::uint64_t seed);

/// log2(element_count * 32 / 8), i.e. log2 of the payload in bytes.
double comm_volume(std::size_t element_count);

}  // namespace colc
