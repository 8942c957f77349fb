#include "colc/faps.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>
#include <unordered_map>

#include "colc/error.hpp"
#include "colc/random.hpp"
#include "colc/spatial_index.hpp"

namespace colc {
namespace {

// Heuristic scorer shape: logistic in height above ground, scaled by a
// saturating local-density term.
constexpr double kHeightMid = 0.4;
constexpr double kHeightScale = 0.08;
constexpr double kDensityRadius = 0.5;
constexpr double kDensityHalf = 4.0;
constexpr double kGroundPercentile = 0.05;

std::int64_t cell_key(std::int64_t ix, std::int64_t iy, std::int64_t iz) {
  return (ix * 73856093) ^ (iy * 19349663) ^ (iz * 83492791);
}

SaliencyScores heuristic_scores(const PointCloud& cloud) {
  const std::size_t n = cloud.size();
  SaliencyScores scores(n, 0.0);
  if (n == 0) return scores;

  std::vector<double> zs(n);
  for (std::size_t i = 0; i < n; ++i) zs[i] = cloud.points[i].z;
  const auto k = static_cast<std::size_t>(kGroundPercentile * static_cast<double>(n - 1));
  std::nth_element(zs.begin(), zs.begin() + static_cast<std::ptrdiff_t>(k), zs.end());
  const double ground_z = zs[k];

  auto cell_of = [](double v) {
    return static_cast<std::int64_t>(std::floor(v / kDensityRadius));
  };
  std::unordered_map<std::int64_t, std::vector<std::size_t>> buckets;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& p = cloud.points[i];
    buckets[cell_key(cell_of(p.x), cell_of(p.y), cell_of(p.z))].push_back(i);
  }
  const double r2 = kDensityRadius * kDensityRadius;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& p = cloud.points[i];
    const auto cx = cell_of(p.x), cy = cell_of(p.y), cz = cell_of(p.z);
    int neighbors = 0;
    for (std::int64_t dx = -1; dx <= 1; ++dx) {
      for (std::int64_t dy = -1; dy <= 1; ++dy) {
        for (std::int64_t dz = -1; dz <= 1; ++dz) {
          const auto it = buckets.find(cell_key(cx + dx, cy + dy, cz + dz));
          if (it == buckets.end()) continue;
          for (const auto j : it->second) {
            if (j != i && squared_distance(p, cloud.points[j]) <= r2) ++neighbors;
          }
        }
      }
    }
    const double height = p.z - ground_z;
    const double s_height = 1.0 / (1.0 + std::exp(-(height - kHeightMid) / kHeightScale));
    const double s_density = neighbors / (neighbors + kDensityHalf);
    scores[i] = std::clamp(s_height * (0.5 + 0.5 * s_density), 0.0, 1.0);
  }
  return scores;
}

std::vector<Point3> gather(const PointCloud& cloud,
                           std::span<const std::size_t> indices) {
  std::vector<Point3> out;
  out.reserve(indices.size());
  for (const auto i : indices) out.push_back(cloud.points[i]);
  return out;
}

}  // namespace

SamplingMethod parse_sampling_method(std::string_view name) {
  if (name == "farthest" || name == "fps") return SamplingMethod::kFarthest;
  if (name == "random" || name == "rps") return SamplingMethod::kRandom;
  throw ParameterError("unknown sampling method \"" + std::string(name) + "\"");
}

std::string_view to_string(SamplingMethod method) {
  return method == SamplingMethod::kFarthest ? "farthest" : "random";
}

ScorerKind parse_scorer(std::string_view name) {
  if (name == "oracle") return ScorerKind::kOracle;
  if (name == "heuristic") return ScorerKind::kHeuristic;
  throw ParameterError("unknown scorer \"" + std::string(name) + "\"");
}

std::string_view to_string(ScorerKind kind) {
  return kind == ScorerKind::kOracle ? "oracle" : "heuristic";
}

void SamplingPolicy::validate() const {
  if (!(tau_s >= 0.0 && tau_s <= 1.0)) {
    throw ParameterError("sampling.tau_s must be in [0, 1]");
  }
  if (!(r_fg > 0.0 && r_fg <= 1.0)) {
    throw ParameterError("sampling.r_fg must be in (0, 1]");
  }
  if (!(r_bg > 0.0 && r_bg <= 1.0)) {
    throw ParameterError("sampling.r_bg must be in (0, 1]");
  }
  if (include_surroundings && !(surround_radius > 0.0)) {
    throw ParameterError("sampling.surround_radius must be > 0");
  }
}

SaliencyScores score_points(const PointCloud& cloud, ScorerKind scorer,
                            std::optional<std::span<const BoxLabel>> boxes) {
  if (scorer == ScorerKind::kOracle) {
    if (!boxes) throw ParameterError("oracle scorer requires boxes");
    return label_foreground(cloud, *boxes);
  }
  return heuristic_scores(cloud);
}

Partition partition(const PointCloud& cloud, const SaliencyScores& scores,
                    double tau_s) {
  if (scores.size() != cloud.size()) {
    throw InputError("partition: " + std::to_string(scores.size()) +
                     " scores for " + std::to_string(cloud.size()) + " points");
  }
  Partition out;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    (scores[i] > tau_s ? out.fg : out.bg).push_back(i);
  }
  return out;
}

std::vector<std::size_t> fps(std::span<const Point3> points, std::size_t count) {
  if (count > points.size()) {
    throw ParameterError("fps: count " + std::to_string(count) + " exceeds " +
                         std::to_string(points.size()) + " points");
  }
  std::vector<std::size_t> selected;
  if (count == 0) return selected;
  selected.reserve(count);
  // -1 marks points already taken.
  std::vector<double> min_d2(points.size(), std::numeric_limits<double>::infinity());
  std::size_t current = 0;
  for (std::size_t k = 0; k < count; ++k) {
    selected.push_back(current);
    min_d2[current] = -1.0;
    std::size_t next = 0;
    double best = -1.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (min_d2[i] < 0.0) continue;
      min_d2[i] = std::min(min_d2[i], squared_distance(points[i], points[current]));
      if (min_d2[i] > best) {
        best = min_d2[i];
        next = i;
      }
    }
    current = next;
  }
  return selected;
}

std::vector<std::size_t> fps(const PointCloud& points, std::size_t count) {
  return fps(std::span<const Point3>(points.points), count);
}

std::vector<std::size_t> rps(std::size_t population, std::size_t count,
                             std::uint64_t seed) {
  if (count > population) {
    throw ParameterError("rps: count " + std::to_string(count) + " exceeds " +
                         std::to_string(population) + " points");
  }
  std::vector<std::size_t> idx(population);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  // Partial Fisher-Yates: the first `count` slots are a uniform draw.
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, population - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(count);
  std::sort(idx.begin(), idx.end());
  return idx;
}

std::size_t sample_count(double ratio, std::size_t n) {
  const auto c = static_cast<std::size_t>(std::ceil(ratio * static_cast<double>(n)));
  return std::min(c, n);
}

Message sample_message(const PointCloud& cloud, const SaliencyScores& scores,
                       const SamplingPolicy& policy,
                       const RigidTransform& sender_pose, int frame,
                       std::uint64_t seed) {
  policy.validate();
  Partition parts = partition(cloud, scores, policy.tau_s);

  if (policy.include_surroundings && !parts.fg.empty() && !parts.bg.empty()) {
    const auto fg_points = gather(cloud, parts.fg);
    const KdTree tree(fg_points);
    const double r2 = policy.surround_radius * policy.surround_radius;
    std::vector<std::size_t> bg;
    for (const auto i : parts.bg) {
      if (tree.nearest(cloud.points[i]).dist2 <= r2) {
        parts.fg.push_back(i);
      } else {
        bg.push_back(i);
      }
    }
    parts.bg = std::move(bg);
    std::sort(parts.fg.begin(), parts.fg.end());
  }

  auto draw = [&](const std::vector<std::size_t>& subset, double ratio,
                  SamplingMethod method, std::uint64_t salt) {
    const std::size_t n = sample_count(ratio, subset.size());
    std::vector<std::size_t> local;
    if (method == SamplingMethod::kFarthest) {
      local = fps(gather(cloud, subset), n);
    } else {
      local = rps(subset.size(), n, derive_seed(seed, {salt}));
    }
    std::vector<std::size_t> out;
    out.reserve(local.size());
    for (const auto i : local) out.push_back(subset[i]);
    return out;
  };

  std::vector<std::size_t> keep = draw(parts.fg, policy.r_fg, policy.fg_method, 1);
  const auto bg = draw(parts.bg, policy.r_bg, policy.bg_method, 2);
  keep.insert(keep.end(), bg.begin(), bg.end());
  std::sort(keep.begin(), keep.end());

  Message msg;
  msg.cloud.frame = cloud.frame;
  msg.cloud.points = gather(cloud, keep);
  msg.sender_pose = sender_pose;
  msg.frame = frame;
  msg.element_count = kElementsPerPoint * msg.cloud.size();
  return msg;
}

double comm_volume(std::size_t element_count) {
  if (element_count == 0) {
    throw ParameterError("comm_volume: element count must be >= 1");
  }
  return std::log2(static_cast<double>(element_count) * 32.0 / 8.0);
}

}  // namespace colc
