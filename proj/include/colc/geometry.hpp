#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

namespace colc {

using AgentId = int;
/// Frame label for clouds expressed in world coordinates.
inline constexpr AgentId kWorldFrame = -1;

struct Point3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  double intensity = 0.0;  // unitless, [0, 1]

  friend bool operator==(const Point3&, const Point3&) = default;
};

/// True when coordinates are finite and intensity lies in [0, 1].
bool is_valid(const Point3& p);

/// 4-DoF rigid transform: rotation by `yaw` about +z, then translation.
/// Driving scenes are near-planar, so roll and pitch are not modelled.
struct RigidTransform {
  double yaw = 0.0;  // radians, normalized to (-pi, pi]
  double tx = 0.0;
  double ty = 0.0;
  double tz = 0.0;

  static RigidTransform identity() { return {}; }
  bool is_identity() const {
    return yaw == 0.0 && tx == 0.0 && ty == 0.0 && tz == 0.0;
  }
  Point3 apply(const Point3& p) const;

  friend bool operator==(const RigidTransform&,
                         const RigidTransform&) = default;
};

/// Wraps an angle into (-pi, pi].
double normalize_angle(double radians);

/// compose(a, b) applies b first, then a.
RigidTransform compose(const RigidTransform& a, const RigidTransform& b);
RigidTransform invert(const RigidTransform& t);

struct PointCloud {
  std::vector<Point3> points;
  AgentId frame = kWorldFrame;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
};

/// Each point is rotated about z then translated; intensity is copied.
/// The identity transform returns an exact copy. The result is labelled
/// with `new_frame`.
PointCloud transform_cloud(const PointCloud& cloud, const RigidTransform& t,
                           AgentId new_frame);
inline PointCloud transform_cloud(const PointCloud& cloud,
                                  const RigidTransform& t) {
  return transform_cloud(cloud, t, cloud.frame);
}

/// Adds zero-mean Gaussian noise to tx, ty (std `sigma_trans`) and yaw
/// (std `sigma_rot`); tz is left alone. Pure function of its arguments.
RigidTransform perturb_pose(const RigidTransform& t, double sigma_trans,
                            double sigma_rot, std::uint64_t seed);

struct IcpOptions {
  int max_iters = 30;
  /// Stop once the mean squared error improves by less than this.
  double tol = 1e-9;
  /// Correspondences farther apart than this are ignored; <= 0 keeps every
  /// pair (plain point-to-point ICP).
  double max_correspondence_dist = 0.0;
};

struct IcpResult {
  RigidTransform transform;
  int iterations = 0;
  double mse = 0.0;
  bool converged = false;
};

/// Estimates the transform that maps `source` onto `target` by alternating
/// exact nearest-neighbour correspondence with the closed-form yaw and
/// translation update. Starts from the identity.
IcpResult icp_align(const PointCloud& source, const PointCloud& target,
                    const IcpOptions& options);
RigidTransform icp_align(const PointCloud& source, const PointCloud& target,
                         int max_iters, double tol);

/// Closed-form least-squares 4-DoF transform mapping `src[i]` onto `dst[i]`.
RigidTransform fit_yaw_translation(std::span<const Point3> src,
                                   std::span<const Point3> dst);

// CPCD binary format: "CPCD", u8 version=1, u32 count, count x 4 f32.
void write_cloud(std::ostream& out, const PointCloud& cloud);
PointCloud read_cloud(std::istream& in);
void save_cloud(const std::filesystem::path& path, const PointCloud& cloud);
PointCloud load_cloud(const std::filesystem::path& path);

// Debug CSV with header `x,y,z,intensity`.
void write_cloud_csv(std::ostream& out, const PointCloud& cloud);
PointCloud read_cloud_csv(std::istream& in);

}  // namespace colc
