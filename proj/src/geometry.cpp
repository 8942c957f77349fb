#include "colc/geometry.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>

#include "colc/binary_io.hpp"
#include "colc/error.hpp"
#include "colc/spatial_index.hpp"

namespace colc {

bool is_valid(const Point3& p) {
  return std::isfinite(p.x) && std::isfinite(p.y) && std::isfinite(p.z) &&
         p.intensity >= 0.0 && p.intensity <= 1.0;
}

double normalize_angle(double radians) {
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  double a = std::remainder(radians, kTwoPi);
  if (a <= -std::numbers::pi) a += kTwoPi;
  return a;
}

Point3 RigidTransform::apply(const Point3& p) const {
  const double c = std::cos(yaw);
  const double s = std::sin(yaw);
  return {c * p.x - s * p.y + tx, s * p.x + c * p.y + ty, p.z + tz,
          p.intensity};
}

RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
  const double c = std::cos(a.yaw);
  const double s = std::sin(a.yaw);
  return {normalize_angle(a.yaw + b.yaw), c * b.tx - s * b.ty + a.tx,
          s * b.tx + c * b.ty + a.ty, a.tz + b.tz};
}

RigidTransform invert(const RigidTransform& t) {
  const double c = std::cos(t.yaw);
  const double s = std::sin(t.yaw);
  // R^T applied to -t
  return {normalize_angle(-t.yaw), -(c * t.tx + s * t.ty),
          -(-s * t.tx + c * t.ty), -t.tz};
}

PointCloud transform_cloud(const PointCloud& cloud, const RigidTransform& t,
                           AgentId new_frame) {
  PointCloud out;
  out.frame = new_frame;
  if (t.is_identity()) {
    out.points = cloud.points;
    return out;
  }
  out.points.reserve(cloud.size());
  const double c = std::cos(t.yaw);
  const double s = std::sin(t.yaw);
  for (const auto& p : cloud.points) {
    out.points.push_back({c * p.x - s * p.y + t.tx, s * p.x + c * p.y + t.ty,
                          p.z + t.tz, p.intensity});
  }
  return out;
}

RigidTransform perturb_pose(const RigidTransform& t, double sigma_trans,
                            double sigma_rot, std::uint64_t seed) {
  if (!(sigma_trans >= 0.0) || !(sigma_rot >= 0.0)) {
    throw ParameterError("perturb_pose: sigmas must be >= 0");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> unit(0.0, 1.0);
  // Always draw three variates so each component's noise does not depend on
  // which sigmas are zero.
  const double nx = unit(rng);
  const double ny = unit(rng);
  const double nyaw = unit(rng);
  RigidTransform out = t;
  if (sigma_trans > 0.0) {
    out.tx += sigma_trans * nx;
    out.ty += sigma_trans * ny;
  }
  if (sigma_rot > 0.0) out.yaw = normalize_angle(out.yaw + sigma_rot * nyaw);
  return out;
}

RigidTransform fit_yaw_translation(std::span<const Point3> src,
                                   std::span<const Point3> dst) {
  if (src.size() != dst.size() || src.empty()) {
    throw InputError("fit_yaw_translation: need equal, non-empty spans");
  }
  const double n = static_cast<double>(src.size());
  double sx = 0, sy = 0, sz = 0, dx = 0, dy = 0, dz = 0;
  for (std::size_t i = 0; i < src.size(); ++i) {
    sx += src[i].x;
    sy += src[i].y;
    sz += src[i].z;
    dx += dst[i].x;
    dy += dst[i].y;
    dz += dst[i].z;
  }
  sx /= n, sy /= n, sz /= n, dx /= n, dy /= n, dz /= n;

  // Planar cross-covariance: yaw maximizing sum of dst . R(yaw) src.
  double dot = 0.0;
  double cross = 0.0;
  for (std::size_t i = 0; i < src.size(); ++i) {
    const double ax = src[i].x - sx, ay = src[i].y - sy;
    const double bx = dst[i].x - dx, by = dst[i].y - dy;
    dot += ax * bx + ay * by;
    cross += ax * by - ay * bx;
  }
  const double yaw = std::atan2(cross, dot);
  const double c = std::cos(yaw);
  const double s = std::sin(yaw);
  return {normalize_angle(yaw), dx - (c * sx - s * sy),
          dy - (s * sx + c * sy), dz - sz};
}

IcpResult icp_align(const PointCloud& source, const PointCloud& target,
                    const IcpOptions& options) {
  if (source.empty() || target.empty()) {
    throw InputError("icp_align: source and target must be non-empty");
  }
  if (options.max_iters < 1) {
    throw ParameterError("icp_align: max_iters must be >= 1");
  }
  const KdTree tree(target.points);
  const double gate2 =
      options.max_correspondence_dist > 0.0
          ? options.max_correspondence_dist * options.max_correspondence_dist
          : std::numeric_limits<double>::infinity();

  IcpResult result;
  std::vector<Point3> src;
  std::vector<Point3> dst;
  src.reserve(source.size());
  dst.reserve(source.size());
  double prev_mse = std::numeric_limits<double>::infinity();

  for (int it = 0; it < options.max_iters; ++it) {
    src.clear();
    dst.clear();
    double sum = 0.0;
    for (const auto& p : source.points) {
      const Point3 moved = result.transform.apply(p);
      const Neighbor nn = tree.nearest(moved);
      if (nn.dist2 > gate2) continue;
      src.push_back(moved);
      dst.push_back(target.points[nn.index]);
      sum += nn.dist2;
    }
    if (src.empty()) break;
    const double mse = sum / static_cast<double>(src.size());
    result.mse = mse;
    result.iterations = it + 1;
    if (prev_mse - mse < options.tol) {
      result.converged = true;
      break;
    }
    prev_mse = mse;
    result.transform = compose(fit_yaw_translation(src, dst), result.transform);
  }
  return result;
}

RigidTransform icp_align(const PointCloud& source, const PointCloud& target,
                         int max_iters, double tol) {
  IcpOptions options;
  options.max_iters = max_iters;
  options.tol = tol;
  return icp_align(source, target, options).transform;
}

// ---------------------------------------------------------------------------
// Serialization

void write_cloud(std::ostream& out, const PointCloud& cloud) {
  io::write_magic(out, "CPCD", 1);
  io::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(cloud.size()));
  for (const auto& p : cloud.points) {
    io::write_pod<float>(out, static_cast<float>(p.x));
    io::write_pod<float>(out, static_cast<float>(p.y));
    io::write_pod<float>(out, static_cast<float>(p.z));
    io::write_pod<float>(out, static_cast<float>(p.intensity));
  }
}

PointCloud read_cloud(std::istream& in) {
  io::expect_magic(in, "CPCD", 1);
  const auto n = io::read_pod<std::uint32_t>(in, "point count");
  PointCloud cloud;
  cloud.points.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    Point3 p;
    p.x = io::read_pod<float>(in, "point");
    p.y = io::read_pod<float>(in, "point");
    p.z = io::read_pod<float>(in, "point");
    p.intensity = io::read_pod<float>(in, "point");
    cloud.points.push_back(p);
  }
  return cloud;
}

void save_cloud(const std::filesystem::path& path, const PointCloud& cloud) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  write_cloud(out, cloud);
  if (!out) throw IoError("write failed: " + path.string());
}

PointCloud load_cloud(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path.string());
  try {
    return read_cloud(in);
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

void write_cloud_csv(std::ostream& out, const PointCloud& cloud) {
  out << "x,y,z,intensity\n";
  out.precision(17);
  for (const auto& p : cloud.points) {
    out << p.x << ',' << p.y << ',' << p.z << ',' << p.intensity << '\n';
  }
}

PointCloud read_cloud_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("x,y,z,intensity", 0) != 0) {
    throw IoError("csv: expected header x,y,z,intensity");
  }
  PointCloud cloud;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream row(line);
    Point3 p;
    char c1 = 0, c2 = 0, c3 = 0;
    if (!(row >> p.x >> c1 >> p.y >> c2 >> p.z >> c3 >> p.intensity) ||
        c1 != ',' || c2 != ',' || c3 != ',') {
      throw IoError("csv: malformed row at line " + std::to_string(line_no));
    }
    cloud.points.push_back(p);
  }
  return cloud;
}

}  // namespace colc
