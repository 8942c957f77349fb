#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "colc/geometry.hpp"

namespace colc {

struct Neighbor {
  std::size_t index = 0;
  double dist2 = std::numeric_limits<double>::infinity();
};

/// Static 3D k-d tree over (x, y, z). Queries are exact; among equidistant
/// points the lowest index wins, so results match `brute_force_nearest`.
class KdTree {
 public:
  explicit KdTree(std::span<const Point3> points);

  Neighbor nearest(const Point3& query) const;
  std::size_t size() const { return points_.size(); }

 private:
  struct Node {
    std::size_t point = 0;  // index into points_
    int axis = 0;
    int left = -1;
    int right = -1;
  };

  int build(std::size_t begin, std::size_t end, int depth);
  void search(int node, const Point3& q, Neighbor& best) const;

  std::vector<Point3> points_;
  std::vector<std::size_t> order_;
  std::vector<Node> nodes_;
  int root_ = -1;
};

double squared_distance(const Point3& a, const Point3& b);

/// Linear scan with the same tie rule as KdTree.
Neighbor brute_force_nearest(std::span<const Point3> points,
                             const Point3& query);

}  // namespace colc
