#pragma once

#include <cmath>
#include <random>

#include "colc/geometry.hpp"
#include "colc/pillars.hpp"

namespace colc::test {

// Values that survive a round trip through f32 unchanged.
inline double f32(double v) { return static_cast<double>(static_cast<float>(v)); }

inline PointCloud random_cloud(std::mt19937_64& rng, std::size_t n, double extent = 10.0) {
  std::uniform_real_distribution<double> xy(-extent, extent);
  std::uniform_real_distribution<double> z(0.0, 2.0);
  std::uniform_real_distribution<double> in(0.0, 1.0);
  PointCloud c;
  c.points.reserve(n);
  for (std::size_t i = 0; i < n; ++i) c.points.push_back({xy(rng), xy(rng), z(rng), in(rng)});
  return c;
}

inline PillarGrid random_grid(std::mt19937_64& rng, const GridSpec& spec, double fill = 0.3) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> v(0.0, 1.0);
  PillarGrid g(spec);
  for (int r = 0; r < spec.H; ++r)
    for (int c = 0; c < spec.W; ++c) {
      if (u(rng) >= fill) continue;
      for (int ch = 0; ch < spec.C; ++ch) g.at(r, c, ch) = f32(v(rng));
    }
  return g;
}

inline GridSpec small_spec(int H = 8, int W = 8, int C = 8) {
  GridSpec s;
  s.x_min = 0.0;
  s.y_min = 0.0;
  s.cell = 1.0;
  s.H = H;
  s.W = W;
  s.C = C;
  return s;
}

}  // namespace colc::test
