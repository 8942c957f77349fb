#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "doctest.h"

#include "colc/error.hpp"
#include "colc/faps.hpp"
#include "colc/spatial_index.hpp"
#include "test_support.hpp"

using namespace colc;

namespace {

// Reference greedy FPS: recompute min distance to the selection from scratch.
std::vector<std::size_t> fps_oracle(const std::vector<Point3>& pts, std::size_t count) {
  std::vector<std::size_t> sel;
  if (count == 0) return sel;
  sel.push_back(0);
  while (sel.size() < count) {
    std::size_t best = 0;
    double best_d = -1.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (std::find(sel.begin(), sel.end(), i) != sel.end()) continue;
      double m = std::numeric_limits<double>::infinity();
      for (auto s : sel) m = std::min(m, squared_distance(pts[i], pts[s]));
      if (m > best_d) {
        best_d = m;
        best = i;
      }
    }
    sel.push_back(best);
  }
  return sel;
}

PointCloud line_cloud(int n) {
  PointCloud c;
  for (int i = 0; i < n; ++i) c.points.push_back({double(i), 0, 0, 0});
  return c;
}

}  // namespace

TEST_CASE("score_points") {
  BoxLabel b{{0, 0, 1}, {4, 2, 2}, 0.0, {0, 0}};
  std::vector<BoxLabel> boxes{b};
  PointCloud c{{{0, 0, 1, 0}, {10, 0, 0, 0}}, 0};
  auto s = score_points(c, ScorerKind::kOracle, std::span<const BoxLabel>(boxes));
  CHECK(s == std::vector<double>{1.0, 0.0});
  CHECK_THROWS_AS(score_points(c, ScorerKind::kOracle, std::nullopt), ParameterError);
  CHECK(score_points(PointCloud{}, ScorerKind::kHeuristic, std::nullopt).empty());
  CHECK(score_points(PointCloud{}, ScorerKind::kOracle, std::span<const BoxLabel>(boxes)).empty());
}

TEST_CASE("heuristic scorer: ground plane scores below 0.5") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-30, 30);
  std::normal_distribution<double> jitter(0, 0.02);
  PointCloud ground;
  for (int i = 0; i < 5000; ++i) ground.points.push_back({u(rng), u(rng), jitter(rng), 0.1});
  auto s = score_points(ground, ScorerKind::kHeuristic, std::nullopt);
  for (double v : s) {
    CHECK(v < 0.5);
    CHECK(v >= 0.0);
  }
  // Raised dense cluster scores high.
  PointCloud mixed = ground;
  for (int i = 0; i < 200; ++i) mixed.points.push_back({5 + 0.01 * i, 5, 1.0, 0.5});
  auto m = score_points(mixed, ScorerKind::kHeuristic, std::nullopt);
  CHECK(m.back() > 0.5);
}

TEST_CASE("partition") {
  PointCloud c = line_cloud(3);
  auto p = partition(c, {0.9, 0.1, 0.6}, 0.5);
  CHECK(p.fg == std::vector<std::size_t>{0, 2});
  CHECK(p.bg == std::vector<std::size_t>{1});
  auto q = partition(c, {0.5, 0.5, 0.5}, 0.5);
  CHECK(q.fg.empty());
  CHECK(q.bg.size() == 3);
  auto z = partition(c, {0, 0, 0}, 0.5);
  CHECK(z.fg.empty());
  CHECK_THROWS_AS(partition(c, {0.1}, 0.5), InputError);
}

TEST_CASE("partition is a disjoint cover") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0, 1);
  for (int t = 0; t < 20; ++t) {
    auto c = test::random_cloud(rng, 100);
    std::vector<double> s(100);
    for (auto& v : s) v = u(rng);
    auto p = partition(c, s, u(rng));
    std::vector<std::size_t> all = p.fg;
    all.insert(all.end(), p.bg.begin(), p.bg.end());
    std::sort(all.begin(), all.end());
    std::vector<std::size_t> expect(100);
    std::iota(expect.begin(), expect.end(), 0);
    CHECK(all == expect);
  }
}

TEST_CASE("fps") {
  auto line = line_cloud(10);
  CHECK(fps(line, 3) == std::vector<std::size_t>{0, 9, 4});
  CHECK(fps_oracle(line.points, 3) == std::vector<std::size_t>{0, 9, 4});
  CHECK(fps(line, 1) == std::vector<std::size_t>{0});
  CHECK(fps(line, 0).empty());
  auto all = fps(line, 10);
  CHECK(all.size() == 10);
  CHECK(all.front() == 0);
  CHECK_THROWS_AS(fps(line, 11), ParameterError);

  std::mt19937_64 rng(31);
  for (int t = 0; t < 20; ++t) {
    auto c = test::random_cloud(rng, 120);
    CHECK(fps(c, 25) == fps_oracle(c.points, 25));
    CHECK(fps(c, 25) == fps(c, 25));
  }
}

TEST_CASE("rps") {
  CHECK(rps(100, 0, 1).empty());
  auto all = rps(std::size_t{7}, 7, 1);
  CHECK(all == std::vector<std::size_t>{0, 1, 2, 3, 4, 5, 6});
  CHECK(rps(100, 10, 5) == rps(100, 10, 5));
  auto s = rps(100, 10, 5);
  CHECK(std::is_sorted(s.begin(), s.end()));
  CHECK(std::adjacent_find(s.begin(), s.end()) == s.end());
  CHECK_THROWS_AS(rps(5, 6, 1), ParameterError);

  std::vector<int> hits(100, 0);
  const int trials = 10000;
  for (int t = 0; t < trials; ++t)
    for (auto i : rps(100, 10, static_cast<std::uint64_t>(t) * 7919 + 1)) ++hits[i];
  for (int h : hits) {
    double f = double(h) / trials;
    CHECK(f >= 0.09);
    CHECK(f <= 0.11);
  }
}

TEST_CASE("sample_count uses ceiling") {
  CHECK(sample_count(0.2, 100) == 20);
  CHECK(sample_count(0.01, 5) == 1);
  CHECK(sample_count(1.0, 7) == 7);
  CHECK(sample_count(0.5, 0) == 0);
}

TEST_CASE("sample_message") {
  std::mt19937_64 rng(41);
  auto c = test::random_cloud(rng, 1000);
  std::vector<double> scores(1000, 0.0);
  for (int i = 0; i < 100; ++i) scores[i * 10] = 1.0;
  RigidTransform pose{0.1, 2, 3, 0};

  SamplingPolicy full;
  full.r_fg = 1.0;
  full.r_bg = 1.0;
  auto m = sample_message(c, scores, full, pose, 2, 9);
  CHECK(m.cloud.points == c.points);
  CHECK(m.element_count == 4000);
  CHECK(m.sender_pose == pose);
  CHECK(m.frame == 2);

  SamplingPolicy pol;
  auto s = sample_message(c, scores, pol, pose, 0, 9);
  CHECK(s.cloud.size() == 110);
  CHECK(s.element_count == 440);
  CHECK(sample_message(c, scores, pol, pose, 0, 9).cloud.points == s.cloud.points);

  std::size_t prev = std::numeric_limits<std::size_t>::max();
  for (double r : {0.5, 0.2, 0.1, 0.05, 0.01}) {
    pol.r_bg = r;
    auto e = sample_message(c, scores, pol, pose, 0, 9).element_count;
    CHECK(e <= prev);
    prev = e;
  }
  pol.r_bg = 0.1;
  std::size_t prev_fg = 0;
  for (double r : {0.05, 0.1, 0.2, 0.5, 1.0}) {
    pol.r_fg = r;
    auto e = sample_message(c, scores, pol, pose, 0, 9).element_count;
    CHECK(e >= prev_fg);
    prev_fg = e;
  }
}

TEST_CASE("sample_message: surroundings mode keeps background near objects") {
  PointCloud c;
  for (int i = 0; i < 50; ++i) c.points.push_back({0.1 * i, 0, 1, 0});      // fg
  for (int i = 0; i < 50; ++i) c.points.push_back({0.1 * i, 1.0, 0, 0});    // near bg
  for (int i = 0; i < 50; ++i) c.points.push_back({0.1 * i, 30.0, 0, 0});   // far bg
  std::vector<double> scores(150, 0.0);
  for (int i = 0; i < 50; ++i) scores[i] = 1.0;
  SamplingPolicy pol;
  pol.r_fg = 1.0;
  pol.r_bg = 0.02;
  pol.include_surroundings = true;
  pol.surround_radius = 2.0;
  auto m = sample_message(c, scores, pol, {}, 0, 3);
  CHECK(m.cloud.size() == 101);
}

TEST_CASE("SamplingPolicy validation and names") {
  SamplingPolicy p;
  p.r_fg = 0.0;
  CHECK_THROWS_AS(p.validate(), ParameterError);
  p = {};
  p.r_bg = 1.5;
  CHECK_THROWS_AS(p.validate(), ParameterError);
  p = {};
  p.tau_s = -0.1;
  CHECK_THROWS_AS(p.validate(), ParameterError);
  CHECK(parse_sampling_method("fps") == SamplingMethod::kFarthest);
  CHECK(parse_sampling_method(to_string(SamplingMethod::kRandom)) == SamplingMethod::kRandom);
  CHECK(parse_scorer(to_string(ScorerKind::kHeuristic)) == ScorerKind::kHeuristic);
  CHECK_THROWS_AS(parse_scorer("mlp"), ParameterError);
}

TEST_CASE("comm_volume") {
  CHECK(comm_volume(1) == 2.0);
  CHECK(comm_volume(8192) == 15.0);
  CHECK(comm_volume(std::size_t{1} << 20) == 22.0);
  CHECK(comm_volume(2 * 440) == comm_volume(440) + 1.0);
  CHECK_THROWS_AS(comm_volume(0), ParameterError);
}
