#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"

#include "colc/error.hpp"
#include "colc/fusion.hpp"
#include "test_support.hpp"

using namespace colc;

namespace {

Message msg(PointCloud c) {
  Message m;
  m.element_count = c.size() * kElementsPerPoint;
  m.cloud = std::move(c);
  return m;
}

PointCloud points_in_cells(const std::vector<std::pair<int, int>>& cells, double z = 0.5) {
  PointCloud c;
  for (auto [r, col] : cells) c.points.push_back({col + 0.5, r + 0.5, z, 0.5});
  return c;
}

}  // namespace

TEST_CASE("sparse_early_fusion") {
  GridSpec spec = test::small_spec();
  auto ego = points_in_cells({{0, 0}, {1, 1}, {2, 2}});
  CHECK(sparse_early_fusion(ego, {}, spec) == pillarize(ego, spec));

  std::vector<Message> overlap{msg(points_in_cells({{0, 0}, {2, 2}}, 1.0))};
  CHECK(occupancy_of(sparse_early_fusion(ego, overlap, spec)) == occupancy_of(pillarize(ego, spec)));

  std::vector<Message> disjoint{msg(points_in_cells({{5, 5}, {6, 1}})),
                                msg(points_in_cells({{7, 7}}))};
  CHECK(occupancy_of(sparse_early_fusion(ego, disjoint, spec)).count() == 6);

  std::vector<Message> swapped{disjoint[1], disjoint[0]};
  CHECK(sparse_early_fusion(ego, disjoint, spec) == sparse_early_fusion(ego, swapped, spec));
}

TEST_CASE("gate_and_preserve") {
  std::mt19937_64 rng(1);
  GridSpec spec = test::small_spec();
  CompletionResult cr{test::random_grid(rng, spec, 1.0), std::vector<double>(spec.cells(), 0.0), {}};
  auto none = gate_and_preserve(cr, PillarGrid(spec), 0.5);
  CHECK(occupancy_of(none).count() == 0);

  std::fill(cr.occ_hat.begin(), cr.occ_hat.end(), 1.0);
  CHECK(gate_and_preserve(cr, PillarGrid(spec), 0.5) == cr.dense_hat);

  std::fill(cr.occ_hat.begin(), cr.occ_hat.end(), 0.1);
  PillarGrid sparse(spec);
  sparse.at(3, 3, 0) = 0.25;
  sparse.at(3, 3, 7) = 1.0;
  auto g = gate_and_preserve(cr, sparse, 0.5);
  CHECK(g.at(3, 3, 0) == 0.25);
  CHECK(g.at(3, 3, 7) == 1.0);
  CHECK(g.at(3, 3, 1) == 0.0);
  CHECK(occupancy_of(g).count() == 1);

  // occ_hat exactly at tau_o is gated away.
  std::fill(cr.occ_hat.begin(), cr.occ_hat.end(), 0.5);
  CHECK(occupancy_of(gate_and_preserve(cr, PillarGrid(spec), 0.5)).count() == 0);
}

TEST_CASE("adaptive_weights") {
  GridSpec spec = test::small_spec(4, 4, 8);
  PillarGrid a(spec), b(spec);
  a.at(0, 0, 7) = 1;                    // only a survives
  a.at(1, 1, 7) = 1, b.at(1, 1, 7) = 1;  // both, equal occ
  a.at(2, 2, 7) = 1, b.at(2, 2, 7) = 1;  // both, (0.9, 0.1)
  std::vector<double> oa(spec.cells(), 0.7), ob(spec.cells(), 0.7);
  oa[2 * 4 + 2] = 0.9;
  ob[2 * 4 + 2] = 0.1;
  std::vector<PillarGrid> gated{a, b};
  std::vector<std::vector<double>> occs{oa, ob};
  auto w = adaptive_weights(gated, occs, PillarGrid(spec));
  CHECK(w[0][0] == 1.0);
  CHECK(w[1][0] == 0.0);
  CHECK(w[0][5] == doctest::Approx(0.5));
  CHECK(w[1][5] == doctest::Approx(0.5));
  double e9 = std::exp(0.9), e1 = std::exp(0.1);
  CHECK(w[0][10] == doctest::Approx(e9 / (e9 + e1)));
  CHECK(std::abs(w[0][10] - 0.69) < 1e-2);
  CHECK(std::abs(w[1][10] - 0.31) < 1e-2);
  CHECK(w[0][15] == 0.0);
  CHECK(w[1][15] == 0.0);

  CHECK_THROWS_AS(adaptive_weights({}, {}, PillarGrid(spec)), ParameterError);
}

TEST_CASE("complementary_fuse") {
  std::mt19937_64 rng(2);
  GridSpec spec = test::small_spec(4, 4, 8);
  auto full = test::random_grid(rng, spec, 1.0);
  auto n1 = test::random_grid(rng, spec, 1.0);
  std::vector<PillarGrid> one{n1};
  std::vector<WeightMap> w1{WeightMap(spec.cells(), 1.0)};
  CHECK(complementary_fuse(full, one, w1).enhanced == full);
  CHECK(complementary_fuse(PillarGrid(spec), one, w1).enhanced == n1);

  auto n2 = test::random_grid(rng, spec, 1.0);
  std::vector<PillarGrid> two{n1, n2};
  std::vector<WeightMap> half{WeightMap(spec.cells(), 0.5), WeightMap(spec.cells(), 0.5)};
  auto out = complementary_fuse(PillarGrid(spec), two, half);
  for (std::size_t i = 0; i < spec.values(); ++i)
    CHECK(out.enhanced.data()[i] == doctest::Approx((n1.data()[i] + n2.data()[i]) / 2));
  CHECK(out.observed_mask.count() == 0);
}

TEST_CASE("completion_enhanced_fusion: preservation, coverage, permutation") {
  std::mt19937_64 rng(3);
  GridSpec spec = test::small_spec(8, 8, 8);
  PatchLayout layout{4};
  Codebook cb;
  cb.codes = Matrix(3, 128);
  cb.dense_atoms = Matrix(3, 128);
  cb.occ_atoms = Matrix(3, 16);
  std::uniform_real_distribution<double> u(0, 1);
  for (std::size_t k = 0; k < 3; ++k) {
    for (std::size_t d = 0; d < 128; ++d) {
      cb.codes(k, d) = k == 0 ? 0.0 : u(rng);
      cb.dense_atoms(k, d) = u(rng);
    }
    for (std::size_t d = 0; d < 16; ++d) cb.occ_atoms(k, d) = u(rng);
  }
  cb.usage = {1, 1, 1};

  auto ego = test::random_cloud(rng, 10, 4);
  for (auto& p : ego.points) p.x += 4, p.y += 4;
  std::vector<Message> msgs;
  for (int j = 0; j < 3; ++j) {
    auto c = test::random_cloud(rng, 15, 4);
    for (auto& p : c.points) p.x += 4, p.y += 4;
    msgs.push_back(msg(c));
  }
  auto out = completion_enhanced_fusion(ego, msgs, spec, cb, layout, 0.5);
  auto sef = sparse_early_fusion(ego, msgs, spec);
  CHECK(out.sparse_fused == sef);
  for (std::size_t cell = 0; cell < spec.cells(); ++cell) {
    if (!out.observed_mask.data[cell]) continue;
    for (int ch = 0; ch < spec.C; ++ch)
      CHECK(out.enhanced.data()[cell * 8 + ch] == sef.data()[cell * 8 + ch]);
  }
  auto enh = occupancy_of(out.enhanced);
  for (std::size_t cell = 0; cell < spec.cells(); ++cell)
    if (out.observed_mask.data[cell]) CHECK(enh.data[cell] == 1);

  std::vector<Message> rev(msgs.rbegin(), msgs.rend());
  auto out2 = completion_enhanced_fusion(ego, rev, spec, cb, layout, 0.5);
  for (std::size_t i = 0; i < spec.values(); ++i)
    CHECK(std::abs(out.enhanced.data()[i] - out2.enhanced.data()[i]) < 1e-9);

  FusionSwitches off;
  off.adaptive_fusion = false;
  CHECK(completion_enhanced_fusion(ego, msgs, spec, cb, layout, 0.5, off).enhanced == sef);
  CHECK(completion_enhanced_fusion(ego, {}, spec, cb, layout, 0.5).enhanced == pillarize(ego, spec));
}
