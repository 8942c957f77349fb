#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "doctest.h"

#include "colc/error.hpp"
#include "colc/vqcodec.hpp"
#include "test_support.hpp"

using namespace colc;

namespace {

std::uint32_t brute_nearest(const Matrix& z, std::size_t i, const Matrix& codes) {
  std::uint32_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < codes.rows; ++k) {
    double d = 0;
    for (std::size_t c = 0; c < z.cols; ++c) {
      double g = z(i, c) - codes(k, c);
      d += g * g;
    }
    if (d < best_d) {
      best_d = d;
      best = static_cast<std::uint32_t>(k);
    }
  }
  return best;
}

Matrix random_matrix(std::mt19937_64& rng, std::size_t r, std::size_t c) {
  std::normal_distribution<double> n(0, 1);
  Matrix m(r, c);
  for (auto& v : m.data) v = n(rng);
  return m;
}

Codebook random_codebook(std::mt19937_64& rng, std::size_t K, int p, int C) {
  std::uniform_real_distribution<double> u(0, 1);
  Codebook cb;
  cb.p = p;
  cb.C = C;
  const std::size_t dim = static_cast<std::size_t>(p) * p * C;
  cb.codes = random_matrix(rng, K, dim);
  cb.dense_atoms = random_matrix(rng, K, dim);
  cb.occ_atoms = Matrix(K, static_cast<std::size_t>(p) * p);
  for (auto& v : cb.occ_atoms.data) v = u(rng);
  for (auto* m : {&cb.codes, &cb.dense_atoms, &cb.occ_atoms})
    for (auto& v : m->data) v = test::f32(v);
  cb.usage.resize(K);
  for (auto& u32 : cb.usage) u32 = static_cast<std::uint32_t>(rng() % 1000 + 1);
  return cb;
}

}  // namespace

TEST_CASE("quantize: small examples") {
  Matrix codes(2, 2);
  codes(1, 0) = 1;
  codes(1, 1) = 1;
  Matrix z(1, 2);
  z(0, 0) = 0.2;
  z(0, 1) = 0.1;
  auto q = quantize(z, codes);
  CHECK(q.indices[0] == 0);
  CHECK(q.z_q(0, 0) == 0.0);
  CHECK(q.z_q(0, 1) == 0.0);

  std::mt19937_64 rng(1);
  auto cb = random_matrix(rng, 8, 5);
  Matrix e(1, 5);
  for (int c = 0; c < 5; ++c) e(0, c) = cb(3, c);
  auto q3 = quantize(e, cb);
  CHECK(q3.indices[0] == 3);
  CHECK(nearest_code(e.row(0), cb).second == 0.0);

  // Equidistant codes resolve to the lower index.
  Matrix tie(2, 1);
  tie(0, 0) = -1;
  tie(1, 0) = 1;
  Matrix mid(1, 1);
  CHECK(quantize(mid, tie).indices[0] == 0);

  CHECK_THROWS_AS(quantize(z, Matrix(0, 2)), ParameterError);
  CHECK_THROWS_AS(quantize(z, Matrix(2, 3)), ParameterError);
}

TEST_CASE("quantize matches exhaustive search") {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 5; ++t) {
    auto codes = random_matrix(rng, 128, 32);
    auto z = random_matrix(rng, 1000, 32);
    auto q = quantize(z, codes);
    for (std::size_t i = 0; i < z.rows; ++i) REQUIRE(q.indices[i] == brute_nearest(z, i, codes));
  }
}

TEST_CASE("fit_kmeans: objective never increases; stable centers are means") {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 10; ++t) {
    auto data = random_matrix(rng, 300, 6);
    auto r = fit_kmeans(data, 12, 50, static_cast<std::uint64_t>(t));
    for (std::size_t i = 1; i < r.objective.size(); ++i)
      CHECK(r.objective[i] <= r.objective[i - 1] + 1e-9);
    if (r.stable) {
      Matrix sums(12, 6);
      std::vector<int> n(12, 0);
      for (std::size_t i = 0; i < data.rows; ++i) {
        ++n[r.assignment[i]];
        for (int d = 0; d < 6; ++d) sums(r.assignment[i], d) += data(i, d);
      }
      for (int k = 0; k < 12; ++k) {
        CHECK(n[k] > 0);
        for (int d = 0; d < 6; ++d) CHECK(std::abs(sums(k, d) / n[k] - r.centers(k, d)) < 1e-9);
      }
    }
  }
}

TEST_CASE("fit_kmeans: two separated clusters are recovered") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(0, 0.1);
  Matrix data(200, 4);
  std::vector<int> label(200);
  for (int i = 0; i < 200; ++i) {
    label[i] = (i * 7) % 2;
    for (int d = 0; d < 4; ++d) data(i, d) = (label[i] ? 10.0 : -10.0) + n(rng);
  }
  auto r = fit_kmeans(data, 2, 20, 5);
  CHECK(r.stable);
  int a0 = r.assignment[0];
  for (int i = 0; i < 200; ++i) CHECK((r.assignment[i] == std::uint32_t(a0)) == (label[i] == label[0]));
}

TEST_CASE("fit_kmeans: errors") {
  Matrix d(3, 2);
  CHECK_THROWS_AS(fit_kmeans(d, 4, 5, 0), TrainingError);
  CHECK_THROWS_AS(fit_kmeans(d, 0, 5, 0), ParameterError);
  CHECK_THROWS_AS(fit_kmeans(d, 2, 0, 0), ParameterError);
}

TEST_CASE("train_codebook: identical patches collapse to one code") {
  GridSpec spec = test::small_spec(8, 8, 8);
  PatchLayout layout{4};
  PillarGrid sparse(spec), dense(spec);
  for (int tr = 0; tr < 2; ++tr)
    for (int tc = 0; tc < 2; ++tc) {
      sparse.at(tr * 4 + 1, tc * 4 + 2, 7) = 1.0;
      dense.at(tr * 4 + 1, tc * 4 + 2, 7) = 1.0;
      dense.at(tr * 4 + 3, tc * 4 + 3, 7) = 1.0;
      dense.at(tr * 4 + 3, tc * 4 + 3, 0) = 0.5 + tr;  // varies by tile
    }
  std::vector<TrainingPair> pairs{{sparse, dense}};
  auto cb = train_codebook(pairs, layout, 2, 10, 0);
  REQUIRE(cb.K() == 2);
  int used = 0;
  for (std::size_t k = 0; k < 2; ++k) {
    if (cb.usage[k] == 0) continue;
    ++used;
    CHECK(cb.usage[k] == 4);
    auto zd = patchify(dense, layout);
    for (std::size_t d = 0; d < zd.cols; ++d) {
      double mean = (zd(0, d) + zd(1, d) + zd(2, d) + zd(3, d)) / 4;
      CHECK(cb.dense_atoms(k, d) == doctest::Approx(mean));
    }
  }
  CHECK(used == 1);
}

TEST_CASE("train_codebook: reserved empty code and invariants") {
  std::mt19937_64 rng(6);
  GridSpec spec = test::small_spec(16, 16, 8);
  PatchLayout layout{4};
  std::vector<TrainingPair> pairs;
  for (int i = 0; i < 6; ++i) {
    auto dense = test::random_grid(rng, spec, 0.3);
    auto sparse = dense;
    std::uniform_real_distribution<double> u(0, 1);
    for (int r = 0; r < spec.H; ++r)
      for (int c = 0; c < spec.W; ++c)
        if (u(rng) < 0.6 || r < 4)
          for (int ch = 0; ch < spec.C; ++ch) sparse.at(r, c, ch) = 0.0;
    pairs.push_back({sparse, dense});
  }
  TrainOptions opt;
  opt.K = 16;
  opt.iters = 30;
  auto rep = train_codebook_report(pairs, layout, opt);
  const auto& cb = rep.codebook;
  CHECK(rep.empty_patches > 0);
  CHECK(cb.K() == 16);
  CHECK(cb.code_dim() == 128);
  CHECK(cb.patch_dim() == 128);
  for (std::size_t d = 0; d < cb.code_dim(); ++d) CHECK(cb.codes(0, d) == 0.0);
  CHECK(cb.usage[0] == rep.empty_patches);
  for (auto u : cb.usage) CHECK(u >= 1);
  for (double v : cb.occ_atoms.data) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
  for (double v : cb.codes.data) CHECK(std::isfinite(v));

  opt.K = 1000;
  CHECK_THROWS_AS(train_codebook_report(pairs, layout, opt), TrainingError);
}

TEST_CASE("complete: memorized grid and all-zero input") {
  std::mt19937_64 rng(7);
  GridSpec spec = test::small_spec(8, 8, 8);
  PatchLayout layout{4};
  auto cb = random_codebook(rng, 6, 4, 8);
  auto g = test::random_grid(rng, spec, 1.0);
  auto zg = patchify(g, layout);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t d = 0; d < zg.cols; ++d) cb.codes(i + 1, d) = zg(i, d);
  auto res = complete(g, cb, layout);
  auto zh = patchify(res.dense_hat, layout);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(res.code_indices[i] == i + 1);
    for (std::size_t d = 0; d < zh.cols; ++d) CHECK(zh(i, d) == cb.dense_atoms(i + 1, d));
  }

  auto zero = complete(PillarGrid(spec), cb, layout);
  Matrix origin(1, cb.code_dim());
  auto k0 = nearest_code(origin.row(0), cb.codes).first;
  auto zz = patchify(zero.dense_hat, layout);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(zero.code_indices[i] == k0);
    for (std::size_t d = 0; d < zz.cols; ++d) CHECK(zz(i, d) == cb.dense_atoms(k0, d));
  }
  for (double v : zero.occ_hat) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }

  PatchLayout wrong{2};
  CHECK_THROWS_AS(complete(g, cb, wrong), ParameterError);
}

TEST_CASE("rec_loss") {
  std::mt19937_64 rng(8);
  GridSpec spec = test::small_spec(4, 4, 8);
  auto dense = test::random_grid(rng, spec, 0.5);
  auto mask = occupancy_of(dense);
  std::vector<double> perfect(spec.cells());
  for (std::size_t i = 0; i < perfect.size(); ++i) perfect[i] = mask.data[i] ? 1.0 : 0.0;
  auto r = rec_loss(dense, perfect, dense);
  CHECK(r.masked_mse == 0.0);
  CHECK(r.bce < 1e-5);

  std::vector<double> half(spec.cells(), 0.5);
  auto h = rec_loss(dense, half, dense);
  CHECK(std::abs(h.bce - std::log(2.0)) < 1e-9);

  PillarGrid one(spec), pred(spec);
  one.at(2, 1, 7) = 1.0;
  pred.at(2, 1, 7) = 1.0;
  pred.at(2, 1, 0) = 2.0;
  auto m = rec_loss(pred, half, one);
  CHECK(m.masked_mse == doctest::Approx(4.0));
  CHECK(m.total == doctest::Approx(m.bce + 4.0));

  auto e = rec_loss(pred, half, PillarGrid(spec));
  CHECK(e.empty_target);
  CHECK(e.masked_mse == 0.0);

  CompletionResult cr{dense, perfect, {}};
  CHECK(rec_loss(cr, dense).total == r.total);
  CHECK_THROWS_AS(rec_loss(dense, std::vector<double>(3, 0.5), dense), ParameterError);
}

TEST_CASE("vq_loss and total_codec_loss") {
  Matrix a(1, 3), b(1, 3);
  CHECK(vq_loss(a, b, 0.25) == 0.0);
  b(0, 1) = 1.0;
  CHECK(vq_loss(a, b, 0.25) == doctest::Approx(1.25));
  b(0, 1) = 2.0;
  CHECK(vq_loss(a, b, 0.25) == doctest::Approx(5.0));
  CHECK_THROWS_AS(vq_loss(a, Matrix(2, 3), 0.25), ParameterError);

  CHECK(total_codec_loss(0.0, 0.0, 10) == 0.0);
  CHECK(total_codec_loss(0.05, 1.25, 10) == doctest::Approx(1.75));
  CHECK(total_codec_loss(0.7, 1.25, 0) == 1.25);
}

TEST_CASE("CCBK round trip") {
  std::mt19937_64 rng(9);
  for (int t = 0; t < 10; ++t) {
    auto cb = random_codebook(rng, 5 + t, 4, 8);
    std::stringstream ss;
    write_codebook(ss, cb);
    CHECK(read_codebook(ss) == cb);
  }
  std::stringstream bad("CCBQ");
  CHECK_THROWS_AS(read_codebook(bad), IoError);
  CHECK_THROWS_AS(load_codebook("/nonexistent/cb.bin"), IoError);
}
