#include "colc/vqcodec.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <string>

#include "colc/binary_io.hpp"
#include "colc/error.hpp"
#include "colc/parallel.hpp"

namespace colc {
namespace {

// Squared distance with early exit once the partial sum exceeds `bound`.
// Partial sums of non-negative terms never decrease, so a row abandoned
// here could not have beaten (or tied) the bound.
double bounded_distance2(const double* a, const double* b, std::size_t dim,
                         double bound) {
  double sum = 0.0;
  for (std::size_t i = 0; i < dim; ++i) {
    const double d = a[i] - b[i];
    sum += d * d;
    if (sum > bound) return sum;
  }
  return sum;
}

double distance2(const double* a, const double* b, std::size_t dim) {
  double sum = 0.0;
  for (std::size_t i = 0; i < dim; ++i) {
    const double d = a[i] - b[i];
    sum += d * d;
  }
  return sum;
}

bool is_zero_row(const double* v, std::size_t dim) {
  return std::all_of(v, v + dim, [](double x) { return x == 0.0; });
}

std::vector<std::uint32_t> assign_all(const Matrix& data, const Matrix& centers,
                                      std::vector<double>& dist2) {
  std::vector<std::uint32_t> assignment(data.rows);
  dist2.assign(data.rows, 0.0);
  parallel_for(data.rows, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto [k, d] = nearest_code(data.row(i), centers);
      assignment[i] = k;
      dist2[i] = d;
    }
  });
  return assignment;
}

Matrix farthest_first(const Matrix& data, std::size_t K, std::uint64_t seed) {
  Matrix centers(K, data.cols);
  std::vector<double> min_d2(data.rows, std::numeric_limits<double>::infinity());
  std::size_t current = static_cast<std::size_t>(seed % data.rows);
  for (std::size_t k = 0; k < K; ++k) {
    std::copy(data.row(current), data.row(current) + data.cols, centers.row(k));
    min_d2[current] = -1.0;
    if (k + 1 == K) break;
    parallel_for(data.rows, [&](std::size_t begin, std::size_t end) {
      for (std::size_t i = begin; i < end; ++i) {
        if (min_d2[i] < 0.0) continue;
        min_d2[i] = std::min(min_d2[i], distance2(data.row(i), centers.row(k), data.cols));
      }
    });
    double best = -1.0;
    for (std::size_t i = 0; i < data.rows; ++i) {
      if (min_d2[i] > best) {
        best = min_d2[i];
        current = i;
      }
    }
  }
  return centers;
}

}  // namespace

std::pair<std::uint32_t, double> nearest_code(const double* v,
                                              const Matrix& centers) {
  std::uint32_t best_k = 0;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < centers.rows; ++k) {
    const double d = bounded_distance2(v, centers.row(k), centers.cols, best);
    if (d < best) {
      best = d;
      best_k = static_cast<std::uint32_t>(k);
    }
  }
  return {best_k, best};
}

Quantized quantize(const Matrix& z, const Matrix& codes) {
  if (codes.rows == 0) throw ParameterError("quantize: empty codebook");
  if (z.cols != codes.cols) {
    throw ParameterError("quantize: latent dim " + std::to_string(z.cols) +
                         " != code dim " + std::to_string(codes.cols));
  }
  Quantized out;
  out.z_q = Matrix(z.rows, z.cols);
  std::vector<double> unused;
  out.indices = assign_all(z, codes, unused);
  for (std::size_t i = 0; i < z.rows; ++i) {
    const double* e = codes.row(out.indices[i]);
    std::copy(e, e + codes.cols, out.z_q.row(i));
  }
  return out;
}

KMeansResult fit_kmeans(const Matrix& data, std::size_t K, int iters,
                        std::uint64_t seed) {
  if (K == 0) throw ParameterError("fit_kmeans: K must be >= 1");
  if (iters < 1) throw ParameterError("fit_kmeans: iters must be >= 1");
  if (data.rows < K) {
    throw TrainingError("fit_kmeans: " + std::to_string(data.rows) +
                        " vectors for K=" + std::to_string(K));
  }
  KMeansResult r;
  r.centers = farthest_first(data, K, seed);
  std::vector<double> dist2;

  for (int it = 0; it < iters; ++it) {
    auto assignment = assign_all(data, r.centers, dist2);
    double objective = 0.0;
    for (const double d : dist2) objective += d;
    r.objective.push_back(objective);
    r.iterations = it + 1;
    if (it > 0 && assignment == r.assignment) {
      r.stable = true;
      break;
    }
    r.assignment = std::move(assignment);

    // Recompute means in index order.
    Matrix sums(K, data.cols);
    r.counts.assign(K, 0);
    for (std::size_t i = 0; i < data.rows; ++i) {
      const auto k = r.assignment[i];
      ++r.counts[k];
      const double* v = data.row(i);
      double* s = sums.row(k);
      for (std::size_t d = 0; d < data.cols; ++d) s[d] += v[d];
    }
    std::vector<double> reseed_d2 = dist2;
    for (std::size_t k = 0; k < K; ++k) {
      if (r.counts[k] > 0) {
        const double n = r.counts[k];
        for (std::size_t d = 0; d < data.cols; ++d) r.centers(k, d) = sums(k, d) / n;
        continue;
      }
      // Dead code: move it onto the worst-served point not yet used.
      std::size_t far = 0;
      double best = -1.0;
      for (std::size_t i = 0; i < data.rows; ++i) {
        if (reseed_d2[i] > best) {
          best = reseed_d2[i];
          far = i;
        }
      }
      reseed_d2[far] = -1.0;
      std::copy(data.row(far), data.row(far) + data.cols, r.centers.row(k));
    }
  }
  if (!r.stable) {
    // Usage and membership reflect the final centers.
    r.assignment = assign_all(data, r.centers, dist2);
  }
  r.counts.assign(K, 0);
  for (const auto k : r.assignment) ++r.counts[k];
  return r;
}

TrainReport train_codebook_report(std::span<const TrainingPair> pairs,
                                  const PatchLayout& layout,
                                  const TrainOptions& options) {
  if (pairs.empty()) throw TrainingError("train_codebook: empty corpus");
  if (options.K == 0) throw ParameterError("train_codebook: K must be >= 1");
  if (options.iters < 1) throw ParameterError("train_codebook: iters must be >= 1");
  const GridSpec& spec = pairs.front().sparse.spec();
  layout.check(spec);
  const auto dim = static_cast<std::size_t>(layout.patch_dim(spec));
  const auto cells = static_cast<std::size_t>(layout.p) * layout.p;

  std::vector<double> sparse_rows, dense_rows, occ_rows;
  std::vector<double> empty_dense(dim, 0.0), empty_occ(cells, 0.0);
  TrainReport report;
  for (const auto& pair : pairs) {
    if (!(pair.sparse.spec() == spec) || !(pair.dense.spec() == spec)) {
      throw ParameterError("train_codebook: all grids must share one spec");
    }
    const Matrix zs = patchify(pair.sparse, layout);
    const Matrix zd = patchify(pair.dense, layout);
    const OccupancyMask mask = occupancy_of(pair.dense);
    const std::vector<double> occ_field(mask.data.begin(), mask.data.end());
    const Matrix zo = patchify_field(occ_field, spec, layout);
    for (std::size_t i = 0; i < zs.rows; ++i) {
      if (is_zero_row(zs.row(i), dim)) {
        ++report.empty_patches;
        for (std::size_t d = 0; d < dim; ++d) empty_dense[d] += zd(i, d);
        for (std::size_t d = 0; d < cells; ++d) empty_occ[d] += zo(i, d);
        continue;
      }
      ++report.nonzero_patches;
      sparse_rows.insert(sparse_rows.end(), zs.row(i), zs.row(i) + dim);
      dense_rows.insert(dense_rows.end(), zd.row(i), zd.row(i) + dim);
      occ_rows.insert(occ_rows.end(), zo.row(i), zo.row(i) + cells);
    }
  }
  if (report.nonzero_patches < options.K) {
    throw TrainingError("train_codebook: corpus has " +
                        std::to_string(report.nonzero_patches) +
                        " non-zero sparse patches, need at least K=" +
                        std::to_string(options.K));
  }

  const bool reserve = options.reserve_empty_code && report.empty_patches > 0 &&
                       options.K > 1;
  const std::size_t offset = reserve ? 1 : 0;
  Matrix data;
  data.rows = report.nonzero_patches;
  data.cols = dim;
  data.data = std::move(sparse_rows);
  report.clustering = fit_kmeans(data, options.K - offset, options.iters, options.seed);

  Codebook& cb = report.codebook;
  cb.p = layout.p;
  cb.C = spec.C;
  cb.codes = Matrix(options.K, dim);
  cb.dense_atoms = Matrix(options.K, dim);
  cb.occ_atoms = Matrix(options.K, cells);
  cb.usage.assign(options.K, 0);

  if (reserve) {
    const double n = static_cast<double>(report.empty_patches);
    for (std::size_t d = 0; d < dim; ++d) cb.dense_atoms(0, d) = empty_dense[d] / n;
    for (std::size_t d = 0; d < cells; ++d) cb.occ_atoms(0, d) = empty_occ[d] / n;
    cb.usage[0] = static_cast<std::uint32_t>(report.empty_patches);
  }
  const KMeansResult& km = report.clustering;
  for (std::size_t k = 0; k < km.centers.rows; ++k) {
    std::copy(km.centers.row(k), km.centers.row(k) + dim, cb.codes.row(k + offset));
    cb.usage[k + offset] = km.counts[k];
  }
  for (std::size_t i = 0; i < km.assignment.size(); ++i) {
    const std::size_t k = km.assignment[i] + offset;
    for (std::size_t d = 0; d < dim; ++d) cb.dense_atoms(k, d) += dense_rows[i * dim + d];
    for (std::size_t d = 0; d < cells; ++d) cb.occ_atoms(k, d) += occ_rows[i * cells + d];
  }
  for (std::size_t k = offset; k < options.K; ++k) {
    if (cb.usage[k] == 0) continue;
    const double n = cb.usage[k];
    for (std::size_t d = 0; d < dim; ++d) cb.dense_atoms(k, d) /= n;
    for (std::size_t d = 0; d < cells; ++d) cb.occ_atoms(k, d) /= n;
  }
  return report;
}

Codebook train_codebook(std::span<const TrainingPair> pairs,
                        const PatchLayout& layout, std::size_t K, int iters,
                        std::uint64_t seed) {
  TrainOptions options;
  options.K = K;
  options.iters = iters;
  options.seed = seed;
  return train_codebook_report(pairs, layout, options).codebook;
}

CompletionResult complete(const PillarGrid& sparse, const Codebook& codebook,
                          const PatchLayout& layout) {
  const GridSpec& spec = sparse.spec();
  layout.check(spec);
  const auto dim = static_cast<std::size_t>(layout.patch_dim(spec));
  if (codebook.p != layout.p || codebook.code_dim() != dim ||
      codebook.patch_dim() != dim || codebook.K() == 0) {
    throw ParameterError("complete: codebook (p=" + std::to_string(codebook.p) +
                         ", D_c=" + std::to_string(codebook.code_dim()) +
                         ") does not match layout (p=" + std::to_string(layout.p) +
                         ", D_p=" + std::to_string(dim) + ")");
  }
  const Matrix z = patchify(sparse, layout);
  Quantized q = quantize(z, codebook);

  Matrix dense_patches(z.rows, dim);
  Matrix occ_patches(z.rows, codebook.occ_atoms.cols);
  for (std::size_t i = 0; i < z.rows; ++i) {
    const auto k = q.indices[i];
    std::copy(codebook.dense_atoms.row(k), codebook.dense_atoms.row(k) + dim,
              dense_patches.row(i));
    std::copy(codebook.occ_atoms.row(k),
              codebook.occ_atoms.row(k) + codebook.occ_atoms.cols, occ_patches.row(i));
  }
  CompletionResult out;
  out.dense_hat = unpatchify(dense_patches, layout, spec);
  out.occ_hat = unpatchify_field(occ_patches, spec, layout);
  for (double& v : out.occ_hat) v = std::clamp(v, 0.0, 1.0);
  out.code_indices = std::move(q.indices);
  return out;
}

RecLoss rec_loss(const PillarGrid& dense_hat, const std::vector<double>& occ_hat,
                 const PillarGrid& dense) {
  const GridSpec& spec = dense.spec();
  if (!(dense_hat.spec() == spec) || occ_hat.size() != spec.cells()) {
    throw ParameterError("rec_loss: shape mismatch");
  }
  const OccupancyMask target = occupancy_of(dense);
  RecLoss loss;
  double bce = 0.0;
  double se = 0.0;
  std::size_t occupied = 0;
  for (std::size_t cell = 0; cell < spec.cells(); ++cell) {
    const double q = std::clamp(occ_hat[cell], kProbClamp, 1.0 - kProbClamp);
    const bool y = target.data[cell] != 0;
    bce -= y ? std::log(q) : std::log(1.0 - q);
    if (!y) continue;
    ++occupied;
    const std::size_t off = cell * static_cast<std::size_t>(spec.C);
    for (int c = 0; c < spec.C; ++c) {
      const double d = dense_hat.data()[off + c] - dense.data()[off + c];
      se += d * d;
    }
  }
  loss.bce = bce / static_cast<double>(spec.cells());
  if (occupied == 0) {
    loss.empty_target = true;
  } else {
    loss.masked_mse = se / static_cast<double>(occupied);
  }
  loss.total = loss.bce + loss.masked_mse;
  return loss;
}

RecLoss rec_loss(const CompletionResult& result, const PillarGrid& dense) {
  return rec_loss(result.dense_hat, result.occ_hat, dense);
}

double vq_loss(const Matrix& z_s, const Matrix& z_q, double beta) {
  if (z_s.rows != z_q.rows || z_s.cols != z_q.cols) {
    throw ParameterError("vq_loss: shape mismatch");
  }
  if (z_s.rows == 0) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < z_s.rows; ++i) {
    const double gap = distance2(z_s.row(i), z_q.row(i), z_s.cols);
    sum += gap + beta * gap;  // codebook term + commitment term
  }
  return sum / static_cast<double>(z_s.rows);
}

double total_codec_loss(double rec, double vq, double lambda) {
  return lambda * rec + vq;
}

// ---------------------------------------------------------------------------
// Serialization

void write_codebook(std::ostream& out, const Codebook& cb) {
  io::write_magic(out, "CCBK", 1);
  io::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(cb.K()));
  io::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(cb.code_dim()));
  io::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(cb.patch_dim()));
  io::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(cb.p));
  for (const Matrix* m : {&cb.codes, &cb.dense_atoms, &cb.occ_atoms}) {
    for (const double v : m->data) io::write_pod<float>(out, static_cast<float>(v));
  }
  for (const auto u : cb.usage) io::write_pod<std::uint32_t>(out, u);
}

Codebook read_codebook(std::istream& in) {
  io::expect_magic(in, "CCBK", 1);
  const auto K = io::read_pod<std::uint32_t>(in, "K");
  const auto dc = io::read_pod<std::uint32_t>(in, "D_c");
  const auto dp = io::read_pod<std::uint32_t>(in, "D_p");
  const auto p = io::read_pod<std::uint32_t>(in, "p");
  if (p == 0 || dp % (p * p) != 0) {
    throw IoError("CCBK: D_p=" + std::to_string(dp) +
                  " is not a multiple of p*p for p=" + std::to_string(p));
  }
  Codebook cb;
  cb.p = static_cast<int>(p);
  cb.C = static_cast<int>(dp / (p * p));
  cb.codes = Matrix(K, dc);
  cb.dense_atoms = Matrix(K, dp);
  cb.occ_atoms = Matrix(K, static_cast<std::size_t>(p) * p);
  for (Matrix* m : {&cb.codes, &cb.dense_atoms, &cb.occ_atoms}) {
    for (double& v : m->data) v = io::read_pod<float>(in, "codebook block");
  }
  cb.usage.resize(K);
  for (auto& u : cb.usage) u = io::read_pod<std::uint32_t>(in, "usage");
  return cb;
}

void save_codebook(const std::filesystem::path& path, const Codebook& codebook) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  write_codebook(out, codebook);
  if (!out) throw IoError("write failed: " + path.string());
}

Codebook load_codebook(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path.string());
  try {
    return read_codebook(in);
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

}  // namespace colc
