#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

#include "colc/pillars.hpp"

namespace colc {

/// Learned completion model: K code vectors, and per code the mean dense
/// patch and mean dense occupancy patch of the training patches it absorbed.
/// The patch embedding is the identity, so D_c == D_p.
struct Codebook {
  int p = 4;
  int C = kPillarStatChannels;
  Matrix codes;        // K x D_c
  Matrix dense_atoms;  // K x D_p
  Matrix occ_atoms;    // K x p*p, values in [0, 1]
  std::vector<std::uint32_t> usage;

  std::size_t K() const { return codes.rows; }
  std::size_t code_dim() const { return codes.cols; }
  std::size_t patch_dim() const { return dense_atoms.cols; }

  friend bool operator==(const Codebook&, const Codebook&) = default;
};

struct Quantized {
  std::vector<std::uint32_t> indices;
  Matrix z_q;
};

/// Nearest code by Euclidean distance for each row of `z`; ties go to the
/// lowest index.
Quantized quantize(const Matrix& z, const Matrix& codes);
inline Quantized quantize(const Matrix& z, const Codebook& codebook) {
  return quantize(z, codebook.codes);
}

/// Index of the nearest row of `centers` to `v` (lowest index on ties) and
/// its squared distance.
std::pair<std::uint32_t, double> nearest_code(const double* v,
                                              const Matrix& centers);

struct KMeansResult {
  Matrix centers;
  std::vector<std::uint32_t> assignment;
  std::vector<std::uint32_t> counts;
  /// Sum of squared distances to the assigned center after each
  /// assignment step.
  std::vector<double> objective;
  int iterations = 0;
  /// Assignments stopped changing, so every center is the exact mean of
  /// its members.
  bool stable = false;
};

/// Farthest-first seeding from row `seed % N`, then Lloyd iterations.
/// Empty clusters are reseeded at the point farthest from its center.
KMeansResult fit_kmeans(const Matrix& data, std::size_t K, int iters,
                        std::uint64_t seed);

struct TrainingPair {
  PillarGrid sparse;
  PillarGrid dense;
};

struct TrainOptions {
  std::size_t K = 128;
  int iters = 20;
  std::uint64_t seed = 0;
  /// Pin code 0 to the zero vector and fit its atoms on the all-zero
  /// sparse patches; the remaining K-1 codes cluster non-zero patches.
  bool reserve_empty_code = true;
};

struct TrainReport {
  Codebook codebook;
  KMeansResult clustering;
  std::size_t nonzero_patches = 0;
  std::size_t empty_patches = 0;
};

/// Clusters the non-zero sparse patches of the corpus and attaches to every
/// code the mean dense patch and dense occupancy patch of its members.
/// Throws TrainingError when fewer than K non-zero patches exist.
TrainReport train_codebook_report(std::span<const TrainingPair> pairs,
                                  const PatchLayout& layout,
                                  const TrainOptions& options);
Codebook train_codebook(std::span<const TrainingPair> pairs,
                        const PatchLayout& layout, std::size_t K, int iters,
                        std::uint64_t seed);

struct CompletionResult {
  PillarGrid dense_hat;
  std::vector<double> occ_hat;  // H x W, in [0, 1]
  std::vector<std::uint32_t> code_indices;
};

/// Patchify, quantize, and decode each patch through its code's atoms.
CompletionResult complete(const PillarGrid& sparse, const Codebook& codebook,
                          const PatchLayout& layout);

struct RecLoss {
  double bce = 0.0;
  double masked_mse = 0.0;
  double total = 0.0;
  /// The dense target had no occupied cell; masked_mse is reported as 0.
  bool empty_target = false;
};

inline constexpr double kProbClamp = 1e-7;

/// Occupancy BCE (probabilities clamped to [1e-7, 1-1e-7]) plus squared
/// feature error averaged over occupied dense cells.
RecLoss rec_loss(const CompletionResult& result, const PillarGrid& dense);
/// Same, from raw fields.
RecLoss rec_loss(const PillarGrid& dense_hat, const std::vector<double>& occ_hat,
                 const PillarGrid& dense);

/// Mean over rows of ||z_s - z_q||^2 + beta ||z_s - z_q||^2. The two
/// terms only differ in where gradients stop, so as a metric this is
/// (1 + beta) times the mean squared gap.
double vq_loss(const Matrix& z_s, const Matrix& z_q, double beta);

/// lambda * rec + vq.
double total_codec_loss(double rec, double vq, double lambda);

// CCBK binary format: "CCBK", u8 version=1, u32 K, u32 D_c, u32 D_p, u32 p,
// then codes, dense_atoms, occ_atoms as f32 and usage as u32.
void write_codebook(std::ostream& out, const Codebook& codebook);
Codebook read_codebook(std::istream& in);
void save_codebook(const std::filesystem::path& path, const Codebook& codebook);
Codebook load_codebook(const std::filesystem::path& path);

}  // namespace colc
