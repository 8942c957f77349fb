#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "colc/config.hpp"
#include "colc/vqcodec.hpp"

namespace colc {

/// One row per (scene, frame, ego, setting). The CSV carries the first ten
/// fields; the rest are kept for in-process analysis.
struct MetricsRecord {
  std::string scenario;
  double r_fg = 0.0;
  double r_bg = 0.0;
  double comm_volume = 0.0;
  double iou_sparse = 0.0;
  double iou_enhanced = 0.0;
  double mse_enhanced = 0.0;
  double kl = 0.0;
  double cosine_loss = 0.0;
  double wall_ms = 0.0;

  int scene_index = 0;
  int frame = 0;
  AgentId ego = 0;
  double pose_noise_m = 0.0;
  double latency_ms = 0.0;
  std::size_t element_count = 0;
  double mse_sparse = 0.0;  // sparse fusion with empty cells left at zero
  double iou_ego = 0.0;     // ego cloud alone
  double alignment_total = 0.0;
};

inline constexpr const char* kCsvHeader =
    "scenario,r_fg,r_bg,comm_volume,iou_sparse,iou_enhanced,mse_enhanced,kl,"
    "cosine_loss,wall_ms";

/// Scene seeds: training scenes are even, evaluation scenes odd.
std::uint64_t train_scene_seed(std::uint64_t master, int index);
std::uint64_t eval_scene_seed(std::uint64_t master, int index);

/// (sparse, dense) pillar pairs for every ordered (ego, neighbor) pair of
/// the training scenes, both expressed on the ego grid with true poses.
std::vector<TrainingPair> build_training_corpus(const ScenarioConfig& config);

/// Loads `config.codebook.path` when set, otherwise trains on the corpus.
Codebook obtain_codebook(const ScenarioConfig& config);

/// Runs the collaborative pipeline on every evaluation scene and measures
/// the enhanced fusion against the dense reference built from full clouds
/// and true poses.
std::vector<MetricsRecord> run_scenario(const ScenarioConfig& config,
                                        const Codebook& codebook);

/// Cartesian product r_bg x noise x latency, in that nesting order; each
/// setting reuses the same scenes and per-row seeds.
std::vector<MetricsRecord> sweep(const ScenarioConfig& config, const Codebook& codebook,
                                 const std::vector<double>& r_bg_list,
                                 const std::vector<double>& noise_list,
                                 const std::vector<double>& latency_list);

void write_csv(std::ostream& out, const std::vector<MetricsRecord>& rows);
void write_csv(const std::filesystem::path& path, const std::vector<MetricsRecord>& rows);

}  // namespace colc
