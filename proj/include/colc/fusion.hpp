#pragma once

#include <span>
#include <vector>

#include "colc/faps.hpp"
#include "colc/pillars.hpp"
#include "colc/vqcodec.hpp"

namespace colc {

using WeightMap = std::vector<double>;  // H x W, one scalar per cell

struct FusionOutput {
  PillarGrid enhanced;
  PillarGrid sparse_fused;
  OccupancyMask observed_mask;
  std::vector<WeightMap> weights;  // one per neighbor
};

/// Pillarizes the ego cloud concatenated with every message cloud. All
/// clouds must already be in the ego frame.
PillarGrid sparse_early_fusion(const PointCloud& ego,
                               std::span<const Message> messages,
                               const GridSpec& spec);

/// Zeroes cells whose predicted occupancy is <= tau_o, then overwrites
/// every cell the neighbor actually observed with its sparse values, so
/// observations survive the gate.
PillarGrid gate_and_preserve(const CompletionResult& completed,
                             const PillarGrid& sparse_neighbor, double tau_o);

/// Per cell, softmax over the neighbors whose gated grid is non-zero there,
/// with each neighbor's predicted occupancy as the logit. Cells no neighbor
/// survives get weight 0 for everyone.
std::vector<WeightMap> adaptive_weights(std::span<const PillarGrid> gated,
                                        std::span<const std::vector<double>> occs,
                                        const PillarGrid& sparse_fused);

/// Weighted sum of the gated neighbor grids, written only into cells the
/// sparse fusion left empty.
FusionOutput complementary_fuse(const PillarGrid& sparse_fused,
                                std::span<const PillarGrid> gated,
                                std::vector<WeightMap> weights);

struct FusionSwitches {
  bool sparse_early_fusion = true;  // off: start from the ego grid alone
  bool completion = true;           // off: neighbors contribute sparse grids
  bool adaptive_fusion = true;      // off: enhanced is the sparse fusion
};

/// Full completion-enhanced early fusion for one ego.
FusionOutput completion_enhanced_fusion(const PointCloud& ego,
                                        std::span<const Message> messages,
                                        const GridSpec& spec,
                                        const Codebook& codebook,
                                        const PatchLayout& layout, double tau_o,
                                        const FusionSwitches& switches = {});

}  // namespace colc
