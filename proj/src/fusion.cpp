#include "colc/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "colc/error.hpp"
#include "colc/parallel.hpp"

namespace colc {

PillarGrid sparse_early_fusion(const PointCloud& ego,
                               std::span<const Message> messages,
                               const GridSpec& spec) {
  std::vector<const PointCloud*> clouds{&ego};
  for (const auto& m : messages) clouds.push_back(&m.cloud);
  return pillarize(clouds, spec);
}

PillarGrid gate_and_preserve(const CompletionResult& completed,
                             const PillarGrid& sparse_neighbor, double tau_o) {
  const GridSpec& spec = sparse_neighbor.spec();
  if (!(completed.dense_hat.spec() == spec) || completed.occ_hat.size() != spec.cells()) {
    throw ParameterError("gate_and_preserve: shape mismatch");
  }
  PillarGrid out(spec);
  const auto C = static_cast<std::size_t>(spec.C);
  for (int r = 0; r < spec.H; ++r) {
    for (int c = 0; c < spec.W; ++c) {
      const std::size_t cell = static_cast<std::size_t>(r) * spec.W + c;
      const std::size_t off = cell * C;
      const PillarGrid* src = nullptr;
      if (sparse_neighbor.occupied(r, c)) {
        src = &sparse_neighbor;
      } else if (completed.occ_hat[cell] > tau_o) {
        src = &completed.dense_hat;
      }
      if (src == nullptr) continue;
      std::copy_n(src->data().data() + off, C, out.data().data() + off);
    }
  }
  return out;
}

std::vector<WeightMap> adaptive_weights(std::span<const PillarGrid> gated,
                                        std::span<const std::vector<double>> occs,
                                        const PillarGrid& sparse_fused) {
  if (gated.empty()) throw ParameterError("adaptive_weights: no neighbors");
  const GridSpec& spec = sparse_fused.spec();
  if (occs.size() != gated.size()) {
    throw ParameterError("adaptive_weights: " + std::to_string(gated.size()) +
                         " grids but " + std::to_string(occs.size()) +
                         " occupancy fields");
  }
  for (std::size_t j = 0; j < gated.size(); ++j) {
    if (!(gated[j].spec() == spec) || occs[j].size() != spec.cells()) {
      throw ParameterError("adaptive_weights: shape mismatch for neighbor " +
                           std::to_string(j));
    }
  }
  std::vector<WeightMap> weights(gated.size(), WeightMap(spec.cells(), 0.0));
  std::vector<double> logits(gated.size());
  for (int r = 0; r < spec.H; ++r) {
    for (int c = 0; c < spec.W; ++c) {
      const std::size_t cell = static_cast<std::size_t>(r) * spec.W + c;
      double max_logit = -1e300;
      bool any = false;
      for (std::size_t j = 0; j < gated.size(); ++j) {
        if (!gated[j].occupied(r, c)) continue;
        any = true;
        max_logit = std::max(max_logit, occs[j][cell]);
      }
      if (!any) continue;
      double z = 0.0;
      for (std::size_t j = 0; j < gated.size(); ++j) {
        logits[j] = gated[j].occupied(r, c) ? std::exp(occs[j][cell] - max_logit) : 0.0;
        z += logits[j];
      }
      for (std::size_t j = 0; j < gated.size(); ++j) weights[j][cell] = logits[j] / z;
    }
  }
  return weights;
}

FusionOutput complementary_fuse(const PillarGrid& sparse_fused,
                                std::span<const PillarGrid> gated,
                                std::vector<WeightMap> weights) {
  const GridSpec& spec = sparse_fused.spec();
  if (weights.size() != gated.size()) {
    throw ParameterError("complementary_fuse: weights/grids count mismatch");
  }
  for (std::size_t j = 0; j < gated.size(); ++j) {
    if (!(gated[j].spec() == spec) || weights[j].size() != spec.cells()) {
      throw ParameterError("complementary_fuse: shape mismatch for neighbor " +
                           std::to_string(j));
    }
  }
  FusionOutput out;
  out.sparse_fused = sparse_fused;
  out.observed_mask = occupancy_of(sparse_fused);
  out.enhanced = sparse_fused;
  const auto C = static_cast<std::size_t>(spec.C);
  for (std::size_t cell = 0; cell < spec.cells(); ++cell) {
    if (out.observed_mask.data[cell] != 0) continue;
    double* dst = out.enhanced.data().data() + cell * C;
    for (std::size_t j = 0; j < gated.size(); ++j) {
      const double w = weights[j][cell];
      if (w == 0.0) continue;
      const double* src = gated[j].data().data() + cell * C;
      for (std::size_t ch = 0; ch < C; ++ch) dst[ch] += w * src[ch];
    }
  }
  out.weights = std::move(weights);
  return out;
}

FusionOutput completion_enhanced_fusion(const PointCloud& ego,
                                        std::span<const Message> messages,
                                        const GridSpec& spec,
                                        const Codebook& codebook,
                                        const PatchLayout& layout, double tau_o,
                                        const FusionSwitches& switches) {
  const PillarGrid sparse_fused =
      switches.sparse_early_fusion ? sparse_early_fusion(ego, messages, spec)
                                   : pillarize(ego, spec);
  if (!switches.adaptive_fusion || messages.empty()) {
    return complementary_fuse(sparse_fused, {}, {});
  }

  // Neighbors are independent; each slot is written by exactly one task.
  std::vector<PillarGrid> gated(messages.size());
  std::vector<std::vector<double>> occs(messages.size());
  parallel_for(messages.size(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t j = begin; j < end; ++j) {
      const PillarGrid sparse = pillarize(messages[j].cloud, spec);
      if (switches.completion) {
        const CompletionResult completed = complete(sparse, codebook, layout);
        gated[j] = gate_and_preserve(completed, sparse, tau_o);
        occs[j] = completed.occ_hat;
      } else {
        const OccupancyMask mask = occupancy_of(sparse);
        occs[j].assign(mask.data.begin(), mask.data.end());
        gated[j] = sparse;
      }
    }
  });
  auto weights = adaptive_weights(gated, occs, sparse_fused);
  return complementary_fuse(sparse_fused, gated, std::move(weights));
}

}  // namespace colc
