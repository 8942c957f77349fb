#pragma once

#include <vector>

#include "colc/pillars.hpp"

namespace colc {

/// A metric value plus whether it fell back to its empty-domain default.
struct Metric {
  double value = 0.0;
  bool degenerate = false;
};

inline constexpr double kKlProbFloor = 1e-12;
inline constexpr double kCosineNormFloor = 1e-9;

/// Mean over cells occupied in `dense` of KL(softmax(enhanced) ||
/// softmax(dense)), softmax taken over channels. 0 (degenerate) when dense
/// is empty.
Metric kl_alignment(const PillarGrid& enhanced, const PillarGrid& dense);

/// Mean of 1 - cos over cells where both channel vectors have norm above
/// 1e-9. 0 (degenerate) when no cell qualifies.
Metric cosine_alignment(const PillarGrid& enhanced, const PillarGrid& dense);

/// IoU of `pred >= threshold` against the mask. 1.0 (degenerate) when the
/// union is empty.
Metric occupancy_iou(const std::vector<double>& pred, const OccupancyMask& target,
                     double threshold = 0.5);
Metric occupancy_iou(const OccupancyMask& pred, const OccupancyMask& target);

/// Feature squared error averaged over cells occupied in `dense`.
Metric masked_mse(const PillarGrid& pred, const PillarGrid& dense);

double alignment_total(double kl, double cosine_loss, double gamma1 = 1000.0,
                       double gamma2 = 10.0);

struct AlignmentReport {
  double kl = 0.0;
  double cosine_loss = 0.0;
  double iou = 0.0;
  double masked_mse = 0.0;
  double weighted_total = 0.0;
};

/// All measures of `enhanced` against `dense`; IoU uses non-zero cells.
AlignmentReport alignment_report(const PillarGrid& enhanced, const PillarGrid& dense,
                                 double gamma1 = 1000.0, double gamma2 = 10.0);

}  // namespace colc
