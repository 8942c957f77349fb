#include "colc/align_metrics.hpp"

#include <algorithm>
#include <cmath>

#include "colc/error.hpp"

namespace colc {
namespace {

void require_same_shape(const PillarGrid& a, const PillarGrid& b, const char* who) {
  if (!(a.spec() == b.spec())) {
    throw ParameterError(std::string(who) + ": grid shapes differ");
  }
}

void softmax(const double* logits, int n, std::vector<double>& out) {
  out.resize(static_cast<std::size_t>(n));
  const double m = *std::max_element(logits, logits + n);
  double z = 0.0;
  for (int i = 0; i < n; ++i) {
    out[i] = std::exp(logits[i] - m);
    z += out[i];
  }
  for (double& v : out) v = std::max(v / z, kKlProbFloor);
}

}  // namespace

Metric kl_alignment(const PillarGrid& enhanced, const PillarGrid& dense) {
  require_same_shape(enhanced, dense, "kl_alignment");
  const GridSpec& spec = dense.spec();
  if (spec.C < 2) throw ParameterError("kl_alignment: need at least 2 channels");
  const OccupancyMask mask = occupancy_of(dense);
  std::vector<double> p, q;
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t cell = 0; cell < spec.cells(); ++cell) {
    if (mask.data[cell] == 0) continue;
    const std::size_t off = cell * static_cast<std::size_t>(spec.C);
    softmax(enhanced.data().data() + off, spec.C, p);
    softmax(dense.data().data() + off, spec.C, q);
    double kl = 0.0;
    for (int c = 0; c < spec.C; ++c) kl += p[c] * std::log(p[c] / q[c]);
    sum += kl;
    ++n;
  }
  if (n == 0) return {0.0, true};
  return {sum / static_cast<double>(n), false};
}

Metric cosine_alignment(const PillarGrid& enhanced, const PillarGrid& dense) {
  require_same_shape(enhanced, dense, "cosine_alignment");
  const GridSpec& spec = dense.spec();
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t cell = 0; cell < spec.cells(); ++cell) {
    const std::size_t off = cell * static_cast<std::size_t>(spec.C);
    const double* a = enhanced.data().data() + off;
    const double* b = dense.data().data() + off;
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (int c = 0; c < spec.C; ++c) {
      dot += a[c] * b[c];
      na += a[c] * a[c];
      nb += b[c] * b[c];
    }
    na = std::sqrt(na);
    nb = std::sqrt(nb);
    if (na <= kCosineNormFloor || nb <= kCosineNormFloor) continue;
    sum += 1.0 - std::clamp(dot / (na * nb), -1.0, 1.0);
    ++n;
  }
  if (n == 0) return {0.0, true};
  return {sum / static_cast<double>(n), false};
}

Metric occupancy_iou(const std::vector<double>& pred, const OccupancyMask& target,
                     double threshold) {
  if (pred.size() != target.data.size()) {
    throw ParameterError("occupancy_iou: shape mismatch");
  }
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool a = pred[i] >= threshold;
    const bool b = target.data[i] != 0;
    inter += (a && b) ? 1 : 0;
    uni += (a || b) ? 1 : 0;
  }
  if (uni == 0) return {1.0, true};
  return {static_cast<double>(inter) / static_cast<double>(uni), false};
}

Metric occupancy_iou(const OccupancyMask& pred, const OccupancyMask& target) {
  const std::vector<double> field(pred.data.begin(), pred.data.end());
  return occupancy_iou(field, target, 0.5);
}

Metric masked_mse(const PillarGrid& pred, const PillarGrid& dense) {
  require_same_shape(pred, dense, "masked_mse");
  const GridSpec& spec = dense.spec();
  const OccupancyMask mask = occupancy_of(dense);
  double se = 0.0;
  std::size_t n = 0;
  for (std::size_t cell = 0; cell < spec.cells(); ++cell) {
    if (mask.data[cell] == 0) continue;
    const std::size_t off = cell * static_cast<std::size_t>(spec.C);
    for (int c = 0; c < spec.C; ++c) {
      const double d = pred.data()[off + c] - dense.data()[off + c];
      se += d * d;
    }
    ++n;
  }
  if (n == 0) return {0.0, true};
  return {se / static_cast<double>(n), false};
}

double alignment_total(double kl, double cosine_loss, double gamma1, double gamma2) {
  return gamma1 * kl + gamma2 * cosine_loss;
}

AlignmentReport alignment_report(const PillarGrid& enhanced, const PillarGrid& dense,
                                 double gamma1, double gamma2) {
  AlignmentReport r;
  r.kl = kl_alignment(enhanced, dense).value;
  r.cosine_loss = cosine_alignment(enhanced, dense).value;
  r.iou = occupancy_iou(occupancy_of(enhanced), occupancy_of(dense)).value;
  r.masked_mse = masked_mse(enhanced, dense).value;
  r.weighted_total = alignment_total(r.kl, r.cosine_loss, gamma1, gamma2);
  return r;
}

}  // namespace colc
