#include "cfkt/losses.hpp"

#include <algorithm>
#include <cmath>

namespace cfkt {

namespace {

double clamped_log(double p) { return std::log(std::clamp(p, kProbEps, 1.0 - kProbEps)); }

}  // namespace

double constraint_penalty(const InfluenceSet& set) {
  double total = 0;
  for (const auto& e : set.entries) total += std::max(-e.delta, 0.0);
  return total;
}

double loss_cf(const InfluenceSet& set, int target_label, double alpha) {
  if (target_label != 0 && target_label != 1)
    throw ConfigError("loss_cf: target label must be binary");
  if (alpha < 0) throw ConfigError("loss_cf: alpha must be non-negative");
  if (set.t < 1) throw DegenerateInputError("loss_cf: empty history");

  const InfluenceTotals tt = influence_totals(set);
  const double sign = target_label == 1 ? 1.0 : -1.0;
  const double arg = sign / (2.0 * set.t) * (tt.delta_plus - tt.delta_minus) + 0.5;

  // |delta_i| <= 1 for probability differences, which bounds the scaled group
  // difference by 1/2. Anything outside [0,1] beyond float slack means the
  // influences fed in here are not probability differences.
  bool all_unit = true;
  for (const auto& e : set.entries) all_unit = all_unit && std::abs(e.delta) <= 1.0;
  if (all_unit && (arg < -1e-9 || arg > 1.0 + 1e-9))
    throw NumericError("loss_cf: log argument " + std::to_string(arg) +
                       " escaped [0,1] with unit-bounded influences");

  return -clamped_log(arg) + alpha * constraint_penalty(set);
}

double masked_mean_bce(std::span<const double> probs, std::span<const int> labels,
                       std::span<const int> mask) {
  if (probs.size() != labels.size() || probs.size() != mask.size())
    throw ShapeError("masked_mean_bce: probs/labels/mask lengths differ");
  double total = 0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (!mask[i]) continue;
    if (labels[i] != 0 && labels[i] != 1)
      throw ConfigError("masked_mean_bce: labels must be binary");
    total += labels[i] ? -clamped_log(probs[i]) : -clamped_log(1.0 - probs[i]);
    ++n;
  }
  return n == 0 ? 0.0 : total / static_cast<double>(n);
}

double total_loss(double cf, double factual, double masked_plus, double masked_minus,
                  double lambda) {
  if (lambda < 0) throw ConfigError("total_loss: lambda must be non-negative");
  return cf + lambda * (factual + masked_plus + masked_minus);
}

}  // namespace cfkt
