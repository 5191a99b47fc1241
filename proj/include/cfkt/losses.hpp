#pragma once

#include <span>

#include "cfkt/influence.hpp"
#include "cfkt/types.hpp"

namespace cfkt {

/// Clamp bound shared by every log() in the losses and by the score.
inline constexpr double kProbEps = 1e-7;

/// Constraint penalty: sum of max(-delta, 0) over all entries. Zero exactly
/// when every influence respects the "flips cannot help" direction.
double constraint_penalty(const InfluenceSet& set);

/// The counterfactual prediction loss for one target:
///   -log( sign/(2t) * (delta_plus - delta_minus) + 1/2 ) + alpha * penalty
/// with sign = +1 for a correct target and -1 for an incorrect one. The log
/// argument provably lies in [0, 1] whenever every |delta| <= 1; that is
/// asserted here (with a small numerical slack) before clamping.
double loss_cf(const InfluenceSet& set, int target_label, double alpha);

/// Mean binary cross-entropy of p(correct) against true labels over the
/// positions selected by `mask` (non-zero = included). An empty selection
/// returns 0 (degenerate but legal: a view can have nothing to score).
double masked_mean_bce(std::span<const double> probs, std::span<const int> labels,
                       std::span<const int> mask);

/// Generator loss on the factual view (all positions, leave-one-out probs).
inline double loss_factual(std::span<const double> probs, std::span<const int> labels,
                           std::span<const int> mask) {
  return masked_mean_bce(probs, labels, mask);
}

/// Generator loss on a masked training view; same arithmetic, scored at all
/// real positions against the true labels.
inline double loss_masked(std::span<const double> probs, std::span<const int> labels,
                          std::span<const int> mask) {
  return masked_mean_bce(probs, labels, mask);
}

/// Full objective: cf + lambda * (factual + masked_plus + masked_minus).
double total_loss(double cf, double factual, double masked_plus, double masked_minus,
                  double lambda);

}  // namespace cfkt
