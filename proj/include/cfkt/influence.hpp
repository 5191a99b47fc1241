#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "cfkt/generator.hpp"
#include "cfkt/types.hpp"
#include "cfkt/views.hpp"

namespace cfkt {

enum class InfluenceMode { Approximate, Exact };
enum class InfluenceGroup { Correct, Incorrect };  // true label of the position

/// How much one historical response supports its own outcome's case for the
/// target. f_prob / cf_prob are probabilities of the position's *factual
/// outcome* (so for an incorrect response they are probabilities of being
/// wrong), under the factual and counterfactual renderings respectively.
struct InfluenceEntry {
  int index = -1;  // 0-based history position
  InfluenceGroup group = InfluenceGroup::Correct;
  double f_prob = 0;
  double cf_prob = 0;
  double delta = 0;  // always f_prob - cf_prob
};

struct InfluenceSet {
  InfluenceMode mode = InfluenceMode::Approximate;
  int t = 0;  // history length == entries.size()
  std::vector<InfluenceEntry> entries;
};

struct InfluenceTotals {
  double delta_plus = 0;   // sum over the correct group
  double delta_minus = 0;  // sum over the incorrect group
};

struct PredictionRecord {
  int prediction = 1;   // 1 iff delta_plus - delta_minus >= 0 (tie counts as 1)
  double score = 0.5;   // (delta_plus - delta_minus) / (2t) + 1/2, clamped
  double delta_plus = 0;
  double delta_minus = 0;
  int t = 0;
  bool tie = false;
};

struct InfluenceOptions {
  bool monotonic_masking = true;  // false = the "keep all labels visible" ablation
};

/// Approximate mode: four full-history views (factual and counterfactual,
/// target assumed correct and incorrect), scored in one generator call; the
/// per-position leave-one-out probabilities stand in for target-side
/// influences. Cost: exactly 4 encoder passes. Throws DegenerateInputError
/// on an empty history.
InfluenceSet backward_influences(std::span<const Interaction> history, const TargetSpec& target,
                                 const ProbabilityGenerator& gen,
                                 const InfluenceOptions& opts = {});

/// Exact mode: for every history position i, a fresh factual/counterfactual
/// view pair with the intervention at i, scored at the target slot. Cost:
/// exactly 2t encoder passes (the factual pass is deliberately not cached;
/// this mode is the audit reference, not the fast path).
InfluenceSet exact_forward_influences(std::span<const Interaction> history,
                                      const TargetSpec& target, const ProbabilityGenerator& gen,
                                      const InfluenceOptions& opts = {});

/// Shared assembly: turns the four backward-view probability vectors into an
/// influence set. Exposed so batched evaluation can reuse the exact same
/// arithmetic as backward_influences.
InfluenceSet influences_from_backward_probs(std::span<const Interaction> history,
                                            const std::vector<double>& p_factual_pos,
                                            const std::vector<double>& p_counter_neg,
                                            const std::vector<double>& p_factual_neg,
                                            const std::vector<double>& p_counter_pos);

/// Builds the four backward views in the order expected by
/// influences_from_backward_probs.
std::vector<SequenceView> backward_view_set(std::span<const Interaction> history,
                                            const TargetSpec& target,
                                            const InfluenceOptions& opts = {});

InfluenceTotals influence_totals(const InfluenceSet& set);

/// The sign rule on the group totals. Throws DegenerateInputError when the
/// set has no history (t == 0): with no evidence there is no prediction.
PredictionRecord influence_predict(const InfluenceSet& set);

// ---------------------------------------------------------------------------
// Exact-vs-approximate agreement
// ---------------------------------------------------------------------------

struct CorrelationResult {
  double r_correct = 0;
  double r_incorrect = 0;
  // (exact delta, approximate delta) per sampled position, split by group.
  std::vector<std::pair<double, double>> pairs_correct;
  std::vector<std::pair<double, double>> pairs_incorrect;
};

/// Samples up to `max_targets` (sequence, target) predictions, computes both
/// influence modes, and correlates the per-position deltas within each
/// outcome group. Throws StatisticsError when a group ends up with fewer
/// than 3 pairs.
CorrelationResult correlation_exact_vs_approx(const ProbabilityGenerator& gen,
                                              std::span<const ResponseSequence> sequences,
                                              int max_targets, std::uint64_t seed,
                                              const InfluenceOptions& opts = {});

/// Pearson correlation; throws StatisticsError for n < 3 or a zero-variance
/// margin.
double pearson(std::span<const double> x, std::span<const double> y);

/// Percentile bootstrap confidence interval for the Pearson correlation of
/// paired samples. Returns {lower, upper}.
std::pair<double, double> bootstrap_pearson_ci(
    const std::vector<std::pair<double, double>>& pairs, int n_boot, double lo_q, double hi_q,
    std::uint64_t seed);

}  // namespace cfkt
