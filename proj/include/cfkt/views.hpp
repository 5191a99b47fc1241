#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cfkt/types.hpp"

namespace cfkt {

/// One slot of a sequence view as the probability generator sees it: the
/// question identity plus a response rendering that may be the true label,
/// a flipped label, or Masked.
struct ViewPosition {
  int question_id = -1;
  std::vector<int> concept_ids;
  Category category = Category::Masked;
};

/// Replaces the target slot's question embedding with an aggregate built
/// from a set of questions plus a concept: used to probe proficiency on a
/// concept rather than on one concrete question.
struct VirtualTarget {
  std::vector<int> question_ids;  // questions tagged with the concept
  int concept_id = -1;
};

/// The question being predicted, appended as the final slot of a view.
struct TargetSpec {
  int question_id = -1;
  std::vector<int> concept_ids;
};

/// An immutable rendering of (history, optional target slot) for the
/// generator. Views never contain padding; batching pads copies later.
struct SequenceView {
  std::vector<ViewPosition> positions;
  int target_index = -1;  // index of the target slot, -1 if none
  std::optional<VirtualTarget> virtual_target;

  bool has_target() const { return target_index >= 0; }
  int length() const { return static_cast<int>(positions.size()); }
  /// Number of history positions (excludes the target slot).
  int history_length() const { return length() - (has_target() ? 1 : 0); }
};

// ---------------------------------------------------------------------------
// View constructors.
//
// The retention rule: flipping / assuming a response to be INCORRECT masks
// every historical CORRECT response and keeps the INCORRECT ones visible;
// assuming CORRECT masks the INCORRECT ones and keeps the CORRECT ones.
// (If one answer is wrong, earlier failures are still trustworthy; if it is
// right, earlier successes are.) `monotonic_masking = false` turns the rule
// off: every historical label stays visible and only the intervened slot
// changes.
// ---------------------------------------------------------------------------

/// History with true labels; target slot rendered as `target_assumed`
/// (Correct, Incorrect, or Masked).
SequenceView factual_view(std::span<const Interaction> history, const TargetSpec& target,
                          Category target_assumed);

/// Target slot flipped to `target_flipped_to` (must be Correct or Incorrect)
/// with the retention rule applied to the history.
SequenceView counterfactual_view(std::span<const Interaction> history, const TargetSpec& target,
                                 Category target_flipped_to, bool monotonic_masking = true);

/// The pair (factual, counterfactual) for intervening on history position
/// `i` (0-based): the factual view keeps all true labels; the counterfactual
/// flips position i and applies the retention rule to the *other* history
/// positions. The target slot is Masked in both so only the intervention
/// differs. Throws IndexError for i outside the history.
std::pair<SequenceView, SequenceView> forward_views(std::span<const Interaction> history, int i,
                                                    const TargetSpec& target,
                                                    bool monotonic_masking = true);

/// Training renderings of a full sequence, no target slot: first = incorrect
/// responses masked (correct ones visible), second = correct responses
/// masked.
std::pair<SequenceView, SequenceView> masked_views_for_training(
    std::span<const Interaction> sequence);

/// The sequence exactly as recorded: true labels, no target slot.
SequenceView plain_view(std::span<const Interaction> sequence);

/// Compact text form, one glyph per slot: '0' incorrect, '1' correct,
/// a ring for masked, '|' before the target slot, '*' appended when the
/// target is virtual. Used by golden tests and debug logs.
std::string to_debug_string(const SequenceView& view);

inline TargetSpec target_from(const Interaction& it) {
  return TargetSpec{it.question_id, it.concept_ids};
}

}  // namespace cfkt
