#include "cfkt/views.hpp"

namespace cfkt {

namespace {

ViewPosition render(const Interaction& it, Category cat) {
  return ViewPosition{it.question_id, it.concept_ids, cat};
}

// Applies the retention rule to one historical interaction given the
// assumed/flipped rendering of the intervened response.
Category retained_category(const Interaction& it, Category assumed) {
  if (assumed == Category::Incorrect)
    return it.correct ? Category::Masked : Category::Incorrect;
  return it.correct ? Category::Correct : Category::Masked;
}

void check_flip_direction(Category c, const char* who) {
  if (c != Category::Correct && c != Category::Incorrect)
    throw ConfigError(std::string(who) + " requires a Correct or Incorrect rendering, got " +
                      category_name(c));
}

}  // namespace

SequenceView factual_view(std::span<const Interaction> history, const TargetSpec& target,
                          Category target_assumed) {
  SequenceView v;
  v.positions.reserve(history.size() + 1);
  for (const auto& it : history) v.positions.push_back(render(it, category_of(it.correct)));
  v.positions.push_back(ViewPosition{target.question_id, target.concept_ids, target_assumed});
  v.target_index = static_cast<int>(history.size());
  return v;
}

SequenceView counterfactual_view(std::span<const Interaction> history, const TargetSpec& target,
                                 Category target_flipped_to, bool monotonic_masking) {
  check_flip_direction(target_flipped_to, "counterfactual_view");
  SequenceView v;
  v.positions.reserve(history.size() + 1);
  for (const auto& it : history) {
    const Category cat = monotonic_masking ? retained_category(it, target_flipped_to)
                                           : category_of(it.correct);
    v.positions.push_back(render(it, cat));
  }
  v.positions.push_back(ViewPosition{target.question_id, target.concept_ids, target_flipped_to});
  v.target_index = static_cast<int>(history.size());
  return v;
}

std::pair<SequenceView, SequenceView> forward_views(std::span<const Interaction> history, int i,
                                                    const TargetSpec& target,
                                                    bool monotonic_masking) {
  if (i < 0 || i >= static_cast<int>(history.size()))
    throw IndexError("forward_views: position " + std::to_string(i) + " outside history of length " +
                     std::to_string(history.size()));

  SequenceView factual = factual_view(history, target, Category::Masked);

  const Category flipped = history[static_cast<std::size_t>(i)].correct ? Category::Incorrect
                                                                        : Category::Correct;
  SequenceView cf;
  cf.positions.reserve(history.size() + 1);
  for (int j = 0; j < static_cast<int>(history.size()); ++j) {
    const auto& it = history[static_cast<std::size_t>(j)];
    Category cat;
    if (j == i)
      cat = flipped;  // the intervention itself is always visible
    else
      cat = monotonic_masking ? retained_category(it, flipped) : category_of(it.correct);
    cf.positions.push_back(render(it, cat));
  }
  cf.positions.push_back(ViewPosition{target.question_id, target.concept_ids, Category::Masked});
  cf.target_index = static_cast<int>(history.size());
  return {std::move(factual), std::move(cf)};
}

std::pair<SequenceView, SequenceView> masked_views_for_training(
    std::span<const Interaction> sequence) {
  SequenceView plus, minus;
  plus.positions.reserve(sequence.size());
  minus.positions.reserve(sequence.size());
  for (const auto& it : sequence) {
    plus.positions.push_back(render(it, it.correct ? Category::Correct : Category::Masked));
    minus.positions.push_back(render(it, it.correct ? Category::Masked : Category::Incorrect));
  }
  return {std::move(plus), std::move(minus)};
}

SequenceView plain_view(std::span<const Interaction> sequence) {
  SequenceView v;
  v.positions.reserve(sequence.size());
  for (const auto& it : sequence) v.positions.push_back(render(it, category_of(it.correct)));
  return v;
}

std::string to_debug_string(const SequenceView& view) {
  std::string out;
  for (int i = 0; i < view.length(); ++i) {
    if (i == view.target_index) out += '|';
    switch (view.positions[static_cast<std::size_t>(i)].category) {
      case Category::Incorrect: out += '0'; break;
      case Category::Correct: out += '1'; break;
      case Category::Masked: out += "◦"; break;  // ring operator, one glyph per slot
    }
  }
  if (view.virtual_target) out += '*';
  return out;
}

}  // namespace cfkt
