#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cfkt/views.hpp"

namespace cfkt {

/// Anything that can score sequence views: the trained model in production,
/// hand-built stubs in tests. For each view it returns p(correct) per slot
/// (history and target alike), each strictly inside (0, 1).
///
/// `encoder_passes` counts one pass per view ever scored; influence code is
/// audited against it (approximate mode must cost 4 passes per prediction,
/// exact mode 2t).
struct ProbabilityGenerator {
  virtual ~ProbabilityGenerator() = default;

  virtual std::vector<std::vector<double>> position_probs(
      std::span<const SequenceView> views) const = 0;

  virtual std::uint64_t encoder_passes() const = 0;
};

}  // namespace cfkt
