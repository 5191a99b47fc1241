#pragma once

#include <limits>
#include <span>

#include "cfkt/types.hpp"

namespace cfkt {

/// Area under the ROC curve via the rank statistic, with midrank tie
/// correction (identical to averaging pairwise win/half-win/loss counts).
/// Throws StatisticsError when only one class is present.
double auc(std::span<const double> scores, std::span<const int> labels);

/// Fraction of binary predictions that match the labels.
double accuracy(std::span<const int> predictions, std::span<const int> labels);

/// Patience logic for validation-metric early stopping: stop once the metric
/// has failed to improve (strictly) for `patience` consecutive epochs.
class EarlyStopper {
 public:
  explicit EarlyStopper(int patience) : patience_(patience) {
    if (patience < 1) throw ConfigError("patience must be positive");
  }

  /// Feed one epoch's metric; returns true when this epoch is a new best.
  bool update(double metric, int epoch) {
    if (metric > best_) {
      best_ = metric;
      best_epoch_ = epoch;
      stale_ = 0;
      return true;
    }
    ++stale_;
    return false;
  }

  bool should_stop() const { return stale_ >= patience_; }
  int stale_epochs() const { return stale_; }
  double best() const { return best_; }
  int best_epoch() const { return best_epoch_; }

 private:
  int patience_;
  double best_ = -std::numeric_limits<double>::infinity();
  int best_epoch_ = -1;
  int stale_ = 0;
};

}  // namespace cfkt
