#include "cfkt/influence.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cfkt/rng.hpp"

namespace cfkt {

namespace {

void require_history(std::span<const Interaction> history, const char* who) {
  if (history.empty())
    throw DegenerateInputError(std::string(who) + ": empty history, nothing to attribute");
}

}  // namespace

std::vector<SequenceView> backward_view_set(std::span<const Interaction> history,
                                            const TargetSpec& target,
                                            const InfluenceOptions& opts) {
  std::vector<SequenceView> views;
  views.reserve(4);
  views.push_back(factual_view(history, target, Category::Correct));
  views.push_back(counterfactual_view(history, target, Category::Incorrect, opts.monotonic_masking));
  views.push_back(factual_view(history, target, Category::Incorrect));
  views.push_back(counterfactual_view(history, target, Category::Correct, opts.monotonic_masking));
  return views;
}

InfluenceSet influences_from_backward_probs(std::span<const Interaction> history,
                                            const std::vector<double>& p_factual_pos,
                                            const std::vector<double>& p_counter_neg,
                                            const std::vector<double>& p_factual_neg,
                                            const std::vector<double>& p_counter_pos) {
  const std::size_t t = history.size();
  if (p_factual_pos.size() < t || p_counter_neg.size() < t || p_factual_neg.size() < t ||
      p_counter_pos.size() < t)
    throw ShapeError("backward view probabilities shorter than the history");

  InfluenceSet set;
  set.mode = InfluenceMode::Approximate;
  set.t = static_cast<int>(t);
  set.entries.reserve(t);
  for (std::size_t i = 0; i < t; ++i) {
    InfluenceEntry e;
    e.index = static_cast<int>(i);
    if (history[i].correct) {
      // A correct response argues the target will be answered correctly:
      // compare p(correct at i) under "target correct" vs the counterfactual
      // "target incorrect" rendering.
      e.group = InfluenceGroup::Correct;
      e.f_prob = p_factual_pos[i];
      e.cf_prob = p_counter_neg[i];
    } else {
      // An incorrect response argues the opposite case, in p(incorrect) space.
      e.group = InfluenceGroup::Incorrect;
      e.f_prob = 1.0 - p_factual_neg[i];
      e.cf_prob = 1.0 - p_counter_pos[i];
    }
    e.delta = e.f_prob - e.cf_prob;
    set.entries.push_back(e);
  }
  return set;
}

InfluenceSet backward_influences(std::span<const Interaction> history, const TargetSpec& target,
                                 const ProbabilityGenerator& gen, const InfluenceOptions& opts) {
  require_history(history, "backward_influences");
  const auto views = backward_view_set(history, target, opts);
  const auto probs = gen.position_probs(views);
  if (probs.size() != 4) throw ShapeError("generator returned wrong view count");
  return influences_from_backward_probs(history, probs[0], probs[1], probs[2], probs[3]);
}

InfluenceSet exact_forward_influences(std::span<const Interaction> history,
                                      const TargetSpec& target, const ProbabilityGenerator& gen,
                                      const InfluenceOptions& opts) {
  require_history(history, "exact_forward_influences");
  const int t = static_cast<int>(history.size());

  // Two fresh views per historical response, all scored in one call.
  std::vector<SequenceView> views;
  views.reserve(2 * static_cast<std::size_t>(t));
  for (int i = 0; i < t; ++i) {
    auto [f, cf] = forward_views(history, i, target, opts.monotonic_masking);
    views.push_back(std::move(f));
    views.push_back(std::move(cf));
  }
  const auto probs = gen.position_probs(views);
  if (probs.size() != views.size()) throw ShapeError("generator returned wrong view count");

  InfluenceSet set;
  set.mode = InfluenceMode::Exact;
  set.t = t;
  set.entries.reserve(static_cast<std::size_t>(t));
  for (int i = 0; i < t; ++i) {
    const int target_slot = t;  // target is the final slot of every view
    const double pf = probs[static_cast<std::size_t>(2 * i)][target_slot];
    const double pcf = probs[static_cast<std::size_t>(2 * i + 1)][target_slot];
    InfluenceEntry e;
    e.index = i;
    if (history[static_cast<std::size_t>(i)].correct) {
      // Flipping a correct response to incorrect should not raise the
      // probability of answering the target correctly.
      e.group = InfluenceGroup::Correct;
      e.f_prob = pf;
      e.cf_prob = pcf;
    } else {
      e.group = InfluenceGroup::Incorrect;
      e.f_prob = 1.0 - pf;
      e.cf_prob = 1.0 - pcf;
    }
    e.delta = e.f_prob - e.cf_prob;
    set.entries.push_back(e);
  }
  return set;
}

InfluenceTotals influence_totals(const InfluenceSet& set) {
  InfluenceTotals tt;
  for (const auto& e : set.entries) {
    if (e.group == InfluenceGroup::Correct)
      tt.delta_plus += e.delta;
    else
      tt.delta_minus += e.delta;
  }
  return tt;
}

PredictionRecord influence_predict(const InfluenceSet& set) {
  if (set.t < 1)
    throw DegenerateInputError("influence_predict: no history, prediction undefined");
  const InfluenceTotals tt = influence_totals(set);
  PredictionRecord r;
  r.delta_plus = tt.delta_plus;
  r.delta_minus = tt.delta_minus;
  r.t = set.t;
  const double diff = tt.delta_plus - tt.delta_minus;
  r.prediction = diff >= 0 ? 1 : 0;
  r.tie = diff == 0.0;
  constexpr double eps = 1e-7;
  r.score = std::clamp(diff / (2.0 * set.t) + 0.5, eps, 1.0 - eps);
  return r;
}

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ShapeError("pearson: length mismatch");
  const std::size_t n = x.size();
  if (n < 3) throw StatisticsError("pearson needs at least 3 paired samples, got " +
                                   std::to_string(n));
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0)
    throw StatisticsError("pearson undefined for a zero-variance margin");
  return sxy / std::sqrt(sxx * syy);
}

std::pair<double, double> bootstrap_pearson_ci(
    const std::vector<std::pair<double, double>>& pairs, int n_boot, double lo_q, double hi_q,
    std::uint64_t seed) {
  if (pairs.size() < 3) throw StatisticsError("bootstrap needs at least 3 paired samples");
  if (n_boot < 10) throw ConfigError("bootstrap needs a sensible replicate count");
  Rng rng(seed);
  std::vector<double> rs;
  rs.reserve(static_cast<std::size_t>(n_boot));
  std::vector<double> bx(pairs.size()), by(pairs.size());
  int attempts = 0;
  while (static_cast<int>(rs.size()) < n_boot && attempts < 20 * n_boot) {
    ++attempts;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      const auto& p = pairs[static_cast<std::size_t>(rng.index(static_cast<int>(pairs.size())))];
      bx[i] = p.first;
      by[i] = p.second;
    }
    try {
      rs.push_back(pearson(bx, by));
    } catch (const StatisticsError&) {
      // degenerate resample; draw again
    }
  }
  if (static_cast<int>(rs.size()) < n_boot)
    throw StatisticsError("bootstrap kept producing degenerate resamples");
  std::sort(rs.begin(), rs.end());
  auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(rs.size() - 1);
    const std::size_t i = static_cast<std::size_t>(pos);
    const double frac = pos - static_cast<double>(i);
    return i + 1 < rs.size() ? rs[i] * (1 - frac) + rs[i + 1] * frac : rs[i];
  };
  return {quantile(lo_q), quantile(hi_q)};
}

CorrelationResult correlation_exact_vs_approx(const ProbabilityGenerator& gen,
                                              std::span<const ResponseSequence> sequences,
                                              int max_targets, std::uint64_t seed,
                                              const InfluenceOptions& opts) {
  // Candidate predictions: every position with a non-empty prefix.
  std::vector<std::pair<int, int>> candidates;  // (sequence, target position)
  for (int s = 0; s < static_cast<int>(sequences.size()); ++s)
    for (int tau = 1; tau < sequences[static_cast<std::size_t>(s)].length(); ++tau)
      candidates.emplace_back(s, tau);
  Rng rng(seed);
  rng.shuffle(candidates);
  if (max_targets > 0 && static_cast<int>(candidates.size()) > max_targets)
    candidates.resize(static_cast<std::size_t>(max_targets));

  CorrelationResult out;
  for (auto [s, tau] : candidates) {
    const auto& seq = sequences[static_cast<std::size_t>(s)].interactions;
    const std::span<const Interaction> history(seq.data(), static_cast<std::size_t>(tau));
    const TargetSpec target = target_from(seq[static_cast<std::size_t>(tau)]);
    const InfluenceSet exact = exact_forward_influences(history, target, gen, opts);
    const InfluenceSet approx = backward_influences(history, target, gen, opts);
    for (std::size_t i = 0; i < exact.entries.size(); ++i) {
      auto* pair_list = exact.entries[i].group == InfluenceGroup::Correct ? &out.pairs_correct
                                                                          : &out.pairs_incorrect;
      pair_list->emplace_back(exact.entries[i].delta, approx.entries[i].delta);
    }
  }

  auto correlate = [](const std::vector<std::pair<double, double>>& ps) {
    std::vector<double> a(ps.size()), b(ps.size());
    for (std::size_t i = 0; i < ps.size(); ++i) {
      a[i] = ps[i].first;
      b[i] = ps[i].second;
    }
    return pearson(a, b);
  };
  out.r_correct = correlate(out.pairs_correct);
  out.r_incorrect = correlate(out.pairs_incorrect);
  return out;
}

}  // namespace cfkt
