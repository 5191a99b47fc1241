#include "cfkt/train.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>

namespace cfkt {

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("CFKT_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end && *end == '\0' && v > 0) return static_cast<int>(v);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
  if (n <= 0) return;
  threads = std::min(std::max(threads, 1), n);
  if (threads == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(threads));
  for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

namespace {

/// All four rendered target views for every scorable position of one
/// sequence, in position order. Lets one batched generator call serve the
/// whole sequence.
std::vector<SequenceView> backward_views_all_targets(const ResponseSequence& seq,
                                                     const InfluenceOptions& opts) {
  std::vector<SequenceView> views;
  const auto& ints = seq.interactions;
  views.reserve(4 * (ints.size() - 1));
  for (std::size_t tau = 1; tau < ints.size(); ++tau) {
    const std::span<const Interaction> hist(ints.data(), tau);
    for (auto& v : backward_view_set(hist, target_from(ints[tau]), opts))
      views.push_back(std::move(v));
  }
  return views;
}

}  // namespace

EvalResult evaluate(const ProbabilityGenerator& gen,
                    std::span<const ResponseSequence> sequences, ScoreMode mode,
                    const InfluenceOptions& opts, int threads) {
  std::vector<std::vector<EvalRecord>> per_seq(sequences.size());
  parallel_for(static_cast<int>(sequences.size()), resolve_threads(threads), [&](int si) {
    const ResponseSequence& seq = sequences[static_cast<std::size_t>(si)];
    const auto& ints = seq.interactions;
    if (ints.size() < 2) return;
    auto& records = per_seq[static_cast<std::size_t>(si)];
    records.reserve(ints.size() - 1);

    if (mode == ScoreMode::Approximate) {
      const auto views = backward_views_all_targets(seq, opts);
      const auto probs = gen.position_probs(views);
      for (std::size_t tau = 1; tau < ints.size(); ++tau) {
        const std::span<const Interaction> hist(ints.data(), tau);
        const std::size_t v0 = 4 * (tau - 1);
        const InfluenceSet set = influences_from_backward_probs(
            hist, probs[v0], probs[v0 + 1], probs[v0 + 2], probs[v0 + 3]);
        const PredictionRecord pr = influence_predict(set);
        records.push_back(EvalRecord{si, static_cast<int>(tau), pr.score, pr.prediction,
                                     ints[tau].correct});
      }
    } else {
      for (std::size_t tau = 1; tau < ints.size(); ++tau) {
        const std::span<const Interaction> hist(ints.data(), tau);
        const InfluenceSet set =
            exact_forward_influences(hist, target_from(ints[tau]), gen, opts);
        const PredictionRecord pr = influence_predict(set);
        records.push_back(EvalRecord{si, static_cast<int>(tau), pr.score, pr.prediction,
                                     ints[tau].correct});
      }
    }
  });

  EvalResult out;
  for (auto& records : per_seq)
    out.records.insert(out.records.end(), records.begin(), records.end());
  if (out.records.empty())
    throw StatisticsError("no scorable positions: every sequence has length < 2");

  std::vector<double> scores;
  std::vector<int> predictions, labels;
  scores.reserve(out.records.size());
  predictions.reserve(out.records.size());
  labels.reserve(out.records.size());
  for (const auto& r : out.records) {
    scores.push_back(r.score);
    predictions.push_back(r.prediction);
    labels.push_back(r.label);
  }
  out.auc = auc(scores, labels);
  out.acc = accuracy(predictions, labels);
  return out;
}

BenchmarkResult benchmark_approx(const Model<float>& model,
                                 std::span<const ResponseSequence> sequences,
                                 const InfluenceOptions& opts) {
  if (sequences.empty()) throw DegenerateInputError("benchmark needs at least one sequence");
  const int L = sequences.front().length();
  if (L < 2) throw DegenerateInputError("benchmark sequences need length >= 2");
  for (const auto& s : sequences)
    if (s.length() != L) throw ShapeError("benchmark sequences must share one length");

  ModelGenerator<float> gen(model);
  BenchmarkResult out;
  out.n_sequences = static_cast<int>(sequences.size());
  out.history_length = L - 1;
  const double n = static_cast<double>(sequences.size());

  using clock = std::chrono::steady_clock;
  auto ms_between = [](clock::time_point a, clock::time_point b) {
    return std::chrono::duration<double, std::milli>(b - a).count();
  };

  const std::uint64_t p0 = model.encoder_passes();
  const auto t0 = clock::now();
  for (const auto& seq : sequences) {
    const std::span<const Interaction> hist(seq.interactions.data(),
                                            seq.interactions.size() - 1);
    const InfluenceSet set =
        backward_influences(hist, target_from(seq.interactions.back()), gen, opts);
    (void)influence_predict(set);
  }
  const auto t1 = clock::now();
  const std::uint64_t p1 = model.encoder_passes();
  for (const auto& seq : sequences) {
    const std::span<const Interaction> hist(seq.interactions.data(),
                                            seq.interactions.size() - 1);
    const InfluenceSet set =
        exact_forward_influences(hist, target_from(seq.interactions.back()), gen, opts);
    (void)influence_predict(set);
  }
  const auto t2 = clock::now();
  const std::uint64_t p2 = model.encoder_passes();

  out.approx_ms_per_target = ms_between(t0, t1) / n;
  out.exact_ms_per_target = ms_between(t1, t2) / n;
  out.speedup = out.approx_ms_per_target > 0
                    ? out.exact_ms_per_target / out.approx_ms_per_target
                    : 0.0;
  out.approx_passes_per_target = static_cast<double>(p1 - p0) / n;
  out.exact_passes_per_target = static_cast<double>(p2 - p1) / n;
  return out;
}

TrainResult train_model(std::span<const ResponseSequence> train,
                        std::span<const ResponseSequence> val, const TrainConfig& cfg,
                        const EpochCallback& on_epoch) {
  if (train.empty()) throw DegenerateInputError("no training sequences");
  if (cfg.batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (cfg.max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
  if (cfg.patience < 1) throw ConfigError("patience must be >= 1");
  cfg.model.validate();

  const int min_len = cfg.target_mode == TargetMode::Final ? 2 : 1;
  for (std::size_t i = 0; i < train.size(); ++i)
    if (static_cast<int>(train[i].length()) < min_len)
      throw DegenerateInputError("training sequence " + std::to_string(i) +
                                 " is shorter than the target mode allows");

  TrainResult result{Model<float>(cfg.model, cfg.seed), {}, -1, 0.0};
  Model<float>& model = result.model;
  AdamOptimizer<float> opt(cfg.lr, cfg.l2);
  Rng shuffle_rng(cfg.seed ^ 0x5eedULL);
  Rng dropout_rng(cfg.seed ^ 0xd20ULL);
  EarlyStopper stopper(cfg.patience);
  std::vector<nn::Mat<float>> best_params = model.params.snapshot();

  std::vector<const ResponseSequence*> order;
  order.reserve(train.size());
  for (const auto& s : train) order.push_back(&s);

  const InfluenceOptions eval_opts = cfg.influence_options();
  const int threads = resolve_threads(cfg.threads);

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    shuffle_rng.shuffle(order);

    EpochStats stats;
    stats.epoch = epoch;
    int n_batches = 0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t n =
          std::min(static_cast<std::size_t>(cfg.batch_size), order.size() - start);
      const std::span<const ResponseSequence* const> batch(order.data() + start, n);

      nn::Tape<float> tp;
      model.params.zero_grads();
      const BatchLoss<float> bl = build_batch_loss(tp, model, batch, cfg, dropout_rng);
      const double loss = static_cast<double>(tp.value(bl.total)(0, 0));
      if (!std::isfinite(loss))
        throw NumericError("training diverged: non-finite loss at epoch " +
                           std::to_string(epoch) + ", batch " + std::to_string(n_batches));
      tp.backward(bl.total);
      opt.step(model.params);

      stats.loss_total += loss;
      stats.loss_cf += bl.cf;
      stats.loss_factual += bl.factual;
      stats.loss_masked_plus += bl.masked_plus;
      stats.loss_masked_minus += bl.masked_minus;
      ++n_batches;
    }
    stats.loss_total /= n_batches;
    stats.loss_cf /= n_batches;
    stats.loss_factual /= n_batches;
    stats.loss_masked_plus /= n_batches;
    stats.loss_masked_minus /= n_batches;
    if (cfg.l2 > 0) {
      double sq = 0;
      for (const auto& e : model.params.entries)
        sq += static_cast<double>(e.value.array().square().sum());
      stats.l2_term = cfg.l2 * sq;
    }

    if (!val.empty()) {
      ModelGenerator<float> gen(model);
      const EvalResult ev = evaluate(gen, val, ScoreMode::Approximate, eval_opts, threads);
      stats.val_auc = ev.auc;
      stats.val_acc = ev.acc;
      stats.improved = stopper.update(ev.auc, epoch);
      if (stats.improved) {
        best_params = model.params.snapshot();
        result.best_epoch = epoch;
        result.best_val_auc = ev.auc;
      }
    }

    stats.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.history.push_back(stats);
    if (on_epoch) on_epoch(stats);
    if (!val.empty() && stopper.should_stop()) break;
  }

  if (!val.empty() && result.best_epoch >= 0) model.params.restore(best_params);
  if (val.empty()) {
    result.best_epoch = static_cast<int>(result.history.size()) - 1;
    best_params = model.params.snapshot();
  }
  return result;
}

}  // namespace cfkt
