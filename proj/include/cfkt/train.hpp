#pragma once

#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "cfkt/influence.hpp"
#include "cfkt/losses.hpp"
#include "cfkt/metrics.hpp"
#include "cfkt/model.hpp"
#include "cfkt/rng.hpp"

namespace cfkt {

/// Which positions become counterfactual-loss targets during training.
/// AllPrefix: every position with a non-empty prefix, via three shared
/// full-sequence passes (factual + the two masked renderings) whose
/// per-position leave-one-out probabilities feed prefix-summed group deltas.
/// Final: the literal per-sample construction on the last position only
/// (four rendered target views plus three history views per sequence).
enum class TargetMode { AllPrefix, Final };

enum class ScoreMode { Approximate, Exact };

struct TrainConfig {
  ModelConfig model;
  double lr = 1e-3;
  double lambda = 0.1;  // weight of the generator losses
  double l2 = 0.0;      // coefficient of the squared-parameter penalty
  double alpha = 1.0;   // weight of the constraint penalty inside the cf loss
  int batch_size = 64;
  int max_epochs = 100;
  int patience = 10;
  std::uint64_t seed = 1;
  TargetMode target_mode = TargetMode::AllPrefix;
  bool no_joint = false;       // ablation: drop the generator losses
  bool no_mono = false;        // ablation: keep all labels visible in cf views
  bool no_constraint = false;  // ablation: drop the constraint penalty
  int threads = 0;             // 0 = CFKT_THREADS env, then hardware

  double effective_lambda() const { return no_joint ? 0.0 : lambda; }
  double effective_alpha() const { return no_constraint ? 0.0 : alpha; }
  InfluenceOptions influence_options() const { return InfluenceOptions{!no_mono}; }
};

struct EpochStats {
  int epoch = 0;
  double loss_total = 0;
  double loss_cf = 0;
  double loss_factual = 0;
  double loss_masked_plus = 0;
  double loss_masked_minus = 0;
  double l2_term = 0;
  double val_auc = 0;
  double val_acc = 0;
  double seconds = 0;
  bool improved = false;
};

struct TrainResult {
  Model<float> model;  // parameters restored to the best validation epoch
  std::vector<EpochStats> history;
  int best_epoch = -1;
  double best_val_auc = 0;
};

struct EvalRecord {
  int sequence = -1;
  int target_index = -1;  // 0-based position scored from its prefix
  double score = 0.5;
  int prediction = 1;
  int label = 0;
};

struct EvalResult {
  double auc = 0;
  double acc = 0;
  std::vector<EvalRecord> records;
};

using EpochCallback = std::function<void(const EpochStats&)>;

/// Trains with Adam (beta 0.9/0.999, eps 1e-8), L2 applied through the
/// gradient, early stopping on validation AUC. Throws NumericError as soon
/// as a batch loss stops being finite. With an empty validation set the loop
/// just runs max_epochs and keeps the final parameters.
TrainResult train_model(std::span<const ResponseSequence> train,
                        std::span<const ResponseSequence> val, const TrainConfig& cfg,
                        const EpochCallback& on_epoch = {});

/// Scores every position with a non-empty prefix in every sequence, from its
/// own prefix only. Deterministic regardless of `threads`.
EvalResult evaluate(const ProbabilityGenerator& gen, std::span<const ResponseSequence> sequences,
                    ScoreMode mode, const InfluenceOptions& opts, int threads = 1);

/// Thread-count resolution: explicit request, else the CFKT_THREADS
/// environment variable, else hardware concurrency.
int resolve_threads(int requested);

struct BenchmarkResult {
  int n_sequences = 0;
  int history_length = 0;  // t; the target is the final position
  double approx_ms_per_target = 0;
  double exact_ms_per_target = 0;
  double speedup = 0;  // exact / approx wall time
  double approx_passes_per_target = 0;  // instrumented encoder-pass counts
  double exact_passes_per_target = 0;
};

/// Times scoring the final position of every sequence in both influence
/// modes (single-threaded, so the ratio reflects work, not scheduling). All
/// sequences must share one length, making the pass counts well defined:
/// the approximate mode costs a constant 4 per target, the exact mode 2t.
BenchmarkResult benchmark_approx(const Model<float>& model,
                                 std::span<const ResponseSequence> sequences,
                                 const InfluenceOptions& opts = {});

/// Runs fn(0..n-1) across up to `threads` workers; rethrows the first
/// exception after all workers finish.
void parallel_for(int n, int threads, const std::function<void(int)>& fn);

// ---------------------------------------------------------------------------
// Templated internals, exposed for the finite-difference gradient oracle
// (which instantiates the whole stack at double precision).
// ---------------------------------------------------------------------------

template <class S>
struct BatchLoss {
  typename nn::Tape<S>::Var total;  // [1 x 1], mean per-sequence loss
  double cf = 0, factual = 0, masked_plus = 0, masked_minus = 0;
  int n_sequences = 0;
};

template <class S>
class AdamOptimizer {
 public:
  AdamOptimizer(double lr, double l2) : lr_(lr), l2_(l2) {
    if (lr <= 0) throw ConfigError("learning rate must be positive");
    if (l2 < 0) throw ConfigError("l2 coefficient must be non-negative");
  }

  void step(ParamStore<S>& ps) {
    if (m_.empty()) {
      m_.reserve(ps.entries.size());
      v_.reserve(ps.entries.size());
      for (const auto& e : ps.entries) {
        m_.push_back(nn::Mat<S>::Zero(e.value.rows(), e.value.cols()));
        v_.push_back(nn::Mat<S>::Zero(e.value.rows(), e.value.cols()));
      }
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(0.9, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(0.999, static_cast<double>(t_));
    const S alpha = static_cast<S>(lr_ * std::sqrt(bc2) / bc1);
    for (std::size_t i = 0; i < ps.entries.size(); ++i) {
      auto& e = ps.entries[i];
      nn::Mat<S> g = e.grad;
      if (l2_ > 0) g += S(2.0 * l2_) * e.value;  // gradient of l2 * ||w||^2
      m_[i] = S(0.9) * m_[i] + S(0.1) * g;
      v_[i] = (S(0.999) * v_[i].array() + S(0.001) * g.array().square()).matrix();
      e.value.array() -= alpha * m_[i].array() / (v_[i].array().sqrt() + S(1e-8));
    }
  }

 private:
  double lr_, l2_;
  std::int64_t t_ = 0;
  std::vector<nn::Mat<S>> m_, v_;
};

/// Assembles the full training objective for one minibatch on the tape.
/// Excludes the l2 penalty (that lives in the optimizer step).
template <class S>
BatchLoss<S> build_batch_loss(nn::Tape<S>& tp, Model<S>& model,
                              std::span<const ResponseSequence* const> batch,
                              const TrainConfig& cfg, Rng& dropout_rng) {
  using Tp = nn::Tape<S>;
  using Var = typename Tp::Var;
  using M = nn::Mat<S>;
  if (batch.empty()) throw DegenerateInputError("empty training batch");

  const S eps = static_cast<S>(kProbEps);
  const S alpha = static_cast<S>(cfg.effective_alpha());
  const S lambda = static_cast<S>(cfg.effective_lambda());
  const bool all_prefix = cfg.target_mode == TargetMode::AllPrefix;
  const InfluenceOptions iopts = cfg.influence_options();

  // Render every view of every sequence, then run one batched pass.
  std::vector<SequenceView> views;
  const int per_seq = all_prefix ? 3 : 7;
  views.reserve(batch.size() * static_cast<std::size_t>(per_seq));
  for (const ResponseSequence* seq : batch) {
    const auto& ints = seq->interactions;
    const std::span<const Interaction> whole(ints.data(), ints.size());
    if (all_prefix) {
      views.push_back(plain_view(whole));
      auto [mp, mm] = masked_views_for_training(whole);
      views.push_back(std::move(mp));
      views.push_back(std::move(mm));
    } else {
      if (seq->length() < 2)
        throw DegenerateInputError("final-target training needs sequences of length >= 2");
      const std::span<const Interaction> hist(ints.data(), ints.size() - 1);
      for (auto& v : backward_view_set(hist, target_from(ints.back()), iopts))
        views.push_back(std::move(v));
      views.push_back(plain_view(hist));
      auto [mp, mm] = masked_views_for_training(hist);
      views.push_back(std::move(mp));
      views.push_back(std::move(mm));
    }
  }
  const ViewBatch vb = make_batch(views, model.cfg.n_questions, model.cfg.n_concepts);
  const Var P = model.forward_train(tp, vb, dropout_rng);
  const int T = vb.T;

  BatchLoss<S> out;
  out.n_sequences = static_cast<int>(batch.size());
  Var total;  // running sum of per-sequence losses
  bool have_total = false;

  auto bce_of_row = [&](Var p, const M& pos_w, const M& neg_w) {
    const Var lp = tp.log_(tp.clamp(p, eps, S(1) - eps));
    const Var ln = tp.log_(tp.clamp(tp.one_minus(p), eps, S(1) - eps));
    return tp.neg(tp.add(tp.dot_const(lp, pos_w), tp.dot_const(ln, neg_w)));
  };

  for (std::size_t s = 0; s < batch.size(); ++s) {
    const auto& ints = batch[s]->interactions;
    const int L = all_prefix ? static_cast<int>(ints.size())
                             : static_cast<int>(ints.size()) - 1;  // history length
    const int base = static_cast<int>(s) * per_seq;

    // 0/1 masks over the scored positions (history under Final mode).
    M corr = M::Zero(1, T), incorr = M::Zero(1, T);
    for (int i = 0; i < L; ++i)
      (ints[static_cast<std::size_t>(i)].correct ? corr : incorr)(0, i) = S(1);
    const M pos_w = corr / static_cast<S>(L);
    const M neg_w = incorr / static_cast<S>(L);

    Var cf;
    Var lf, lmp, lmm;
    if (all_prefix) {
      const Var pF = tp.slice_rows(P, base + 0, 1);
      const Var pMp = tp.slice_rows(P, base + 1, 1);
      const Var pMm = tp.slice_rows(P, base + 2, 1);

      // Per-position deltas from the shared passes: how much each response's
      // visibility moves its own outcome's case.
      const Var dcorr = tp.cmul_const(tp.sub(pF, pMm), corr);
      const Var dinc = tp.cmul_const(tp.sub(pMp, pF), incorr);
      const Var viol = tp.relu(tp.neg(tp.add(dcorr, dinc)));

      // Column tau holds the prefix sums over i < tau.
      const Var dp_row = tp.shift_cols(tp.cumsum_cols(dcorr), 1);
      const Var dm_row = tp.shift_cols(tp.cumsum_cols(dinc), 1);
      const Var pen_row = tp.shift_cols(tp.cumsum_cols(viol), 1);

      M sign_scale = M::Zero(1, T), weight = M::Zero(1, T);
      const int n_targets = L - 1;
      for (int tau = 1; tau < L; ++tau) {
        const S sign = ints[static_cast<std::size_t>(tau)].correct ? S(1) : S(-1);
        sign_scale(0, tau) = sign / static_cast<S>(2 * tau);
        weight(0, tau) = S(1) / static_cast<S>(n_targets);
      }
      if (iopts.monotonic_masking) {
        const Var arg =
            tp.add_scalar(tp.cmul_const(tp.sub(dp_row, dm_row), sign_scale), S(0.5));
        const Var nll = tp.neg(tp.log_(tp.clamp(arg, eps, S(1) - eps)));
        cf = tp.dot_const(tp.add(nll, tp.scale(pen_row, alpha)), weight);
      } else {
        // With masking off the shared counterfactual renderings coincide with
        // the factual pass, so the term is the constant ln 2: keep it for
        // comparable loss logs, but there is nothing to differentiate.
        cf = tp.constant(M::Constant(1, 1, n_targets > 0 ? S(std::log(2.0)) : S(0)));
      }
      lf = bce_of_row(pF, pos_w, neg_w);
      lmp = bce_of_row(pMp, pos_w, neg_w);
      lmm = bce_of_row(pMm, pos_w, neg_w);
    } else {
      const Var pFp = tp.slice_rows(P, base + 0, 1);
      const Var pCfm = tp.slice_rows(P, base + 1, 1);
      const Var pFm = tp.slice_rows(P, base + 2, 1);
      const Var pCfp = tp.slice_rows(P, base + 3, 1);
      const Var pF = tp.slice_rows(P, base + 4, 1);
      const Var pMp = tp.slice_rows(P, base + 5, 1);
      const Var pMm = tp.slice_rows(P, base + 6, 1);

      const Var dcorr = tp.cmul_const(tp.sub(pFp, pCfm), corr);
      const Var dinc = tp.cmul_const(tp.sub(pCfp, pFm), incorr);
      const Var dp = tp.sum(dcorr);
      const Var dm = tp.sum(dinc);
      const Var pen = tp.sum(tp.relu(tp.neg(tp.add(dcorr, dinc))));
      const S sign = ints.back().correct ? S(1) : S(-1);
      const Var arg =
          tp.add_scalar(tp.scale(tp.sub(dp, dm), sign / static_cast<S>(2 * L)), S(0.5));
      cf = tp.add(tp.neg(tp.log_(tp.clamp(arg, eps, S(1) - eps))), tp.scale(pen, alpha));
      lf = bce_of_row(pF, pos_w, neg_w);
      lmp = bce_of_row(pMp, pos_w, neg_w);
      lmm = bce_of_row(pMm, pos_w, neg_w);
    }

    out.cf += static_cast<double>(tp.value(cf)(0, 0));
    out.factual += static_cast<double>(tp.value(lf)(0, 0));
    out.masked_plus += static_cast<double>(tp.value(lmp)(0, 0));
    out.masked_minus += static_cast<double>(tp.value(lmm)(0, 0));

    Var seq_loss = tp.add(cf, tp.scale(tp.add(tp.add(lf, lmp), lmm), lambda));
    total = have_total ? tp.add(total, seq_loss) : seq_loss;
    have_total = true;
  }

  const double inv_n = 1.0 / static_cast<double>(batch.size());
  out.total = tp.scale(total, static_cast<S>(inv_n));
  out.cf *= inv_n;
  out.factual *= inv_n;
  out.masked_plus *= inv_n;
  out.masked_minus *= inv_n;
  return out;
}

}  // namespace cfkt
