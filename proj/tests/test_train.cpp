#include <doctest.h>

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <span>
#include <vector>

#include "cfkt/losses.hpp"
#include "cfkt/metrics.hpp"
#include "cfkt/train.hpp"

using namespace cfkt;

namespace {

double auc_brute_force(std::span<const double> scores, std::span<const int> labels) {
  double wins = 0;
  long long pairs = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!labels[i]) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j]) continue;
      ++pairs;
      if (scores[i] > scores[j])
        wins += 1.0;
      else if (scores[i] == scores[j])
        wins += 0.5;
    }
  }
  return wins / static_cast<double>(pairs);
}

ResponseSequence random_sequence(Rng& rng, int len, int n_q, int n_c, int student = 0) {
  ResponseSequence seq;
  seq.pad_length = len;
  for (int i = 0; i < len; ++i) {
    Interaction it;
    it.student_id = student;
    it.question_id = rng.index(n_q);
    it.concept_ids = {rng.index(n_c)};
    it.correct = rng.bernoulli(0.55) ? 1 : 0;
    it.timestamp = i;
    seq.interactions.push_back(it);
  }
  return seq;
}

TrainConfig tiny_train_config() {
  TrainConfig cfg;
  cfg.model.backbone = Backbone::Recurrent;
  cfg.model.dim = 6;
  cfg.model.n_layers = 1;
  cfg.model.n_questions = 9;
  cfg.model.n_concepts = 4;
  cfg.model.max_len = 12;
  cfg.batch_size = 8;
  cfg.max_epochs = 2;
  cfg.patience = 5;
  cfg.lambda = 0.1;
  cfg.alpha = 1.0;
  cfg.threads = 1;
  return cfg;
}

// Scalar-path recomputation of the training objective for one sequence:
// the same probabilities read through the inference interface, assembled
// with the plain double-precision loss functions instead of tape ops.
struct ReferenceLoss {
  double cf = 0, factual = 0, masked_plus = 0, masked_minus = 0, total = 0;
};

ReferenceLoss reference_loss(const Model<float>& model, const ResponseSequence& seq,
                             const TrainConfig& cfg) {
  const auto& ints = seq.interactions;
  const std::span<const Interaction> whole(ints.data(), ints.size());
  const double lambda = cfg.effective_lambda();
  const double alpha = cfg.effective_alpha();
  ReferenceLoss out;

  if (cfg.target_mode == TargetMode::AllPrefix) {
    const int L = static_cast<int>(ints.size());
    auto [mp, mm] = masked_views_for_training(whole);
    const auto probs =
        model.view_probs(std::vector<SequenceView>{plain_view(whole), mp, mm});
    const auto& pF = probs[0];
    const auto& pMp = probs[1];
    const auto& pMm = probs[2];

    std::vector<double> d(static_cast<std::size_t>(L));
    for (int i = 0; i < L; ++i)
      d[static_cast<std::size_t>(i)] = ints[static_cast<std::size_t>(i)].correct
                                           ? pF[static_cast<std::size_t>(i)] - pMm[static_cast<std::size_t>(i)]
                                           : pMp[static_cast<std::size_t>(i)] - pF[static_cast<std::size_t>(i)];

    if (!cfg.no_mono) {
      for (int tau = 1; tau < L; ++tau) {
        double dp = 0, dm = 0, pen = 0;
        for (int i = 0; i < tau; ++i) {
          const double di = d[static_cast<std::size_t>(i)];
          (ints[static_cast<std::size_t>(i)].correct ? dp : dm) += di;
          pen += std::max(-di, 0.0);
        }
        const double sign = ints[static_cast<std::size_t>(tau)].correct ? 1.0 : -1.0;
        const double arg =
            std::clamp(sign / (2.0 * tau) * (dp - dm) + 0.5, kProbEps, 1.0 - kProbEps);
        out.cf += (-std::log(arg) + alpha * pen) / static_cast<double>(L - 1);
      }
    } else {
      out.cf = L > 1 ? std::log(2.0) : 0.0;
    }

    std::vector<int> labels, mask(static_cast<std::size_t>(L), 1);
    for (const auto& it : ints) labels.push_back(it.correct);
    out.factual = loss_factual(pF, labels, mask);
    out.masked_plus = loss_masked(pMp, labels, mask);
    out.masked_minus = loss_masked(pMm, labels, mask);
  } else {
    const std::span<const Interaction> hist(ints.data(), ints.size() - 1);
    const TargetSpec target = target_from(ints.back());
    const auto bviews = backward_view_set(hist, target, cfg.influence_options());
    const auto bp = model.view_probs(bviews);
    const InfluenceSet set = influences_from_backward_probs(hist, bp[0], bp[1], bp[2], bp[3]);
    out.cf = loss_cf(set, ints.back().correct, alpha);

    auto [mp, mm] = masked_views_for_training(hist);
    const auto probs = model.view_probs(std::vector<SequenceView>{plain_view(hist), mp, mm});
    std::vector<int> labels, mask(hist.size(), 1);
    for (const auto& it : hist) labels.push_back(it.correct);
    out.factual = loss_factual(probs[0], labels, mask);
    out.masked_plus = loss_masked(probs[1], labels, mask);
    out.masked_minus = loss_masked(probs[2], labels, mask);
  }
  out.total = total_loss(out.cf, out.factual, out.masked_plus, out.masked_minus, lambda);
  return out;
}

}  // namespace

TEST_CASE("rank-statistic AUC equals the brute-force pairwise count") {
  Rng rng(88);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 5 + rng.index(40);
    std::vector<double> scores;
    std::vector<int> labels;
    int pos = 0;
    for (int i = 0; i < n; ++i) {
      // A coarse score grid forces plenty of exact ties.
      scores.push_back(rng.index(7) / 7.0);
      labels.push_back(rng.bernoulli(0.5) ? 1 : 0);
      pos += labels.back();
    }
    if (pos == 0 || pos == n) {
      CHECK_THROWS_AS(auc(scores, labels), StatisticsError);
      continue;
    }
    CHECK(auc(scores, labels) ==
          doctest::Approx(auc_brute_force(scores, labels)).epsilon(1e-12));
  }

  // Hand-checkable anchors.
  const std::vector<double> s{0.9, 0.8, 0.3, 0.1};
  CHECK(auc(s, std::vector<int>{1, 1, 0, 0}) == 1.0);
  CHECK(auc(s, std::vector<int>{0, 0, 1, 1}) == 0.0);
  CHECK(auc(std::vector<double>{0.5, 0.5}, std::vector<int>{1, 0}) == 0.5);

  CHECK(accuracy(std::vector<int>{1, 0, 1}, std::vector<int>{1, 1, 1}) ==
        doctest::Approx(2.0 / 3));
}

TEST_CASE("early stopping counts strictly-stale epochs") {
  EarlyStopper stop(2);
  CHECK(stop.update(0.50, 0));
  CHECK(stop.update(0.60, 1));
  CHECK_FALSE(stop.update(0.60, 2));  // equal is not an improvement
  CHECK_FALSE(stop.should_stop());    // one stale epoch, patience is two
  CHECK_FALSE(stop.update(0.55, 3));
  CHECK(stop.should_stop());
  CHECK(stop.best() == doctest::Approx(0.60));
  CHECK(stop.best_epoch() == 1);

  // A new best resets the countdown.
  EarlyStopper s2(2);
  s2.update(0.5, 0);
  s2.update(0.4, 1);
  s2.update(0.7, 2);
  CHECK(s2.stale_epochs() == 0);
  CHECK_THROWS_AS(EarlyStopper(0), ConfigError);
}

TEST_CASE("the first optimizer step moves each weight by about the learning rate") {
  ParamStore<float> ps;
  auto& e = ps.add("w", 1, 2);
  e.value << 1.0f, -2.0f;
  e.grad << 2.0f, -3.0f;

  AdamOptimizer<float> opt(0.1, 0.0);
  opt.step(ps);
  CHECK(ps.at("w").value(0, 0) == doctest::Approx(1.0 - 0.1).epsilon(1e-4));
  CHECK(ps.at("w").value(0, 1) == doctest::Approx(-2.0 + 0.1).epsilon(1e-4));

  CHECK_THROWS_AS(AdamOptimizer<float>(0.0, 0.0), ConfigError);
  CHECK_THROWS_AS(AdamOptimizer<float>(0.1, -1.0), ConfigError);

  // L2 pulls an otherwise gradient-free weight toward zero.
  ParamStore<float> ps2;
  auto& e2 = ps2.add("w", 1, 1);
  e2.value << 5.0f;
  e2.grad << 0.0f;
  AdamOptimizer<float> decay(0.1, 0.01);
  decay.step(ps2);
  CHECK(ps2.at("w").value(0, 0) < 5.0f);
}

TEST_CASE("the tape objective matches the scalar losses in final-target mode") {
  TrainConfig cfg = tiny_train_config();
  cfg.target_mode = TargetMode::Final;
  Model<float> model(cfg.model, 31);
  Rng rng(9);

  for (int trial = 0; trial < 4; ++trial) {
    const ResponseSequence seq = random_sequence(rng, 4 + rng.index(6), 9, 4);
    const ReferenceLoss ref = reference_loss(model, seq, cfg);

    nn::Tape<float> tp(true);
    Rng drop(1);
    const ResponseSequence* ptr = &seq;
    const BatchLoss<float> got = build_batch_loss(tp, model, std::span(&ptr, 1), cfg, drop);

    CHECK(got.cf == doctest::Approx(ref.cf).epsilon(5e-4));
    CHECK(got.factual == doctest::Approx(ref.factual).epsilon(5e-4));
    CHECK(got.masked_plus == doctest::Approx(ref.masked_plus).epsilon(5e-4));
    CHECK(got.masked_minus == doctest::Approx(ref.masked_minus).epsilon(5e-4));
    CHECK(static_cast<double>(tp.value(got.total)(0, 0)) ==
          doctest::Approx(ref.total).epsilon(5e-4));
  }

  ResponseSequence too_short = random_sequence(rng, 1, 9, 4);
  nn::Tape<float> tp(true);
  Rng drop(1);
  const ResponseSequence* ptr = &too_short;
  CHECK_THROWS_AS(build_batch_loss(tp, model, std::span(&ptr, 1), cfg, drop),
                  DegenerateInputError);
}

TEST_CASE("the tape objective matches the scalar losses in all-prefix mode") {
  TrainConfig cfg = tiny_train_config();
  cfg.target_mode = TargetMode::AllPrefix;
  Model<float> model(cfg.model, 17);
  Rng rng(23);

  for (int trial = 0; trial < 4; ++trial) {
    const ResponseSequence seq = random_sequence(rng, 3 + rng.index(8), 9, 4);
    const ReferenceLoss ref = reference_loss(model, seq, cfg);

    nn::Tape<float> tp(true);
    Rng drop(1);
    const ResponseSequence* ptr = &seq;
    const BatchLoss<float> got = build_batch_loss(tp, model, std::span(&ptr, 1), cfg, drop);

    CHECK(got.cf == doctest::Approx(ref.cf).epsilon(5e-4));
    CHECK(got.factual == doctest::Approx(ref.factual).epsilon(5e-4));
    CHECK(got.masked_plus == doctest::Approx(ref.masked_plus).epsilon(5e-4));
    CHECK(got.masked_minus == doctest::Approx(ref.masked_minus).epsilon(5e-4));
    CHECK(static_cast<double>(tp.value(got.total)(0, 0)) ==
          doctest::Approx(ref.total).epsilon(5e-4));
  }

  // A two-sequence batch averages the per-sequence objectives.
  const ResponseSequence a = random_sequence(rng, 5, 9, 4);
  const ResponseSequence b = random_sequence(rng, 8, 9, 4);
  const double mean_total =
      (reference_loss(model, a, cfg).total + reference_loss(model, b, cfg).total) / 2;
  nn::Tape<float> tp(true);
  Rng drop(1);
  const ResponseSequence* ptrs[2] = {&a, &b};
  const BatchLoss<float> got = build_batch_loss(tp, model, std::span(ptrs, 2), cfg, drop);
  CHECK(got.n_sequences == 2);
  CHECK(static_cast<double>(tp.value(got.total)(0, 0)) ==
        doctest::Approx(mean_total).epsilon(5e-4));
}

TEST_CASE("ablation switches remove exactly their term") {
  Rng rng(47);
  const ResponseSequence seq = random_sequence(rng, 7, 9, 4);
  const ResponseSequence* ptr = &seq;

  TrainConfig cfg = tiny_train_config();
  Model<float> model(cfg.model, 3);

  // Independent training disconnects the generator losses from the total.
  cfg.no_joint = true;
  {
    nn::Tape<float> tp(true);
    Rng drop(1);
    const BatchLoss<float> got = build_batch_loss(tp, model, std::span(&ptr, 1), cfg, drop);
    CHECK(static_cast<double>(tp.value(got.total)(0, 0)) == doctest::Approx(got.cf).epsilon(1e-6));
    CHECK(got.factual > 0);  // still reported, just unweighted
  }

  // Without retention the shared renderings carry no target signal: the
  // prediction part of the loss pins to ln 2.
  cfg = tiny_train_config();
  cfg.no_mono = true;
  {
    nn::Tape<float> tp(true);
    Rng drop(1);
    const BatchLoss<float> got = build_batch_loss(tp, model, std::span(&ptr, 1), cfg, drop);
    CHECK(got.cf == doctest::Approx(std::log(2.0)).epsilon(1e-6));  // stored at float precision
  }

  // Dropping the constraint leaves pure prediction loss; alpha no longer
  // contributes even when violations exist.
  cfg = tiny_train_config();
  cfg.no_constraint = true;
  CHECK(cfg.effective_alpha() == 0.0);
  cfg.no_joint = true;
  CHECK(cfg.effective_lambda() == 0.0);
}

TEST_CASE("training runs deterministically and improves the objective") {
  Rng rng(1234);
  std::vector<ResponseSequence> train, val;
  for (int s = 0; s < 32; ++s) train.push_back(random_sequence(rng, 8, 9, 4, s));
  for (int s = 0; s < 8; ++s) val.push_back(random_sequence(rng, 8, 9, 4, 100 + s));

  TrainConfig cfg = tiny_train_config();
  cfg.max_epochs = 3;

  int callbacks = 0;
  const TrainResult r1 = train_model(train, val, cfg, [&](const EpochStats& st) {
    ++callbacks;
    CHECK(std::isfinite(st.loss_total));
  });
  CHECK(callbacks == static_cast<int>(r1.history.size()));
  REQUIRE(r1.history.size() <= 3);
  REQUIRE(!r1.history.empty());
  CHECK(r1.best_epoch >= 0);
  CHECK(r1.best_val_auc >= 0.0);
  CHECK(r1.best_val_auc <= 1.0);
  for (const auto& st : r1.history) {
    CHECK(std::isfinite(st.loss_cf));
    CHECK(st.val_auc >= 0.0);
  }

  // Bitwise repeatability: same seeds, same data, same numbers.
  const TrainResult r2 = train_model(train, val, cfg);
  REQUIRE(r2.history.size() == r1.history.size());
  for (std::size_t i = 0; i < r1.history.size(); ++i) {
    CHECK(r2.history[i].loss_total == r1.history[i].loss_total);
    CHECK(r2.history[i].val_auc == r1.history[i].val_auc);
  }

  // Longer training on this tiny set drives the loss down.
  cfg.max_epochs = 12;
  cfg.patience = 12;
  const TrainResult r3 = train_model(train, {}, cfg);
  CHECK(r3.history.back().loss_total < r3.history.front().loss_total);

  CHECK_THROWS_AS(train_model({}, val, cfg), DegenerateInputError);
}

TEST_CASE("evaluation scores every position from its own prefix") {
  TrainConfig cfg = tiny_train_config();
  const Model<float> model(cfg.model, 77);
  const ModelGenerator<float> gen(model);

  Rng rng(5);
  std::vector<ResponseSequence> seqs;
  for (int s = 0; s < 6; ++s) seqs.push_back(random_sequence(rng, 7, 9, 4, s));

  const EvalResult res = evaluate(gen, seqs, ScoreMode::Approximate, InfluenceOptions{}, 1);
  CHECK(res.records.size() == 6 * 6);  // positions 1..6 of each sequence
  for (const auto& rec : res.records) {
    CHECK(rec.target_index >= 1);
    CHECK(rec.score > 0.0);
    CHECK(rec.score < 1.0);
    CHECK(rec.label ==
          seqs[static_cast<std::size_t>(rec.sequence)]
              .interactions[static_cast<std::size_t>(rec.target_index)]
              .correct);
    CHECK(rec.prediction == (rec.score >= 0.5 ? 1 : 0));
  }
  CHECK(res.auc >= 0.0);
  CHECK(res.auc <= 1.0);

  // Thread count must not change a single record.
  const EvalResult res2 = evaluate(gen, seqs, ScoreMode::Approximate, InfluenceOptions{}, 3);
  REQUIRE(res2.records.size() == res.records.size());
  for (std::size_t i = 0; i < res.records.size(); ++i) {
    CHECK(res2.records[i].score == res.records[i].score);
    CHECK(res2.records[i].sequence == res.records[i].sequence);
  }

  // Exact mode walks the same targets with per-position interventions.
  const EvalResult exact = evaluate(gen, seqs, ScoreMode::Exact, InfluenceOptions{}, 1);
  CHECK(exact.records.size() == res.records.size());

  CHECK_THROWS_AS(evaluate(gen, {}, ScoreMode::Approximate, InfluenceOptions{}, 1),
                  StatisticsError);
}

TEST_CASE("the benchmark counts four approximate passes against 2t exact ones") {
  TrainConfig cfg = tiny_train_config();
  const Model<float> model(cfg.model, 2);

  Rng rng(6);
  std::vector<ResponseSequence> seqs;
  for (int s = 0; s < 3; ++s) seqs.push_back(random_sequence(rng, 9, 9, 4, s));

  const BenchmarkResult bench = benchmark_approx(model, seqs);
  CHECK(bench.n_sequences == 3);
  CHECK(bench.history_length == 8);
  CHECK(bench.approx_passes_per_target == doctest::Approx(4.0));
  CHECK(bench.exact_passes_per_target == doctest::Approx(16.0));
  CHECK(bench.approx_ms_per_target > 0.0);
  CHECK(bench.exact_ms_per_target > 0.0);
  CHECK(bench.speedup == doctest::Approx(bench.exact_ms_per_target / bench.approx_ms_per_target));

  std::vector<ResponseSequence> uneven = seqs;
  uneven.push_back(random_sequence(rng, 5, 9, 4, 9));
  CHECK_THROWS_AS(benchmark_approx(model, uneven), ShapeError);
}

TEST_CASE("the worker pool visits every index once and propagates exceptions") {
  std::vector<std::atomic<int>> hits(97);
  parallel_for(97, 4, [&](int i) { hits[static_cast<std::size_t>(i)].fetch_add(1); });
  for (const auto& h : hits) CHECK(h.load() == 1);

  CHECK_THROWS_AS(parallel_for(10, 3,
                               [](int i) {
                                 if (i == 7) throw NumericError("boom");
                               }),
                  NumericError);

  // Degenerate sizes are fine.
  parallel_for(0, 4, [](int) { FAIL("must not be called"); });
}

TEST_CASE("thread resolution prefers the explicit request, then the environment") {
  CHECK(resolve_threads(5) == 5);

  setenv("CFKT_THREADS", "3", 1);
  CHECK(resolve_threads(0) == 3);
  setenv("CFKT_THREADS", "not-a-number", 1);
  CHECK(resolve_threads(0) >= 1);  // falls back to hardware concurrency
  unsetenv("CFKT_THREADS");
  CHECK(resolve_threads(0) >= 1);
}
