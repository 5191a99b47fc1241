#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "cfkt/generator.hpp"
#include "cfkt/rng.hpp"
#include "cfkt/tape.hpp"
#include "cfkt/types.hpp"
#include "cfkt/views.hpp"

namespace cfkt {

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

enum class Backbone {
  Recurrent,            // two independent gated recurrent chains, stacked
  Attention,            // per-direction masked self-attention, learned positions
  MonotonicAttention,   // attention with exponential distance decay on logits
};

const char* backbone_name(Backbone b);
Backbone backbone_from_name(const std::string& name);

struct ModelConfig {
  Backbone backbone = Backbone::Recurrent;
  int dim = 128;       // embedding width == hidden width
  int n_layers = 2;
  int heads = 8;       // attention backbones only
  int n_questions = 0; // real vocabulary sizes; a padding sentinel row is added
  int n_concepts = 0;
  int max_len = 50;    // history capacity; views may hold max_len + 1 slots
  float dropout = 0.0f;          // inside the prediction head, training only
  float encoder_dropout = 0.0f;  // attention blocks, training only

  void validate() const;
  bool is_attention() const { return backbone != Backbone::Recurrent; }
};

// ---------------------------------------------------------------------------
// Parameters
// ---------------------------------------------------------------------------

template <class S>
struct ParamStore {
  struct Entry {
    std::string name;
    nn::Mat<S> value;
    nn::Mat<S> grad;
  };

  std::vector<Entry> entries;
  std::unordered_map<std::string, int> by_name;

  Entry& add(const std::string& name, Eigen::Index rows, Eigen::Index cols) {
    if (by_name.count(name)) throw ConfigError("duplicate parameter: " + name);
    by_name.emplace(name, static_cast<int>(entries.size()));
    entries.push_back(Entry{name, nn::Mat<S>::Zero(rows, cols), nn::Mat<S>::Zero(rows, cols)});
    return entries.back();
  }

  Entry& at(const std::string& name) {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw LookupError("unknown parameter: " + name);
    return entries[static_cast<std::size_t>(it->second)];
  }
  const Entry& at(const std::string& name) const {
    return const_cast<ParamStore*>(this)->at(name);
  }

  void zero_grads() {
    for (auto& e : entries) e.grad.setZero();
  }

  std::int64_t n_scalars() const {
    std::int64_t n = 0;
    for (const auto& e : entries) n += e.value.size();
    return n;
  }

  std::vector<nn::Mat<S>> snapshot() const {
    std::vector<nn::Mat<S>> out;
    out.reserve(entries.size());
    for (const auto& e : entries) out.push_back(e.value);
    return out;
  }

  void restore(const std::vector<nn::Mat<S>>& snap) {
    if (snap.size() != entries.size()) throw ShapeError("parameter snapshot size mismatch");
    for (std::size_t i = 0; i < snap.size(); ++i) entries[i].value = snap[i];
  }
};

// ---------------------------------------------------------------------------
// Batching
// ---------------------------------------------------------------------------

/// Dense, padded rendering of a set of views. Slot (v, t) with t >= len[v] is
/// padding: its question/concept ids point at the sentinel rows and its
/// category renders as Masked; masks inside the encoders keep padding out of
/// every real position's state.
struct ViewBatch {
  int n = 0;
  int T = 0;
  std::vector<int> len;
  std::vector<int> target_index;                    // -1 when the view has none
  std::vector<std::vector<int>> qid;                // [n][T]
  std::vector<std::vector<std::vector<int>>> csets; // [n][T]
  std::vector<std::vector<int>> cat;                // [n][T], values 0/1/2
  std::vector<std::optional<VirtualTarget>> vt;     // [n]
};

/// Pads views to a common length. With require_equal_lengths the views must
/// already share one length (the strict batch contract); otherwise a
/// ShapeError names the offender.
ViewBatch make_batch(std::span<const SequenceView> views, int n_questions, int n_concepts,
                     bool require_equal_lengths = false);

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

/// The adaptive bidirectional probability generator. Position i's state is
/// h_i = FwdState(slots < i) + BwdState(slots > i): both encoder stacks run
/// *inclusive* of the position they summarize and are read with a one-slot
/// shift, which makes the leave-one-out property exact by construction. The
/// head then scores sigma(MLP([h_i, e_i])) where e_i is the question-side
/// embedding, so every slot of every view is predicted without seeing its
/// own response rendering.
template <class S>
class Model {
 public:
  using Tp = nn::Tape<S>;
  using Var = typename Tp::Var;
  using M = nn::Mat<S>;

  ModelConfig cfg;
  ParamStore<S> params;

  Model() = default;
  explicit Model(const ModelConfig& c, std::uint64_t seed = 1) : cfg(c) {
    cfg.validate();
    build_params();
    init_params(seed);
  }
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;
  Model(Model&& other) noexcept
      : cfg(std::move(other.cfg)),
        params(std::move(other.params)),
        passes_(other.passes_.load()) {}
  Model& operator=(Model&& other) noexcept {
    cfg = std::move(other.cfg);
    params = std::move(other.params);
    passes_.store(other.passes_.load());
    return *this;
  }

  std::uint64_t encoder_passes() const { return passes_.load(); }

  /// Training forward: probabilities [n x T] with gradients wired into the
  /// parameter store. `dropout_rng` drives the dropout masks.
  Var forward_train(Tp& tp, const ViewBatch& b, Rng& dropout_rng) {
    return build_forward(tp, b, &dropout_rng, /*with_grads=*/true);
  }

  /// Inference forward on a non-recording tape; no gradients, no dropout.
  Var forward_eval(Tp& tp, const ViewBatch& b) const {
    return const_cast<Model*>(this)->build_forward(tp, b, nullptr, /*with_grads=*/false);
  }

  /// p(correct) for every slot of every view, as double, clamped away from
  /// {0, 1}. Views of unequal length are fine here (internal padding).
  std::vector<std::vector<double>> view_probs(std::span<const SequenceView> views) const {
    const ViewBatch b = make_batch(views, cfg.n_questions, cfg.n_concepts);
    Tp tp(false);
    const Var p = forward_eval(tp, b);
    const M& pm = tp.value(p);
    std::vector<std::vector<double>> out(static_cast<std::size_t>(b.n));
    for (int v = 0; v < b.n; ++v) {
      out[static_cast<std::size_t>(v)].resize(static_cast<std::size_t>(b.len[v]));
      for (int t = 0; t < b.len[v]; ++t)
        out[static_cast<std::size_t>(v)][static_cast<std::size_t>(t)] =
            clamp_prob(static_cast<double>(pm(v, t)));
    }
    passes_.fetch_add(static_cast<std::uint64_t>(b.n));
    return out;
  }

  /// Strict batch contract: all views must share one length.
  std::vector<std::vector<double>> batch_predict(std::span<const SequenceView> views) const {
    make_batch(views, cfg.n_questions, cfg.n_concepts, /*require_equal_lengths=*/true);
    return view_probs(views);
  }

  // -- small non-batch helpers (shared math, used directly by tests/reports) --

  /// e = question row + mean of concept rows.
  M question_embedding(int qid, const std::vector<int>& concepts) const {
    const M& Q = params.at("embed.question").value;
    const M& C = params.at("embed.concept").value;
    if (qid < 0 || qid >= cfg.n_questions) throw IndexError("question id outside vocabulary");
    M e = Q.row(qid);
    if (!concepts.empty()) {
      M c = M::Zero(1, Q.cols());
      for (int id : concepts) {
        if (id < 0 || id >= cfg.n_concepts) throw IndexError("concept id outside vocabulary");
        c += C.row(id);
      }
      e += c / static_cast<S>(concepts.size());
    }
    return e;
  }

  /// a = e + category row.
  M response_embedding(const M& e, Category cat) const {
    return e + params.at("embed.category").value.row(static_cast<int>(cat));
  }

  /// The prediction head on explicit state/embedding rows (single code path:
  /// runs the same tape ops as the batched forward).
  double head_probability(const M& h, const M& e) const {
    Tp tp(false);
    const Var in = tp.hcat({tp.constant(h), tp.constant(e)});
    const Var p = const_cast<Model*>(this)->apply_head(tp, in, nullptr, false);
    return clamp_prob(static_cast<double>(tp.value(p)(0, 0)));
  }

  static double clamp_prob(double p) {
    constexpr double eps = 1e-7;
    return p < eps ? eps : (p > 1.0 - eps ? 1.0 - eps : p);
  }

 private:
  mutable std::atomic<std::uint64_t> passes_{0};

  struct DirNames {
    std::string prefix;  // "enc.fwd." / "enc.bwd."
  };

  void build_params() {
    const int d = cfg.dim;
    params.add("embed.question", cfg.n_questions + 1, d);  // + padding sentinel row
    params.add("embed.concept", cfg.n_concepts + 1, d);
    params.add("embed.category", 3, d);
    if (cfg.is_attention()) params.add("embed.position", cfg.max_len + 1, d);
    for (const char* dir : {"fwd", "bwd"}) {
      for (int l = 0; l < cfg.n_layers; ++l) {
        const std::string p = std::string("enc.") + dir + "." + std::to_string(l) + ".";
        if (cfg.backbone == Backbone::Recurrent) {
          params.add(p + "Wx", d, 4 * d);
          params.add(p + "Wh", d, 4 * d);
          params.add(p + "b", 1, 4 * d);
        } else {
          for (const char* w : {"Wq", "Wk", "Wv", "Wo"}) params.add(p + w, d, d);
          for (const char* bn : {"bq", "bk", "bv", "bo"}) params.add(p + bn, 1, d);
          params.add(p + "ln1.g", 1, d);
          params.add(p + "ln1.b", 1, d);
          params.add(p + "ffn.W1", d, d);
          params.add(p + "ffn.b1", 1, d);
          params.add(p + "ffn.W2", d, d);
          params.add(p + "ffn.b2", 1, d);
          params.add(p + "ln2.g", 1, d);
          params.add(p + "ln2.b", 1, d);
          if (cfg.backbone == Backbone::MonotonicAttention) params.add(p + "decay", 1, cfg.heads);
        }
      }
    }
    params.add("head.W1", 2 * d, d);
    params.add("head.b1", 1, d);
    params.add("head.W2", d, 1);
    params.add("head.b2", 1, 1);
  }

  void init_params(std::uint64_t seed) {
    Rng rng(seed);
    const S emb_scale = S(1) / std::sqrt(static_cast<S>(cfg.dim));
    for (auto& e : params.entries) {
      const bool is_embed = e.name.rfind("embed.", 0) == 0;
      const bool is_bias = e.value.rows() == 1 && (e.name.find(".b") != std::string::npos ||
                                                   e.name.find(".g") != std::string::npos ||
                                                   e.name.find("decay") != std::string::npos);
      if (e.name.find("ln1.g") != std::string::npos || e.name.find("ln2.g") != std::string::npos) {
        e.value.setOnes();
      } else if (e.name.find("decay") != std::string::npos) {
        // softplus(raw) == 1/8 so decay starts at e^{-|i-j|/8}
        e.value.setConstant(S(std::log(std::exp(0.125) - 1.0)));
      } else if (is_bias) {
        e.value.setZero();
      } else if (is_embed) {
        for (Eigen::Index i = 0; i < e.value.rows(); ++i)
          for (Eigen::Index j = 0; j < e.value.cols(); ++j)
            e.value(i, j) = static_cast<S>(rng.uniform(-emb_scale, emb_scale));
      } else {
        const S lim = std::sqrt(S(6) / static_cast<S>(e.value.rows() + e.value.cols()));
        for (Eigen::Index i = 0; i < e.value.rows(); ++i)
          for (Eigen::Index j = 0; j < e.value.cols(); ++j)
            e.value(i, j) = static_cast<S>(rng.uniform(-lim, lim));
      }
    }
  }

  // -- tape access to parameters ---------------------------------------------

  Var use(Tp& tp, const std::string& name, bool with_grads) {
    auto& e = params.at(name);
    return tp.external(&e.value, with_grads ? &e.grad : nullptr);
  }

  M* grad_of(const std::string& name, bool with_grads) {
    return with_grads ? &params.at(name).grad : nullptr;
  }

  // -- shared building blocks --------------------------------------------------

  /// Question-side embeddings for all views at slot t (recurrent layout) or
  /// all slots of one view (attention layout), honoring virtual targets.
  Var slot_embeddings(Tp& tp, const ViewBatch& b, const std::vector<std::pair<int, int>>& slots,
                      bool with_grads) {
    const M& Q = params.at("embed.question").value;
    const M& C = params.at("embed.concept").value;
    M* gQ = grad_of("embed.question", with_grads);
    M* gC = grad_of("embed.concept", with_grads);

    std::vector<int> qids;
    std::vector<std::vector<int>> csets;
    qids.reserve(slots.size());
    csets.reserve(slots.size());
    bool any_virtual = false;
    for (auto [v, t] : slots) {
      qids.push_back(b.qid[v][t]);
      csets.push_back(b.csets[v][t]);
      if (b.vt[v] && t == b.target_index[v]) any_virtual = true;
    }
    Var e = tp.add(tp.gather_rows(Q, gQ, std::move(qids)),
                   tp.gather_row_sets(C, gC, std::move(csets)));
    if (!any_virtual) return e;

    // Override rows where the target is virtual: mean of the concept's
    // question rows plus the concept row itself.
    std::vector<std::vector<int>> vq(slots.size());
    std::vector<std::vector<int>> vc(slots.size());
    M mask = M::Zero(static_cast<Eigen::Index>(slots.size()), Q.cols());
    for (std::size_t r = 0; r < slots.size(); ++r) {
      auto [v, t] = slots[r];
      if (b.vt[v] && t == b.target_index[v]) {
        vq[r] = b.vt[v]->question_ids;
        vc[r] = {b.vt[v]->concept_id};
        mask.row(static_cast<Eigen::Index>(r)).setOnes();
      }
    }
    Var ovr = tp.add(tp.gather_row_sets(Q, gQ, std::move(vq)),
                     tp.gather_row_sets(C, gC, std::move(vc)));
    return tp.lerp_mask(ovr, e, std::move(mask));
  }

  Var category_embeddings(Tp& tp, const ViewBatch& b,
                          const std::vector<std::pair<int, int>>& slots, bool with_grads) {
    std::vector<int> ids;
    ids.reserve(slots.size());
    for (auto [v, t] : slots) ids.push_back(b.cat[v][t]);
    return tp.gather_rows(params.at("embed.category").value, grad_of("embed.category", with_grads),
                          std::move(ids));
  }

  Var apply_head(Tp& tp, Var in, Rng* dropout_rng, bool with_grads) {
    Var h = tp.relu(tp.add_rowvec(tp.matmul(in, use(tp, "head.W1", with_grads)),
                                  use(tp, "head.b1", with_grads)));
    if (dropout_rng != nullptr && cfg.dropout > 0)
      h = tp.dropout(h, static_cast<S>(cfg.dropout), *dropout_rng);
    return tp.sigmoid(tp.add_rowvec(tp.matmul(h, use(tp, "head.W2", with_grads)),
                                    use(tp, "head.b2", with_grads)));
  }

  Var build_forward(Tp& tp, const ViewBatch& b, Rng* dropout_rng, bool with_grads) {
    if (b.n == 0) throw DegenerateInputError("empty view batch");
    if (b.T > cfg.max_len + 1)
      throw IndexError("batch length " + std::to_string(b.T) + " exceeds model capacity " +
                       std::to_string(cfg.max_len + 1));
    for (int v = 0; v < b.n; ++v)
      for (int t = 0; t < b.len[v]; ++t)
        if (b.qid[v][t] < 0 || b.qid[v][t] >= cfg.n_questions)
          throw IndexError("question id outside vocabulary in batch");
    return cfg.backbone == Backbone::Recurrent
               ? forward_recurrent(tp, b, dropout_rng, with_grads)
               : forward_attention(tp, b, dropout_rng, with_grads);
  }

  // -- recurrent backbone -------------------------------------------------------

  struct LstmState {
    Var h, c;
  };

  LstmState lstm_step(Tp& tp, Var x, LstmState s, const std::string& prefix, const M& step_mask,
                      bool with_grads) {
    const int d = cfg.dim;
    Var z = tp.add_rowvec(tp.add(tp.matmul(x, use(tp, prefix + "Wx", with_grads)),
                                 tp.matmul(s.h, use(tp, prefix + "Wh", with_grads))),
                          use(tp, prefix + "b", with_grads));
    Var gi = tp.sigmoid(tp.slice_cols(z, 0, d));
    Var gf = tp.sigmoid(tp.slice_cols(z, d, d));
    Var go = tp.sigmoid(tp.slice_cols(z, 2 * d, d));
    Var gg = tp.tanh_(tp.slice_cols(z, 3 * d, d));
    Var c_new = tp.add(tp.cmul(gf, s.c), tp.cmul(gi, gg));
    Var h_new = tp.cmul(go, tp.tanh_(c_new));
    // Padding steps keep the previous state so appended padding can never
    // leak into real positions.
    return LstmState{tp.lerp_mask(h_new, s.h, step_mask), tp.lerp_mask(c_new, s.c, step_mask)};
  }

  Var forward_recurrent(Tp& tp, const ViewBatch& b, Rng* dropout_rng, bool with_grads) {
    const int d = cfg.dim, n = b.n, T = b.T;

    std::vector<Var> e_t(static_cast<std::size_t>(T)), a_t(static_cast<std::size_t>(T));
    std::vector<M> step_mask(static_cast<std::size_t>(T));
    for (int t = 0; t < T; ++t) {
      std::vector<std::pair<int, int>> slots;
      slots.reserve(static_cast<std::size_t>(n));
      for (int v = 0; v < n; ++v) slots.emplace_back(v, t);
      e_t[t] = slot_embeddings(tp, b, slots, with_grads);
      a_t[t] = tp.add(e_t[t], category_embeddings(tp, b, slots, with_grads));
      M m = M::Zero(n, d);
      for (int v = 0; v < n; ++v)
        if (t < b.len[v]) m.row(v).setOnes();
      step_mask[t] = std::move(m);
    }

    // Forward chain: S_fwd[t] summarizes slots 0..t.
    std::vector<Var> s_fwd(static_cast<std::size_t>(T));
    {
      std::vector<LstmState> st(static_cast<std::size_t>(cfg.n_layers),
                                LstmState{tp.zeros(n, d), tp.zeros(n, d)});
      for (int t = 0; t < T; ++t) {
        Var x = a_t[t];
        for (int l = 0; l < cfg.n_layers; ++l) {
          const std::string p = "enc.fwd." + std::to_string(l) + ".";
          st[l] = lstm_step(tp, x, st[l], p, step_mask[t], with_grads);
          x = st[l].h;
        }
        s_fwd[t] = x;
      }
    }
    // Backward chain: S_bwd[t] summarizes slots t..len-1 (zero at padding,
    // because the state only starts moving at the first real slot).
    std::vector<Var> s_bwd(static_cast<std::size_t>(T));
    {
      std::vector<LstmState> st(static_cast<std::size_t>(cfg.n_layers),
                                LstmState{tp.zeros(n, d), tp.zeros(n, d)});
      for (int t = T - 1; t >= 0; --t) {
        Var x = a_t[t];
        for (int l = 0; l < cfg.n_layers; ++l) {
          const std::string p = "enc.bwd." + std::to_string(l) + ".";
          st[l] = lstm_step(tp, x, st[l], p, step_mask[t], with_grads);
          x = st[l].h;
        }
        s_bwd[t] = x;
      }
    }

    std::vector<Var> probs(static_cast<std::size_t>(T));
    for (int t = 0; t < T; ++t) {
      Var left = (t > 0) ? s_fwd[t - 1] : tp.zeros(n, d);
      Var right = (t + 1 < T) ? s_bwd[t + 1] : tp.zeros(n, d);
      Var comb = tp.add(left, right);
      probs[t] = apply_head(tp, tp.hcat({comb, e_t[t]}), dropout_rng, with_grads);
    }
    return tp.hcat(probs);  // [n x T]
  }

  // -- attention backbones --------------------------------------------------------

  /// Additive mask: 0 on usable keys, -1e9 elsewhere. Forward direction lets
  /// slot i use keys j <= i, backward j >= i; both exclude padding keys.
  static M attention_mask(int T, int len, bool forward) {
    M m = M::Constant(T, T, S(-1e9));
    for (int i = 0; i < T; ++i)
      for (int j = 0; j < len; ++j)
        if (forward ? (j <= i) : (j >= i)) m(i, j) = S(0);
    return m;
  }

  Var attention_stack(Tp& tp, Var x0, const std::string& dir, int T, int len, bool forward,
                      Rng* dropout_rng, bool with_grads) {
    const int d = cfg.dim, H = cfg.heads, dh = d / H;
    const S inv_sqrt = S(1) / std::sqrt(static_cast<S>(dh));
    const M mask = attention_mask(T, len, forward);
    M dist(T, T);
    if (cfg.backbone == Backbone::MonotonicAttention)
      for (int i = 0; i < T; ++i)
        for (int j = 0; j < T; ++j) dist(i, j) = static_cast<S>(std::abs(i - j));

    Var x = x0;
    for (int l = 0; l < cfg.n_layers; ++l) {
      const std::string p = "enc." + dir + "." + std::to_string(l) + ".";
      Var q = tp.add_rowvec(tp.matmul(x, use(tp, p + "Wq", with_grads)), use(tp, p + "bq", with_grads));
      Var k = tp.add_rowvec(tp.matmul(x, use(tp, p + "Wk", with_grads)), use(tp, p + "bk", with_grads));
      Var v = tp.add_rowvec(tp.matmul(x, use(tp, p + "Wv", with_grads)), use(tp, p + "bv", with_grads));
      Var decay_raw;
      if (cfg.backbone == Backbone::MonotonicAttention) decay_raw = use(tp, p + "decay", with_grads);

      std::vector<Var> ctx;
      ctx.reserve(static_cast<std::size_t>(H));
      for (int h = 0; h < H; ++h) {
        Var qh = tp.slice_cols(q, h * dh, dh);
        Var kh = tp.slice_cols(k, h * dh, dh);
        Var vh = tp.slice_cols(v, h * dh, dh);
        Var logits = tp.scale(tp.matmul_nt(qh, kh), inv_sqrt);
        if (cfg.backbone == Backbone::MonotonicAttention) {
          Var theta = tp.softplus(tp.slice_cols(decay_raw, h, 1));  // >= 0 per head
          logits = tp.add(logits, tp.scale_by(tp.neg(theta), dist));
        }
        logits = tp.add_const(logits, mask);
        ctx.push_back(tp.matmul(tp.softmax_rows(logits), vh));
      }
      Var att = tp.add_rowvec(tp.matmul(tp.hcat(ctx), use(tp, p + "Wo", with_grads)),
                              use(tp, p + "bo", with_grads));
      if (dropout_rng != nullptr && cfg.encoder_dropout > 0)
        att = tp.dropout(att, static_cast<S>(cfg.encoder_dropout), *dropout_rng);
      x = tp.layer_norm(tp.add(x, att), use(tp, p + "ln1.g", with_grads),
                        use(tp, p + "ln1.b", with_grads), S(1e-5));
      Var f = tp.add_rowvec(
          tp.matmul(tp.relu(tp.add_rowvec(tp.matmul(x, use(tp, p + "ffn.W1", with_grads)),
                                          use(tp, p + "ffn.b1", with_grads))),
                    use(tp, p + "ffn.W2", with_grads)),
          use(tp, p + "ffn.b2", with_grads));
      if (dropout_rng != nullptr && cfg.encoder_dropout > 0)
        f = tp.dropout(f, static_cast<S>(cfg.encoder_dropout), *dropout_rng);
      x = tp.layer_norm(tp.add(x, f), use(tp, p + "ln2.g", with_grads),
                        use(tp, p + "ln2.b", with_grads), S(1e-5));
    }
    // Zero padding rows so the one-slot shift reads zeros beyond the view.
    M valid = M::Zero(T, d);
    for (int i = 0; i < len; ++i) valid.row(i).setOnes();
    return tp.cmul_const(x, std::move(valid));
  }

  Var forward_attention(Tp& tp, const ViewBatch& b, Rng* dropout_rng, bool with_grads) {
    const int n = b.n, T = b.T;
    std::vector<int> pos_ids(static_cast<std::size_t>(T));
    for (int t = 0; t < T; ++t) pos_ids[static_cast<std::size_t>(t)] = t;

    std::vector<Var> rows;
    rows.reserve(static_cast<std::size_t>(n));
    for (int v = 0; v < n; ++v) {
      std::vector<std::pair<int, int>> slots;
      slots.reserve(static_cast<std::size_t>(T));
      for (int t = 0; t < T; ++t) slots.emplace_back(v, t);
      Var e = slot_embeddings(tp, b, slots, with_grads);  // [T x d]
      Var a = tp.add(e, category_embeddings(tp, b, slots, with_grads));
      a = tp.add(a, tp.gather_rows(params.at("embed.position").value,
                                   grad_of("embed.position", with_grads), pos_ids));
      Var sf = attention_stack(tp, a, "fwd", T, b.len[v], true, dropout_rng, with_grads);
      Var sb = attention_stack(tp, a, "bwd", T, b.len[v], false, dropout_rng, with_grads);
      Var comb = tp.add(tp.shift_rows(sf, 1), tp.shift_rows(sb, -1));
      Var p = apply_head(tp, tp.hcat({comb, e}), dropout_rng, with_grads);  // [T x 1]
      rows.push_back(tp.transpose(p));
    }
    return tp.vcat(rows);  // [n x T]
  }
};

// ---------------------------------------------------------------------------
// Generator adapter + checkpointing (float production type)
// ---------------------------------------------------------------------------

/// Adapts a model to the generator interface used by the influence code.
template <class S>
class ModelGenerator : public ProbabilityGenerator {
 public:
  explicit ModelGenerator(const Model<S>& m) : model_(m) {}

  std::vector<std::vector<double>> position_probs(
      std::span<const SequenceView> views) const override {
    return model_.view_probs(views);
  }

  std::uint64_t encoder_passes() const override { return model_.encoder_passes(); }

 private:
  const Model<S>& model_;
};

inline constexpr const char* kCheckpointMagic = "cfkt-ckpt-1";

void save_checkpoint(std::ostream& out, const Model<float>& model);
void save_checkpoint_file(const std::string& path, const Model<float>& model);
Model<float> load_checkpoint(std::istream& in);
Model<float> load_checkpoint_file(const std::string& path);

}  // namespace cfkt
