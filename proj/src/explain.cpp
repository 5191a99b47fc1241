#include "cfkt/explain.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <set>
#include <sstream>

#include <json.hpp>

namespace cfkt {

namespace {

std::string key_or_id(const Vocab* vocab, int id) {
  if (vocab != nullptr && id >= 0 && id < vocab->size())
    return vocab->keys[static_cast<std::size_t>(id)];
  return std::to_string(id);
}

std::string concept_list(const Vocab* vocab, const std::vector<int>& ids) {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i > 0) out += ' ';
    out += key_or_id(vocab, ids[i]);
  }
  return out;
}

double round6(double x) { return std::round(x * 1e6) / 1e6; }

}  // namespace

std::vector<std::vector<int>> concept_question_index(std::span<const Interaction> interactions,
                                                     int n_concepts) {
  if (n_concepts < 0) throw ConfigError("negative concept count");
  std::vector<std::set<int>> acc(static_cast<std::size_t>(n_concepts));
  for (const auto& it : interactions)
    for (int c : it.concept_ids) {
      if (c < 0 || c >= n_concepts)
        throw IndexError("concept id " + std::to_string(c) + " outside vocabulary of " +
                         std::to_string(n_concepts));
      acc[static_cast<std::size_t>(c)].insert(it.question_id);
    }
  std::vector<std::vector<int>> out(static_cast<std::size_t>(n_concepts));
  for (std::size_t c = 0; c < acc.size(); ++c) out[c].assign(acc[c].begin(), acc[c].end());
  return out;
}

Explanation explain_prediction(const ProbabilityGenerator& gen,
                               std::span<const Interaction> history, const TargetSpec& target,
                               InfluenceMode mode, const InfluenceOptions& opts) {
  Explanation ex;
  ex.target = target;
  ex.influences = mode == InfluenceMode::Exact
                      ? exact_forward_influences(history, target, gen, opts)
                      : backward_influences(history, target, gen, opts);
  ex.prediction = influence_predict(ex.influences);
  return ex;
}

ProficiencyTrace trace_proficiency(const ProbabilityGenerator& gen, const ResponseSequence& seq,
                                   int concept_id,
                                   const std::vector<std::vector<int>>& concept_questions,
                                   const InfluenceOptions& opts) {
  if (concept_id < 0 || concept_id >= static_cast<int>(concept_questions.size()))
    throw IndexError("concept id " + std::to_string(concept_id) + " outside the index");
  const auto& qids = concept_questions[static_cast<std::size_t>(concept_id)];
  if (qids.empty())
    throw LookupError("concept " + std::to_string(concept_id) +
                      " has no questions: nothing to probe proficiency with");
  if (seq.interactions.empty())
    throw DegenerateInputError("cannot trace proficiency over an empty sequence");

  // The probe slot: a concrete question id keeps the view well-formed, the
  // virtual target then overrides its embedding with the concept aggregate.
  const TargetSpec probe{qids.front(), {concept_id}};
  const VirtualTarget vt{qids, concept_id};

  const int L = seq.length();
  std::vector<SequenceView> views;
  views.reserve(static_cast<std::size_t>(4 * L));
  for (int s = 1; s <= L; ++s) {
    const std::span<const Interaction> hist(seq.interactions.data(),
                                            static_cast<std::size_t>(s));
    for (auto& v : backward_view_set(hist, probe, opts)) {
      v.virtual_target = vt;
      views.push_back(std::move(v));
    }
  }
  const auto probs = gen.position_probs(views);
  if (probs.size() != views.size()) throw ShapeError("generator returned wrong view count");

  ProficiencyTrace out;
  out.concept_id = concept_id;
  out.points.reserve(static_cast<std::size_t>(L));
  for (int s = 1; s <= L; ++s) {
    const std::span<const Interaction> hist(seq.interactions.data(),
                                            static_cast<std::size_t>(s));
    const std::size_t v0 = static_cast<std::size_t>(4 * (s - 1));
    InfluenceSet set = influences_from_backward_probs(hist, probs[v0], probs[v0 + 1],
                                                      probs[v0 + 2], probs[v0 + 3]);
    const PredictionRecord pr = influence_predict(set);
    ProficiencyPoint pt;
    pt.step = s;
    pt.score = pr.score;
    pt.prediction = pr.prediction;
    pt.delta_plus = pr.delta_plus;
    pt.delta_minus = pr.delta_minus;
    pt.influences = std::move(set);
    out.points.push_back(std::move(pt));
  }
  return out;
}

std::string influence_report_text(const Explanation& ex, std::span<const Interaction> history,
                                  const Vocab* questions, const Vocab* concepts) {
  if (static_cast<int>(history.size()) != ex.influences.t)
    throw ShapeError("history length does not match the influence set");

  std::ostringstream os;
  os << "target " << key_or_id(questions, ex.target.question_id);
  if (!ex.target.concept_ids.empty())
    os << " [" << concept_list(concepts, ex.target.concept_ids) << "]";
  os << "  (" << (ex.influences.mode == InfluenceMode::Exact ? "exact" : "approximate")
     << " influences)\n";

  os << std::setw(4) << "#" << "  " << std::left << std::setw(14) << "question" << std::setw(18)
     << "concepts" << std::right << std::setw(6) << "label" << std::setw(10) << "group"
     << std::setw(9) << "f" << std::setw(9) << "cf" << std::setw(10) << "delta" << '\n';
  os << std::fixed << std::setprecision(4);
  for (const auto& e : ex.influences.entries) {
    const auto& it = history[static_cast<std::size_t>(e.index)];
    os << std::setw(4) << e.index << "  " << std::left << std::setw(14)
       << key_or_id(questions, it.question_id) << std::setw(18)
       << concept_list(concepts, it.concept_ids) << std::right << std::setw(6) << it.correct
       << std::setw(10) << (e.group == InfluenceGroup::Correct ? "correct" : "incorrect")
       << std::setw(9) << e.f_prob << std::setw(9) << e.cf_prob << std::setw(10) << std::showpos
       << e.delta << std::noshowpos << '\n';
  }
  os << "totals  delta+ " << ex.prediction.delta_plus << "  delta- " << ex.prediction.delta_minus
     << "  t " << ex.prediction.t << '\n';
  os << "prediction " << ex.prediction.prediction << "  score " << ex.prediction.score;
  if (ex.prediction.tie) os << "  (tie)";
  os << '\n';
  return os.str();
}

std::string influence_report_json(const Explanation& ex, std::span<const Interaction> history,
                                  const Vocab* questions, const Vocab* concepts) {
  if (static_cast<int>(history.size()) != ex.influences.t)
    throw ShapeError("history length does not match the influence set");

  std::string out;
  for (const auto& e : ex.influences.entries) {
    const auto& it = history[static_cast<std::size_t>(e.index)];
    nlohmann::json row;
    row["index"] = e.index;
    row["question"] = key_or_id(questions, it.question_id);
    nlohmann::json cs = nlohmann::json::array();
    for (int c : it.concept_ids) cs.push_back(key_or_id(concepts, c));
    row["concepts"] = std::move(cs);
    row["label"] = it.correct;
    row["group"] = e.group == InfluenceGroup::Correct ? "correct" : "incorrect";
    row["factual"] = round6(e.f_prob);
    row["counterfactual"] = round6(e.cf_prob);
    row["delta"] = round6(e.delta);
    out += row.dump();
    out += '\n';
  }
  nlohmann::json foot;
  foot["target"] = key_or_id(questions, ex.target.question_id);
  foot["mode"] = ex.influences.mode == InfluenceMode::Exact ? "exact" : "approximate";
  foot["delta_plus"] = round6(ex.prediction.delta_plus);
  foot["delta_minus"] = round6(ex.prediction.delta_minus);
  foot["t"] = ex.prediction.t;
  foot["prediction"] = ex.prediction.prediction;
  foot["score"] = round6(ex.prediction.score);
  foot["tie"] = ex.prediction.tie;
  out += foot.dump();
  out += '\n';
  return out;
}

}  // namespace cfkt
