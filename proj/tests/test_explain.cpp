#include <doctest.h>

#include <json.hpp>
#include <sstream>
#include <vector>

#include "cfkt/explain.hpp"
#include "cfkt/model.hpp"
#include "cfkt/rng.hpp"

using namespace cfkt;

namespace {

Interaction make(int q, int correct, std::vector<int> concepts, int t) {
  Interaction it;
  it.student_id = 0;
  it.question_id = q;
  it.concept_ids = std::move(concepts);
  it.correct = correct;
  it.timestamp = t;
  return it;
}

struct TinyWorld {
  Model<float> model;
  std::vector<Interaction> history;

  TinyWorld() : model(config(), 13) {
    Rng rng(3);
    for (int i = 0; i < 7; ++i)
      history.push_back(
          make(rng.index(10), rng.bernoulli(0.5) ? 1 : 0, {rng.index(4)}, i));
  }

  static ModelConfig config() {
    ModelConfig cfg;
    cfg.backbone = Backbone::Recurrent;
    cfg.dim = 6;
    cfg.n_layers = 1;
    cfg.n_questions = 10;
    cfg.n_concepts = 4;
    cfg.max_len = 12;
    return cfg;
  }
};

}  // namespace

TEST_CASE("the concept index collects each concept's questions, sorted") {
  std::vector<Interaction> ints{
      make(5, 1, {0, 2}, 0), make(1, 0, {2}, 1), make(5, 1, {0, 2}, 2), make(3, 1, {1}, 3),
  };
  const auto index = concept_question_index(ints, 4);
  REQUIRE(index.size() == 4);
  CHECK(index[0] == std::vector<int>{5});
  CHECK(index[1] == std::vector<int>{3});
  CHECK(index[2] == std::vector<int>{1, 5});  // sorted, de-duplicated
  CHECK(index[3].empty());

  std::vector<Interaction> bad{make(1, 1, {7}, 0)};
  CHECK_THROWS_AS(concept_question_index(bad, 4), IndexError);
}

TEST_CASE("an explanation carries the same numbers as the raw influence call") {
  const TinyWorld w;
  const ModelGenerator<float> gen(w.model);
  const TargetSpec target{8, {1}};

  const Explanation ex = explain_prediction(gen, w.history, target, InfluenceMode::Approximate);
  const InfluenceSet direct = backward_influences(w.history, target, gen);

  REQUIRE(ex.influences.entries.size() == direct.entries.size());
  for (std::size_t i = 0; i < direct.entries.size(); ++i) {
    CHECK(ex.influences.entries[i].delta == direct.entries[i].delta);
    CHECK(ex.influences.entries[i].f_prob == direct.entries[i].f_prob);
  }
  const PredictionRecord pred = influence_predict(direct);
  CHECK(ex.prediction.score == pred.score);
  CHECK(ex.prediction.prediction == pred.prediction);
  CHECK(ex.target.question_id == 8);

  const Explanation exact = explain_prediction(gen, w.history, target, InfluenceMode::Exact);
  CHECK(exact.influences.mode == InfluenceMode::Exact);
  CHECK(exact.influences.entries.size() == w.history.size());
}

TEST_CASE("the text report names every response and the decision") {
  const TinyWorld w;
  const ModelGenerator<float> gen(w.model);
  const TargetSpec target{8, {1}};
  const Explanation ex = explain_prediction(gen, w.history, target, InfluenceMode::Approximate);

  const std::string report = influence_report_text(ex, w.history);
  CAPTURE(report);

  // One line per response plus header, totals, and decision.
  const auto lines = [&] {
    std::vector<std::string> out;
    std::istringstream in(report);
    for (std::string l; std::getline(in, l);) out.push_back(l);
    return out;
  }();
  CHECK(lines.size() == w.history.size() + 4);  // title, columns, rows, totals, decision
  CHECK(report.find("target 8") != std::string::npos);
  CHECK(report.find("delta+") != std::string::npos);
  CHECK(report.find("prediction " + std::to_string(ex.prediction.prediction)) !=
        std::string::npos);
  CHECK(report.find("approximate") != std::string::npos);

  // With vocabularies the raw keys replace the dense ids.
  Vocab q, c;
  for (int i = 0; i < 10; ++i) q.add_or_get("Q" + std::to_string(i));
  for (int i = 0; i < 4; ++i) c.add_or_get("skill" + std::to_string(i));
  const std::string named = influence_report_text(ex, w.history, &q, &c);
  CHECK(named.find("Q8") != std::string::npos);
  CHECK(named.find("skill") != std::string::npos);
}

TEST_CASE("the machine report parses back to the explanation, at six decimals") {
  const TinyWorld w;
  const ModelGenerator<float> gen(w.model);
  const TargetSpec target{2, {0}};
  const Explanation ex = explain_prediction(gen, w.history, target, InfluenceMode::Approximate);

  const std::string report = influence_report_json(ex, w.history);
  std::istringstream in(report);
  std::vector<nlohmann::json> rows;
  for (std::string line; std::getline(in, line);)
    if (!line.empty()) rows.push_back(nlohmann::json::parse(line));

  REQUIRE(rows.size() == w.history.size() + 1);
  for (std::size_t i = 0; i < w.history.size(); ++i) {
    const auto& r = rows[i];
    CHECK(r.at("index").get<int>() == static_cast<int>(i));
    CHECK(r.at("question").get<std::string>() == std::to_string(w.history[i].question_id));
    CHECK(r.at("label").get<int>() == w.history[i].correct);
    const auto& e = ex.influences.entries[i];
    CHECK(r.at("factual").get<double>() == doctest::Approx(e.f_prob).epsilon(1e-6));
    CHECK(r.at("counterfactual").get<double>() == doctest::Approx(e.cf_prob).epsilon(1e-6));
    CHECK(r.at("delta").get<double>() == doctest::Approx(e.delta).epsilon(2e-6));
    CHECK((r.at("group").get<std::string>() == "correct" ||
           r.at("group").get<std::string>() == "incorrect"));
  }

  const auto& last = rows.back();
  CHECK(last.at("prediction").get<int>() == ex.prediction.prediction);
  CHECK(last.at("score").get<double>() == doctest::Approx(ex.prediction.score).epsilon(1e-6));
  CHECK(last.at("delta_plus").get<double>() ==
        doctest::Approx(ex.prediction.delta_plus).epsilon(1e-6));
  CHECK(last.at("t").get<int>() == static_cast<int>(w.history.size()));
  CHECK(last.at("mode").get<std::string>() == "approximate");
}

TEST_CASE("a proficiency trace probes the concept after every prefix") {
  const TinyWorld w;
  const ModelGenerator<float> gen(w.model);

  ResponseSequence seq;
  seq.pad_length = 12;
  seq.interactions = w.history;
  const auto index = concept_question_index(w.history, 4);

  int probe_concept = -1;  // any concept that actually has questions
  for (int c = 0; c < 4; ++c)
    if (!index[static_cast<std::size_t>(c)].empty()) probe_concept = c;
  REQUIRE(probe_concept >= 0);

  const ProficiencyTrace trace = trace_proficiency(gen, seq, probe_concept, index);
  CHECK(trace.concept_id == probe_concept);
  REQUIRE(trace.points.size() == w.history.size());
  for (std::size_t s = 0; s < trace.points.size(); ++s) {
    const auto& pt = trace.points[s];
    CHECK(pt.step == static_cast<int>(s) + 1);
    CHECK(pt.score > 0.0);
    CHECK(pt.score < 1.0);
    CHECK(pt.influences.t == pt.step);
  }

  // Each point must equal the direct influence computation on that prefix
  // with the same virtual probe: one shared batched call changes nothing.
  const VirtualTarget probe{index[static_cast<std::size_t>(probe_concept)], probe_concept};
  for (std::size_t s = 0; s < trace.points.size(); ++s) {
    const std::span<const Interaction> prefix(w.history.data(), s + 1);
    TargetSpec target;
    target.question_id = probe.question_ids.front();
    target.concept_ids = {probe_concept};
    auto views = backward_view_set(prefix, target);
    for (auto& v : views) v.virtual_target = probe;
    const auto probs = gen.position_probs(views);
    const InfluenceSet set =
        influences_from_backward_probs(prefix, probs[0], probs[1], probs[2], probs[3]);
    const PredictionRecord pred = influence_predict(set);
    CHECK(trace.points[s].score == doctest::Approx(pred.score).epsilon(1e-5));
    CHECK(trace.points[s].delta_plus == doctest::Approx(pred.delta_plus).epsilon(1e-5));
  }

  CHECK_THROWS_AS(trace_proficiency(gen, seq, 99, index), IndexError);
  // A concept with no questions cannot be probed.
  int empty_concept = -1;
  for (int c = 0; c < 4; ++c)
    if (index[static_cast<std::size_t>(c)].empty()) empty_concept = c;
  if (empty_concept >= 0)
    CHECK_THROWS_AS(trace_proficiency(gen, seq, empty_concept, index), LookupError);

  ResponseSequence empty;
  CHECK_THROWS_AS(trace_proficiency(gen, empty, probe_concept, index), DegenerateInputError);
}
