#pragma once

#include <span>
#include <string>
#include <vector>

#include "cfkt/data.hpp"
#include "cfkt/influence.hpp"

namespace cfkt {

/// concept id -> sorted, de-duplicated question ids carrying that concept.
std::vector<std::vector<int>> concept_question_index(std::span<const Interaction> interactions,
                                                     int n_concepts);

/// One prediction, scored and attributed: per-response contribution rows
/// plus the group totals and the decision they imply.
struct Explanation {
  TargetSpec target;
  InfluenceSet influences;
  PredictionRecord prediction;
};

Explanation explain_prediction(const ProbabilityGenerator& gen,
                               std::span<const Interaction> history, const TargetSpec& target,
                               InfluenceMode mode, const InfluenceOptions& opts = {});

struct ProficiencyPoint {
  int step = 0;  // responses visible when the probe was scored
  double score = 0.5;
  int prediction = 1;
  double delta_plus = 0;
  double delta_minus = 0;
  InfluenceSet influences;
};

struct ProficiencyTrace {
  int concept_id = -1;
  std::vector<ProficiencyPoint> points;  // steps 1..L
};

/// Concept-level proficiency over time: after each prefix of the sequence,
/// scores a virtual target slot assembled from every question carrying the
/// concept (mean question embedding + the concept embedding). All probes run
/// in a single generator call. Throws IndexError for a concept outside the
/// index, LookupError when it has no questions, DegenerateInputError for an
/// empty sequence.
ProficiencyTrace trace_proficiency(const ProbabilityGenerator& gen, const ResponseSequence& seq,
                                   int concept_id,
                                   const std::vector<std::vector<int>>& concept_questions,
                                   const InfluenceOptions& opts = {});

/// Aligned per-response table plus totals and the decision. Vocabularies, if
/// given, turn dense ids back into raw keys; nullptr keeps the ids.
std::string influence_report_text(const Explanation& ex, std::span<const Interaction> history,
                                  const Vocab* questions = nullptr,
                                  const Vocab* concepts = nullptr);

/// Machine form: one JSON object per history row, then one "prediction"
/// object, newline separated. Probabilities are rounded to six decimals so
/// a parse of the output reproduces the report.
std::string influence_report_json(const Explanation& ex, std::span<const Interaction> history,
                                  const Vocab* questions = nullptr,
                                  const Vocab* concepts = nullptr);

}  // namespace cfkt
