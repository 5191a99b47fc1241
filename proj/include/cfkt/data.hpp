#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <unordered_map>
#include <vector>

#include "cfkt/types.hpp"

namespace cfkt {

// ---------------------------------------------------------------------------
// Loading
// ---------------------------------------------------------------------------

/// Column mapping for delimited response logs. Each column field is either a
/// 0-based index ("3") or, when `has_header` is set, a column name resolved
/// against the header row. A question may carry several concepts in one cell,
/// concatenated by any of `concept_delimiters`.
///
/// The canonical on-disk format produced by this project is headerless:
///   student_id,question_id,concept_ids(|-separated),correctness,timestamp
struct LoadSchema {
  std::string student = "0";
  std::string question = "1";
  std::string concepts = "2";
  std::string correct = "3";
  std::string order = "4";
  bool has_header = false;
  char delimiter = ',';
  std::string concept_delimiters = "|_;";
};

/// Dense re-indexing of raw string keys, in first-appearance order.
struct Vocab {
  std::vector<std::string> keys;
  std::unordered_map<std::string, int> index;

  int add_or_get(const std::string& key);
  /// Throws LookupError when the key is unknown.
  int at(const std::string& key) const;
  int size() const { return static_cast<int>(keys.size()); }
};

void save_vocab(const std::string& path, const Vocab& v);
Vocab load_vocab(const std::string& path);

struct Dataset {
  std::vector<Interaction> interactions;
  Vocab students;
  Vocab questions;
  Vocab concepts;
};

/// Parses a delimited response log into interactions with dense ids.
/// Throws SchemaError when a mapped column cannot be resolved and DataError
/// (naming the offending row) for non-binary correctness, empty concept
/// cells, or rows with too few columns.
Dataset load_dataset(std::istream& in, const LoadSchema& schema);
Dataset load_dataset_file(const std::string& path, const LoadSchema& schema);

/// Writes interactions in the canonical headerless format. Raw keys are
/// taken from the vocabularies so a reload reproduces the same dense ids.
void write_canonical(std::ostream& out, const Dataset& ds);
void write_canonical_file(const std::string& path, const Dataset& ds);

// ---------------------------------------------------------------------------
// Preprocessing
// ---------------------------------------------------------------------------

/// Groups by student, orders each stream by (timestamp, load order), splits
/// into consecutive chunks of at most `max_len`, and drops chunks shorter
/// than `min_len`. Surviving sequences all report pad_length == max_len.
std::vector<ResponseSequence> preprocess(const std::vector<Interaction>& interactions,
                                         int max_len, int min_len);

struct DatasetStats {
  std::int64_t n_interactions = 0;
  std::int64_t n_sequences = 0;
  int n_students = 0;
  int n_questions = 0;
  int n_concepts = 0;
  double mean_concepts_per_question = 0.0;
  double fraction_correct = 0.0;
};

DatasetStats compute_stats(const std::vector<Interaction>& interactions,
                           const std::vector<ResponseSequence>& sequences);

// ---------------------------------------------------------------------------
// Splitting
// ---------------------------------------------------------------------------

struct FoldSplit {
  std::vector<int> train;
  std::vector<int> val;
  std::vector<int> test;
};

/// Deterministic k-fold split over sequence indices [0, n). Indices are
/// shuffled once with `seed` and dealt round-robin into k folds; fold f is
/// the test set and `val_fraction` of the remainder (at least one sequence)
/// is held out for validation. Throws ConfigError for k < 2 or n < k.
std::vector<FoldSplit> kfold_split(int n_sequences, int k, double val_fraction,
                                   std::uint64_t seed);

/// Same dealing, but whole students move together: every sequence of one
/// student lands in the same fold and role, so no student straddles
/// train/test. Throws ConfigError when there are fewer students than folds.
std::vector<FoldSplit> kfold_split_by_student(const std::vector<ResponseSequence>& sequences,
                                              int k, double val_fraction, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Synthetic data
// ---------------------------------------------------------------------------

/// Generator for ground-truth-known response logs. Each student draws one
/// overall ability g uniform in [theta_min, theta_max]; their per-concept
/// proficiency starts at theta_c = clip(g + U(-ability_spread,
/// +ability_spread), 0.02, 0.98) — correlated across concepts, as real
/// students are — and moves by theta += learn_rate * (1 - theta) each time
/// the concept is practiced. A question q has difficulty b_q and
/// P(correct) = guess + (1 - guess - slip) * sigmoid(a * (theta - b_q)),
/// with theta averaged over the question's concepts.
struct SyntheticConfig {
  int n_students = 100;
  int n_questions = 100;
  int n_concepts = 20;
  int seq_len = 50;
  double learn_rate = 0.05;
  double guess = 0.05;
  double slip = 0.05;
  double discrimination = 6.0;
  double theta_min = 0.05;
  double theta_max = 0.95;
  double ability_spread = 0.2;
  double difficulty_min = 0.4;
  double difficulty_max = 0.6;
  double second_concept_prob = 0.2;
  std::uint64_t seed = 1;
};

/// One ground-truth proficiency observation: theta for (student, concept)
/// immediately after `step` responses (step 0 = initial state).
struct SyntheticTruthRow {
  int student_id;
  int step;
  int concept_id;
  double theta;
};

struct SyntheticResult {
  std::vector<Interaction> interactions;
  std::vector<SyntheticTruthRow> truth;
  std::vector<std::vector<int>> question_concepts;  // per question id
  std::vector<double> question_difficulty;          // per question id
};

/// The response-probability kernel, exposed so tests can probe monotonicity
/// in theta directly.
double synthetic_p_correct(double theta, double difficulty, double guess,
                           double slip, double discrimination);

SyntheticResult generate_synthetic(const SyntheticConfig& cfg);

/// Ground truth as text: one "student,step,concept,theta" line per row.
void write_truth(std::ostream& out, const std::vector<SyntheticTruthRow>& rows);

/// Wraps synthetic interactions in a Dataset with s{i}/q{i}/c{i} raw keys so
/// they can be written canonically and reloaded.
Dataset as_dataset(const SyntheticResult& synth, const SyntheticConfig& cfg);

}  // namespace cfkt
