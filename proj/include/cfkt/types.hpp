#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace cfkt {

// ---------------------------------------------------------------------------
// Error taxonomy. Everything thrown by the library derives from Error so
// callers can catch one type at the CLI boundary; the subclasses mirror the
// distinct failure modes of the contracts (bad schema vs. bad data vs. bad
// configuration vs. numeric trouble).
// ---------------------------------------------------------------------------

struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// A column mapping that cannot be resolved against the input file.
struct SchemaError : Error {
  using Error::Error;
};

/// A malformed record inside an otherwise well-formed file.
struct DataError : Error {
  using Error::Error;
};

/// An invalid parameter combination (k < 2 folds, zero dimensions, ...).
struct ConfigError : Error {
  using Error::Error;
};

/// An out-of-range position or id.
struct IndexError : Error {
  using Error::Error;
};

/// A lookup against a vocabulary or mapping that has no entry.
struct LookupError : Error {
  using Error::Error;
};

/// Inputs that are structurally valid but degenerate for the operation
/// (empty history, empty influence set where one is required, ...).
struct DegenerateInputError : Error {
  using Error::Error;
};

/// Non-finite values or violated numeric invariants.
struct NumericError : Error {
  using Error::Error;
};

/// Mismatched tensor/batch shapes.
struct ShapeError : Error {
  using Error::Error;
};

/// Too few samples for the requested statistic.
struct StatisticsError : Error {
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Core records.
// ---------------------------------------------------------------------------

/// One answered question. Ids are dense 0-based indices produced by the
/// loader; `correct` is strictly binary. `timestamp` only has to be ordered
/// consistently within a student, the absolute scale is irrelevant.
struct Interaction {
  int student_id = -1;
  int question_id = -1;
  std::vector<int> concept_ids;  // never empty for a real interaction
  int correct = 0;               // 0 or 1
  std::int64_t timestamp = 0;
};

/// A fixed-capacity slice of one student's history. `interactions` holds the
/// real records (length L >= 1); `pad_length` is the capacity every sequence
/// in a dataset shares, so pad_length - L trailing slots are padding. Padding
/// is materialized only at batch time, never stored here.
struct ResponseSequence {
  std::vector<Interaction> interactions;
  int pad_length = 0;

  int length() const { return static_cast<int>(interactions.size()); }
};

/// What a position's response looks like to the probability generator.
/// Masked responses exist only inside counterfactual / training views; raw
/// data is always 0/1.
enum class Category : std::uint8_t {
  Incorrect = 0,
  Correct = 1,
  Masked = 2,
};

inline Category category_of(int correct) {
  return correct ? Category::Correct : Category::Incorrect;
}

inline const char* category_name(Category c) {
  switch (c) {
    case Category::Incorrect: return "incorrect";
    case Category::Correct: return "correct";
    case Category::Masked: return "masked";
  }
  return "?";
}

}  // namespace cfkt
