#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cfkt/data.hpp"

using namespace cfkt;

TEST_CASE("loader assigns dense ids in first-appearance order") {
  std::istringstream in(
      "s1,qA,c1|c2,1,10\n"
      "s1,qB,c2,0,11\n"
      "s2,qA,c1_c3,1,5\n"
      "\n"  // blank lines are skipped
      "s2,qC,c3;c3,0,6\n");
  const Dataset ds = load_dataset(in, LoadSchema{});

  REQUIRE(ds.interactions.size() == 4);
  CHECK(ds.students.keys == std::vector<std::string>{"s1", "s2"});
  CHECK(ds.questions.keys == std::vector<std::string>{"qA", "qB", "qC"});
  CHECK(ds.concepts.keys == std::vector<std::string>{"c1", "c2", "c3"});

  CHECK(ds.interactions[0].student_id == 0);
  CHECK(ds.interactions[0].question_id == 0);
  CHECK(ds.interactions[0].concept_ids == std::vector<int>{0, 1});
  CHECK(ds.interactions[0].correct == 1);
  CHECK(ds.interactions[0].timestamp == 10);

  // All three concept separators split; repeats within a cell de-duplicate.
  CHECK(ds.interactions[2].concept_ids == std::vector<int>{0, 2});
  CHECK(ds.interactions[3].concept_ids == std::vector<int>{2});

  CHECK(ds.students.at("s2") == 1);
  CHECK_THROWS_AS(ds.students.at("nobody"), LookupError);
}

TEST_CASE("loader reports malformed rows by number") {
  LoadSchema schema;

  std::istringstream missing("s1,qA,c1,1,0\ns1,qB\n");
  CHECK_THROWS_AS(load_dataset(missing, schema), DataError);

  std::istringstream nonbinary("s1,qA,c1,yes,0\n");
  try {
    load_dataset(nonbinary, schema);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("row 1") != std::string::npos);
    CHECK(std::string(e.what()).find("yes") != std::string::npos);
  }

  std::istringstream noconcepts("s1,qA, ,1,0\n");
  CHECK_THROWS_AS(load_dataset(noconcepts, schema), DataError);

  std::istringstream badorder("s1,qA,c1,1,soon\n");
  CHECK_THROWS_AS(load_dataset(badorder, schema), DataError);
}

TEST_CASE("header names resolve to columns") {
  LoadSchema schema;
  schema.has_header = true;
  schema.student = "user";
  schema.question = "item";
  schema.concepts = "skills";
  schema.correct = "ok";
  schema.order = "t";
  std::istringstream in(
      "t,ok,skills,item,user\n"
      "3,1,c9,q7,alice\n");
  const Dataset ds = load_dataset(in, schema);
  REQUIRE(ds.interactions.size() == 1);
  CHECK(ds.students.keys.front() == "alice");
  CHECK(ds.interactions[0].timestamp == 3);

  LoadSchema bad = schema;
  bad.question = "missing_col";
  std::istringstream again("t,ok,skills,item,user\n3,1,c9,q7,alice\n");
  CHECK_THROWS_AS(load_dataset(again, bad), SchemaError);

  // A named column without a header row cannot be resolved.
  LoadSchema headerless;
  headerless.student = "user";
  std::istringstream rows("alice,q7,c9,1,3\n");
  CHECK_THROWS_AS(load_dataset(rows, headerless), SchemaError);
}

TEST_CASE("canonical writer round-trips ids exactly") {
  std::istringstream in(
      "s1,qA,c1|c2,1,10\n"
      "s2,qB,c2,0,11\n");
  const Dataset ds = load_dataset(in, LoadSchema{});

  std::ostringstream out;
  write_canonical(out, ds);
  std::istringstream back(out.str());
  const Dataset ds2 = load_dataset(back, LoadSchema{});

  REQUIRE(ds2.interactions.size() == ds.interactions.size());
  CHECK(ds2.students.keys == ds.students.keys);
  CHECK(ds2.questions.keys == ds.questions.keys);
  CHECK(ds2.concepts.keys == ds.concepts.keys);
  for (std::size_t i = 0; i < ds.interactions.size(); ++i) {
    CHECK(ds2.interactions[i].student_id == ds.interactions[i].student_id);
    CHECK(ds2.interactions[i].question_id == ds.interactions[i].question_id);
    CHECK(ds2.interactions[i].concept_ids == ds.interactions[i].concept_ids);
    CHECK(ds2.interactions[i].correct == ds.interactions[i].correct);
    CHECK(ds2.interactions[i].timestamp == ds.interactions[i].timestamp);
  }
}

TEST_CASE("vocab files round-trip") {
  Vocab v;
  v.add_or_get("alpha");
  v.add_or_get("beta");
  v.add_or_get("gamma");
  const std::string path = "vocab_roundtrip.tmp";
  save_vocab(path, v);
  const Vocab w = load_vocab(path);
  CHECK(w.keys == v.keys);
  CHECK(w.at("beta") == 1);
  std::remove(path.c_str());
}

namespace {

std::vector<Interaction> student_stream(int student, int n, std::int64_t t0 = 0) {
  std::vector<Interaction> out;
  for (int i = 0; i < n; ++i) {
    Interaction it;
    it.student_id = student;
    it.question_id = i % 7;
    it.concept_ids = {i % 3};
    it.correct = i % 2;
    it.timestamp = t0 + i;
    out.push_back(it);
  }
  return out;
}

}  // namespace

TEST_CASE("preprocess chunks per student and drops short tails") {
  // 120 responses -> 50 + 50 + 20 (all >= min_len). 53 -> 50 + dropped 3.
  // 4 -> dropped entirely.
  auto ints = student_stream(0, 120);
  auto b = student_stream(1, 53);
  auto c = student_stream(2, 4);
  ints.insert(ints.end(), b.begin(), b.end());
  ints.insert(ints.end(), c.begin(), c.end());

  const auto seqs = preprocess(ints, 50, 5);
  REQUIRE(seqs.size() == 4);
  CHECK(seqs[0].length() == 50);
  CHECK(seqs[1].length() == 50);
  CHECK(seqs[2].length() == 20);
  CHECK(seqs[3].length() == 50);
  for (const auto& s : seqs) CHECK(s.pad_length == 50);
  CHECK(seqs[3].interactions.front().student_id == 1);

  // Within a chunk the stream is timestamp-ordered and consecutive.
  for (int i = 0; i < 50; ++i) CHECK(seqs[1].interactions[static_cast<std::size_t>(i)].timestamp == 50 + i);

  CHECK_THROWS_AS(preprocess(ints, 50, 0), ConfigError);
  CHECK_THROWS_AS(preprocess(ints, 10, 11), ConfigError);
}

TEST_CASE("preprocess orders by timestamp with stable ties") {
  std::vector<Interaction> ints;
  // Interleaved arrival, decreasing timestamps, plus a tie.
  Interaction a;
  a.student_id = 0;
  a.concept_ids = {0};
  a.question_id = 10;
  a.timestamp = 5;
  ints.push_back(a);
  a.question_id = 11;
  a.timestamp = 2;
  ints.push_back(a);
  a.question_id = 12;
  a.timestamp = 5;  // ties with the first row; file order must hold
  ints.push_back(a);
  a.question_id = 13;
  a.timestamp = 1;
  ints.push_back(a);

  const auto seqs = preprocess(ints, 10, 1);
  REQUIRE(seqs.size() == 1);
  std::vector<int> qs;
  for (const auto& it : seqs[0].interactions) qs.push_back(it.question_id);
  CHECK(qs == std::vector<int>{13, 11, 10, 12});
}

TEST_CASE("kfold split partitions indices with the requested sizes") {
  const auto folds = kfold_split(100, 5, 0.1, 7);
  REQUIRE(folds.size() == 5);

  std::set<int> all_tests;
  for (const auto& f : folds) {
    CHECK(f.test.size() == 20);
    CHECK(f.val.size() == 8);  // 10% of the remaining 80
    CHECK(f.train.size() == 72);

    std::set<int> seen;
    for (int i : f.test) seen.insert(i);
    for (int i : f.val) seen.insert(i);
    for (int i : f.train) seen.insert(i);
    CHECK(seen.size() == 100);  // disjoint union covers everything
    for (int i : f.test) all_tests.insert(i);
  }
  CHECK(all_tests.size() == 100);  // every sequence is tested exactly once

  // Deterministic in the seed.
  const auto again = kfold_split(100, 5, 0.1, 7);
  CHECK(again[2].test == folds[2].test);
  CHECK(again[2].train == folds[2].train);
  const auto other = kfold_split(100, 5, 0.1, 8);
  CHECK(other[0].test != folds[0].test);

  // No validation split when the fraction is zero.
  const auto noval = kfold_split(10, 5, 0.0, 1);
  CHECK(noval[0].val.empty());
  CHECK(noval[0].train.size() == 8);

  CHECK_THROWS_AS(kfold_split(10, 1, 0.1, 1), ConfigError);
  CHECK_THROWS_AS(kfold_split(3, 5, 0.1, 1), ConfigError);
  CHECK_THROWS_AS(kfold_split(10, 5, 1.0, 1), ConfigError);
}

TEST_CASE("student-level split keeps each student's sequences together") {
  // 12 students, 1-3 sequences each.
  std::vector<ResponseSequence> seqs;
  for (int s = 0; s < 12; ++s) {
    const int n = 1 + s % 3;
    for (int j = 0; j < n; ++j) {
      ResponseSequence seq;
      seq.pad_length = 10;
      Interaction it;
      it.student_id = s;
      it.question_id = j;
      it.concept_ids = {0};
      seq.interactions.push_back(it);
      seqs.push_back(seq);
    }
  }

  const auto folds = kfold_split_by_student(seqs, 4, 0.1, 3);
  REQUIRE(folds.size() == 4);

  auto owner = [&](int idx) { return seqs[static_cast<std::size_t>(idx)].interactions.front().student_id; };
  std::set<int> tested;
  for (const auto& f : folds) {
    std::set<int> test_students, val_students, train_students;
    for (int i : f.test) test_students.insert(owner(i));
    for (int i : f.val) val_students.insert(owner(i));
    for (int i : f.train) train_students.insert(owner(i));
    CHECK(test_students.size() == 3);  // 12 students dealt evenly into 4 folds

    // A student appears in exactly one role.
    for (int s : test_students) {
      CHECK(val_students.count(s) == 0);
      CHECK(train_students.count(s) == 0);
    }
    for (int s : val_students) CHECK(train_students.count(s) == 0);

    CHECK(f.test.size() + f.val.size() + f.train.size() == seqs.size());
    for (int s : test_students) tested.insert(s);
  }
  CHECK(tested.size() == 12);

  CHECK_THROWS_AS(kfold_split_by_student(seqs, 13, 0.1, 1), ConfigError);
  std::vector<ResponseSequence> with_empty = seqs;
  with_empty.push_back(ResponseSequence{});
  CHECK_THROWS_AS(kfold_split_by_student(with_empty, 4, 0.1, 1), DegenerateInputError);
}

TEST_CASE("response kernel is bounded, centered, and monotone in proficiency") {
  const double g = 0.1, s = 0.15, a = 6.0, b = 0.5;

  // At theta == difficulty the sigmoid sits at 1/2 exactly.
  CHECK(synthetic_p_correct(b, b, g, s, a) == doctest::Approx(g + (1 - g - s) / 2).epsilon(1e-12));

  // Saturation: far above the difficulty only slips remain; far below only
  // guesses succeed.
  CHECK(synthetic_p_correct(50.0, b, g, s, a) == doctest::Approx(1 - s).epsilon(1e-9));
  CHECK(synthetic_p_correct(-50.0, b, g, s, a) == doctest::Approx(g).epsilon(1e-9));

  double prev = -1;
  for (double theta = 0.0; theta <= 1.0; theta += 0.01) {
    const double p = synthetic_p_correct(theta, b, g, s, a);
    CHECK(p > g - 1e-12);
    CHECK(p < 1 - s + 1e-12);
    CHECK(p >= prev);  // strictly increasing in theta
    prev = p;
  }
}

TEST_CASE("synthetic generation is deterministic and internally consistent") {
  SyntheticConfig cfg;
  cfg.n_students = 12;
  cfg.n_questions = 30;
  cfg.n_concepts = 6;
  cfg.seq_len = 15;
  cfg.seed = 42;

  const SyntheticResult r1 = generate_synthetic(cfg);
  const SyntheticResult r2 = generate_synthetic(cfg);

  REQUIRE(r1.interactions.size() == 12 * 15);
  REQUIRE(r1.interactions.size() == r2.interactions.size());
  for (std::size_t i = 0; i < r1.interactions.size(); ++i) {
    CHECK(r1.interactions[i].question_id == r2.interactions[i].question_id);
    CHECK(r1.interactions[i].correct == r2.interactions[i].correct);
  }

  cfg.seed = 43;
  const SyntheticResult r3 = generate_synthetic(cfg);
  bool differs = false;
  for (std::size_t i = 0; i < r1.interactions.size(); ++i)
    differs = differs || r1.interactions[i].correct != r3.interactions[i].correct ||
              r1.interactions[i].question_id != r3.interactions[i].question_id;
  CHECK(differs);

  // Question metadata covers every question; difficulties sit in the range.
  REQUIRE(r1.question_concepts.size() == 30);
  REQUIRE(r1.question_difficulty.size() == 30);
  for (double b : r1.question_difficulty) {
    CHECK(b >= cfg.difficulty_min);
    CHECK(b <= cfg.difficulty_max);
  }
  for (const auto& cs : r1.question_concepts) {
    CHECK(!cs.empty());
    CHECK(cs.size() <= 2);
    for (int c : cs) CHECK(c < 6);
  }

  // Ground truth: every (student, concept) has a step-0 row, thetas clipped
  // into (0, 1), and practicing a concept never lowers it.
  int initial_rows = 0;
  for (const auto& row : r1.truth) {
    CHECK(row.theta > 0.0);
    CHECK(row.theta < 1.0);
    if (row.step == 0) ++initial_rows;
  }
  CHECK(initial_rows == 12 * 6);

  std::vector<std::vector<double>> last(12, std::vector<double>(6, -1));
  for (const auto& row : r1.truth) {
    double& prev = last[static_cast<std::size_t>(row.student_id)][static_cast<std::size_t>(row.concept_id)];
    if (prev >= 0) CHECK(row.theta >= prev - 1e-12);
    prev = row.theta;
  }

  // The dataset wrapper round-trips through the canonical text format.
  const Dataset ds = as_dataset(r1, cfg);
  std::ostringstream out;
  write_canonical(out, ds);
  std::istringstream back(out.str());
  const Dataset ds2 = load_dataset(back, LoadSchema{});
  REQUIRE(ds2.interactions.size() == ds.interactions.size());
  // Dense ids renumber in first-appearance order on reload; the raw keys and
  // outcomes are what survive the round trip.
  CHECK(ds2.questions.keys[static_cast<std::size_t>(ds2.interactions[7].question_id)] ==
        ds.questions.keys[static_cast<std::size_t>(ds.interactions[7].question_id)]);
  CHECK(ds2.interactions[7].correct == ds.interactions[7].correct);
}

TEST_CASE("dataset stats summarize the corpus") {
  std::istringstream in(
      "s1,qA,c1|c2,1,0\n"
      "s1,qB,c2,0,1\n"
      "s2,qA,c1|c2,1,0\n"
      "s2,qB,c2,1,1\n");
  const Dataset ds = load_dataset(in, LoadSchema{});
  const auto seqs = preprocess(ds.interactions, 10, 1);
  const DatasetStats st = compute_stats(ds.interactions, seqs);

  CHECK(st.n_interactions == 4);
  CHECK(st.n_sequences == 2);
  CHECK(st.n_students == 2);
  CHECK(st.n_questions == 2);
  CHECK(st.n_concepts == 2);
  CHECK(st.mean_concepts_per_question == doctest::Approx(1.5));
  CHECK(st.fraction_correct == doctest::Approx(0.75));
}
