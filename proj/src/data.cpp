#include "cfkt/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "cfkt/rng.hpp"

namespace cfkt {

int Vocab::add_or_get(const std::string& key) {
  auto it = index.find(key);
  if (it != index.end()) return it->second;
  int id = static_cast<int>(keys.size());
  keys.push_back(key);
  index.emplace(key, id);
  return id;
}

int Vocab::at(const std::string& key) const {
  auto it = index.find(key);
  if (it == index.end()) throw LookupError("unknown vocabulary key: " + key);
  return it->second;
}

void save_vocab(const std::string& path, const Vocab& v) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open vocabulary file for writing: " + path);
  for (int i = 0; i < v.size(); ++i) out << v.keys[i] << '\t' << i << '\n';
}

Vocab load_vocab(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open vocabulary file: " + path);
  Vocab v;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos) throw DataError("malformed vocabulary line: " + line);
    const std::string key = line.substr(0, tab);
    const int id = std::stoi(line.substr(tab + 1));
    if (id != v.size()) throw DataError("vocabulary ids out of order at key: " + key);
    v.add_or_get(key);
  }
  return v;
}

namespace {

std::vector<std::string> split_line(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, delim)) out.push_back(field);
  if (!line.empty() && line.back() == delim) out.emplace_back();
  return out;
}

std::string strip(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

// Resolves a schema field to a 0-based column index: a plain integer, or a
// header name when a header row was provided.
int resolve_column(const std::string& field, const std::vector<std::string>* header,
                   const char* what) {
  if (!field.empty() && field.find_first_not_of("0123456789") == std::string::npos)
    return std::stoi(field);
  if (header == nullptr)
    throw SchemaError(std::string("column '") + field + "' for " + what +
                      " is not an index and the schema declares no header row");
  for (std::size_t i = 0; i < header->size(); ++i)
    if (strip((*header)[i]) == field) return static_cast<int>(i);
  throw SchemaError(std::string("header has no column named '") + field + "' for " + what);
}

}  // namespace

Dataset load_dataset(std::istream& in, const LoadSchema& schema) {
  Dataset ds;
  std::string line;
  std::vector<std::string> header;
  const std::vector<std::string>* header_ptr = nullptr;
  if (schema.has_header) {
    if (!std::getline(in, line)) throw SchemaError("input is empty, expected a header row");
    header = split_line(line, schema.delimiter);
    header_ptr = &header;
  }
  const int c_student = resolve_column(schema.student, header_ptr, "student");
  const int c_question = resolve_column(schema.question, header_ptr, "question");
  const int c_concepts = resolve_column(schema.concepts, header_ptr, "concepts");
  const int c_correct = resolve_column(schema.correct, header_ptr, "correctness");
  const int c_order = resolve_column(schema.order, header_ptr, "order");
  const int need = std::max({c_student, c_question, c_concepts, c_correct, c_order});

  std::int64_t row = schema.has_header ? 1 : 0;
  while (std::getline(in, line)) {
    ++row;
    if (strip(line).empty()) continue;
    const auto fields = split_line(line, schema.delimiter);
    if (static_cast<int>(fields.size()) <= need)
      throw DataError("row " + std::to_string(row) + " has " + std::to_string(fields.size()) +
                      " columns, schema needs at least " + std::to_string(need + 1));

    Interaction it;
    it.student_id = ds.students.add_or_get(strip(fields[c_student]));
    it.question_id = ds.questions.add_or_get(strip(fields[c_question]));

    const std::string cell = strip(fields[c_concepts]);
    std::string token;
    std::set<int> seen;  // de-duplicate within the cell, keep first-seen order
    for (std::size_t i = 0; i <= cell.size(); ++i) {
      const bool end = i == cell.size();
      const char ch = end ? '\0' : cell[i];
      if (!end && schema.concept_delimiters.find(ch) == std::string::npos) {
        token += ch;
        continue;
      }
      const std::string key = strip(token);
      token.clear();
      if (key.empty()) continue;
      const int cid = ds.concepts.add_or_get(key);
      if (seen.insert(cid).second) it.concept_ids.push_back(cid);
    }
    if (it.concept_ids.empty())
      throw DataError("row " + std::to_string(row) + " has an empty concept list");

    const std::string corr = strip(fields[c_correct]);
    if (corr == "0")
      it.correct = 0;
    else if (corr == "1")
      it.correct = 1;
    else
      throw DataError("row " + std::to_string(row) + " has non-binary correctness '" + corr + "'");

    const std::string ord = strip(fields[c_order]);
    try {
      it.timestamp = std::stoll(ord);
    } catch (const std::exception&) {
      throw DataError("row " + std::to_string(row) + " has a non-numeric order field '" + ord + "'");
    }
    ds.interactions.push_back(std::move(it));
  }
  return ds;
}

Dataset load_dataset_file(const std::string& path, const LoadSchema& schema) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset file: " + path);
  return load_dataset(in, schema);
}

void write_canonical(std::ostream& out, const Dataset& ds) {
  for (const auto& it : ds.interactions) {
    out << ds.students.keys.at(it.student_id) << ',' << ds.questions.keys.at(it.question_id)
        << ',';
    for (std::size_t i = 0; i < it.concept_ids.size(); ++i) {
      if (i) out << '|';
      out << ds.concepts.keys.at(it.concept_ids[i]);
    }
    out << ',' << it.correct << ',' << it.timestamp << '\n';
  }
}

void write_canonical_file(const std::string& path, const Dataset& ds) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open output file: " + path);
  write_canonical(out, ds);
}

std::vector<ResponseSequence> preprocess(const std::vector<Interaction>& interactions,
                                         int max_len, int min_len) {
  if (max_len < 1 || min_len < 1 || min_len > max_len)
    throw ConfigError("preprocess needs 1 <= min_len <= max_len");

  // Group indices by student in first-appearance order.
  std::unordered_map<int, int> slot;
  std::vector<std::vector<int>> by_student;
  for (int i = 0; i < static_cast<int>(interactions.size()); ++i) {
    const int s = interactions[i].student_id;
    auto it = slot.find(s);
    if (it == slot.end()) {
      it = slot.emplace(s, static_cast<int>(by_student.size())).first;
      by_student.emplace_back();
    }
    by_student[it->second].push_back(i);
  }

  std::vector<ResponseSequence> out;
  for (auto& idx : by_student) {
    // Order by timestamp, breaking ties by file order (stable).
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
      return interactions[a].timestamp < interactions[b].timestamp;
    });
    for (std::size_t start = 0; start < idx.size(); start += max_len) {
      const std::size_t n = std::min<std::size_t>(max_len, idx.size() - start);
      if (static_cast<int>(n) < min_len) continue;
      ResponseSequence seq;
      seq.pad_length = max_len;
      seq.interactions.reserve(n);
      for (std::size_t j = 0; j < n; ++j) seq.interactions.push_back(interactions[idx[start + j]]);
      out.push_back(std::move(seq));
    }
  }
  return out;
}

DatasetStats compute_stats(const std::vector<Interaction>& interactions,
                           const std::vector<ResponseSequence>& sequences) {
  DatasetStats st;
  st.n_interactions = static_cast<std::int64_t>(interactions.size());
  st.n_sequences = static_cast<std::int64_t>(sequences.size());
  std::set<int> students, concepts;
  std::unordered_map<int, std::size_t> q_concepts;
  std::int64_t corrects = 0;
  for (const auto& it : interactions) {
    students.insert(it.student_id);
    for (int c : it.concept_ids) concepts.insert(c);
    q_concepts.emplace(it.question_id, it.concept_ids.size());
    corrects += it.correct;
  }
  st.n_students = static_cast<int>(students.size());
  st.n_questions = static_cast<int>(q_concepts.size());
  st.n_concepts = static_cast<int>(concepts.size());
  if (!q_concepts.empty()) {
    double total = 0;
    for (const auto& [q, n] : q_concepts) total += static_cast<double>(n);
    st.mean_concepts_per_question = total / static_cast<double>(q_concepts.size());
  }
  if (!interactions.empty())
    st.fraction_correct = static_cast<double>(corrects) / static_cast<double>(interactions.size());
  return st;
}

std::vector<FoldSplit> kfold_split(int n_sequences, int k, double val_fraction,
                                   std::uint64_t seed) {
  if (k < 2) throw ConfigError("kfold_split needs k >= 2, got " + std::to_string(k));
  if (n_sequences < k)
    throw ConfigError("kfold_split needs at least k sequences, got " +
                      std::to_string(n_sequences) + " for k=" + std::to_string(k));
  if (val_fraction < 0.0 || val_fraction >= 1.0)
    throw ConfigError("val_fraction must lie in [0, 1)");

  std::vector<int> order(n_sequences);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(order);

  std::vector<std::vector<int>> folds(k);
  for (int i = 0; i < n_sequences; ++i) folds[i % k].push_back(order[i]);

  std::vector<FoldSplit> out(k);
  for (int f = 0; f < k; ++f) {
    FoldSplit& sp = out[f];
    sp.test = folds[f];
    std::vector<int> rest;
    for (int g = 0; g < k; ++g)
      if (g != f) rest.insert(rest.end(), folds[g].begin(), folds[g].end());
    std::size_t n_val = 0;
    if (val_fraction > 0.0)
      n_val = std::max<std::size_t>(1, static_cast<std::size_t>(
                                           std::llround(val_fraction * static_cast<double>(rest.size()))));
    if (n_val >= rest.size()) throw ConfigError("validation fraction leaves no training data");
    sp.val.assign(rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(n_val));
    sp.train.assign(rest.begin() + static_cast<std::ptrdiff_t>(n_val), rest.end());
  }
  return out;
}

std::vector<FoldSplit> kfold_split_by_student(const std::vector<ResponseSequence>& sequences,
                                              int k, double val_fraction, std::uint64_t seed) {
  if (k < 2) throw ConfigError("kfold_split_by_student needs k >= 2, got " + std::to_string(k));
  if (val_fraction < 0.0 || val_fraction >= 1.0)
    throw ConfigError("val_fraction must lie in [0, 1)");

  // Sequence indices per student, students in first-appearance order.
  std::vector<int> student_ids;
  std::unordered_map<int, std::size_t> slot;
  std::vector<std::vector<int>> groups;
  for (std::size_t i = 0; i < sequences.size(); ++i) {
    if (sequences[i].interactions.empty())
      throw DegenerateInputError("sequence " + std::to_string(i) + " is empty");
    const int sid = sequences[i].interactions.front().student_id;
    auto [it, inserted] = slot.emplace(sid, groups.size());
    if (inserted) {
      student_ids.push_back(sid);
      groups.emplace_back();
    }
    groups[it->second].push_back(static_cast<int>(i));
  }
  const int n_students = static_cast<int>(groups.size());
  if (n_students < k)
    throw ConfigError("kfold_split_by_student needs at least k students, got " +
                      std::to_string(n_students) + " for k=" + std::to_string(k));

  std::vector<int> order(static_cast<std::size_t>(n_students));
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(order);

  std::vector<std::vector<int>> folds(static_cast<std::size_t>(k));  // student slots
  for (int i = 0; i < n_students; ++i)
    folds[static_cast<std::size_t>(i % k)].push_back(order[static_cast<std::size_t>(i)]);

  auto append_group = [&](std::vector<int>& dst, int g) {
    dst.insert(dst.end(), groups[static_cast<std::size_t>(g)].begin(),
               groups[static_cast<std::size_t>(g)].end());
  };

  std::vector<FoldSplit> out(static_cast<std::size_t>(k));
  for (int f = 0; f < k; ++f) {
    FoldSplit& sp = out[static_cast<std::size_t>(f)];
    for (int g : folds[static_cast<std::size_t>(f)]) append_group(sp.test, g);
    std::vector<int> rest;
    for (int g2 = 0; g2 < k; ++g2)
      if (g2 != f)
        rest.insert(rest.end(), folds[static_cast<std::size_t>(g2)].begin(),
                    folds[static_cast<std::size_t>(g2)].end());
    std::size_t n_val = 0;
    if (val_fraction > 0.0)
      n_val = std::max<std::size_t>(
          1, static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(rest.size()))));
    if (n_val >= rest.size())
      throw ConfigError("validation fraction leaves no training students");
    for (std::size_t i = 0; i < rest.size(); ++i)
      append_group(i < n_val ? sp.val : sp.train, rest[i]);
  }
  return out;
}

double synthetic_p_correct(double theta, double difficulty, double guess, double slip,
                           double discrimination) {
  const double z = discrimination * (theta - difficulty);
  const double s = 1.0 / (1.0 + std::exp(-z));
  return guess + (1.0 - guess - slip) * s;
}

SyntheticResult generate_synthetic(const SyntheticConfig& cfg) {
  if (cfg.n_students < 1 || cfg.n_questions < 1 || cfg.n_concepts < 1 || cfg.seq_len < 1)
    throw ConfigError("generate_synthetic needs positive sizes");
  if (cfg.guess < 0 || cfg.slip < 0 || cfg.guess + cfg.slip >= 1.0)
    throw ConfigError("generate_synthetic needs guess, slip >= 0 with guess + slip < 1");

  Rng rng(cfg.seed);
  Rng assign_rng = rng.fork();
  Rng student_rng = rng.fork();

  SyntheticResult out;
  out.question_concepts.resize(cfg.n_questions);
  out.question_difficulty.resize(cfg.n_questions);
  for (int q = 0; q < cfg.n_questions; ++q) {
    out.question_difficulty[q] = assign_rng.uniform(cfg.difficulty_min, cfg.difficulty_max);
    const int first = assign_rng.index(cfg.n_concepts);
    out.question_concepts[q].push_back(first);
    if (cfg.n_concepts > 1 && assign_rng.bernoulli(cfg.second_concept_prob)) {
      int second = assign_rng.index(cfg.n_concepts - 1);
      if (second >= first) ++second;
      out.question_concepts[q].push_back(second);
    }
  }

  for (int s = 0; s < cfg.n_students; ++s) {
    const double ability = student_rng.uniform(cfg.theta_min, cfg.theta_max);
    std::vector<double> theta(cfg.n_concepts);
    for (int c = 0; c < cfg.n_concepts; ++c) {
      theta[c] = std::clamp(
          ability + student_rng.uniform(-cfg.ability_spread, cfg.ability_spread), 0.02, 0.98);
      out.truth.push_back({s, 0, c, theta[c]});
    }
    for (int t = 0; t < cfg.seq_len; ++t) {
      const int q = student_rng.index(cfg.n_questions);
      const auto& cs = out.question_concepts[q];
      double mean_theta = 0;
      for (int c : cs) mean_theta += theta[c];
      mean_theta /= static_cast<double>(cs.size());
      const double p = synthetic_p_correct(mean_theta, out.question_difficulty[q], cfg.guess,
                                           cfg.slip, cfg.discrimination);
      Interaction it;
      it.student_id = s;
      it.question_id = q;
      it.concept_ids = cs;
      it.correct = student_rng.bernoulli(p) ? 1 : 0;
      it.timestamp = t;
      out.interactions.push_back(std::move(it));
      for (int c : cs) {
        theta[c] += cfg.learn_rate * (1.0 - theta[c]);
        out.truth.push_back({s, t + 1, c, theta[c]});
      }
    }
  }
  return out;
}

void write_truth(std::ostream& out, const std::vector<SyntheticTruthRow>& rows) {
  for (const auto& r : rows)
    out << r.student_id << ',' << r.step << ',' << r.concept_id << ',' << r.theta << '\n';
}

Dataset as_dataset(const SyntheticResult& synth, const SyntheticConfig& cfg) {
  Dataset ds;
  ds.interactions = synth.interactions;
  for (int s = 0; s < cfg.n_students; ++s) ds.students.add_or_get("s" + std::to_string(s));
  for (int q = 0; q < cfg.n_questions; ++q) ds.questions.add_or_get("q" + std::to_string(q));
  for (int c = 0; c < cfg.n_concepts; ++c) ds.concepts.add_or_get("c" + std::to_string(c));
  return ds;
}

}  // namespace cfkt
