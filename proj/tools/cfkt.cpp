// cfkt: counterfactual knowledge tracing toolkit.
//
// Machine-readable records (one JSON object per line) go to stdout; progress
// and human-readable tables go to stderr. Every command that writes files
// also writes a manifest.json describing exactly what produced them.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cfkt/data.hpp"
#include "cfkt/explain.hpp"
#include "cfkt/influence.hpp"
#include "cfkt/model.hpp"
#include "cfkt/runio.hpp"
#include "cfkt/train.hpp"

namespace {

using nlohmann::json;

void emit(const json& j) { std::cout << j.dump() << "\n" << std::flush; }

cfkt::Backbone encoder_to_backbone(const std::string& name) {
  // Short aliases name the model family each backbone follows; the
  // descriptive names are accepted too.
  if (name == "dkt") return cfkt::Backbone::Recurrent;
  if (name == "sakt") return cfkt::Backbone::Attention;
  if (name == "akt") return cfkt::Backbone::MonotonicAttention;
  return cfkt::backbone_from_name(name);
}

cfkt::ScoreMode mode_from(const std::string& m) {
  if (m == "approx") return cfkt::ScoreMode::Approximate;
  if (m == "exact") return cfkt::ScoreMode::Exact;
  throw cfkt::ConfigError("unknown mode: " + m);
}

struct SchemaOpts {
  cfkt::LoadSchema schema;

  void attach(CLI::App* cmd) {
    cmd->add_option("--col-student", schema.student, "Student column (index or header name)");
    cmd->add_option("--col-question", schema.question, "Question column");
    cmd->add_option("--col-concepts", schema.concepts, "Concept-list column");
    cmd->add_option("--col-correct", schema.correct, "Correctness column (0/1)");
    cmd->add_option("--col-order", schema.order, "Ordering/timestamp column");
    cmd->add_flag("--has-header", schema.has_header, "First row is a header");
    cmd->add_option("--delimiter", schema.delimiter, "Field delimiter (default ,)");
  }
};

struct Summary {
  double mean = 0, stddev = 0;
};

Summary summarize(const std::vector<double>& xs) {
  Summary s;
  if (xs.empty()) return s;
  for (double x : xs) s.mean += x;
  s.mean /= static_cast<double>(xs.size());
  double sq = 0;
  for (double x : xs) sq += (x - s.mean) * (x - s.mean);
  s.stddev = std::sqrt(sq / static_cast<double>(xs.size()));
  return s;
}

std::vector<cfkt::ResponseSequence> pick(const std::vector<cfkt::ResponseSequence>& all,
                                         const std::vector<int>& idx) {
  std::vector<cfkt::ResponseSequence> out;
  out.reserve(idx.size());
  for (int i : idx) out.push_back(all[static_cast<std::size_t>(i)]);
  return out;
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

struct SynthArgs {
  std::string out_dir = "synth";
  cfkt::SyntheticConfig cfg;
};

void run_synth(const SynthArgs& a) {
  cfkt::RunManifest manifest;
  manifest.command = "synth";
  manifest.started_utc = cfkt::utc_iso8601();
  manifest.seed = a.cfg.seed;
  manifest.config = {
      {"students", std::to_string(a.cfg.n_students)},
      {"questions", std::to_string(a.cfg.n_questions)},
      {"concepts", std::to_string(a.cfg.n_concepts)},
      {"len", std::to_string(a.cfg.seq_len)},
      {"learn_rate", std::to_string(a.cfg.learn_rate)},
      {"guess", std::to_string(a.cfg.guess)},
      {"slip", std::to_string(a.cfg.slip)},
      {"seed", std::to_string(a.cfg.seed)},
  };

  const cfkt::SyntheticResult synth = cfkt::generate_synthetic(a.cfg);
  const cfkt::Dataset ds = cfkt::as_dataset(synth, a.cfg);

  std::filesystem::create_directories(a.out_dir);
  const std::string data_path = a.out_dir + "/data.csv";
  const std::string truth_path = a.out_dir + "/truth.csv";
  cfkt::write_canonical_file(data_path, ds);
  {
    std::ofstream tf(truth_path, std::ios::binary);
    if (!tf) throw cfkt::DataError("cannot write " + truth_path);
    cfkt::write_truth(tf, synth.truth);
  }

  manifest.dataset_path = data_path;
  manifest.dataset_fingerprint = cfkt::hex64(cfkt::fnv1a64_file(data_path));
  manifest.metrics["interactions"] = static_cast<double>(ds.interactions.size());
  manifest.finished_utc = cfkt::utc_iso8601();
  cfkt::write_manifest(a.out_dir + "/manifest.json", manifest);

  std::cerr << "wrote " << ds.interactions.size() << " interactions for " << a.cfg.n_students
            << " students to " << data_path << "\n";
  emit({{"record", "synth"},
        {"data", data_path},
        {"truth", truth_path},
        {"interactions", ds.interactions.size()},
        {"students", a.cfg.n_students},
        {"fingerprint", manifest.dataset_fingerprint}});
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string data;
  std::string out_dir = "runs";
  SchemaOpts schema;
  std::string encoder = "dkt";
  std::string mode = "approx";
  std::string target_mode = "all-prefix";
  int dim = 128;
  int layers = 2;
  int heads = 8;
  double lr = 1e-3;
  double lambda = 0.1;
  double l2 = 0.0;
  double dropout = 0.0;
  double encoder_dropout = 0.0;
  double alpha = 1.0;
  int seq_len = 50;
  int min_len = 5;
  int folds = 5;
  int patience = 10;
  int epochs = 100;
  int batch = 64;
  std::uint64_t seed = 1;
  double val_fraction = 0.1;
  int only_fold = -1;
  bool split_by_student = false;
  bool no_joint = false, no_mono = false, no_constraint = false;
  int threads = 0;
};

std::map<std::string, std::string> train_config_snapshot(const TrainArgs& a) {
  return {
      {"lr", std::to_string(a.lr)},
      {"lambda", std::to_string(a.lambda)},
      {"l2", std::to_string(a.l2)},
      {"dropout", std::to_string(a.dropout)},
      {"layers", std::to_string(a.layers)},
      {"encoder", a.encoder},
      {"dim", std::to_string(a.dim)},
      {"heads", std::to_string(a.heads)},
      {"alpha", std::to_string(a.alpha)},
      {"seq_len", std::to_string(a.seq_len)},
      {"min_len", std::to_string(a.min_len)},
      {"folds", std::to_string(a.folds)},
      {"patience", std::to_string(a.patience)},
      {"epochs", std::to_string(a.epochs)},
      {"batch", std::to_string(a.batch)},
      {"mode", a.mode},
      {"target_mode", a.target_mode},
      {"val_fraction", std::to_string(a.val_fraction)},
      {"split_by_student", a.split_by_student ? "1" : "0"},
      {"no_joint", a.no_joint ? "1" : "0"},
      {"no_mono", a.no_mono ? "1" : "0"},
      {"no_constraint", a.no_constraint ? "1" : "0"},
      {"seed", std::to_string(a.seed)},
  };
}

void run_train(const TrainArgs& a) {
  cfkt::RunManifest manifest;
  manifest.command = "train";
  manifest.started_utc = cfkt::utc_iso8601();
  manifest.seed = a.seed;
  manifest.config = train_config_snapshot(a);
  manifest.dataset_path = a.data;
  manifest.dataset_fingerprint = cfkt::hex64(cfkt::fnv1a64_file(a.data));
  const std::string run_dir = cfkt::make_run_dir(a.out_dir, manifest);
  std::cerr << "run directory: " << run_dir << "\n";

  const cfkt::Dataset ds = cfkt::load_dataset_file(a.data, a.schema.schema);
  const auto sequences = cfkt::preprocess(ds.interactions, a.seq_len, a.min_len);
  const cfkt::DatasetStats stats = cfkt::compute_stats(ds.interactions, sequences);
  std::cerr << "dataset: " << stats.n_interactions << " interactions, " << stats.n_sequences
            << " sequences, " << stats.n_students << " students, " << stats.n_questions
            << " questions, " << stats.n_concepts << " concepts\n";
  cfkt::save_vocab(run_dir + "/questions.vocab", ds.questions);
  cfkt::save_vocab(run_dir + "/concepts.vocab", ds.concepts);

  const auto splits =
      a.split_by_student
          ? cfkt::kfold_split_by_student(sequences, a.folds, a.val_fraction, a.seed)
          : cfkt::kfold_split(static_cast<int>(sequences.size()), a.folds, a.val_fraction, a.seed);

  cfkt::TrainConfig tcfg;
  tcfg.model.backbone = encoder_to_backbone(a.encoder);
  tcfg.model.dim = a.dim;
  tcfg.model.n_layers = a.layers;
  tcfg.model.heads = a.heads;
  tcfg.model.n_questions = ds.questions.size();
  tcfg.model.n_concepts = ds.concepts.size();
  tcfg.model.max_len = a.seq_len;
  tcfg.model.dropout = static_cast<float>(a.dropout);
  tcfg.model.encoder_dropout = static_cast<float>(a.encoder_dropout);
  tcfg.lr = a.lr;
  tcfg.lambda = a.lambda;
  tcfg.l2 = a.l2;
  tcfg.alpha = a.alpha;
  tcfg.batch_size = a.batch;
  tcfg.max_epochs = a.epochs;
  tcfg.patience = a.patience;
  tcfg.seed = a.seed;
  if (a.target_mode == "all-prefix")
    tcfg.target_mode = cfkt::TargetMode::AllPrefix;
  else if (a.target_mode == "final")
    tcfg.target_mode = cfkt::TargetMode::Final;
  else
    throw cfkt::ConfigError("unknown target mode: " + a.target_mode);
  tcfg.no_joint = a.no_joint;
  tcfg.no_mono = a.no_mono;
  tcfg.no_constraint = a.no_constraint;
  tcfg.threads = a.threads;

  const cfkt::ScoreMode score_mode = mode_from(a.mode);
  std::vector<double> aucs, accs;
  for (int f = 0; f < a.folds; ++f) {
    if (a.only_fold >= 0 && f != a.only_fold) continue;
    const auto train_seqs = pick(sequences, splits[static_cast<std::size_t>(f)].train);
    const auto val_seqs = pick(sequences, splits[static_cast<std::size_t>(f)].val);
    const auto test_seqs = pick(sequences, splits[static_cast<std::size_t>(f)].test);
    std::cerr << "fold " << f << ": " << train_seqs.size() << " train / " << val_seqs.size()
              << " val / " << test_seqs.size() << " test\n";

    cfkt::TrainConfig fold_cfg = tcfg;
    fold_cfg.seed = a.seed + static_cast<std::uint64_t>(f);
    const cfkt::TrainResult tr = cfkt::train_model(
        train_seqs, val_seqs, fold_cfg, [&](const cfkt::EpochStats& es) {
          std::cerr << "fold " << f << " epoch " << es.epoch << "  loss " << es.loss_total
                    << " (cf " << es.loss_cf << ")  val auc " << es.val_auc << " acc "
                    << es.val_acc << (es.improved ? "  *" : "") << "  [" << es.seconds << "s]\n";
        });

    cfkt::ModelGenerator<float> gen(tr.model);
    const cfkt::EvalResult ev =
        cfkt::evaluate(gen, test_seqs, score_mode, tcfg.influence_options(), a.threads);
    aucs.push_back(ev.auc);
    accs.push_back(ev.acc);

    const std::string ckpt = run_dir + "/fold" + std::to_string(f) + ".ckpt";
    cfkt::save_checkpoint_file(ckpt, tr.model);
    manifest.checkpoints.push_back(ckpt);
    manifest.metrics["fold" + std::to_string(f) + "_auc"] = ev.auc;
    manifest.metrics["fold" + std::to_string(f) + "_acc"] = ev.acc;

    std::cerr << "fold " << f << " test: auc " << ev.auc << "  acc " << ev.acc << "  (best epoch "
              << tr.best_epoch << ")\n";
    emit({{"record", "fold"},
          {"fold", f},
          {"auc", ev.auc},
          {"acc", ev.acc},
          {"best_epoch", tr.best_epoch},
          {"val_auc", tr.best_val_auc},
          {"checkpoint", ckpt}});
  }

  const Summary sa = summarize(aucs), sc = summarize(accs);
  manifest.metrics["auc_mean"] = sa.mean;
  manifest.metrics["auc_std"] = sa.stddev;
  manifest.metrics["acc_mean"] = sc.mean;
  manifest.metrics["acc_std"] = sc.stddev;
  manifest.finished_utc = cfkt::utc_iso8601();
  cfkt::write_manifest(run_dir + "/manifest.json", manifest);

  char line[160];
  std::snprintf(line, sizeof line, "summary over %zu fold(s): AUC %.4f +/- %.4f  ACC %.4f +/- %.4f",
                aucs.size(), sa.mean, sa.stddev, sc.mean, sc.stddev);
  std::cerr << line << "\n";
  emit({{"record", "summary"},
        {"folds", aucs.size()},
        {"auc_mean", sa.mean},
        {"auc_std", sa.stddev},
        {"acc_mean", sc.mean},
        {"acc_std", sc.stddev},
        {"run_dir", run_dir}});
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string data;
  std::string checkpoint;
  SchemaOpts schema;
  std::string mode = "approx";
  std::string records_out;
  int seq_len = 50;
  int min_len = 5;
  bool no_mono = false;
  int threads = 0;
};

void run_evaluate(const EvalArgs& a) {
  const cfkt::Model<float> model = cfkt::load_checkpoint_file(a.checkpoint);
  const cfkt::Dataset ds = cfkt::load_dataset_file(a.data, a.schema.schema);
  if (ds.questions.size() > model.cfg.n_questions || ds.concepts.size() > model.cfg.n_concepts)
    throw cfkt::ConfigError("dataset vocabulary exceeds the checkpoint's: wrong data file?");
  const auto sequences = cfkt::preprocess(ds.interactions, a.seq_len, a.min_len);

  cfkt::ModelGenerator<float> gen(model);
  const cfkt::InfluenceOptions opts{!a.no_mono};
  const cfkt::EvalResult ev = cfkt::evaluate(gen, sequences, mode_from(a.mode), opts, a.threads);

  if (!a.records_out.empty()) {
    std::ofstream rf(a.records_out, std::ios::binary);
    if (!rf) throw cfkt::DataError("cannot write " + a.records_out);
    for (const auto& r : ev.records)
      rf << json{{"sequence", r.sequence},
                 {"target", r.target_index},
                 {"score", r.score},
                 {"prediction", r.prediction},
                 {"label", r.label}}
                .dump()
         << "\n";
  }

  std::cerr << "evaluated " << ev.records.size() << " predictions over " << sequences.size()
            << " sequences: auc " << ev.auc << "  acc " << ev.acc << "\n";
  emit({{"record", "evaluate"},
        {"mode", a.mode},
        {"n_predictions", ev.records.size()},
        {"auc", ev.auc},
        {"acc", ev.acc},
        {"fingerprint", cfkt::hex64(cfkt::fnv1a64_file(a.data))}});
}

// ---------------------------------------------------------------------------
// explain
// ---------------------------------------------------------------------------

struct ExplainArgs {
  std::string data;
  std::string checkpoint;
  SchemaOpts schema;
  std::string student;  // raw key; empty = use --sequence
  int sequence = 0;
  int target = -1;  // -1 = final position
  std::string mode = "approx";
  std::vector<std::string> concepts;  // raw keys to trace proficiency for
  int seq_len = 50;
  int min_len = 2;
  bool no_mono = false;
};

void run_explain(const ExplainArgs& a) {
  const cfkt::Model<float> model = cfkt::load_checkpoint_file(a.checkpoint);
  const cfkt::Dataset ds = cfkt::load_dataset_file(a.data, a.schema.schema);
  const auto sequences = cfkt::preprocess(ds.interactions, a.seq_len, a.min_len);
  if (sequences.empty()) throw cfkt::DegenerateInputError("no sequences survive preprocessing");

  int si = a.sequence;
  if (!a.student.empty()) {
    const int sid = ds.students.at(a.student);
    si = -1;
    for (std::size_t i = 0; i < sequences.size(); ++i)
      if (sequences[i].interactions.front().student_id == sid) {
        si = static_cast<int>(i);
        break;
      }
    if (si < 0)
      throw cfkt::LookupError("student " + a.student + " has no sequence after preprocessing");
  }
  if (si < 0 || si >= static_cast<int>(sequences.size()))
    throw cfkt::IndexError("sequence index " + std::to_string(si) + " outside [0, " +
                           std::to_string(sequences.size()) + ")");
  const cfkt::ResponseSequence& seq = sequences[static_cast<std::size_t>(si)];

  int tau = a.target < 0 ? seq.length() - 1 : a.target;
  if (tau < 1 || tau >= seq.length())
    throw cfkt::IndexError("target position must lie in [1, " + std::to_string(seq.length()) +
                           "), got " + std::to_string(tau));

  cfkt::ModelGenerator<float> gen(model);
  const cfkt::InfluenceOptions opts{!a.no_mono};
  const std::span<const cfkt::Interaction> history(seq.interactions.data(),
                                                   static_cast<std::size_t>(tau));
  const cfkt::TargetSpec target = cfkt::target_from(seq.interactions[static_cast<std::size_t>(tau)]);
  const cfkt::InfluenceMode imode =
      a.mode == "exact" ? cfkt::InfluenceMode::Exact : cfkt::InfluenceMode::Approximate;
  const cfkt::Explanation ex = cfkt::explain_prediction(gen, history, target, imode, opts);

  std::cerr << cfkt::influence_report_text(ex, history, &ds.questions, &ds.concepts);
  std::cout << cfkt::influence_report_json(ex, history, &ds.questions, &ds.concepts) << std::flush;

  if (!a.concepts.empty()) {
    const auto index = cfkt::concept_question_index(ds.interactions, ds.concepts.size());
    for (const std::string& key : a.concepts) {
      const int cid = ds.concepts.at(key);
      const cfkt::ProficiencyTrace trace =
          cfkt::trace_proficiency(gen, seq, cid, index, opts);
      std::cerr << "proficiency trace for concept " << key << ":\n";
      for (const auto& pt : trace.points) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "  step %3d  score %.4f", pt.step, pt.score);
        std::cerr << buf << "\n";
        emit({{"record", "proficiency"},
              {"concept", key},
              {"step", pt.step},
              {"score", pt.score},
              {"delta_plus", pt.delta_plus},
              {"delta_minus", pt.delta_minus}});
      }
    }
  }
}

// ---------------------------------------------------------------------------
// benchmark-approx
// ---------------------------------------------------------------------------

struct BenchArgs {
  std::string data;        // optional: benchmark on real sequences
  std::string checkpoint;  // optional: otherwise a freshly initialized model
  SchemaOpts schema;
  std::string encoder = "dkt";
  int dim = 128;
  int layers = 2;
  int heads = 8;
  int sequences = 100;
  int seq_len = 50;
  int concepts = 20;
  int questions = 100;
  std::uint64_t seed = 1;
  bool no_mono = false;
};

void run_benchmark(const BenchArgs& a) {
  std::vector<cfkt::ResponseSequence> seqs;
  int n_questions = a.questions, n_concepts = a.concepts;
  if (!a.data.empty()) {
    const cfkt::Dataset ds = cfkt::load_dataset_file(a.data, a.schema.schema);
    seqs = cfkt::preprocess(ds.interactions, a.seq_len, a.seq_len);  // full-length only
    n_questions = ds.questions.size();
    n_concepts = ds.concepts.size();
  } else {
    cfkt::SyntheticConfig scfg;
    scfg.n_students = a.sequences;
    scfg.n_questions = a.questions;
    scfg.n_concepts = a.concepts;
    scfg.seq_len = a.seq_len;
    scfg.seed = a.seed;
    const auto synth = cfkt::generate_synthetic(scfg);
    seqs = cfkt::preprocess(synth.interactions, a.seq_len, a.seq_len);
  }
  if (static_cast<int>(seqs.size()) > a.sequences)
    seqs.resize(static_cast<std::size_t>(a.sequences));
  if (seqs.empty())
    throw cfkt::DegenerateInputError("no full-length sequences available to benchmark");

  std::optional<cfkt::Model<float>> loaded;
  if (!a.checkpoint.empty()) {
    loaded.emplace(cfkt::load_checkpoint_file(a.checkpoint));
  } else {
    cfkt::ModelConfig mc;
    mc.backbone = encoder_to_backbone(a.encoder);
    mc.dim = a.dim;
    mc.n_layers = a.layers;
    mc.heads = a.heads;
    mc.n_questions = n_questions;
    mc.n_concepts = n_concepts;
    mc.max_len = a.seq_len;
    loaded.emplace(mc, a.seed);
  }
  const cfkt::Model<float>& model = *loaded;

  const cfkt::InfluenceOptions opts{!a.no_mono};
  const cfkt::BenchmarkResult r = cfkt::benchmark_approx(model, seqs, opts);

  char buf[240];
  std::snprintf(buf, sizeof buf,
                "%d sequences, t=%d: approx %.2f ms/target (%.0f passes), exact %.2f ms/target "
                "(%.0f passes), speedup %.1fx",
                r.n_sequences, r.history_length, r.approx_ms_per_target,
                r.approx_passes_per_target, r.exact_ms_per_target, r.exact_passes_per_target,
                r.speedup);
  std::cerr << buf << "\n";
  emit({{"record", "benchmark"},
        {"sequences", r.n_sequences},
        {"history_length", r.history_length},
        {"approx_ms_per_target", r.approx_ms_per_target},
        {"exact_ms_per_target", r.exact_ms_per_target},
        {"speedup", r.speedup},
        {"approx_passes_per_target", r.approx_passes_per_target},
        {"exact_passes_per_target", r.exact_passes_per_target}});
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"counterfactual response-influence knowledge tracing"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Config file (key=value; [subcommand] sections)");

  SynthArgs sy;
  auto* synth = app.add_subcommand("synth", "Generate a ground-truth-known response log");
  synth->add_option("--out", sy.out_dir, "Output directory");
  synth->add_option("--students", sy.cfg.n_students, "Number of students");
  synth->add_option("--questions", sy.cfg.n_questions, "Number of questions");
  synth->add_option("--concepts", sy.cfg.n_concepts, "Number of concepts");
  synth->add_option("--len", sy.cfg.seq_len, "Responses per student");
  synth->add_option("--learn-rate", sy.cfg.learn_rate, "Proficiency gain per practice");
  synth->add_option("--guess", sy.cfg.guess, "Guess floor");
  synth->add_option("--slip", sy.cfg.slip, "Slip ceiling");
  synth->add_option("--seed", sy.cfg.seed, "Random seed");
  synth->callback([&] { run_synth(sy); });

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "Train with k-fold cross validation");
  train->add_option("--data", ta.data, "Response log")->required()->check(CLI::ExistingFile);
  train->add_option("--out", ta.out_dir, "Directory to create the run directory in");
  ta.schema.attach(train);
  train->add_option("--lr", ta.lr, "Learning rate");
  train->add_option("--lambda", ta.lambda, "Weight of the generator losses");
  train->add_option("--l2", ta.l2, "Squared-parameter penalty coefficient");
  train->add_option("--dropout", ta.dropout, "Dropout inside the prediction head");
  train->add_option("--encoder-dropout", ta.encoder_dropout, "Dropout inside attention blocks");
  train->add_option("--layers", ta.layers, "Encoder layers per direction");
  train->add_option("--encoder", ta.encoder, "Backbone")
      ->check(CLI::IsMember({"dkt", "sakt", "akt", "recurrent", "attention",
                             "monotonic_attention"}));
  train->add_option("--dim", ta.dim, "Embedding/hidden width");
  train->add_option("--heads", ta.heads, "Attention heads");
  train->add_option("--alpha", ta.alpha, "Weight of the constraint penalty");
  train->add_option("--seq-len", ta.seq_len, "Maximum subsequence length");
  train->add_option("--min-len", ta.min_len, "Minimum subsequence length kept");
  train->add_option("--folds", ta.folds, "Cross-validation folds");
  train->add_option("--patience", ta.patience, "Early-stopping patience (epochs)");
  train->add_option("--epochs", ta.epochs, "Maximum epochs");
  train->add_option("--batch", ta.batch, "Sequences per batch");
  train->add_option("--mode", ta.mode, "Test-time scoring mode")
      ->check(CLI::IsMember({"approx", "exact"}));
  train->add_option("--target-mode", ta.target_mode, "Training targets per sequence")
      ->check(CLI::IsMember({"all-prefix", "final"}));
  train->add_option("--val-fraction", ta.val_fraction, "Fraction of non-test data for validation");
  train->add_option("--fold", ta.only_fold, "Run only this fold (default: all)");
  train->add_flag("--split-by-student", ta.split_by_student,
                  "Keep all of a student's sequences in one fold");
  train->add_flag("--no-joint", ta.no_joint, "Ablation: drop the generator losses");
  train->add_flag("--no-mono", ta.no_mono, "Ablation: no retention masking in counterfactuals");
  train->add_flag("--no-constraint", ta.no_constraint, "Ablation: drop the constraint penalty");
  train->add_option("--threads", ta.threads, "Worker threads (0 = CFKT_THREADS or hardware)");
  train->add_option("--seed", ta.seed, "Random seed");
  train->callback([&] { run_train(ta); });

  EvalArgs ea;
  auto* eval = app.add_subcommand("evaluate", "Score a dataset with a trained checkpoint");
  eval->add_option("--data", ea.data, "Response log")->required()->check(CLI::ExistingFile);
  eval->add_option("--checkpoint", ea.checkpoint, "Model checkpoint")
      ->required()
      ->check(CLI::ExistingFile);
  ea.schema.attach(eval);
  eval->add_option("--mode", ea.mode, "Scoring mode")->check(CLI::IsMember({"approx", "exact"}));
  eval->add_option("--records-out", ea.records_out, "Write per-prediction records here");
  eval->add_option("--seq-len", ea.seq_len, "Maximum subsequence length");
  eval->add_option("--min-len", ea.min_len, "Minimum subsequence length kept");
  eval->add_flag("--no-mono", ea.no_mono, "No retention masking in counterfactuals");
  eval->add_option("--threads", ea.threads, "Worker threads");
  eval->callback([&] { run_evaluate(ea); });

  ExplainArgs xa;
  auto* explain = app.add_subcommand("explain", "Attribute one prediction to the history");
  explain->add_option("--data", xa.data, "Response log")->required()->check(CLI::ExistingFile);
  explain->add_option("--checkpoint", xa.checkpoint, "Model checkpoint")
      ->required()
      ->check(CLI::ExistingFile);
  xa.schema.attach(explain);
  explain->add_option("--student", xa.student, "Student raw key (first sequence is used)");
  explain->add_option("--sequence", xa.sequence, "Sequence index (alternative to --student)");
  explain->add_option("--target", xa.target, "Target position (default: final)");
  explain->add_option("--mode", xa.mode, "Influence mode")
      ->check(CLI::IsMember({"approx", "exact"}));
  explain->add_option("--concept", xa.concepts, "Concept raw key to trace proficiency for")
      ->take_all();
  explain->add_option("--seq-len", xa.seq_len, "Maximum subsequence length");
  explain->add_option("--min-len", xa.min_len, "Minimum subsequence length kept");
  explain->add_flag("--no-mono", xa.no_mono, "No retention masking in counterfactuals");
  explain->callback([&] { run_explain(xa); });

  BenchArgs ba;
  auto* bench = app.add_subcommand(
      "benchmark-approx", "Time approximate vs exact influence computation");
  bench->add_option("--data", ba.data, "Response log (default: synthetic)")
      ->check(CLI::ExistingFile);
  bench->add_option("--checkpoint", ba.checkpoint, "Model checkpoint (default: fresh model)")
      ->check(CLI::ExistingFile);
  ba.schema.attach(bench);
  bench->add_option("--encoder", ba.encoder, "Backbone for the fresh model")
      ->check(CLI::IsMember({"dkt", "sakt", "akt", "recurrent", "attention",
                             "monotonic_attention"}));
  bench->add_option("--dim", ba.dim, "Width of the fresh model");
  bench->add_option("--layers", ba.layers, "Layers of the fresh model");
  bench->add_option("--heads", ba.heads, "Attention heads of the fresh model");
  bench->add_option("--sequences", ba.sequences, "Sequences to score");
  bench->add_option("--seq-len", ba.seq_len, "Sequence length");
  bench->add_option("--concepts", ba.concepts, "Concepts in the synthetic log");
  bench->add_option("--questions", ba.questions, "Questions in the synthetic log");
  bench->add_option("--seed", ba.seed, "Random seed");
  bench->add_flag("--no-mono", ba.no_mono, "No retention masking in counterfactuals");
  bench->callback([&] { run_benchmark(ba); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const cfkt::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
