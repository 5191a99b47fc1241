#include "cfkt/model.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

namespace cfkt {

const char* backbone_name(Backbone b) {
  switch (b) {
    case Backbone::Recurrent: return "recurrent";
    case Backbone::Attention: return "attention";
    case Backbone::MonotonicAttention: return "monotonic_attention";
  }
  return "?";
}

Backbone backbone_from_name(const std::string& name) {
  if (name == "recurrent") return Backbone::Recurrent;
  if (name == "attention") return Backbone::Attention;
  if (name == "monotonic_attention") return Backbone::MonotonicAttention;
  throw ConfigError("unknown backbone: " + name);
}

void ModelConfig::validate() const {
  if (dim < 1) throw ConfigError("model dim must be positive");
  if (n_layers < 1) throw ConfigError("n_layers must be positive");
  if (n_questions < 1 || n_concepts < 1)
    throw ConfigError("model needs non-empty question and concept vocabularies");
  if (max_len < 1) throw ConfigError("max_len must be positive");
  if (dropout < 0 || dropout >= 1 || encoder_dropout < 0 || encoder_dropout >= 1)
    throw ConfigError("dropout rates must lie in [0, 1)");
  if (is_attention()) {
    if (heads < 1) throw ConfigError("attention needs at least one head");
    if (dim % heads != 0) throw ConfigError("model dim must be divisible by the head count");
  }
}

ViewBatch make_batch(std::span<const SequenceView> views, int n_questions, int n_concepts,
                     bool require_equal_lengths) {
  if (views.empty()) throw DegenerateInputError("make_batch: no views");
  ViewBatch b;
  b.n = static_cast<int>(views.size());
  for (const auto& v : views) {
    if (v.length() == 0) throw DegenerateInputError("make_batch: empty view");
    b.T = std::max(b.T, v.length());
  }
  if (require_equal_lengths)
    for (const auto& v : views)
      if (v.length() != b.T)
        throw ShapeError("batch_predict requires equal-length views; got " +
                         std::to_string(v.length()) + " vs " + std::to_string(b.T));

  const int pad_q = n_questions;  // sentinel rows appended after the real vocab
  b.len.resize(views.size());
  b.target_index.resize(views.size());
  b.qid.resize(views.size());
  b.csets.resize(views.size());
  b.cat.resize(views.size());
  b.vt.resize(views.size());
  for (std::size_t v = 0; v < views.size(); ++v) {
    const SequenceView& view = views[v];
    b.len[v] = view.length();
    b.target_index[v] = view.target_index;
    b.vt[v] = view.virtual_target;
    if (view.virtual_target) {
      if (!view.has_target())
        throw ConfigError("a virtual target requires a target slot");
      if (view.virtual_target->question_ids.empty())
        throw DegenerateInputError("virtual target with no questions");
      if (view.virtual_target->concept_id < 0 || view.virtual_target->concept_id >= n_concepts)
        throw IndexError("virtual target concept outside vocabulary");
    }
    b.qid[v].assign(static_cast<std::size_t>(b.T), pad_q);
    b.csets[v].resize(static_cast<std::size_t>(b.T));
    b.cat[v].assign(static_cast<std::size_t>(b.T), static_cast<int>(Category::Masked));
    for (int t = 0; t < view.length(); ++t) {
      const ViewPosition& p = view.positions[static_cast<std::size_t>(t)];
      b.qid[v][static_cast<std::size_t>(t)] = p.question_id;
      b.csets[v][static_cast<std::size_t>(t)] = p.concept_ids;
      b.cat[v][static_cast<std::size_t>(t)] = static_cast<int>(p.category);
    }
  }
  return b;
}

// ---------------------------------------------------------------------------
// Checkpoint format: a text preamble (magic line, key=value config lines, a
// "%%" terminator) followed by binary named tensors, each
//   u32 name_len | name | u32 rows | u32 cols | 'f' | rows*cols float32
// in row-major order.
// ---------------------------------------------------------------------------

namespace {

void put_u32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint32_t get_u32(std::istream& in) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!in) throw DataError("checkpoint truncated");
  return v;
}

}  // namespace

void save_checkpoint(std::ostream& out, const Model<float>& model) {
  const ModelConfig& c = model.cfg;
  out << kCheckpointMagic << '\n';
  out << "backbone=" << backbone_name(c.backbone) << '\n';
  out << "dim=" << c.dim << '\n';
  out << "n_layers=" << c.n_layers << '\n';
  out << "heads=" << c.heads << '\n';
  out << "n_questions=" << c.n_questions << '\n';
  out << "n_concepts=" << c.n_concepts << '\n';
  out << "max_len=" << c.max_len << '\n';
  out << "dropout=" << c.dropout << '\n';
  out << "encoder_dropout=" << c.encoder_dropout << '\n';
  out << "%%\n";
  put_u32(out, static_cast<std::uint32_t>(model.params.entries.size()));
  for (const auto& e : model.params.entries) {
    put_u32(out, static_cast<std::uint32_t>(e.name.size()));
    out.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
    put_u32(out, static_cast<std::uint32_t>(e.value.rows()));
    put_u32(out, static_cast<std::uint32_t>(e.value.cols()));
    out.put('f');
    for (Eigen::Index i = 0; i < e.value.rows(); ++i)
      for (Eigen::Index j = 0; j < e.value.cols(); ++j) {
        const float x = e.value(i, j);
        out.write(reinterpret_cast<const char*>(&x), sizeof(x));
      }
  }
  if (!out) throw DataError("checkpoint write failed");
}

void save_checkpoint_file(const std::string& path, const Model<float>& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open checkpoint for writing: " + path);
  save_checkpoint(out, model);
}

Model<float> load_checkpoint(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kCheckpointMagic)
    throw DataError("not a recognized checkpoint (bad magic line)");

  ModelConfig c;
  while (std::getline(in, line)) {
    if (line == "%%") break;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw DataError("malformed checkpoint config line: " + line);
    const std::string key = line.substr(0, eq), val = line.substr(eq + 1);
    if (key == "backbone") c.backbone = backbone_from_name(val);
    else if (key == "dim") c.dim = std::stoi(val);
    else if (key == "n_layers") c.n_layers = std::stoi(val);
    else if (key == "heads") c.heads = std::stoi(val);
    else if (key == "n_questions") c.n_questions = std::stoi(val);
    else if (key == "n_concepts") c.n_concepts = std::stoi(val);
    else if (key == "max_len") c.max_len = std::stoi(val);
    else if (key == "dropout") c.dropout = std::stof(val);
    else if (key == "encoder_dropout") c.encoder_dropout = std::stof(val);
    else throw DataError("unknown checkpoint config key: " + key);
  }

  Model<float> model(c, /*seed=*/0);
  const std::uint32_t n = get_u32(in);
  if (n != model.params.entries.size())
    throw DataError("checkpoint holds " + std::to_string(n) + " tensors, model expects " +
                    std::to_string(model.params.entries.size()));
  for (std::uint32_t i = 0; i < n; ++i) {
    const std::uint32_t name_len = get_u32(in);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    const std::uint32_t rows = get_u32(in), cols = get_u32(in);
    const int dtype = in.get();
    if (dtype != 'f') throw DataError("unsupported tensor dtype in checkpoint");
    auto& e = model.params.at(name);
    if (e.value.rows() != static_cast<Eigen::Index>(rows) ||
        e.value.cols() != static_cast<Eigen::Index>(cols))
      throw ShapeError("checkpoint tensor " + name + " has shape " + std::to_string(rows) + "x" +
                       std::to_string(cols) + ", expected " + std::to_string(e.value.rows()) +
                       "x" + std::to_string(e.value.cols()));
    for (std::uint32_t r = 0; r < rows; ++r)
      for (std::uint32_t cc = 0; cc < cols; ++cc) {
        float x = 0;
        in.read(reinterpret_cast<char*>(&x), sizeof(x));
        e.value(r, cc) = x;
      }
    if (!in) throw DataError("checkpoint truncated inside tensor " + name);
  }
  return model;
}

Model<float> load_checkpoint_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path);
  return load_checkpoint(in);
}

}  // namespace cfkt
