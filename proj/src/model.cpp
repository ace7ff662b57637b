#include "emochain/model.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "emochain/io_util.hpp"
#include "emochain/rng.hpp"

namespace emochain {

namespace {

constexpr char kMagic[4] = {'E', 'C', 'M', '1'};

std::string lower(std::string s) {
  for (char& c : s) c = char(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

void xavier_fill(Matrix& m, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double r = std::sqrt(6.0 / double(fan_in + fan_out));
  for (double& x : m.data) x = rng.uniform(-r, r);
}

void xavier_fill(Vector& v, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double r = std::sqrt(6.0 / double(fan_in + fan_out));
  for (double& x : v) x = rng.uniform(-r, r);
}

}  // namespace

EmotionSet EmotionSet::canonical() {
  return EmotionSet{{"amusement", "awe", "awkwardness", "distress", "excitement",
                     "fear", "horror", "sadness", "surprise", "triumph"}};
}

std::size_t EmotionSet::index_of(const std::string& name) const {
  const std::string target = lower(name);
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (lower(names[i]) == target) return i;
  }
  throw std::invalid_argument("unknown emotion name '" + name + "'");
}

ChainOrder ChainOrder::identity(std::size_t c) {
  ChainOrder o;
  o.order.resize(c);
  std::iota(o.order.begin(), o.order.end(), std::size_t{0});
  return o;
}

bool ChainOrder::is_permutation(std::size_t c) const {
  if (order.size() != c) return false;
  std::vector<bool> seen(c, false);
  for (std::size_t e : order) {
    if (e >= c || seen[e]) return false;
    seen[e] = true;
  }
  return true;
}

EmotionChainModel init_model(std::size_t feature_dim, std::size_t embed_dim,
                             std::size_t attention_dim, EmotionSet emotions,
                             ChainOrder chain_order, std::uint64_t seed) {
  if (feature_dim == 0 || embed_dim == 0 || attention_dim == 0) {
    throw std::invalid_argument("init_model: dimensions must be positive");
  }
  const std::size_t c = emotions.size();
  if (c == 0) {
    throw std::invalid_argument("init_model: empty emotion set");
  }
  if (!chain_order.is_permutation(c)) {
    throw std::invalid_argument("init_model: chain order is not a permutation");
  }

  EmotionChainModel m;
  m.emotions = std::move(emotions);
  m.chain_order = std::move(chain_order);

  // One sub-stream per parameter block keeps draws independent of block sizes.
  std::uint64_t block = 0;
  Rng r0(mix_seed(seed, block++));
  m.front_end.w = Matrix(embed_dim, feature_dim);
  xavier_fill(m.front_end.w, feature_dim, embed_dim, r0);
  m.front_end.b.assign(embed_dim, 0.0);

  Rng r1(mix_seed(seed, block++));
  m.pooling.w = Matrix(attention_dim, embed_dim);
  xavier_fill(m.pooling.w, embed_dim, attention_dim, r1);
  m.pooling.b.assign(attention_dim, 0.0);
  Rng r2(mix_seed(seed, block++));
  m.pooling.v.assign(attention_dim, 0.0);
  xavier_fill(m.pooling.v, attention_dim, 1, r2);

  m.predictors.resize(c);
  for (std::size_t i = 0; i < c; ++i) {
    Rng rp(mix_seed(seed, block++));
    const std::size_t width = embed_dim + i;
    m.predictors[i].w = Matrix(1, width);
    xavier_fill(m.predictors[i].w, width, 1, rp);
    m.predictors[i].b.assign(1, 0.0);
  }
  return m;
}

FeatureEmbedding embed(const EmotionChainModel& model, const FeatureSequence& features) {
  if (features.frames == 0) {
    throw std::invalid_argument("embed: empty sequence after VAD trim");
  }
  if (features.dim != model.feature_dim()) {
    throw std::invalid_argument("embed: feature dim mismatch");
  }
  const std::size_t t_count = features.frames;
  std::vector<Vector> h(t_count);
  Vector scores(t_count);
  Vector x(features.dim);
  for (std::size_t t = 0; t < t_count; ++t) {
    auto fr = features.frame(t);
    x.assign(fr.begin(), fr.end());
    h[t] = tanh_elem(linear(x, model.front_end.w, model.front_end.b));
    const Vector u = tanh_elem(linear(h[t], model.pooling.w, model.pooling.b));
    double e = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) e += model.pooling.v[i] * u[i];
    scores[t] = e;
  }
  const Vector alpha = softmax(scores);
  FeatureEmbedding z(model.embed_dim(), 0.0);
  for (std::size_t t = 0; t < t_count; ++t) {
    for (std::size_t i = 0; i < z.size(); ++i) z[i] += alpha[t] * h[t][i];
  }
  return z;
}

EmotionScores predict_chain(const EmotionChainModel& model, const FeatureEmbedding& z,
                            const std::optional<EmotionScores>& teacher) {
  const std::size_t c = model.emotion_count();
  if (z.size() != model.embed_dim()) {
    throw std::invalid_argument("predict_chain: embedding width mismatch");
  }
  if (teacher) {
    if (teacher->size() != c) {
      throw std::invalid_argument("predict_chain: teacher score count mismatch");
    }
    for (double y : *teacher) {
      if (!(y >= 0.0 && y <= 1.0)) {
        throw std::invalid_argument("predict_chain: teacher scores must lie in [0,1]");
      }
    }
  }

  Vector chain_inputs;  // scores fed forward, in chain-position order
  EmotionScores out(c, 0.0);
  Vector input;
  for (std::size_t pos = 0; pos < c; ++pos) {
    const std::size_t emotion = model.chain_order.order[pos];
    input.assign(z.begin(), z.end());
    input.insert(input.end(), chain_inputs.begin(), chain_inputs.end());
    const Vector logit = linear(input, model.predictors[pos].w, model.predictors[pos].b);
    const double score = sigmoid(logit[0]);
    out[emotion] = score;
    chain_inputs.push_back(teacher ? (*teacher)[emotion] : score);
  }
  return out;
}

EmotionScores infer(const EmotionChainModel& model, const FeatureSequence& features) {
  return predict_chain(model, embed(model, features));
}

ChainOrder compute_chain_order(const Vector& base_ccc) {
  if (!all_finite(base_ccc)) {
    throw std::invalid_argument("compute_chain_order: non-finite CCC value");
  }
  ChainOrder o = ChainOrder::identity(base_ccc.size());
  std::stable_sort(o.order.begin(), o.order.end(),
                   [&](std::size_t a, std::size_t b) { return base_ccc[a] > base_ccc[b]; });
  return o;
}

// ---------------------------------------------------------------------------
// tape forward

ForwardGraph build_forward(GradTape& tape, const EmotionChainModel& model,
                           const FeatureSequence& features,
                           const std::optional<EmotionScores>& teacher) {
  if (features.frames == 0) {
    throw std::invalid_argument("embed: empty sequence after VAD trim");
  }
  if (features.dim != model.feature_dim()) {
    throw std::invalid_argument("build_forward: feature dim mismatch");
  }
  const std::size_t c = model.emotion_count();
  if (teacher) {
    if (teacher->size() != c) {
      throw std::invalid_argument("build_forward: teacher score count mismatch");
    }
    for (double y : *teacher) {
      if (!(y >= 0.0 && y <= 1.0)) {
        throw std::invalid_argument("predict_chain: teacher scores must lie in [0,1]");
      }
    }
  }

  ForwardGraph g;
  g.front_w = tape.matrix(model.front_end.w);
  g.front_b = tape.variable(model.front_end.b);
  g.pool_w = tape.matrix(model.pooling.w);
  g.pool_b = tape.variable(model.pooling.b);
  g.pool_v = tape.variable(model.pooling.v);
  for (std::size_t i = 0; i < c; ++i) {
    g.predictors.emplace_back(tape.matrix(model.predictors[i].w),
                              tape.variable(model.predictors[i].b));
  }

  const std::size_t t_count = features.frames;
  std::vector<GradTape::NodeId> h(t_count);
  std::vector<GradTape::NodeId> e(t_count);
  for (std::size_t t = 0; t < t_count; ++t) {
    auto fr = features.frame(t);
    GradTape::NodeId x = tape.constant(Vector(fr.begin(), fr.end()));
    h[t] = tape.tanh_elem(tape.linear(g.front_w, g.front_b, x));
    GradTape::NodeId u = tape.tanh_elem(tape.linear(g.pool_w, g.pool_b, h[t]));
    e[t] = tape.dot(g.pool_v, u);
  }
  GradTape::NodeId alpha = tape.softmax(tape.concat(e));
  GradTape::NodeId z = tape.weighted_sum(alpha, h);

  std::vector<GradTape::NodeId> chain_inputs;
  std::vector<GradTape::NodeId> by_emotion(c);
  for (std::size_t pos = 0; pos < c; ++pos) {
    const std::size_t emotion = model.chain_order.order[pos];
    std::vector<GradTape::NodeId> parts{z};
    parts.insert(parts.end(), chain_inputs.begin(), chain_inputs.end());
    GradTape::NodeId input = tape.concat(parts);
    GradTape::NodeId score =
        tape.sigmoid(tape.linear(g.predictors[pos].first, g.predictors[pos].second, input));
    by_emotion[emotion] = score;
    if (teacher) {
      chain_inputs.push_back(tape.constant(Vector{(*teacher)[emotion]}));
    } else {
      chain_inputs.push_back(score);
    }
  }
  g.scores = tape.concat(by_emotion);
  return g;
}

namespace {

void add_mat(std::span<double> flat, std::size_t& off, const Matrix& m) {
  for (std::size_t i = 0; i < m.data.size(); ++i) flat[off + i] += m.data[i];
  off += m.data.size();
}

void add_vec(std::span<double> flat, std::size_t& off, const Vector& v) {
  for (std::size_t i = 0; i < v.size(); ++i) flat[off + i] += v[i];
  off += v.size();
}

}  // namespace

void accumulate_param_gradients(const GradTape& tape, const ForwardGraph& graph,
                                std::span<double> flat) {
  std::size_t off = 0;
  add_mat(flat, off, tape.gradient(graph.front_w));
  add_vec(flat, off, tape.gradient(graph.front_b));
  add_mat(flat, off, tape.gradient(graph.pool_w));
  add_vec(flat, off, tape.gradient(graph.pool_b));
  add_vec(flat, off, tape.gradient(graph.pool_v));
  for (const auto& [w, b] : graph.predictors) {
    add_mat(flat, off, tape.gradient(w));
    add_vec(flat, off, tape.gradient(b));
  }
  if (off != flat.size()) {
    throw std::logic_error("accumulate_param_gradients: layout mismatch");
  }
}

// ---------------------------------------------------------------------------
// flat parameter view

namespace {

template <class ModelT, class FnMat, class FnVec>
void for_each_param(ModelT& m, FnMat&& fm, FnVec&& fv) {
  fm(m.front_end.w, "front_end.w");
  fv(m.front_end.b, "front_end.b");
  fm(m.pooling.w, "pooling.w");
  fv(m.pooling.b, "pooling.b");
  fv(m.pooling.v, "pooling.v");
  for (std::size_t i = 0; i < m.predictors.size(); ++i) {
    const std::string tag = "predictor[" + std::to_string(i) + "]";
    fm(m.predictors[i].w, (tag + ".w").c_str());
    fv(m.predictors[i].b, (tag + ".b").c_str());
  }
}

}  // namespace

std::size_t param_count(const EmotionChainModel& model) {
  std::size_t n = 0;
  for_each_param(
      model, [&](const Matrix& m, const char*) { n += m.data.size(); },
      [&](const Vector& v, const char*) { n += v.size(); });
  return n;
}

std::size_t frontend_param_count(const EmotionChainModel& model) {
  return model.front_end.w.data.size() + model.front_end.b.size();
}

std::vector<double> flatten_params(const EmotionChainModel& model) {
  std::vector<double> flat;
  flat.reserve(param_count(model));
  for_each_param(
      model,
      [&](const Matrix& m, const char*) {
        flat.insert(flat.end(), m.data.begin(), m.data.end());
      },
      [&](const Vector& v, const char*) { flat.insert(flat.end(), v.begin(), v.end()); });
  return flat;
}

void set_params(EmotionChainModel& model, std::span<const double> flat) {
  if (flat.size() != param_count(model)) {
    throw std::invalid_argument("set_params: size mismatch");
  }
  std::size_t off = 0;
  for_each_param(
      model,
      [&](Matrix& m, const char*) {
        std::copy(flat.begin() + off, flat.begin() + off + m.data.size(), m.data.begin());
        off += m.data.size();
      },
      [&](Vector& v, const char*) {
        std::copy(flat.begin() + off, flat.begin() + off + v.size(), v.begin());
        off += v.size();
      });
}

std::string param_name_at(const EmotionChainModel& model, std::size_t flat_index) {
  std::size_t off = 0;
  std::string found = "<out of range>";
  bool done = false;
  for_each_param(
      model,
      [&](const Matrix& m, const char* name) {
        if (!done && flat_index < off + m.data.size()) {
          found = name;
          done = true;
        }
        off += m.data.size();
      },
      [&](const Vector& v, const char* name) {
        if (!done && flat_index < off + v.size()) {
          found = name;
          done = true;
        }
        off += v.size();
      });
  return found;
}

// ---------------------------------------------------------------------------
// serialization

namespace {

void write_block(std::ostream& os, const Matrix& m) {
  io::write_u32(os, std::uint32_t(m.rows));
  io::write_u32(os, std::uint32_t(m.cols));
  for (double x : m.data) io::write_f64(os, x);
}

void write_block(std::ostream& os, const Vector& v) {
  io::write_u32(os, std::uint32_t(v.size()));
  io::write_u32(os, 1);
  for (double x : v) io::write_f64(os, x);
}

Matrix read_mat_block(std::istream& is, std::size_t rows, std::size_t cols,
                      const char* what) {
  const std::uint32_t r = io::read_u32(is);
  const std::uint32_t c = io::read_u32(is);
  if (r != rows || c != cols) {
    throw std::runtime_error(std::string("model file shape mismatch in ") + what);
  }
  Matrix m(rows, cols);
  for (double& x : m.data) x = io::read_f64(is);
  return m;
}

Vector read_vec_block(std::istream& is, std::size_t len, const char* what) {
  const Matrix m = read_mat_block(is, len, 1, what);
  return m.data;
}

}  // namespace

std::string serialize_model(const EmotionChainModel& model) {
  std::ostringstream os(std::ios::binary);
  os.write(kMagic, 4);
  io::write_u32(os, std::uint32_t(model.emotion_count()));
  io::write_u32(os, std::uint32_t(model.feature_dim()));
  io::write_u32(os, std::uint32_t(model.embed_dim()));
  io::write_u32(os, std::uint32_t(model.attention_dim()));
  for (std::size_t e : model.chain_order.order) io::write_u32(os, std::uint32_t(e));
  write_block(os, model.front_end.w);
  write_block(os, model.front_end.b);
  write_block(os, model.pooling.w);
  write_block(os, model.pooling.b);
  write_block(os, model.pooling.v);
  for (const ChainPredictor& p : model.predictors) {
    write_block(os, p.w);
    write_block(os, p.b);
  }
  return os.str();
}

EmotionChainModel deserialize_model(const std::string& bytes) {
  std::istringstream is(bytes, std::ios::binary);
  char magic[4];
  io::read_exact(is, magic, 4);
  if (magic[0] != 'E' || magic[1] != 'C' || magic[2] != 'M') {
    throw std::runtime_error("not a model file");
  }
  if (magic[3] != '1') {
    throw std::runtime_error("model file version mismatch");
  }
  const std::uint32_t c = io::read_u32(is);
  const std::uint32_t d = io::read_u32(is);
  const std::uint32_t h = io::read_u32(is);
  const std::uint32_t a = io::read_u32(is);
  if (c == 0 || d == 0 || h == 0 || a == 0) {
    throw std::runtime_error("model file has degenerate dimensions");
  }

  EmotionChainModel m;
  if (c == EmotionSet::canonical().size()) {
    m.emotions = EmotionSet::canonical();
  } else {
    for (std::uint32_t i = 0; i < c; ++i) {
      m.emotions.names.push_back("e" + std::to_string(i));
    }
  }
  m.chain_order.order.resize(c);
  for (std::uint32_t i = 0; i < c; ++i) m.chain_order.order[i] = io::read_u32(is);
  if (!m.chain_order.is_permutation(c)) {
    throw std::runtime_error("model file chain order is not a permutation");
  }
  m.front_end.w = read_mat_block(is, h, d, "front_end.w");
  m.front_end.b = read_vec_block(is, h, "front_end.b");
  m.pooling.w = read_mat_block(is, a, h, "pooling.w");
  m.pooling.b = read_vec_block(is, a, "pooling.b");
  m.pooling.v = read_vec_block(is, a, "pooling.v");
  m.predictors.resize(c);
  for (std::uint32_t i = 0; i < c; ++i) {
    m.predictors[i].w = read_mat_block(is, 1, h + i, "predictor.w");
    m.predictors[i].b = read_vec_block(is, 1, "predictor.b");
  }
  return m;
}

void save_model(const std::filesystem::path& path, const EmotionChainModel& model) {
  const std::string bytes = serialize_model(model);
  io::atomic_write(path, [&](std::ostream& os) { os.write(bytes.data(), std::streamsize(bytes.size())); });
}

EmotionChainModel load_model(const std::filesystem::path& path) {
  return deserialize_model(io::read_file(path));
}

}  // namespace emochain
