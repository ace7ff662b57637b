#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "emochain/numerics.hpp"

namespace emochain {

// Scores live in [0, 1], one per emotion, in canonical order.
using EmotionScores = Vector;
using FeatureEmbedding = Vector;

struct EmotionSet {
  std::vector<std::string> names;

  static EmotionSet canonical();  // the fixed 10-emotion set
  std::size_t size() const { return names.size(); }
  // Index of a name (case-insensitive); throws if absent.
  std::size_t index_of(const std::string& name) const;
};

// order[pos] = canonical emotion index predicted at chain position pos.
struct ChainOrder {
  std::vector<std::size_t> order;

  static ChainOrder identity(std::size_t c);
  bool is_permutation(std::size_t c) const;
};

// Trainable per-frame front end standing in for the upstream feature
// extractor; one tanh-activated linear layer.
struct FrontEnd {
  Matrix w;  // H x D
  Vector b;  // H
};

// Additive attention over time: e_t = v . tanh(W h_t + b), weights softmax(e).
struct AttentivePooling {
  Matrix w;  // A x H
  Vector b;  // A
  Vector v;  // A
};

// Predictor at chain position i consumes the embedding plus the i previously
// produced scores, so its input width is H + i.
struct ChainPredictor {
  Matrix w;  // 1 x (H + i)
  Vector b;  // 1
};

struct EmotionChainModel {
  EmotionSet emotions;
  ChainOrder chain_order;
  FrontEnd front_end;
  AttentivePooling pooling;
  std::vector<ChainPredictor> predictors;

  std::size_t feature_dim() const { return front_end.w.cols; }
  std::size_t embed_dim() const { return front_end.w.rows; }
  std::size_t attention_dim() const { return pooling.w.rows; }
  std::size_t emotion_count() const { return emotions.size(); }
};

// Per-frame feature sequence, T x D row-major.
struct FeatureSequence {
  std::size_t frames = 0;
  std::size_t dim = 0;
  std::vector<double> values;

  FeatureSequence() = default;
  FeatureSequence(std::size_t t, std::size_t d)
      : frames(t), dim(d), values(t * d, 0.0) {}
  std::span<const double> frame(std::size_t t) const {
    return {values.data() + t * dim, dim};
  }
  double& at(std::size_t t, std::size_t d) { return values[t * dim + d]; }
  double at(std::size_t t, std::size_t d) const { return values[t * dim + d]; }
  bool operator==(const FeatureSequence&) const = default;
};

// Xavier-uniform weights (bound sqrt(6/(fan_in+fan_out))), zero biases,
// deterministic for a given seed.
EmotionChainModel init_model(std::size_t feature_dim, std::size_t embed_dim,
                             std::size_t attention_dim, EmotionSet emotions,
                             ChainOrder chain_order, std::uint64_t seed);

// Attentive pooling of a feature sequence to a fixed-length embedding.
FeatureEmbedding embed(const EmotionChainModel& model, const FeatureSequence& features);

// Runs the chain over an embedding. With `teacher`, step i consumes the
// ground-truth scores at earlier chain positions; otherwise it consumes its
// own previous outputs. Output is in canonical emotion order.
EmotionScores predict_chain(const EmotionChainModel& model, const FeatureEmbedding& z,
                            const std::optional<EmotionScores>& teacher = std::nullopt);

// embed + autoregressive predict_chain
EmotionScores infer(const EmotionChainModel& model, const FeatureSequence& features);

// Indices sorted by base CCC descending; ties keep canonical order.
ChainOrder compute_chain_order(const Vector& base_ccc);

// --- tape-building forward pass (training path) ---

struct ForwardGraph {
  GradTape::NodeId scores;  // C-dim node, canonical order
  GradTape::MatId front_w;
  GradTape::NodeId front_b;
  GradTape::MatId pool_w;
  GradTape::NodeId pool_b;
  GradTape::NodeId pool_v;
  std::vector<std::pair<GradTape::MatId, GradTape::NodeId>> predictors;
};

ForwardGraph build_forward(GradTape& tape, const EmotionChainModel& model,
                           const FeatureSequence& features,
                           const std::optional<EmotionScores>& teacher);

// Adds this tape's parameter gradients into a flat buffer laid out like
// flatten_params.
void accumulate_param_gradients(const GradTape& tape, const ForwardGraph& graph,
                                std::span<double> flat);

// --- flat parameter view (fixed declaration order: front_end.w, front_end.b,
//     pooling.w, pooling.b, pooling.v, then predictor w/b pairs) ---

std::size_t param_count(const EmotionChainModel& model);
std::size_t frontend_param_count(const EmotionChainModel& model);
std::vector<double> flatten_params(const EmotionChainModel& model);
void set_params(EmotionChainModel& model, std::span<const double> flat);
std::string param_name_at(const EmotionChainModel& model, std::size_t flat_index);

// --- serialization ---
// Magic "ECM1", then little-endian u32 {C, D, H, A}, the chain order as C
// u32 values, then parameter blocks in declaration order, each u32 rows,
// u32 cols, row-major little-endian f64.

std::string serialize_model(const EmotionChainModel& model);
EmotionChainModel deserialize_model(const std::string& bytes);
void save_model(const std::filesystem::path& path, const EmotionChainModel& model);
EmotionChainModel load_model(const std::filesystem::path& path);

}  // namespace emochain
