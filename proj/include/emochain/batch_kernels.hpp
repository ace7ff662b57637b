#pragma once

#include <optional>
#include <span>
#include <vector>

#include "emochain/model.hpp"

namespace emochain {

// Samples within a batch are independent, so the hot loops parallelize over
// them. Results are bit-identical between the two paths: per-sample buffers
// are reduced in sample order, never in thread arrival order.
enum class Exec {
  serial,    // reference implementation, plain loops
  parallel,  // OpenMP over samples
};

// Teacher-forced forward over a batch; keeps one tape per sample so a loss
// gradient can be pushed back through every sample afterwards.
class TeacherForwardBatch {
 public:
  TeacherForwardBatch(const EmotionChainModel& model,
                      std::span<const FeatureSequence> features, const Matrix& targets,
                      Exec exec);

  const Matrix& predictions() const { return predictions_; }

  // dloss_dpred has one row per sample; returns the flat parameter gradient
  // summed over the batch (flatten_params layout).
  std::vector<double> backward(const Matrix& dloss_dpred);

 private:
  const EmotionChainModel& model_;
  Exec exec_;
  std::vector<GradTape> tapes_;
  std::vector<ForwardGraph> graphs_;
  Matrix predictions_;
};

// Autoregressive inference over a set of sequences; row i holds sample i's
// canonical-order scores.
Matrix batch_infer(const EmotionChainModel& model, std::span<const FeatureSequence> features,
                   Exec exec);

}  // namespace emochain
