#include "emochain/batch_kernels.hpp"

#include <exception>
#include <stdexcept>

namespace emochain {

namespace {

// Runs fn(i) for i in [0, n), serially or under OpenMP. The first exception
// thrown by any iteration is rethrown after the loop completes.
template <class Fn>
void for_each_index(std::size_t n, Exec exec, Fn&& fn) {
  if (exec == Exec::serial) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::exception_ptr error;
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
  for (long long i = 0; i < (long long)n; ++i) {
    try {
      fn(std::size_t(i));
    } catch (...) {
#ifdef _OPENMP
#pragma omp critical
#endif
      {
        if (!error) error = std::current_exception();
      }
    }
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace

TeacherForwardBatch::TeacherForwardBatch(const EmotionChainModel& model,
                                         std::span<const FeatureSequence> features,
                                         const Matrix& targets, Exec exec)
    : model_(model), exec_(exec) {
  const std::size_t b = features.size();
  const std::size_t c = model.emotion_count();
  if (targets.rows != b || targets.cols != c) {
    throw std::invalid_argument("TeacherForwardBatch: target shape mismatch");
  }
  tapes_.resize(b);
  graphs_.resize(b);
  predictions_ = Matrix(b, c);

  for_each_index(b, exec, [&](std::size_t i) {
    EmotionScores teacher(targets.row(i).begin(), targets.row(i).end());
    graphs_[i] = build_forward(tapes_[i], model_, features[i], teacher);
    const Vector& scores = tapes_[i].value(graphs_[i].scores);
    for (std::size_t e = 0; e < c; ++e) predictions_.at(i, e) = scores[e];
  });
}

std::vector<double> TeacherForwardBatch::backward(const Matrix& dloss_dpred) {
  const std::size_t b = tapes_.size();
  if (dloss_dpred.rows != b || dloss_dpred.cols != model_.emotion_count()) {
    throw std::invalid_argument("TeacherForwardBatch::backward: gradient shape mismatch");
  }
  const std::size_t p = param_count(model_);

  // Per-sample gradients land in their own buffers; the reduction below runs
  // in sample order so the result does not depend on thread count.
  std::vector<std::vector<double>> per_sample(b);
  for_each_index(b, exec_, [&](std::size_t i) {
    tapes_[i].add_output_gradient(graphs_[i].scores, dloss_dpred.row(i));
    tapes_[i].backward();
    per_sample[i].assign(p, 0.0);
    accumulate_param_gradients(tapes_[i], graphs_[i], per_sample[i]);
  });

  std::vector<double> total(p, 0.0);
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t j = 0; j < p; ++j) total[j] += per_sample[i][j];
  }
  return total;
}

Matrix batch_infer(const EmotionChainModel& model, std::span<const FeatureSequence> features,
                   Exec exec) {
  const std::size_t n = features.size();
  const std::size_t c = model.emotion_count();
  Matrix out(n, c);
  for_each_index(n, exec, [&](std::size_t i) {
    const EmotionScores scores = infer(model, features[i]);
    for (std::size_t e = 0; e < c; ++e) out.at(i, e) = scores[e];
  });
  return out;
}

}  // namespace emochain
