#pragma once

#include <span>

#include "emochain/numerics.hpp"

namespace emochain {

// Population moments of a paired sequence (divide by n, not n-1).
struct CccStats {
  std::size_t n = 0;
  double mean_s = 0.0;
  double mean_t = 0.0;
  double var_s = 0.0;
  double var_t = 0.0;
  double cov_st = 0.0;
};

CccStats ccc_stats(std::span<const double> s, std::span<const double> t);

// Concordance correlation coefficient,
//   2*cov / (var_s + var_t + (mean_s - mean_t)^2),
// in [-1, 1]. A denominator of exactly zero (two equal constant sequences)
// yields 0. n must be >= 2 and entries finite.
double ccc(std::span<const double> s, std::span<const double> t);

// Element i is ccc(prediction column i, truth column i), columns in
// canonical emotion order.
Vector per_emotion_ccc(const Matrix& truth, const Matrix& pred);

struct CccLoss {
  double loss = 0.0;
  Matrix grad;  // dLoss/dPred, same shape as pred
};

// loss = -(1/C) * sum_i ccc(pred[:,i], truth[:,i]) over a mini-batch.
// Columns with a zero denominator take the degenerate ccc value 0 and
// contribute no gradient. Requires at least 2 rows.
CccLoss mean_ccc_loss(const Matrix& truth, const Matrix& pred);

}  // namespace emochain
