#include "emochain/metrics.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace emochain {

CccStats ccc_stats(std::span<const double> s, std::span<const double> t) {
  if (s.size() != t.size()) {
    throw std::invalid_argument("ccc: sequence lengths differ");
  }
  if (s.size() < 2) {
    throw std::invalid_argument("ccc: need at least 2 paired values, got " +
                                std::to_string(s.size()));
  }
  if (!all_finite(s) || !all_finite(t)) {
    throw std::invalid_argument("ccc: non-finite input");
  }
  const std::size_t n = s.size();
  CccStats st;
  st.n = n;
  // Constant sequences get exact moments, so the degenerate-denominator rule
  // fires on exact zero rather than rounding residue.
  bool s_const = true, t_const = true;
  for (std::size_t i = 1; i < n; ++i) {
    s_const = s_const && s[i] == s[0];
    t_const = t_const && t[i] == t[0];
  }
  if (s_const) {
    st.mean_s = s[0];
  } else {
    for (std::size_t i = 0; i < n; ++i) st.mean_s += s[i];
    st.mean_s /= double(n);
  }
  if (t_const) {
    st.mean_t = t[0];
  } else {
    for (std::size_t i = 0; i < n; ++i) st.mean_t += t[i];
    st.mean_t /= double(n);
  }
  for (std::size_t i = 0; i < n; ++i) {
    const double ds = s_const ? 0.0 : s[i] - st.mean_s;
    const double dt = t_const ? 0.0 : t[i] - st.mean_t;
    st.var_s += ds * ds;
    st.var_t += dt * dt;
    st.cov_st += ds * dt;
  }
  st.var_s /= double(n);
  st.var_t /= double(n);
  st.cov_st /= double(n);
  return st;
}

double ccc(std::span<const double> s, std::span<const double> t) {
  const CccStats st = ccc_stats(s, t);
  const double md = st.mean_s - st.mean_t;
  const double denom = st.var_s + st.var_t + md * md;
  if (denom == 0.0) return 0.0;
  return 2.0 * st.cov_st / denom;
}

Vector per_emotion_ccc(const Matrix& truth, const Matrix& pred) {
  if (truth.rows != pred.rows || truth.cols != pred.cols) {
    throw std::invalid_argument("per_emotion_ccc: shape mismatch");
  }
  Vector out(truth.cols);
  Vector s(truth.rows), t(truth.rows);
  for (std::size_t c = 0; c < truth.cols; ++c) {
    for (std::size_t r = 0; r < truth.rows; ++r) {
      s[r] = pred.at(r, c);
      t[r] = truth.at(r, c);
    }
    out[c] = ccc(s, t);
  }
  return out;
}

CccLoss mean_ccc_loss(const Matrix& truth, const Matrix& pred) {
  if (truth.rows != pred.rows || truth.cols != pred.cols) {
    throw std::invalid_argument("mean_ccc_loss: shape mismatch");
  }
  if (truth.rows < 2) {
    throw std::invalid_argument(
        "mean_ccc_loss: batch size must be at least 2 to compute CCC, got " +
        std::to_string(truth.rows));
  }
  const std::size_t n = truth.rows;
  const std::size_t c_count = truth.cols;
  CccLoss result;
  result.grad = Matrix(n, c_count);

  Vector p(n), t(n);
  double ccc_sum = 0.0;
  for (std::size_t c = 0; c < c_count; ++c) {
    for (std::size_t r = 0; r < n; ++r) {
      p[r] = pred.at(r, c);
      t[r] = truth.at(r, c);
    }
    const CccStats st = ccc_stats(p, t);
    const double md = st.mean_s - st.mean_t;
    const double denom = st.var_s + st.var_t + md * md;
    if (denom == 0.0) {
      continue;  // degenerate column: ccc 0, zero gradient
    }
    const double num = 2.0 * st.cov_st;
    ccc_sum += num / denom;
    // d ccc / d p_j = (2(t_j - mt)/n) / D - num * (2(p_j - mp) + 2*md) / (n D^2)
    const double inv_n = 1.0 / double(n);
    const double inv_d = 1.0 / denom;
    for (std::size_t r = 0; r < n; ++r) {
      const double dccc = 2.0 * (t[r] - st.mean_t) * inv_n * inv_d -
                          num * (2.0 * (p[r] - st.mean_s) + 2.0 * md) * inv_n *
                              inv_d * inv_d;
      result.grad.at(r, c) = -dccc / double(c_count);
    }
  }
  result.loss = -ccc_sum / double(c_count);
  return result;
}

}  // namespace emochain
