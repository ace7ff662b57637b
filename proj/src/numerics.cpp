#include "emochain/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace emochain {

bool all_finite(std::span<const double> v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

Vector linear(const Vector& x, const Matrix& w, const Vector& b) {
  if (w.cols != x.size() || w.rows != b.size()) {
    throw std::invalid_argument(
        "linear: dimension mismatch (W is " + std::to_string(w.rows) + "x" +
        std::to_string(w.cols) + ", x has " + std::to_string(x.size()) +
        ", b has " + std::to_string(b.size()) + ")");
  }
  Vector out(w.rows);
  for (std::size_t k = 0; k < w.rows; ++k) {
    double acc = b[k];
    const double* row = w.data.data() + k * w.cols;
    for (std::size_t d = 0; d < w.cols; ++d) acc += row[d] * x[d];
    out[k] = acc;
  }
  return out;
}

double sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Vector sigmoid_elem(const Vector& v) {
  Vector out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = sigmoid(v[i]);
  return out;
}

Vector tanh_elem(const Vector& v) {
  Vector out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = std::tanh(v[i]);
  return out;
}

Vector softmax(const Vector& v) {
  if (v.empty()) {
    throw std::invalid_argument("softmax: empty vector");
  }
  const double m = *std::max_element(v.begin(), v.end());
  Vector out(v.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = std::exp(v[i] - m);
    sum += out[i];
  }
  for (double& x : out) x /= sum;
  return out;
}

double grad_check(const std::function<double(std::span<const double>)>& f,
                  std::span<double> params, std::span<const double> analytic,
                  double eps) {
  if (eps < 1e-7 || eps > 1e-4) {
    throw std::invalid_argument("grad_check: eps must lie in [1e-7, 1e-4]");
  }
  if (params.size() != analytic.size()) {
    throw std::invalid_argument("grad_check: gradient size mismatch");
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double saved = params[i];
    params[i] = saved + eps;
    const double fp = f(params);
    params[i] = saved - eps;
    const double fm = f(params);
    params[i] = saved;
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      throw std::runtime_error("grad_check: objective is not finite");
    }
    const double fd = (fp - fm) / (2.0 * eps);
    const double rel = std::abs(analytic[i] - fd) / std::max(1.0, std::abs(analytic[i]));
    worst = std::max(worst, rel);
  }
  return worst;
}

// ---------------------------------------------------------------------------
// GradTape

GradTape::NodeId GradTape::push_node(Vector value) {
  Node n;
  n.grad.assign(value.size(), 0.0);
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return NodeId{std::int32_t(nodes_.size() - 1)};
}

GradTape::NodeId GradTape::constant(Vector value) { return push_node(std::move(value)); }

GradTape::NodeId GradTape::variable(Vector value) { return push_node(std::move(value)); }

GradTape::MatId GradTape::matrix(Matrix value) {
  MatNode m;
  m.grad = Matrix(value.rows, value.cols);
  m.value = std::move(value);
  mats_.push_back(std::move(m));
  return MatId{std::int32_t(mats_.size() - 1)};
}

GradTape::NodeId GradTape::linear(MatId w, NodeId bias, NodeId x) {
  NodeId out = push_node(emochain::linear(nodes_[x.idx].value, mats_[w.idx].value,
                                          nodes_[bias.idx].value));
  ops_.push_back({OpKind::Linear, out.idx, x.idx, bias.idx, w.idx, {}});
  return out;
}

GradTape::NodeId GradTape::tanh_elem(NodeId x) {
  NodeId out = push_node(emochain::tanh_elem(nodes_[x.idx].value));
  ops_.push_back({OpKind::Tanh, out.idx, x.idx, -1, -1, {}});
  return out;
}

GradTape::NodeId GradTape::sigmoid(NodeId x) {
  NodeId out = push_node(emochain::sigmoid_elem(nodes_[x.idx].value));
  ops_.push_back({OpKind::Sigmoid, out.idx, x.idx, -1, -1, {}});
  return out;
}

GradTape::NodeId GradTape::softmax(NodeId x) {
  NodeId out = push_node(emochain::softmax(nodes_[x.idx].value));
  ops_.push_back({OpKind::Softmax, out.idx, x.idx, -1, -1, {}});
  return out;
}

GradTape::NodeId GradTape::dot(NodeId a, NodeId b) {
  const Vector& va = nodes_[a.idx].value;
  const Vector& vb = nodes_[b.idx].value;
  if (va.size() != vb.size()) {
    throw std::invalid_argument("GradTape::dot: length mismatch");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < va.size(); ++i) acc += va[i] * vb[i];
  NodeId out = push_node(Vector{acc});
  ops_.push_back({OpKind::Dot, out.idx, a.idx, b.idx, -1, {}});
  return out;
}

GradTape::NodeId GradTape::concat(std::span<const NodeId> parts) {
  Vector value;
  OpRecord op{OpKind::Concat, -1, -1, -1, -1, {}};
  for (NodeId p : parts) {
    const Vector& v = nodes_[p.idx].value;
    value.insert(value.end(), v.begin(), v.end());
    op.list.push_back(p.idx);
  }
  NodeId out = push_node(std::move(value));
  op.out = out.idx;
  ops_.push_back(std::move(op));
  return out;
}

GradTape::NodeId GradTape::weighted_sum(NodeId weights, std::span<const NodeId> frames) {
  const Vector& w = nodes_[weights.idx].value;
  if (w.size() != frames.size() || frames.empty()) {
    throw std::invalid_argument("GradTape::weighted_sum: weight/frame count mismatch");
  }
  const std::size_t dim = nodes_[frames[0].idx].value.size();
  Vector value(dim, 0.0);
  OpRecord op{OpKind::WeightedSum, -1, weights.idx, -1, -1, {}};
  for (std::size_t t = 0; t < frames.size(); ++t) {
    const Vector& h = nodes_[frames[t].idx].value;
    if (h.size() != dim) {
      throw std::invalid_argument("GradTape::weighted_sum: frame width mismatch");
    }
    for (std::size_t i = 0; i < dim; ++i) value[i] += w[t] * h[i];
    op.list.push_back(frames[t].idx);
  }
  NodeId out = push_node(std::move(value));
  op.out = out.idx;
  ops_.push_back(std::move(op));
  return out;
}

const Vector& GradTape::value(NodeId id) const { return nodes_[id.idx].value; }

void GradTape::add_output_gradient(NodeId id, std::span<const double> g) {
  Vector& grad = nodes_[id.idx].grad;
  if (g.size() != grad.size()) {
    throw std::invalid_argument("GradTape::add_output_gradient: size mismatch");
  }
  for (std::size_t i = 0; i < g.size(); ++i) grad[i] += g[i];
}

void GradTape::backward() {
  if (backward_done_) {
    throw std::logic_error("GradTape::backward: called twice on one tape");
  }
  backward_done_ = true;
  for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) {
    backward_op(*it);
  }
}

void GradTape::backward_op(const OpRecord& op) {
  const Vector& g = nodes_[op.out].grad;
  switch (op.kind) {
    case OpKind::Linear: {
      const Matrix& w = mats_[op.w].value;
      Matrix& dw = mats_[op.w].grad;
      const Vector& x = nodes_[op.a].value;
      Vector& dx = nodes_[op.a].grad;
      Vector& db = nodes_[op.b].grad;
      for (std::size_t k = 0; k < w.rows; ++k) {
        const double gk = g[k];
        db[k] += gk;
        double* dwrow = dw.data.data() + k * dw.cols;
        const double* wrow = w.data.data() + k * w.cols;
        for (std::size_t d = 0; d < w.cols; ++d) {
          dwrow[d] += gk * x[d];
          dx[d] += gk * wrow[d];
        }
      }
      break;
    }
    case OpKind::Tanh: {
      const Vector& y = nodes_[op.out].value;
      Vector& dx = nodes_[op.a].grad;
      for (std::size_t i = 0; i < y.size(); ++i) dx[i] += g[i] * (1.0 - y[i] * y[i]);
      break;
    }
    case OpKind::Sigmoid: {
      const Vector& y = nodes_[op.out].value;
      Vector& dx = nodes_[op.a].grad;
      for (std::size_t i = 0; i < y.size(); ++i) dx[i] += g[i] * y[i] * (1.0 - y[i]);
      break;
    }
    case OpKind::Softmax: {
      const Vector& y = nodes_[op.out].value;
      Vector& dx = nodes_[op.a].grad;
      double dotgy = 0.0;
      for (std::size_t i = 0; i < y.size(); ++i) dotgy += g[i] * y[i];
      for (std::size_t i = 0; i < y.size(); ++i) dx[i] += y[i] * (g[i] - dotgy);
      break;
    }
    case OpKind::Dot: {
      const double g0 = g[0];
      const Vector& va = nodes_[op.a].value;
      const Vector& vb = nodes_[op.b].value;
      Vector& da = nodes_[op.a].grad;
      Vector& db = nodes_[op.b].grad;
      for (std::size_t i = 0; i < va.size(); ++i) {
        da[i] += g0 * vb[i];
        db[i] += g0 * va[i];
      }
      break;
    }
    case OpKind::Concat: {
      std::size_t off = 0;
      for (std::int32_t part : op.list) {
        Vector& dp = nodes_[part].grad;
        for (std::size_t i = 0; i < dp.size(); ++i) dp[i] += g[off + i];
        off += dp.size();
      }
      break;
    }
    case OpKind::WeightedSum: {
      const Vector& w = nodes_[op.a].value;
      Vector& dw = nodes_[op.a].grad;
      for (std::size_t t = 0; t < op.list.size(); ++t) {
        const Vector& h = nodes_[op.list[t]].value;
        Vector& dh = nodes_[op.list[t]].grad;
        double acc = 0.0;
        for (std::size_t i = 0; i < h.size(); ++i) {
          acc += g[i] * h[i];
          dh[i] += w[t] * g[i];
        }
        dw[t] += acc;
      }
      break;
    }
  }
}

const Vector& GradTape::gradient(NodeId id) const { return nodes_[id.idx].grad; }

const Matrix& GradTape::gradient(MatId id) const { return mats_[id.idx].grad; }

}  // namespace emochain
