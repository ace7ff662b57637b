#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace emochain {

using Vector = std::vector<double>;

// Row-major dense matrix of 64-bit reals.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<const double> row(std::size_t r) const {
    return {data.data() + r * cols, cols};
  }
  bool operator==(const Matrix&) const = default;
};

bool all_finite(std::span<const double> v);

// out[k] = sum_d w[k,d] * x[d] + b[k]
Vector linear(const Vector& x, const Matrix& w, const Vector& b);

// Saturates instead of overflowing for large |x|.
double sigmoid(double x);
Vector sigmoid_elem(const Vector& v);
Vector tanh_elem(const Vector& v);

// Max-subtracted for stability; output sums to 1.
Vector softmax(const Vector& v);

// Max over coordinates of |analytic - central difference| / max(1, |analytic|).
// `f` is evaluated at perturbed copies of `params`; eps must lie in [1e-7, 1e-4].
double grad_check(const std::function<double(std::span<const double>)>& f,
                  std::span<double> params, std::span<const double> analytic,
                  double eps);

// Reverse-mode tape over vector-valued nodes. A tape records the primitives
// of one forward pass; backward() replays them in exact reverse order and
// accumulates gradients into per-node buffers. Leaves created by variable()
// and matrix() are differentiable; constant() leaves are not tracked past
// their buffer. Confine a tape to a single thread.
class GradTape {
 public:
  struct NodeId {
    std::int32_t idx = -1;
  };
  struct MatId {
    std::int32_t idx = -1;
  };

  NodeId constant(Vector value);
  NodeId variable(Vector value);
  MatId matrix(Matrix value);

  NodeId linear(MatId w, NodeId bias, NodeId x);
  NodeId tanh_elem(NodeId x);
  NodeId sigmoid(NodeId x);
  NodeId softmax(NodeId x);
  NodeId dot(NodeId a, NodeId b);  // 1-element output
  NodeId concat(std::span<const NodeId> parts);
  // out = sum_t weights[t] * frames[t]; weights has one entry per frame
  NodeId weighted_sum(NodeId weights, std::span<const NodeId> frames);

  const Vector& value(NodeId id) const;
  void add_output_gradient(NodeId id, std::span<const double> g);
  void backward();

  const Vector& gradient(NodeId id) const;
  const Matrix& gradient(MatId id) const;

  std::size_t op_count() const { return ops_.size(); }

 private:
  enum class OpKind { Linear, Tanh, Sigmoid, Softmax, Dot, Concat, WeightedSum };
  struct Node {
    Vector value;
    Vector grad;
  };
  struct MatNode {
    Matrix value;
    Matrix grad;
  };
  struct OpRecord {
    OpKind kind;
    std::int32_t out = -1;
    std::int32_t a = -1;
    std::int32_t b = -1;
    std::int32_t w = -1;
    std::vector<std::int32_t> list;
  };

  NodeId push_node(Vector value);
  void backward_op(const OpRecord& op);

  std::vector<Node> nodes_;
  std::vector<MatNode> mats_;
  std::vector<OpRecord> ops_;
  bool backward_done_ = false;
};

}  // namespace emochain
