#pragma once

#include <Eigen/Core>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace cdqac::ad {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Node;

// Handle to a node of the dynamic computation graph. Copies share the node.
// All tensors are 2-D (rows x cols); scalars are 1x1.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Matrix value, bool requires_grad = false);

  static Tensor constant(Matrix value) { return Tensor(std::move(value), false); }
  static Tensor parameter(Matrix value) { return Tensor(std::move(value), true); }
  static Tensor zeros(Eigen::Index rows, Eigen::Index cols) { return constant(Matrix::Zero(rows, cols)); }
  static Tensor scalar(double v);

  bool defined() const { return static_cast<bool>(node_); }
  Eigen::Index rows() const;
  Eigen::Index cols() const;
  Eigen::Index size() const { return rows() * cols(); }
  const Matrix& value() const;
  Matrix& mutable_value();
  double item() const;

  bool requires_grad() const;
  // Gradient accumulated by backward(); zeros of the value's shape if none reached it.
  Matrix grad() const;
  void zero_grad();

  const std::shared_ptr<Node>& node() const { return node_; }
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<Node> node_;
};

struct Node {
  Matrix value;
  Matrix grad;  // allocated on first accumulation
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  Matrix& grad_buffer() {
    if (grad.rows() != value.rows() || grad.cols() != value.cols()) grad = Matrix::Zero(value.rows(), value.cols());
    return grad;
  }
};

// Disables graph recording within its scope (per thread).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

// Reverse-mode accumulation from a 1x1 root into every reachable leaf that requires grad.
void backward(const Tensor& root);

// Builds an op node. `grad_fn(out_grad, input_grads)` receives one pointer per input;
// pointers are null for inputs that do not require grad.
using GradFn = std::function<void(const Matrix& out_grad, std::span<Matrix* const> input_grads)>;
Tensor make_op(Matrix value, std::vector<Tensor> inputs, GradFn grad_fn);

}  // namespace cdqac::ad
