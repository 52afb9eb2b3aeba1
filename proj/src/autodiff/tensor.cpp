#include "cdqac/autodiff/tensor.hpp"

#include <unordered_set>

#include "cdqac/errors.hpp"

namespace cdqac::ad {
namespace {
thread_local bool g_grad_enabled = true;
}

Tensor::Tensor(Matrix value, bool requires_grad) : node_(std::make_shared<Node>()) {
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

Tensor Tensor::scalar(double v) {
  Matrix m(1, 1);
  m(0, 0) = v;
  return constant(std::move(m));
}

Eigen::Index Tensor::rows() const { return value().rows(); }
Eigen::Index Tensor::cols() const { return value().cols(); }

const Matrix& Tensor::value() const {
  if (!node_) throw ContractViolation("tensor is undefined");
  return node_->value;
}

Matrix& Tensor::mutable_value() {
  if (!node_) throw ContractViolation("tensor is undefined");
  return node_->value;
}

double Tensor::item() const {
  if (rows() != 1 || cols() != 1) throw ContractViolation("item() needs a 1x1 tensor");
  return value()(0, 0);
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

Matrix Tensor::grad() const {
  if (node_->grad.rows() == rows() && node_->grad.cols() == cols()) return node_->grad;
  return Matrix::Zero(rows(), cols());
}

void Tensor::zero_grad() {
  if (node_) node_->grad.resize(0, 0);
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool grad_enabled() { return g_grad_enabled; }

Tensor make_op(Matrix value, std::vector<Tensor> inputs, GradFn grad_fn) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  bool any = false;
  if (g_grad_enabled) {
    for (const auto& in : inputs) any = any || in.requires_grad();
  }
  if (!any) return Tensor(std::move(node));
  node->requires_grad = true;
  node->parents.reserve(inputs.size());
  for (const auto& in : inputs) node->parents.push_back(in.node());
  node->backward = [fn = std::move(grad_fn)](Node& self) {
    std::vector<Matrix*> grads;
    grads.reserve(self.parents.size());
    for (auto& p : self.parents) grads.push_back(p->requires_grad ? &p->grad_buffer() : nullptr);
    fn(self.grad, grads);
  };
  return Tensor(std::move(node));
}

void backward(const Tensor& root) {
  if (root.rows() != 1 || root.cols() != 1) throw ContractViolation("backward: root must be a 1x1 scalar");
  if (!root.requires_grad()) return;
  // Iterative post-order DFS for a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root.node().get(), 0);
  visited.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (parent->requires_grad && visited.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  root.node()->grad_buffer().setOnes();
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (node->backward && node->grad.size() > 0) node->backward(*node);
  }
}

}  // namespace cdqac::ad
