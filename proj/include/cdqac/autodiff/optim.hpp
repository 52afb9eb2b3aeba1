#pragma once

#include <span>
#include <string>
#include <vector>

#include "cdqac/autodiff/tensor.hpp"

namespace cdqac::ad {

struct NamedParam {
  std::string name;
  Tensor tensor;
};

// Ordered, named collection of leaf parameters.
class ParamStore {
 public:
  Tensor add(std::string name, Matrix init);
  const std::vector<NamedParam>& entries() const { return entries_; }
  std::vector<Tensor> tensors() const;
  const Tensor& at(const std::string& name) const;
  std::size_t size() const { return entries_.size(); }
  std::size_t scalar_count() const;

  void zero_grad();
  // Copies values from a store with identical names and shapes.
  void copy_from(const ParamStore& other);

 private:
  std::vector<NamedParam> entries_;
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam with bias correction. Moments are kept per parameter in registration order.
class Adam {
 public:
  Adam(std::vector<Tensor> params, AdamConfig config);

  // One update from the gradients currently stored on the parameters.
  void step();
  // Same, from explicit gradients (one per parameter, matching shapes).
  void step(std::span<const Matrix> grads);
  void zero_grad();

  long step_count() const { return t_; }
  const AdamConfig& config() const { return config_; }

 private:
  std::vector<Tensor> params_;
  AdamConfig config_;
  std::vector<Matrix> m_, v_;
  long t_ = 0;
};

// Scales gradients in place so their joint L2 norm is at most max_norm. Returns the
// norm before scaling. max_norm <= 0 only measures.
double clip_grad_norm(std::span<const Tensor> params, double max_norm);

// target <- (1 - rho) * target + rho * online.
void polyak_update(std::span<const Tensor> target, std::span<const Tensor> online, double rho);

}  // namespace cdqac::ad
