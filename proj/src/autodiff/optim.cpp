#include "cdqac/autodiff/optim.hpp"

#include <cmath>

#include "cdqac/errors.hpp"

namespace cdqac::ad {

Tensor ParamStore::add(std::string name, Matrix init) {
  for (const auto& e : entries_) {
    if (e.name == name) throw ContractViolation("duplicate parameter name " + name);
  }
  Tensor t = Tensor::parameter(std::move(init));
  entries_.push_back({std::move(name), t});
  return t;
}

std::vector<Tensor> ParamStore::tensors() const {
  std::vector<Tensor> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) out.push_back(e.tensor);
  return out;
}

const Tensor& ParamStore::at(const std::string& name) const {
  for (const auto& e : entries_) {
    if (e.name == name) return e.tensor;
  }
  throw ContractViolation("unknown parameter " + name);
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += static_cast<std::size_t>(e.tensor.size());
  return n;
}

void ParamStore::zero_grad() {
  for (auto& e : entries_) e.tensor.zero_grad();
}

void ParamStore::copy_from(const ParamStore& other) {
  if (other.entries_.size() != entries_.size()) throw ContractViolation("copy_from: parameter count differs");
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& src = other.entries_[i];
    auto& dst = entries_[i];
    if (src.name != dst.name || src.tensor.rows() != dst.tensor.rows() || src.tensor.cols() != dst.tensor.cols()) {
      throw ContractViolation("copy_from: mismatch at " + dst.name);
    }
    dst.tensor.mutable_value() = src.tensor.value();
  }
}

Adam::Adam(std::vector<Tensor> params, AdamConfig config) : params_(std::move(params)), config_(config) {
  if (!(config_.lr >= 0.0) || config_.beta1 < 0.0 || config_.beta1 >= 1.0 || config_.beta2 < 0.0 ||
      config_.beta2 >= 1.0 || !(config_.eps > 0.0)) {
    throw ParameterError("invalid Adam configuration");
  }
  for (const auto& p : params_) {
    m_.push_back(Matrix::Zero(p.rows(), p.cols()));
    v_.push_back(Matrix::Zero(p.rows(), p.cols()));
  }
}

void Adam::step() {
  std::vector<Matrix> grads;
  grads.reserve(params_.size());
  for (const auto& p : params_) grads.push_back(p.grad());
  step(grads);
}

void Adam::step(std::span<const Matrix> grads) {
  if (grads.size() != params_.size()) throw ContractViolation("adam: gradient count differs from parameter count");
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (grads[i].rows() != params_[i].rows() || grads[i].cols() != params_[i].cols()) {
      throw ContractViolation("adam: gradient shape mismatch");
    }
  }
  ++t_;
  const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const auto& g = grads[i];
    m_[i] = config_.beta1 * m_[i] + (1.0 - config_.beta1) * g;
    v_[i] = config_.beta2 * v_[i] + (1.0 - config_.beta2) * g.cwiseProduct(g);
    auto& w = params_[i].mutable_value();
    w.array() -= config_.lr * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + config_.eps);
  }
}

void Adam::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

double clip_grad_norm(std::span<const Tensor> params, double max_norm) {
  double sq = 0.0;
  for (const auto& p : params) {
    const auto& g = p.node()->grad;
    if (g.size() > 0) sq += g.squaredNorm();
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double s = max_norm / norm;
    for (const auto& p : params) {
      auto& g = p.node()->grad;
      if (g.size() > 0) g *= s;
    }
  }
  return norm;
}

void polyak_update(std::span<const Tensor> target, std::span<const Tensor> online, double rho) {
  if (target.size() != online.size()) throw ContractViolation("polyak_update: parameter count differs");
  if (!(rho >= 0.0 && rho <= 1.0)) throw ParameterError("polyak_update: rho must be in [0, 1]");
  for (std::size_t i = 0; i < target.size(); ++i) {
    if (target[i].rows() != online[i].rows() || target[i].cols() != online[i].cols()) {
      throw ContractViolation("polyak_update: shape mismatch");
    }
    auto& t = target[i].node()->value;
    t = (1.0 - rho) * t + rho * online[i].value();
  }
}

}  // namespace cdqac::ad
