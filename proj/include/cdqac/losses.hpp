#pragma once

#include <vector>

#include "cdqac/autodiff/tensor.hpp"
#include "cdqac/nets.hpp"

namespace cdqac {

// Asymmetric quantile Huber loss between predicted quantiles z [B x N] and targets
// [B x M]: (1/N) * mean over (b, j) of sum_i |tau_i - 1{u < 0}| * huber(u) / kappa with
// u = target[b, j] - z[b, i]. Targets carry no gradient.
ad::Tensor quantile_huber_loss(const ad::Tensor& z, const ad::Matrix& target, double kappa = 1.0);

// mean over states of [logsumexp over the state's pairs of q - q at data_rows[b]].
// q is pairs x 1.
ad::Tensor cql_gap(const ad::Tensor& q, const BatchGraph& g, const std::vector<int>& data_rows);

// alpha * sum over heads of cql_gap(q_values(z_head)).
ad::Tensor cql_penalty(const std::vector<ad::Tensor>& z_heads, const BatchGraph& g,
                       const std::vector<int>& data_rows, double alpha);

struct PolicyLossParts {
  ad::Tensor loss;
  double entropy = 0.0;  // mean per-state entropy
};

// mean over states of [sum_a -q(a) pi(a)] + entropy_sign * lambda * mean H(pi).
// q is a constant pairs x 1 matrix; entropy_sign = -1 rewards entropy.
PolicyLossParts policy_loss(const ad::Tensor& logits, const ad::Matrix& q, const BatchGraph& g, double lambda,
                            double entropy_sign);

// Rows of target quantiles: reward broadcast for terminal rows, reward + gamma * next
// otherwise. next has one row per batch row (ignored where terminal).
ad::Matrix td_target(const std::vector<double>& reward, const std::vector<std::uint8_t>& terminal,
                     const ad::Matrix& next, double gamma);

}  // namespace cdqac
