#include "cdqac/losses.hpp"

#include <cmath>

#include "cdqac/errors.hpp"

namespace cdqac {

using ad::Matrix;
using ad::Tensor;

Tensor quantile_huber_loss(const Tensor& z, const Matrix& target, double kappa) {
  if (z.rows() != target.rows()) throw ContractViolation("quantile_huber_loss: batch sizes differ");
  if (z.rows() == 0 || z.cols() == 0 || target.cols() == 0) throw ContractViolation("quantile_huber_loss: empty input");
  if (!(kappa > 0.0)) throw ParameterError("quantile_huber_loss: kappa must be positive");
  const auto n = z.cols();
  const auto m = target.cols();
  const auto tau = quantile_fractions(static_cast<int>(n));
  const double coef = 1.0 / (static_cast<double>(n) * static_cast<double>(z.rows()) * static_cast<double>(m));
  const Matrix& zv = z.value();

  double total = 0.0;
  Matrix dz = Matrix::Zero(z.rows(), n);
  for (Eigen::Index b = 0; b < z.rows(); ++b) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double ti = tau[static_cast<std::size_t>(i)];
      double g = 0.0;
      for (Eigen::Index j = 0; j < m; ++j) {
        const double u = target(b, j) - zv(b, i);
        const double w = std::abs(ti - (u < 0.0 ? 1.0 : 0.0));
        const double au = std::abs(u);
        const double huber = au <= kappa ? 0.5 * u * u : kappa * (au - 0.5 * kappa);
        total += w * huber / kappa;
        g -= w * std::clamp(u, -kappa, kappa) / kappa;
      }
      dz(b, i) = g * coef;
    }
  }
  Matrix out(1, 1);
  out(0, 0) = total * coef;
  auto dz_ptr = std::make_shared<Matrix>(std::move(dz));
  return ad::make_op(std::move(out), {z}, [dz_ptr](const Matrix& g, std::span<Matrix* const> grads) {
    if (grads[0]) *grads[0] += g(0, 0) * *dz_ptr;
  });
}

Tensor cql_gap(const Tensor& q, const BatchGraph& g, const std::vector<int>& data_rows) {
  if (static_cast<int>(data_rows.size()) != g.num_states) throw ContractViolation("cql_gap: one data row per state");
  const Tensor lse = ad::segment_logsumexp(q, g.pair_state, g.num_states);
  return ad::mean(ad::sub(lse, ad::gather_rows(q, data_rows)));
}

Tensor cql_penalty(const std::vector<Tensor>& z_heads, const BatchGraph& g, const std::vector<int>& data_rows,
                   double alpha) {
  if (z_heads.empty()) throw ContractViolation("cql_penalty: no critic heads");
  Tensor total = cql_gap(q_values(z_heads[0]), g, data_rows);
  for (std::size_t h = 1; h < z_heads.size(); ++h) total = ad::add(total, cql_gap(q_values(z_heads[h]), g, data_rows));
  return ad::scale(total, alpha);
}

PolicyLossParts policy_loss(const Tensor& logits, const Matrix& q, const BatchGraph& g, double lambda,
                            double entropy_sign) {
  if (q.rows() != logits.rows() || q.cols() != 1) throw ContractViolation("policy_loss: q must be pairs x 1");
  const Tensor logp = log_policy(logits, g);
  const Tensor pi = ad::exp(logp);
  const Tensor expected_q = ad::segment_sum(ad::mul(pi, Tensor::constant(q)), g.pair_state, g.num_states);
  const Tensor entropy = ad::neg(ad::segment_sum(ad::mul(pi, logp), g.pair_state, g.num_states));
  PolicyLossParts parts;
  parts.entropy = entropy.value().mean();
  parts.loss = ad::add(ad::neg(ad::mean(expected_q)), ad::scale(ad::mean(entropy), entropy_sign * lambda));
  return parts;
}

Matrix td_target(const std::vector<double>& reward, const std::vector<std::uint8_t>& terminal, const Matrix& next,
                 double gamma) {
  const auto b = static_cast<Eigen::Index>(reward.size());
  if (terminal.size() != reward.size() || next.rows() != b) throw ContractViolation("td_target: batch sizes differ");
  Matrix t(b, next.cols());
  for (Eigen::Index i = 0; i < b; ++i) {
    if (terminal[static_cast<std::size_t>(i)]) {
      t.row(i).setConstant(reward[static_cast<std::size_t>(i)]);
    } else {
      t.row(i) = (reward[static_cast<std::size_t>(i)] + gamma * next.row(i).array()).matrix();
    }
  }
  return t;
}

}  // namespace cdqac
