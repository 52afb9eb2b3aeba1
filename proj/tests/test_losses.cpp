#include <cmath>

#include "cdqac/autodiff/gradcheck.hpp"
#include "cdqac/errors.hpp"
#include "cdqac/losses.hpp"
#include "doctest.h"

using namespace cdqac;
using ad::Matrix;
using ad::Tensor;
using doctest::Approx;

namespace {

Matrix random_matrix(Rng& rng, Eigen::Index r, Eigen::Index c, double scale = 2.0) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = (rng.uniform01() * 2.0 - 1.0) * scale;
  return m;
}

// Pairs grouped into consecutive states of the given sizes.
BatchGraph groups(const std::vector<int>& sizes) {
  BatchGraph g;
  g.num_states = static_cast<int>(sizes.size());
  g.pair_offset.push_back(0);
  for (int s = 0; s < g.num_states; ++s) {
    for (int i = 0; i < sizes[static_cast<std::size_t>(s)]; ++i) g.pair_state.push_back(s);
    g.pair_offset.push_back(static_cast<int>(g.pair_state.size()));
  }
  return g;
}

double rho_kappa(double tau, double u, double kappa) {
  const double indicator = u < 0.0 ? 1.0 : 0.0;
  const double l = std::abs(u) <= kappa ? u * u / 2.0 : kappa * (std::abs(u) - kappa / 2.0);
  return std::abs(tau - indicator) * l / kappa;
}

}  // namespace

TEST_CASE("quantile Huber loss matches a direct sum") {
  Rng rng(3);
  for (double kappa : {1.0, 0.5, 3.0}) {
    const Matrix z = random_matrix(rng, 4, 8);
    const Matrix t = random_matrix(rng, 4, 5);
    double expected = 0.0;
    for (int b = 0; b < 4; ++b)
      for (int j = 0; j < 5; ++j)
        for (int i = 0; i < 8; ++i) expected += rho_kappa((2.0 * i + 1.0) / 16.0, t(b, j) - z(b, i), kappa);
    expected /= 8.0 * 4 * 5;
    CHECK(quantile_huber_loss(Tensor::constant(z), t, kappa).item() == Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("quantile Huber loss gradient") {
  Rng rng(4);
  const Tensor z = Tensor::parameter(random_matrix(rng, 3, 6));
  const Matrix t = random_matrix(rng, 3, 6);
  const auto r = ad::gradcheck([&] { return quantile_huber_loss(z, t, 1.0); }, {z});
  CHECK(r.max_rel_error < 1e-6);
  // Targets equal to every quantile give zero loss.
  const Matrix c = Matrix::Constant(2, 4, 1.5);
  CHECK(quantile_huber_loss(Tensor::constant(c), c).item() == 0.0);
  CHECK_THROWS_AS(quantile_huber_loss(Tensor::constant(c), Matrix::Zero(3, 4)), ContractViolation);
  CHECK_THROWS_AS(quantile_huber_loss(Tensor::constant(c), c, 0.0), ParameterError);
}

TEST_CASE("quantile Huber minimizer for a two-point target") {
  // Targets {0, 10} with kappa = 1. Near 0 the stationarity condition is
  // (1 - tau) z = tau, near 10 it is tau (10 - z) = 1 - tau.
  Matrix z = Matrix::Constant(1, 4, 5.0);
  Matrix t(1, 2);
  t << 0.0, 10.0;
  for (int it = 0; it < 20000; ++it) {
    const Tensor zt = Tensor::parameter(z);
    ad::backward(quantile_huber_loss(zt, t));
    z -= 0.5 * zt.grad();
  }
  for (int i = 0; i < 4; ++i) {
    const double tau = (2.0 * i + 1.0) / 8.0;
    const double expected = tau < 0.5 ? tau / (1 - tau) : 10.0 - (1 - tau) / tau;
    CHECK(z(0, i) == Approx(expected).epsilon(1e-9));
  }
}

TEST_CASE("conservative gap against a direct computation") {
  Rng rng(5);
  const BatchGraph g = groups({3, 1, 4});
  const Matrix q = random_matrix(rng, 8, 1);
  const std::vector<int> rows{1, 3, 6};
  double expected = 0.0;
  for (int s = 0; s < 3; ++s) {
    double z = 0.0;
    for (int r = g.pair_offset[s]; r < g.pair_offset[s + 1]; ++r) z += std::exp(q(r, 0));
    expected += std::log(z) - q(rows[static_cast<std::size_t>(s)], 0);
  }
  expected /= 3.0;
  const Tensor qt = Tensor::parameter(q);
  const Tensor gap = cql_gap(qt, g, rows);
  CHECK(gap.item() == Approx(expected).epsilon(1e-12));
  CHECK(gap.item() >= 0.0);
  // d gap / d q = (softmax - onehot) / states.
  ad::backward(gap);
  double z0 = 0.0;
  for (int r = 0; r < 3; ++r) z0 += std::exp(q(r, 0));
  CHECK(qt.grad()(1, 0) == Approx((std::exp(q(1, 0)) / z0 - 1.0) / 3.0));
  CHECK(qt.grad()(0, 0) == Approx(std::exp(q(0, 0)) / z0 / 3.0));
  CHECK(qt.grad()(3, 0) == Approx(0.0).scale(1.0));

  // Equal values over k pairs give log k.
  const BatchGraph one = groups({5});
  CHECK(cql_gap(Tensor::constant(Matrix::Constant(5, 1, -7.0)), one, {2}).item() == Approx(std::log(5.0)));

  // The penalty sums the gap of each head's quantile mean.
  const Matrix z1 = random_matrix(rng, 8, 4), z2 = random_matrix(rng, 8, 4);
  const double pen = cql_penalty({Tensor::constant(z1), Tensor::constant(z2)}, g, rows, 0.3).item();
  const double by_parts = 0.3 * (cql_gap(Tensor::constant(z1.rowwise().mean()), g, rows).item() +
                                 cql_gap(Tensor::constant(z2.rowwise().mean()), g, rows).item());
  CHECK(pen == Approx(by_parts).epsilon(1e-12));
}

TEST_CASE("policy loss on two actions matches the analytic gradient") {
  const BatchGraph g = groups({2});
  const double l1 = 0.3, l2 = -0.4, q1 = 2.0, q2 = -1.0, lambda = 0.2;
  for (double sign : {-1.0, 1.0}) {
    const Tensor logits = Tensor::parameter((Matrix(2, 1) << l1, l2).finished());
    const Matrix q = (Matrix(2, 1) << q1, q2).finished();
    const PolicyLossParts parts = policy_loss(logits, q, g, lambda, sign);
    const double p = 1.0 / (1.0 + std::exp(l2 - l1));
    const double h = -p * std::log(p) - (1 - p) * std::log(1 - p);
    CHECK(parts.entropy == Approx(h).epsilon(1e-12));
    CHECK(parts.loss.item() == Approx(-(q1 * p + q2 * (1 - p)) + sign * lambda * h).epsilon(1e-12));
    ad::backward(parts.loss);
    const double dl_dp = -(q1 - q2) + sign * lambda * (std::log(1 - p) - std::log(p));
    const double d1 = dl_dp * p * (1 - p);
    CHECK(std::abs(logits.grad()(0, 0) - d1) < 1e-6);
    CHECK(std::abs(logits.grad()(1, 0) + d1) < 1e-6);
  }
}

TEST_CASE("temporal difference targets") {
  const Matrix next = (Matrix(3, 2) << 1.0, 2.0, 3.0, 4.0, 5.0, 6.0).finished();
  const Matrix t = td_target({-1.0, -2.0, -3.0}, {0, 1, 0}, next, 0.5);
  const Matrix expected = (Matrix(3, 2) << -0.5, 0.0, -2.0, -2.0, -0.5, 0.0).finished();
  CHECK(t == expected);
  CHECK_THROWS_AS(td_target({1.0}, {0, 0}, next, 1.0), ContractViolation);
}
