#include "cdqac/autodiff/gradcheck.hpp"
#include "cdqac/autodiff/ops.hpp"
#include "cdqac/rng.hpp"

namespace cdqac::ad {
namespace {

Matrix random_matrix(Rng& rng, int r, int c, double lo = -1.0, double hi = 1.0) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = lo + (hi - lo) * rng.uniform01();
  return m;
}

}  // namespace

std::vector<PrimitiveCheck> check_primitives(std::uint64_t seed) {
  Rng rng(seed);
  std::vector<PrimitiveCheck> out;
  // A fixed random projection turns every output into a scalar with distinct weights.
  auto run = [&](const std::string& name, const std::vector<Tensor>& leaves, const std::function<Tensor()>& f) {
    const Tensor probe = f();
    const Matrix w = random_matrix(rng, static_cast<int>(probe.rows()), static_cast<int>(probe.cols()));
    auto scalar = [&] { return sum(mul(f(), Tensor::constant(w))); };
    out.push_back({name, gradcheck(scalar, leaves)});
  };

  const Tensor a = Tensor::parameter(random_matrix(rng, 3, 4));
  const Tensor b = Tensor::parameter(random_matrix(rng, 3, 4));
  const Tensor c = Tensor::parameter(random_matrix(rng, 4, 2));
  const Tensor row = Tensor::parameter(random_matrix(rng, 1, 4));
  const Tensor col = Tensor::parameter(random_matrix(rng, 3, 1));
  const Tensor pos = Tensor::parameter(random_matrix(rng, 3, 4, 0.5, 2.0));
  const Tensor x = Tensor::parameter(random_matrix(rng, 6, 1, -2.0, 2.0));
  const Tensor lrow = Tensor::parameter(random_matrix(rng, 1, 5, -2.0, 2.0));
  const std::vector<int> seg{0, 0, 1, 2, 2, 2};
  const std::vector<int> idx{2, 0, 0, 1};
  const std::vector<std::uint8_t> mask{1, 0, 1, 1, 0};

  run("matmul", {a, c}, [&] { return matmul(a, c); });
  run("add", {a, b}, [&] { return add(a, b); });
  run("sub", {a, b}, [&] { return sub(a, b); });
  run("mul", {a, b}, [&] { return mul(a, b); });
  run("scale", {a}, [&] { return scale(a, -1.7); });
  run("add_scalar", {a}, [&] { return add_scalar(a, 0.3); });
  run("add_row", {a, row}, [&] { return add_row(a, row); });
  run("mul_col", {a, col}, [&] { return mul_col(a, col); });
  run("expand_rows", {row}, [&] { return expand_rows(row, 3); });
  run("concat_cols", {a, col}, [&] { return concat_cols({a, col}); });
  run("concat_rows", {a, row}, [&] { return concat_rows({a, row}); });
  run("slice_cols", {a}, [&] { return slice_cols(a, 1, 2); });
  run("slice_rows", {a}, [&] { return slice_rows(a, 1, 2); });
  run("sum", {a}, [&] { return sum(a); });
  run("mean", {a}, [&] { return mean(a); });
  run("row_sum", {a}, [&] { return row_sum(a); });
  run("row_mean", {a}, [&] { return row_mean(a); });
  run("col_sum", {a}, [&] { return col_sum(a); });
  run("col_mean", {a}, [&] { return col_mean(a); });
  run("minimum", {a, b}, [&] { return minimum(a, b); });
  run("log", {pos}, [&] { return log(pos); });
  run("exp", {a}, [&] { return exp(a); });
  run("leaky_relu", {a}, [&] { return leaky_relu(a); });
  run("elu", {a}, [&] { return elu(a); });
  run("gather_rows", {a}, [&] { return gather_rows(a, idx); });
  run("segment_sum", {x}, [&] { return segment_sum(x, seg, 3); });
  run("segment_mean", {x}, [&] { return segment_mean(x, seg, 4); });
  run("segment_softmax", {x}, [&] { return segment_softmax(x, seg, 3); });
  run("segment_logsumexp", {x}, [&] { return segment_logsumexp(x, seg, 3); });
  run("masked_softmax", {lrow}, [&] { return masked_softmax(lrow, mask); });
  run("masked_logsumexp", {lrow}, [&] { return masked_logsumexp(lrow, mask); });
  return out;
}

}  // namespace cdqac::ad
