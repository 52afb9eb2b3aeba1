#include "cdqac/autodiff/ops.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "cdqac/errors.hpp"

namespace cdqac::ad {
namespace {

std::string shape(const Tensor& t) { return std::to_string(t.rows()) + "x" + std::to_string(t.cols()); }

void same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ContractViolation(std::string(op) + ": shape mismatch " + shape(a) + " vs " + shape(b));
  }
}

void check_segments(const char* op, Eigen::Index rows, const std::vector<int>& segment, int n) {
  if (static_cast<Eigen::Index>(segment.size()) != rows) {
    throw ContractViolation(std::string(op) + ": segment vector length differs from row count");
  }
  for (int s : segment) {
    if (s < 0 || s >= n) throw ContractViolation(std::string(op) + ": segment id out of range");
  }
}

void column_vector(const char* op, const Tensor& x) {
  if (x.cols() != 1) throw ContractViolation(std::string(op) + ": expects an r x 1 tensor, got " + shape(x));
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) throw ContractViolation("matmul: inner dimensions differ " + shape(a) + " * " + shape(b));
  Matrix out(a.rows(), b.cols());
  out.noalias() = a.value() * b.value();
  return make_op(std::move(out), {a, b}, [a, b](const Matrix& g, std::span<Matrix* const> grads) {
    if (grads[0]) grads[0]->noalias() += g * b.value().transpose();
    if (grads[1]) grads[1]->noalias() += a.value().transpose() * g;
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  same_shape("add", a, b);
  return make_op(a.value() + b.value(), {a, b}, [](const Matrix& g, std::span<Matrix* const> grads) {
    if (grads[0]) *grads[0] += g;
    if (grads[1]) *grads[1] += g;
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  same_shape("sub", a, b);
  return make_op(a.value() - b.value(), {a, b}, [](const Matrix& g, std::span<Matrix* const> grads) {
    if (grads[0]) *grads[0] += g;
    if (grads[1]) *grads[1] -= g;
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  same_shape("mul", a, b);
  return make_op(a.value().cwiseProduct(b.value()), {a, b}, [a, b](const Matrix& g, std::span<Matrix* const> grads) {
    if (grads[0]) *grads[0] += g.cwiseProduct(b.value());
    if (grads[1]) *grads[1] += g.cwiseProduct(a.value());
  });
}

Tensor scale(const Tensor& a, double s) {
  return make_op(a.value() * s, {a}, [s](const Matrix& g, std::span<Matrix* const> grads) {
    if (grads[0]) *grads[0] += g * s;
  });
}

Tensor add_scalar(const Tensor& a, double s) {
  return make_op(a.value().array() + s, {a}, [](const Matrix& g, std::span<Matrix* const> grads) {
    if (grads[0]) *grads[0] += g;
  });
}

Tensor neg(const Tensor& a) { return scale(a, -1.0); }

Tensor add_row(const Tensor& a, const Tensor& row) {
  if (row.rows() != 1 || row.cols() != a.cols()) {
    throw ContractViolation("add_row: expects row 1x" + std::to_string(a.cols()) + ", got " + shape(row));
  }
  Matrix out = a.value();
  out.rowwise() += row.value().row(0);
  return make_op(std::move(out), {a, row}, [](const Matrix& g, std::span<Matrix* const> grads) {
    if (grads[0]) *grads[0] += g;
    if (grads[1]) *grads[1] += g.colwise().sum();
  });
}

Tensor mul_col(const Tensor& a, const Tensor& col) {
  if (col.cols() != 1 || col.rows() != a.rows()) {
    throw ContractViolation("mul_col: expects col " + std::to_string(a.rows()) + "x1, got " + shape(col));
  }
  Matrix out = a.value().array().colwise() * col.value().col(0).array();
  return make_op(std::move(out), {a, col}, [a, col](const Matrix& g, std::span<Matrix* const> grads) {
    if (grads[0]) grads[0]->array() += g.array().colwise() * col.value().col(0).array();
    if (grads[1]) *grads[1] += g.cwiseProduct(a.value()).rowwise().sum();
  });
}

Tensor expand_rows(const Tensor& row, Eigen::Index r) {
  if (row.rows() != 1) throw ContractViolation("expand_rows: expects a 1 x c tensor, got " + shape(row));
  Matrix out = row.value().replicate(r, 1);
  return make_op(std::move(out), {row}, [](const Matrix& g, std::span<Matrix* const> grads) {
    if (grads[0]) *grads[0] += g.colwise().sum();
  });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ContractViolation("concat_cols: no inputs");
  Eigen::Index cols = 0;
  for (const auto& p : parts) {
    if (p.rows() != parts[0].rows()) throw ContractViolation("concat_cols: row counts differ");
    cols += p.cols();
  }
  Matrix out(parts[0].rows(), cols);
  std::vector<Eigen::Index> offsets;
  Eigen::Index c = 0;
  for (const auto& p : parts) {
    offsets.push_back(c);
    out.middleCols(c, p.cols()) = p.value();
    c += p.cols();
  }
  std::vector<Eigen::Index> widths;
  for (const auto& p : parts) widths.push_back(p.cols());
  return make_op(std::move(out), parts, [offsets, widths](const Matrix& g, std::span<Matrix* const> grads) {
    for (std::size_t i = 0; i < grads.size(); ++i) {
      if (grads[i]) *grads[i] += g.middleCols(offsets[i], widths[i]);
    }
  });
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ContractViolation("concat_rows: no inputs");
  Eigen::Index rows = 0;
  for (const auto& p : parts) {
    if (p.cols() != parts[0].cols()) throw ContractViolation("concat_rows: column counts differ");
    rows += p.rows();
  }
  Matrix out(rows, parts[0].cols());
  std::vector<Eigen::Index> offsets, heights;
  Eigen::Index r = 0;
  for (const auto& p : parts) {
    offsets.push_back(r);
    heights.push_back(p.rows());
    out.middleRows(r, p.rows()) = p.value();
    r += p.rows();
  }
  return make_op(std::move(out), parts, [offsets, heights](const Matrix& g, std::span<Matrix* const> grads) {
    for (std::size_t i = 0; i < grads.size(); ++i) {
      if (grads[i]) *grads[i] += g.middleRows(offsets[i], heights[i]);
    }
  });
}

Tensor slice_cols(const Tensor& a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.cols()) throw ContractViolation("slice_cols: out of range");
  return make_op(a.value().middleCols(start, count), {a}, [start, count](const Matrix& g, std::span<Matrix* const> grads) {
    if (grads[0]) grads[0]->middleCols(start, count) += g;
  });
}

Tensor slice_rows(const Tensor& a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.rows()) throw ContractViolation("slice_rows: out of range");
  return make_op(a.value().middleRows(start, count), {a}, [start, count](const Matrix& g, std::span<Matrix* const> grads) {
    if (grads[0]) grads[0]->middleRows(start, count) += g;
  });
}

Tensor sum(const Tensor& a) {
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return make_op(std::move(out), {a}, [](const Matrix& g, std::span<Matrix* const> grads) {
    if (grads[0]) grads[0]->array() += g(0, 0);
  });
}

Tensor mean(const Tensor& a) {
  if (a.size() == 0) throw ContractViolation("mean: empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(a.size()));
}

Tensor row_sum(const Tensor& a) {
  Matrix out = a.value().rowwise().sum();
  return make_op(std::move(out), {a}, [](const Matrix& g, std::span<Matrix* const> grads) {
    if (grads[0]) grads[0]->colwise() += g.col(0);
  });
}

Tensor row_mean(const Tensor& a) {
  if (a.cols() == 0) throw ContractViolation("row_mean: no columns");
  return scale(row_sum(a), 1.0 / static_cast<double>(a.cols()));
}

Tensor col_sum(const Tensor& a) {
  Matrix out = a.value().colwise().sum();
  return make_op(std::move(out), {a}, [](const Matrix& g, std::span<Matrix* const> grads) {
    if (grads[0]) grads[0]->rowwise() += g.row(0);
  });
}

Tensor col_mean(const Tensor& a) {
  if (a.rows() == 0) throw ContractViolation("col_mean: no rows");
  return scale(col_sum(a), 1.0 / static_cast<double>(a.rows()));
}

Tensor minimum(const Tensor& a, const Tensor& b) {
  same_shape("minimum", a, b);
  Matrix out = a.value().cwiseMin(b.value());
  return make_op(std::move(out), {a, b}, [a, b](const Matrix& g, std::span<Matrix* const> grads) {
    const auto pick_a = (a.value().array() <= b.value().array()).cast<double>();
    if (grads[0]) grads[0]->array() += g.array() * pick_a;
    if (grads[1]) grads[1]->array() += g.array() * (1.0 - pick_a);
  });
}

Tensor log(const Tensor& a) {
  Matrix out = a.value().array().log();
  return make_op(std::move(out), {a}, [a](const Matrix& g, std::span<Matrix* const> grads) {
    if (grads[0]) grads[0]->array() += g.array() / a.value().array();
  });
}

Tensor exp(const Tensor& a) {
  Matrix out = a.value().array().exp();
  auto node_value = std::make_shared<Matrix>(out);
  return make_op(std::move(out), {a}, [node_value](const Matrix& g, std::span<Matrix* const> grads) {
    if (grads[0]) grads[0]->array() += g.array() * node_value->array();
  });
}

Tensor leaky_relu(const Tensor& a, double slope) {
  Matrix out = a.value().unaryExpr([slope](double x) { return x > 0.0 ? x : slope * x; });
  return make_op(std::move(out), {a}, [a, slope](const Matrix& g, std::span<Matrix* const> grads) {
    if (grads[0]) {
      grads[0]->array() += g.array() * a.value().unaryExpr([slope](double x) { return x > 0.0 ? 1.0 : slope; }).array();
    }
  });
}

Tensor elu(const Tensor& a, double alpha) {
  Matrix out = a.value().unaryExpr([alpha](double x) { return x > 0.0 ? x : alpha * std::expm1(x); });
  return make_op(std::move(out), {a}, [a, alpha](const Matrix& g, std::span<Matrix* const> grads) {
    if (grads[0]) {
      grads[0]->array() +=
          g.array() * a.value().unaryExpr([alpha](double x) { return x > 0.0 ? 1.0 : alpha * std::exp(x); }).array();
    }
  });
}

Tensor gather_rows(const Tensor& a, const std::vector<int>& index) {
  Matrix out(static_cast<Eigen::Index>(index.size()), a.cols());
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] < 0 || index[i] >= a.rows()) throw ContractViolation("gather_rows: index out of range");
    out.row(static_cast<Eigen::Index>(i)) = a.value().row(index[i]);
  }
  return make_op(std::move(out), {a}, [index](const Matrix& g, std::span<Matrix* const> grads) {
    if (!grads[0]) return;
    for (std::size_t i = 0; i < index.size(); ++i) grads[0]->row(index[i]) += g.row(static_cast<Eigen::Index>(i));
  });
}

Tensor segment_sum(const Tensor& a, const std::vector<int>& segment, int num_segments) {
  check_segments("segment_sum", a.rows(), segment, num_segments);
  Matrix out = Matrix::Zero(num_segments, a.cols());
  for (std::size_t i = 0; i < segment.size(); ++i) out.row(segment[i]) += a.value().row(static_cast<Eigen::Index>(i));
  return make_op(std::move(out), {a}, [segment](const Matrix& g, std::span<Matrix* const> grads) {
    if (!grads[0]) return;
    for (std::size_t i = 0; i < segment.size(); ++i) grads[0]->row(static_cast<Eigen::Index>(i)) += g.row(segment[i]);
  });
}

Tensor segment_mean(const Tensor& a, const std::vector<int>& segment, int num_segments) {
  check_segments("segment_mean", a.rows(), segment, num_segments);
  std::vector<double> inv(static_cast<std::size_t>(num_segments), 0.0);
  for (int s : segment) inv[static_cast<std::size_t>(s)] += 1.0;
  for (double& v : inv) v = v > 0.0 ? 1.0 / v : 0.0;
  Matrix out = Matrix::Zero(num_segments, a.cols());
  for (std::size_t i = 0; i < segment.size(); ++i) {
    out.row(segment[i]) += a.value().row(static_cast<Eigen::Index>(i)) * inv[static_cast<std::size_t>(segment[i])];
  }
  return make_op(std::move(out), {a}, [segment, inv](const Matrix& g, std::span<Matrix* const> grads) {
    if (!grads[0]) return;
    for (std::size_t i = 0; i < segment.size(); ++i) {
      grads[0]->row(static_cast<Eigen::Index>(i)) += g.row(segment[i]) * inv[static_cast<std::size_t>(segment[i])];
    }
  });
}

Tensor segment_softmax(const Tensor& x, const std::vector<int>& segment, int num_segments) {
  column_vector("segment_softmax", x);
  check_segments("segment_softmax", x.rows(), segment, num_segments);
  std::vector<double> mx(static_cast<std::size_t>(num_segments), -std::numeric_limits<double>::infinity());
  const auto& v = x.value();
  for (std::size_t i = 0; i < segment.size(); ++i) {
    auto& m = mx[static_cast<std::size_t>(segment[i])];
    m = std::max(m, v(static_cast<Eigen::Index>(i), 0));
  }
  std::vector<double> z(static_cast<std::size_t>(num_segments), 0.0);
  Matrix out(x.rows(), 1);
  for (std::size_t i = 0; i < segment.size(); ++i) {
    const double e = std::exp(v(static_cast<Eigen::Index>(i), 0) - mx[static_cast<std::size_t>(segment[i])]);
    out(static_cast<Eigen::Index>(i), 0) = e;
    z[static_cast<std::size_t>(segment[i])] += e;
  }
  for (std::size_t i = 0; i < segment.size(); ++i) out(static_cast<Eigen::Index>(i), 0) /= z[static_cast<std::size_t>(segment[i])];
  auto probs = std::make_shared<Matrix>(out);
  return make_op(std::move(out), {x}, [segment, num_segments, probs](const Matrix& g, std::span<Matrix* const> grads) {
    if (!grads[0]) return;
    // d x_i = p_i (g_i - sum_j p_j g_j) within the segment.
    std::vector<double> dot(static_cast<std::size_t>(num_segments), 0.0);
    const auto& p = *probs;
    for (std::size_t i = 0; i < segment.size(); ++i) {
      dot[static_cast<std::size_t>(segment[i])] += p(static_cast<Eigen::Index>(i), 0) * g(static_cast<Eigen::Index>(i), 0);
    }
    for (std::size_t i = 0; i < segment.size(); ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      (*grads[0])(r, 0) += p(r, 0) * (g(r, 0) - dot[static_cast<std::size_t>(segment[i])]);
    }
  });
}

Tensor segment_logsumexp(const Tensor& x, const std::vector<int>& segment, int num_segments) {
  column_vector("segment_logsumexp", x);
  check_segments("segment_logsumexp", x.rows(), segment, num_segments);
  const auto& v = x.value();
  std::vector<double> mx(static_cast<std::size_t>(num_segments), -std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < segment.size(); ++i) {
    auto& m = mx[static_cast<std::size_t>(segment[i])];
    m = std::max(m, v(static_cast<Eigen::Index>(i), 0));
  }
  std::vector<double> z(static_cast<std::size_t>(num_segments), 0.0);
  for (std::size_t i = 0; i < segment.size(); ++i) {
    z[static_cast<std::size_t>(segment[i])] += std::exp(v(static_cast<Eigen::Index>(i), 0) - mx[static_cast<std::size_t>(segment[i])]);
  }
  Matrix out(num_segments, 1);
  for (int s = 0; s < num_segments; ++s) {
    const auto su = static_cast<std::size_t>(s);
    out(s, 0) = z[su] > 0.0 ? mx[su] + std::log(z[su]) : -std::numeric_limits<double>::infinity();
  }
  auto lse = std::make_shared<Matrix>(out);
  return make_op(std::move(out), {x}, [x, segment, lse](const Matrix& g, std::span<Matrix* const> grads) {
    if (!grads[0]) return;
    const auto& v = x.value();
    for (std::size_t i = 0; i < segment.size(); ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      (*grads[0])(r, 0) += g(segment[i], 0) * std::exp(v(r, 0) - (*lse)(segment[i], 0));
    }
  });
}

namespace {

// Unmasked entries of a 1 x k row as a column plus index map.
std::vector<int> unmasked(const Tensor& x, const std::vector<std::uint8_t>& mask, const char* op) {
  if (x.rows() != 1 || static_cast<std::size_t>(x.cols()) != mask.size()) {
    throw ContractViolation(std::string(op) + ": expects a 1 x k tensor matching the mask");
  }
  std::vector<int> keep;
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i]) keep.push_back(static_cast<int>(i));
  if (keep.empty()) throw ContractViolation(std::string(op) + ": mask has no unmasked entry");
  return keep;
}

Tensor row_to_col(const Tensor& x) {
  Matrix out = x.value().transpose();
  return make_op(std::move(out), {x}, [](const Matrix& g, std::span<Matrix* const> grads) {
    if (grads[0]) *grads[0] += g.transpose();
  });
}

}  // namespace

Tensor masked_softmax(const Tensor& x, const std::vector<std::uint8_t>& mask) {
  const auto keep = unmasked(x, mask, "masked_softmax");
  const Tensor col = row_to_col(x);
  const Tensor picked = gather_rows(col, keep);
  const Tensor probs = segment_softmax(picked, std::vector<int>(keep.size(), 0), 1);
  // Scatter back: masked positions receive exactly zero.
  std::vector<int> seg(keep.size());
  for (std::size_t i = 0; i < keep.size(); ++i) seg[i] = keep[i];
  const Tensor full = segment_sum(probs, seg, static_cast<int>(mask.size()));
  Matrix out = full.value().transpose();
  return make_op(std::move(out), {full}, [](const Matrix& g, std::span<Matrix* const> grads) {
    if (grads[0]) *grads[0] += g.transpose();
  });
}

Tensor masked_logsumexp(const Tensor& x, const std::vector<std::uint8_t>& mask) {
  const auto keep = unmasked(x, mask, "masked_logsumexp");
  const Tensor picked = gather_rows(row_to_col(x), keep);
  return segment_logsumexp(picked, std::vector<int>(keep.size(), 0), 1);
}

Tensor detach(const Tensor& a) { return Tensor::constant(a.value()); }

}  // namespace cdqac::ad
