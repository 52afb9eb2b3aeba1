#pragma once

#include <cstdint>
#include <vector>

#include "cdqac/autodiff/tensor.hpp"

namespace cdqac::ad {

// Shapes are checked; mismatches throw ContractViolation. Broadcasting only happens
// where the name says so (add_row, mul_col, expand_rows).

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double s);
Tensor neg(const Tensor& a);

// a [r x c] + row [1 x c] on every row.
Tensor add_row(const Tensor& a, const Tensor& row);
// a [r x c] * col [r x 1] on every column.
Tensor mul_col(const Tensor& a, const Tensor& col);
// row [1 x c] repeated r times.
Tensor expand_rows(const Tensor& row, Eigen::Index r);

Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor slice_cols(const Tensor& a, Eigen::Index start, Eigen::Index count);
Tensor slice_rows(const Tensor& a, Eigen::Index start, Eigen::Index count);

Tensor sum(const Tensor& a);       // 1x1
Tensor mean(const Tensor& a);      // 1x1
Tensor row_sum(const Tensor& a);   // r x 1
Tensor row_mean(const Tensor& a);  // r x 1
Tensor col_sum(const Tensor& a);   // 1 x c
Tensor col_mean(const Tensor& a);  // 1 x c

// Elementwise pairwise minimum; ties send the gradient to `a`.
Tensor minimum(const Tensor& a, const Tensor& b);
Tensor log(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor leaky_relu(const Tensor& a, double slope = 0.01);
Tensor elu(const Tensor& a, double alpha = 1.0);

// out[i] = a[index[i]].
Tensor gather_rows(const Tensor& a, const std::vector<int>& index);
// out[s] = sum of rows i with segment[i] == s; num_segments rows.
Tensor segment_sum(const Tensor& a, const std::vector<int>& segment, int num_segments);
// Like segment_sum divided by the segment size; empty segments give zero rows.
Tensor segment_mean(const Tensor& a, const std::vector<int>& segment, int num_segments);
// x is [r x 1]; softmax within each segment.
Tensor segment_softmax(const Tensor& x, const std::vector<int>& segment, int num_segments);
// x is [r x 1]; log-sum-exp within each segment -> [num_segments x 1].
Tensor segment_logsumexp(const Tensor& x, const std::vector<int>& segment, int num_segments);

// x is [1 x k]; masked entries (mask == 0) get exactly zero probability and zero gradient.
Tensor masked_softmax(const Tensor& x, const std::vector<std::uint8_t>& mask);
// x is [1 x k] -> [1 x 1] log-sum-exp over unmasked entries.
Tensor masked_logsumexp(const Tensor& x, const std::vector<std::uint8_t>& mask);

// Same value, no gradient.
Tensor detach(const Tensor& a);

}  // namespace cdqac::ad
