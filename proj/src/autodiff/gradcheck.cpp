#include "cdqac/autodiff/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "cdqac/errors.hpp"

namespace cdqac::ad {

GradcheckResult gradcheck(const std::function<Tensor()>& f, const std::vector<Tensor>& leaves,
                          GradcheckOptions options) {
  for (auto leaf : leaves) leaf.zero_grad();
  const Tensor out = f();
  backward(out);
  std::vector<Matrix> analytic;
  for (const auto& leaf : leaves) analytic.push_back(leaf.grad());

  GradcheckResult res;
  NoGradGuard guard;
  for (std::size_t li = 0; li < leaves.size(); ++li) {
    Matrix& w = leaves[li].node()->value;
    const long n = static_cast<long>(w.size());
    const long stride = options.max_per_leaf > 0 ? std::max(1L, n / options.max_per_leaf) : 1L;
    for (long idx = 0; idx < n; idx += stride) {
      double& x = w.data()[idx];
      const double saved = x;
      x = saved + options.h;
      const double up = f().item();
      x = saved - options.h;
      const double down = f().item();
      x = saved;
      const double numeric = (up - down) / (2.0 * options.h);
      const double a = analytic[li].data()[idx];
      const double abs_err = std::abs(a - numeric);
      const double denom = std::max({std::abs(a), std::abs(numeric), options.floor});
      res.max_abs_error = std::max(res.max_abs_error, abs_err);
      res.max_rel_error = std::max(res.max_rel_error, abs_err / denom);
      ++res.checked;
    }
  }
  return res;
}

}  // namespace cdqac::ad
