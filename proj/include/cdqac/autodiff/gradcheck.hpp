#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "cdqac/autodiff/tensor.hpp"

namespace cdqac::ad {

struct GradcheckResult {
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  long checked = 0;
};

struct GradcheckOptions {
  double h = 1e-5;
  // Relative error is |analytic - numeric| / max(|analytic|, |numeric|, floor).
  double floor = 1e-3;
  // Check at most this many coordinates per leaf (evenly strided); 0 checks all.
  long max_per_leaf = 0;
};

// Compares backward() gradients of the scalar f() with central differences, perturbing
// the leaves' values in place (restored afterwards).
GradcheckResult gradcheck(const std::function<Tensor()>& f, const std::vector<Tensor>& leaves,
                          GradcheckOptions options = {});

}  // namespace cdqac::ad

namespace cdqac::ad {

struct PrimitiveCheck {
  std::string name;
  GradcheckResult result;
};

// Finite-difference check of every primitive at random points drawn from `seed`.
std::vector<PrimitiveCheck> check_primitives(std::uint64_t seed);

}  // namespace cdqac::ad
