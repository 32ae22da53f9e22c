#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "pdistill/autodiff/tensor.h"

namespace pdistill::ad {

using ScalarFunction = std::function<Var(Graph&, const std::vector<Var>&)>;

struct GradCheckOptions {
  double h = 1e-4;
  // Check at most this many coordinates per input, sampled with `seed`.
  // Zero or negative checks every coordinate.
  int max_coords_per_input = 0;
  std::uint64_t seed = 0;
};

struct GradCheckResult {
  double max_rel_err = 0.0;
  int worst_input = -1;
  std::size_t worst_index = 0;
  double autodiff = 0.0;
  double numeric = 0.0;
  std::size_t coords_checked = 0;
};

// Compares reverse-mode gradients of f at `inputs` with central differences.
// rel_err = |g_ad - g_fd| / max(1e-8, |g_ad| + |g_fd|).
GradCheckResult grad_check(const ScalarFunction& f, const std::vector<Tensor>& inputs,
                           const GradCheckOptions& options = {});

}  // namespace pdistill::ad
