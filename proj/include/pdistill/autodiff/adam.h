#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "pdistill/autodiff/parameters.h"

namespace pdistill::ad {

// Learning rate per parameter, chosen by longest matching name prefix.
struct LearningRates {
  double base = 1e-3;
  std::vector<std::pair<std::string, double>> by_prefix;

  double for_param(const std::string& name) const;
};

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::int64_t step = 0;
  // First and second moments, aligned with the ParameterSet order.
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
};

// One Adam update with bias correction. Throws if a gradient is not finite,
// naming the parameter, before touching any state.
void adam_step(ParameterSet& params, const GradientSet& grads, AdamState& state,
               const LearningRates& lr);

}  // namespace pdistill::ad
