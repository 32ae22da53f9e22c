#include "pdistill/autodiff/adam.h"

#include <cmath>

#include "pdistill/common/error.h"

namespace pdistill::ad {

double LearningRates::for_param(const std::string& name) const {
  double lr = base;
  std::size_t best = 0;
  for (const auto& [prefix, value] : by_prefix) {
    if (prefix.size() >= best && name.starts_with(prefix)) {
      best = prefix.size();
      lr = value;
    }
  }
  return lr;
}

void adam_step(ParameterSet& params, const GradientSet& grads, AdamState& state,
               const LearningRates& lr) {
  auto& items = params.items();
  if (grads.size() != items.size()) {
    throw Error("adam_step: " + std::to_string(grads.size()) + " gradients for " +
                std::to_string(items.size()) + " parameters");
  }
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (grads[i].size() != items[i].value.size()) {
      throw Error("adam_step: gradient shape mismatch for '" + items[i].name + "'");
    }
    for (double g : grads[i]) {
      if (!std::isfinite(g)) {
        throw Error("adam_step: non-finite gradient for parameter '" + items[i].name + "'");
      }
    }
  }
  if (state.m.empty()) {
    for (const auto& p : items) {
      state.m.emplace_back(p.value.size(), 0.0);
      state.v.emplace_back(p.value.size(), 0.0);
    }
  }
  if (state.m.size() != items.size()) {
    throw Error("adam_step: optimizer state does not match parameter set");
  }

  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < items.size(); ++i) {
    const double rate = lr.for_param(items[i].name);
    auto& w = items[i].value.data;
    auto& m = state.m[i];
    auto& v = state.v[i];
    const auto& g = grads[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g[j];
      v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g[j] * g[j];
      const double m_hat = m[j] / c1;
      const double v_hat = v[j] / c2;
      w[j] -= rate * m_hat / (std::sqrt(v_hat) + state.eps);
    }
  }
}

}  // namespace pdistill::ad
