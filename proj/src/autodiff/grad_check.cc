#include "pdistill/autodiff/grad_check.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pdistill/common/rng.h"

namespace pdistill::ad {

namespace {

double evaluate(const ScalarFunction& f, const std::vector<Tensor>& inputs) {
  Graph g;
  std::vector<Var> vars;
  vars.reserve(inputs.size());
  for (const auto& t : inputs) vars.push_back(g.constant(t));
  return f(g, vars).item();
}

}  // namespace

GradCheckResult grad_check(const ScalarFunction& f, const std::vector<Tensor>& inputs,
                           const GradCheckOptions& options) {
  std::vector<std::vector<double>> analytic;
  {
    Graph g;
    std::vector<Var> vars;
    for (const auto& t : inputs) vars.push_back(g.variable(t));
    g.backward(f(g, vars));
    for (const Var& v : vars) {
      analytic.push_back(v.grad().empty() ? std::vector<double>(v.size(), 0.0) : v.grad());
    }
  }

  GradCheckResult result;
  Rng rng(options.seed);
  std::vector<Tensor> probe = inputs;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    std::vector<std::size_t> coords(inputs[k].size());
    std::iota(coords.begin(), coords.end(), 0);
    if (options.max_coords_per_input > 0 &&
        coords.size() > static_cast<std::size_t>(options.max_coords_per_input)) {
      for (std::size_t i = 0; i < coords.size(); ++i) {
        std::swap(coords[i], coords[i + rng.below(coords.size() - i)]);
      }
      coords.resize(options.max_coords_per_input);
    }
    for (std::size_t idx : coords) {
      const double x0 = inputs[k].data[idx];
      probe[k].data[idx] = x0 + options.h;
      const double fp = evaluate(f, probe);
      probe[k].data[idx] = x0 - options.h;
      const double fm = evaluate(f, probe);
      probe[k].data[idx] = x0;

      const double numeric = (fp - fm) / (2.0 * options.h);
      const double ad = analytic[k][idx];
      const double err =
          std::abs(ad - numeric) / std::max(1e-8, std::abs(ad) + std::abs(numeric));
      ++result.coords_checked;
      if (err > result.max_rel_err || result.worst_input < 0) {
        result.max_rel_err = std::max(result.max_rel_err, err);
        result.worst_input = static_cast<int>(k);
        result.worst_index = idx;
        result.autodiff = ad;
        result.numeric = numeric;
      }
    }
  }
  return result;
}

}  // namespace pdistill::ad
