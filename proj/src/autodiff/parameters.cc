#include "pdistill/autodiff/parameters.h"

#include <cmath>

#include "pdistill/common/error.h"
#include "pdistill/common/rng.h"

namespace pdistill::ad {

bool operator==(const Parameter& a, const Parameter& b) {
  return a.name == b.name && a.value == b.value;
}

void ParameterSet::add(std::string name, Tensor value) {
  if (index_.contains(name)) throw Error("duplicate parameter name '" + name + "'");
  index_.emplace(name, items_.size());
  items_.push_back({std::move(name), std::move(value)});
}

std::size_t ParameterSet::index_of(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw Error("unknown parameter '" + name + "'");
  return it->second;
}

Parameter& ParameterSet::at(const std::string& name) { return items_[index_of(name)]; }
const Parameter& ParameterSet::at(const std::string& name) const {
  return items_[index_of(name)];
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : items_) n += p.value.size();
  return n;
}

std::vector<std::string> ParameterSet::names() const {
  std::vector<std::string> out;
  out.reserve(items_.size());
  for (const auto& p : items_) out.push_back(p.name);
  return out;
}

Tensor uniform_init(const Shape& shape, int fan_in, std::uint64_t seed,
                    const std::string& name) {
  const double s = std::sqrt(1.0 / fan_in);
  Rng rng(derive_seed(seed, name));
  Tensor t = Tensor::zeros(shape);
  for (double& v : t.data) v = rng.uniform(-s, s);
  return t;
}

Binding::Binding(Graph& graph, const ParameterSet& params, bool trainable)
    : params_(&params), trainable_(trainable) {
  vars_.reserve(params.size());
  for (const auto& p : params.items()) {
    vars_.push_back(trainable ? graph.variable(p.value) : graph.constant(p.value));
  }
}

Binding::Binding(const ParameterSet& params, std::vector<Var> vars)
    : params_(&params), vars_(std::move(vars)), trainable_(true) {
  if (vars_.size() != params.size()) {
    throw Error("binding needs " + std::to_string(params.size()) + " vars, got " +
                std::to_string(vars_.size()));
  }
}

Var Binding::operator[](const std::string& name) const {
  return vars_[params_->index_of(name)];
}

GradientSet Binding::gradients() const {
  GradientSet out(vars_.size());
  for (std::size_t i = 0; i < vars_.size(); ++i) {
    const auto& g = vars_[i].grad();
    out[i] = g.empty() ? std::vector<double>(vars_[i].size(), 0.0) : g;
  }
  return out;
}

GradientSet zero_gradients(const ParameterSet& params) {
  GradientSet out;
  out.reserve(params.size());
  for (const auto& p : params.items()) out.emplace_back(p.value.size(), 0.0);
  return out;
}

void accumulate(GradientSet& dst, const GradientSet& src) {
  for (std::size_t i = 0; i < dst.size(); ++i)
    for (std::size_t j = 0; j < dst[i].size(); ++j) dst[i][j] += src[i][j];
}

void scale(GradientSet& g, double s) {
  for (auto& v : g)
    for (double& x : v) x *= s;
}

}  // namespace pdistill::ad
