#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "pdistill/autodiff/tensor.h"

namespace pdistill::ad {

struct Parameter {
  std::string name;
  Tensor value;
};

// Ordered, uniquely named collection of trainable arrays.
class ParameterSet {
 public:
  void add(std::string name, Tensor value);

  bool contains(const std::string& name) const { return index_.contains(name); }
  Parameter& at(const std::string& name);
  const Parameter& at(const std::string& name) const;
  std::size_t index_of(const std::string& name) const;

  std::vector<Parameter>& items() { return items_; }
  const std::vector<Parameter>& items() const { return items_; }
  std::size_t size() const { return items_.size(); }
  // Total number of scalars.
  std::size_t scalar_count() const;
  std::vector<std::string> names() const;

  bool operator==(const ParameterSet& other) const { return items_ == other.items_; }

 private:
  std::vector<Parameter> items_;
  std::map<std::string, std::size_t> index_;
};

bool operator==(const Parameter& a, const Parameter& b);

// Uniform(-s, s) with s = sqrt(1 / fan_in), drawn from a stream derived from
// (seed, name) so each parameter's init is independent of declaration order.
Tensor uniform_init(const Shape& shape, int fan_in, std::uint64_t seed,
                    const std::string& name);

// Parameters placed on a graph. Trainable bindings are gradient leaves;
// frozen ones are constants and never get gradient buffers.
class Binding {
 public:
  Binding(Graph& graph, const ParameterSet& params, bool trainable);
  // Wraps vars already on a graph, one per parameter in set order.
  Binding(const ParameterSet& params, std::vector<Var> vars);

  Var operator[](const std::string& name) const;
  bool trainable() const { return trainable_; }

  // Gradient of every parameter in set order; zeros where none flowed.
  std::vector<std::vector<double>> gradients() const;

 private:
  const ParameterSet* params_;
  std::vector<Var> vars_;
  bool trainable_;
};

using GradientSet = std::vector<std::vector<double>>;

GradientSet zero_gradients(const ParameterSet& params);
// dst += src elementwise.
void accumulate(GradientSet& dst, const GradientSet& src);
void scale(GradientSet& g, double s);

}  // namespace pdistill::ad
