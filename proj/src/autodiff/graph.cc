#include <cmath>
#include <sstream>

#include "pdistill/autodiff/tensor.h"
#include "pdistill/common/error.h"

namespace pdistill::ad {

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (int d : shape) n *= static_cast<std::size_t>(d);
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
  if (data.size() != numel(shape)) {
    throw Error("tensor data length " + std::to_string(data.size()) +
                " does not match shape " + shape_str(shape));
  }
}

Tensor Tensor::zeros(Shape s) {
  const std::size_t n = numel(s);
  return Tensor(std::move(s), std::vector<double>(n, 0.0));
}

const Shape& Var::shape() const { return graph_->node(id_).shape; }
std::size_t Var::size() const { return graph_->node(id_).value.size(); }
const std::vector<double>& Var::value() const { return graph_->node(id_).value; }
const std::vector<double>& Var::grad() const { return graph_->node(id_).grad; }
bool Var::requires_grad() const { return graph_->node(id_).requires_grad; }

double Var::item() const {
  const auto& v = value();
  if (v.size() != 1) {
    throw Error("item() on non-scalar of shape " + shape_str(shape()));
  }
  return v[0];
}

Tensor Var::tensor() const { return Tensor(shape(), value()); }

namespace {

void check_finite(const std::string& op, const std::vector<double>& value) {
  for (std::size_t i = 0; i < value.size(); ++i) {
    if (!std::isfinite(value[i])) {
      throw Error("op '" + op + "' produced a non-finite value at index " +
                  std::to_string(i));
    }
  }
}

}  // namespace

Var Graph::constant(Tensor t) {
  check_finite("constant", t.data);
  Node n;
  n.op = "constant";
  n.shape = std::move(t.shape);
  n.value = std::move(t.data);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Graph::variable(Tensor t) {
  check_finite("variable", t.data);
  Node n;
  n.op = "variable";
  n.shape = std::move(t.shape);
  n.value = std::move(t.data);
  n.requires_grad = true;
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Graph::make(std::string op, Shape shape, std::vector<double> value,
                std::initializer_list<Var> inputs, BackwardFn backward) {
  return make(std::move(op), std::move(shape), std::move(value),
              std::vector<Var>(inputs), std::move(backward));
}

Var Graph::make(std::string op, Shape shape, std::vector<double> value,
                const std::vector<Var>& inputs, BackwardFn backward) {
  check_finite(op, value);
  if (value.size() != numel(shape)) {
    throw Error("op '" + op + "' value length mismatch for shape " + shape_str(shape));
  }
  Node n;
  n.op = std::move(op);
  n.shape = std::move(shape);
  n.value = std::move(value);
  for (const Var& in : inputs) {
    if (&in.graph() != this) throw Error("op '" + n.op + "' mixes graphs");
    n.requires_grad = n.requires_grad || in.requires_grad();
  }
  if (n.requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

std::vector<double>& Graph::grad_buffer(Var v) {
  Node& n = nodes_[v.id()];
  if (n.grad.empty()) n.grad.assign(n.value.size(), 0.0);
  return n.grad;
}

void Graph::accumulate(Var v, const std::vector<double>& g) {
  if (!v.requires_grad()) return;
  auto& buf = grad_buffer(v);
  for (std::size_t i = 0; i < buf.size(); ++i) buf[i] += g[i];
}

void Graph::backward(Var root) {
  if (root.size() != 1) {
    throw Error("backward needs a scalar root, got shape " + shape_str(root.shape()));
  }
  if (!root.requires_grad()) return;
  grad_buffer(root)[0] += 1.0;
  for (int id = root.id(); id >= 0; --id) {
    Node& n = nodes_[id];
    if (!n.backward || n.grad.empty()) continue;
    // No nodes are appended during the sweep, so this reference stays valid.
    n.backward(*this, n.grad);
  }
}

}  // namespace pdistill::ad
