#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <string>
#include <vector>

namespace pdistill::ad {

using Shape = std::vector<int>;

std::size_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// Plain value tensor: shape plus row-major data. Lives outside any graph.
struct Tensor {
  Shape shape;
  std::vector<double> data;

  Tensor() = default;
  Tensor(Shape s, std::vector<double> d);
  static Tensor zeros(Shape s);

  std::size_t size() const { return data.size(); }
  bool operator==(const Tensor&) const = default;
};

class Graph;

// Handle to a node of a Graph. Cheap to copy; valid as long as the graph is.
class Var {
 public:
  Var() = default;
  Var(Graph* graph, int id) : graph_(graph), id_(id) {}

  bool valid() const { return graph_ != nullptr; }
  Graph& graph() const { return *graph_; }
  int id() const { return id_; }

  const Shape& shape() const;
  int dim(int i) const { return shape()[i]; }
  std::size_t size() const;
  const std::vector<double>& value() const;
  // Accumulated gradient; empty unless the node requires grad and backward ran.
  const std::vector<double>& grad() const;
  bool requires_grad() const;
  double item() const;
  Tensor tensor() const;

 private:
  Graph* graph_ = nullptr;
  int id_ = -1;
};

// Receives the output gradient and pushes contributions into the inputs.
using BackwardFn = std::function<void(Graph&, const std::vector<double>& out_grad)>;

struct Node {
  std::string op;
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
  BackwardFn backward;
};

// Define-by-run tape. Nodes are appended in creation order, which is a
// topological order, so backward is a single reverse sweep.
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Tensor t);
  Var variable(Tensor t);

  // Appends an op result. The backward closure is dropped when no input
  // requires grad, so constant subgraphs never allocate gradient buffers.
  // Throws pdistill::Error if any output value is not finite.
  Var make(std::string op, Shape shape, std::vector<double> value,
           std::initializer_list<Var> inputs, BackwardFn backward);
  Var make(std::string op, Shape shape, std::vector<double> value,
           const std::vector<Var>& inputs, BackwardFn backward);

  // Seeds d(root)/d(root) = 1 and sweeps the tape backwards. root must be a
  // scalar. Gradients accumulate, so call once per graph.
  void backward(Var root);

  const Node& node(int id) const { return nodes_[id]; }
  std::size_t size() const { return nodes_.size(); }

  // Adds g into the gradient buffer of v (no-op if v does not require grad).
  void accumulate(Var v, const std::vector<double>& g);
  // Mutable gradient buffer of v, allocated on demand. Requires grad.
  std::vector<double>& grad_buffer(Var v);

 private:
  // deque: appending never moves existing nodes, so value() references stay valid.
  std::deque<Node> nodes_;
};

}  // namespace pdistill::ad
