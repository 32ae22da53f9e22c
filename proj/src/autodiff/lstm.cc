#include "pdistill/autodiff/lstm.h"

#include <string>
#include <vector>

#include "pdistill/autodiff/ops.h"
#include "pdistill/common/error.h"

namespace pdistill::ad {

namespace {

Var layer_forward(Var x, const LstmLayer& p, int hidden) {
  const int T = x.dim(0);
  const int H = hidden;
  if (p.w_ih.dim(1) != 4 * H || p.w_hh.dim(0) != H || p.w_hh.dim(1) != 4 * H ||
      p.bias.size() != static_cast<std::size_t>(4 * H) || p.w_ih.dim(0) != x.dim(1)) {
    throw Error("lstm: parameter shapes " + shape_str(p.w_ih.shape()) + ", " +
                shape_str(p.w_hh.shape()) + ", " + shape_str(p.bias.shape()) +
                " do not fit input " + shape_str(x.shape()) + " with hidden " +
                std::to_string(H));
  }
  Graph& g = x.graph();
  // Input projections for all steps at once.
  const Var projected = add_bias(matmul(x, p.w_ih), p.bias);
  Var h = g.constant(Tensor::zeros({1, H}));
  Var c = g.constant(Tensor::zeros({1, H}));
  std::vector<Var> outputs;
  outputs.reserve(T);
  for (int t = 0; t < T; ++t) {
    const Var gates = add(slice_rows(projected, t, t + 1), matmul(h, p.w_hh));
    const Var i = sigmoid(slice_cols(gates, 0, H));
    const Var f = sigmoid(slice_cols(gates, H, 2 * H));
    const Var cand = tanh(slice_cols(gates, 2 * H, 3 * H));
    const Var o = sigmoid(slice_cols(gates, 3 * H, 4 * H));
    c = add(mul(f, c), mul(i, cand));
    h = mul(o, tanh(c));
    outputs.push_back(h);
  }
  return concat_rows(outputs);
}

}  // namespace

Var lstm_forward(Var x, std::span<const LstmLayer> layers, int hidden) {
  if (x.shape().size() != 2) {
    throw Error("lstm: expected [T x C] input, got " + shape_str(x.shape()));
  }
  if (layers.empty()) throw Error("lstm: no layers");
  Var out = x;
  for (const LstmLayer& layer : layers) out = layer_forward(out, layer, hidden);
  return out;
}

}  // namespace pdistill::ad
