#pragma once

#include <span>
#include <vector>

#include "pdistill/autodiff/tensor.h"

namespace pdistill::ad {

// All ops record onto the graph of their first input and throw
// pdistill::Error on shape mismatch. Reductions accumulate in double.

// a[m x k] * b[k x n] -> [m x n]
Var matmul(Var a, Var b);
// Swap the two axes of a 2-D tensor.
Var transpose(Var a);
Var reshape(Var a, Shape shape);

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
// x[T x C] + bias[C] broadcast over rows.
Var add_bias(Var x, Var bias);

Var sigmoid(Var x);
Var tanh(Var x);
// Tanh approximation 0.5x(1 + tanh(sqrt(2/pi)(x + 0.044715x^3))).
Var gelu(Var x);

// Softmax over all elements of x (a length-T score vector of any shape),
// shift-stabilized by the max. Output has the shape of x.
Var softmax_over_time(Var x);
// x / sum(x).
Var normalize_sum(Var x);

Var sum(Var x);
Var mean(Var x);

// -log softmax(logits)[label]; logits has K elements.
Var cross_entropy(Var logits, int label);
// mean((a - b)^2) over all elements. Shapes must match.
Var mse(Var a, Var b);

Var slice_rows(Var x, int begin, int end);
Var slice_cols(Var x, int begin, int end);
Var concat_cols(Var a, Var b);
Var concat_rows(std::span<const Var> parts);

// 1-D convolution over time. x[T x C_in], kernel[K x C_in x C_out],
// bias[C_out]. Zero "same" padding of (K-1)/2 each side; output row t reads
// input rows centered on t*stride, so T_out = ceil(T / stride). K must be odd.
Var conv1d_same(Var x, Var kernel, Var bias, int stride = 1);

// Mean of consecutive row pairs: output row i averages input rows
// [2i, min(2i + 2, T)). Produces `rows` output rows; requires
// ceil(T/2) >= rows >= floor(T/2).
Var pool_pairs(Var x, int rows);

// Constant copy of x, cut off from gradient flow.
Var detach(Var x);

}  // namespace pdistill::ad
