#pragma once

#include <span>

#include "pdistill/autodiff/tensor.h"

namespace pdistill::ad {

// One LSTM layer. Gate blocks are laid out [input | forget | cell | output]
// along the 4H axis.
struct LstmLayer {
  Var w_ih;  // [C_in x 4H]
  Var w_hh;  // [H x 4H]
  Var bias;  // [4H]
};

// Stacked unidirectional LSTM with zero initial state. x is [T x C]; returns
// the top layer's hidden sequence [T x H].
Var lstm_forward(Var x, std::span<const LstmLayer> layers, int hidden);

}  // namespace pdistill::ad
