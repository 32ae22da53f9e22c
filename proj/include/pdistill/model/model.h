#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "pdistill/autodiff/parameters.h"
#include "pdistill/common/matrix.h"
#include "pdistill/model/config.h"

namespace pdistill::model {

using ad::Binding;
using ad::ParameterSet;
using ad::Shape;
using ad::Var;

// Attention-pooled utterance vector plus the weights that produced it.
struct SapResult {
  Var pooled;     // z_U, [1 x H]
  Var attention;  // alpha, [T x 1], sums to 1
};

// Self-attention pooling: alpha = softmax(keys * w), pooled = alpha^T features.
// keys and features must have the same row count.
SapResult sap_forward(Var features, Var keys, Var w);

// Matches x[T x C] to target_T rows: identity when equal, otherwise mean of
// consecutive frame pairs (a trailing odd frame is dropped, or kept alone
// when target_T = ceil(T/2)). Throws unless target_T is T, floor(T/2) or
// ceil(T/2).
Var align_frames(Var x, int target_T);

// Three conv1d_same + GELU layers named `<prefix>conv<i>.{weight,bias}`.
// The first layer is strided by cfg.downsample_factor.
Var conv_encoder_forward(Var x, const Binding& params, const EncoderConfig& cfg,
                         const std::string& prefix = "encoder.");
Var prosody_encoder_forward(Var prosody, const Binding& params, const EncoderConfig& cfg);
Var acoustic_encoder_forward(Var mel, const Binding& params, const EncoderConfig& cfg);

// Name and shape of every parameter an architecture owns, in canonical order.
std::vector<std::pair<std::string, Shape>> parameter_layout(const ModelConfig& cfg);

struct ModelOutputs {
  Var frame_features;  // z_F of the encoder, [T' x H]
  Var attention;       // alpha, [T' x 1]
  Var pooled;          // z_U, [1 x pooled_dim]
  Var logits;          // [1 x n_intents]
};

class Model {
 public:
  // Validates that params matches parameter_layout(config).
  Model(ModelConfig config, ParameterSet params);

  // Weights ~ Uniform(+-sqrt(1/fan_in)) from per-name seeded streams, biases 0.
  static Model build(const ModelConfig& config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }

  // mel is [T x 80]; prosody is the normalized [T x 6] track of the same
  // utterance. Either may be null when the architecture does not read it.
  ModelOutputs forward(ad::Graph& graph, const Binding& params, const Matrix* mel,
                       const Matrix* prosody) const;
  // Same, with inputs already on the graph.
  ModelOutputs forward(const Binding& params, Var mel, Var prosody) const;

  // Frames after the encoder for a T-frame input.
  int output_frames(int T) const;

 private:
  ModelConfig config_;
  ParameterSet params_;
};

}  // namespace pdistill::model
