#include "pdistill/model/model.h"

#include "pdistill/autodiff/lstm.h"
#include "pdistill/autodiff/ops.h"
#include "pdistill/common/error.h"

namespace pdistill::model {

using namespace pdistill::ad;

SapResult sap_forward(Var features, Var keys, Var w) {
  if (features.dim(0) != keys.dim(0)) {
    throw Error("sap_forward: keys have " + std::to_string(keys.dim(0)) +
                " frames but features have " + std::to_string(features.dim(0)) +
                "; align them with align_frames first");
  }
  const Var alpha = softmax_over_time(matmul(keys, w));
  return {matmul(transpose(alpha), features), alpha};
}

Var align_frames(Var x, int target_T) {
  const int T = x.dim(0);
  if (T == target_T) return x;
  if (target_T < 1 || (target_T != T / 2 && target_T != (T + 1) / 2)) {
    throw Error("align_frames: ratio " + std::to_string(T) + "/" + std::to_string(target_T) +
                " outside [1, 2]");
  }
  return pool_pairs(x, target_T);
}

Var conv_encoder_forward(Var x, const Binding& params, const EncoderConfig& cfg,
                         const std::string& prefix) {
  if (x.dim(1) != cfg.in_channels) {
    throw Error("encoder expects " + std::to_string(cfg.in_channels) + " input channels, got " +
                std::to_string(x.dim(1)));
  }
  Var h = x;
  for (int i = 0; i < cfg.n_layers; ++i) {
    const std::string name = prefix + "conv" + std::to_string(i);
    const int stride = i == 0 ? cfg.downsample_factor : 1;
    h = gelu(conv1d_same(h, params[name + ".weight"], params[name + ".bias"], stride));
  }
  return h;
}

Var prosody_encoder_forward(Var prosody, const Binding& params, const EncoderConfig& cfg) {
  if (cfg.kind != EncoderKind::ProsodyConv) throw Error("prosody_encoder_forward: wrong encoder kind");
  return conv_encoder_forward(prosody, params, cfg);
}

Var acoustic_encoder_forward(Var mel, const Binding& params, const EncoderConfig& cfg) {
  if (cfg.kind != EncoderKind::AcousticConv) throw Error("acoustic_encoder_forward: wrong encoder kind");
  return conv_encoder_forward(mel, params, cfg);
}

std::vector<std::pair<std::string, Shape>> parameter_layout(const ModelConfig& cfg) {
  cfg.validate();
  std::vector<std::pair<std::string, Shape>> out;
  const auto& e = cfg.encoder;
  for (int i = 0; i < e.n_layers; ++i) {
    const std::string name = "encoder.conv" + std::to_string(i);
    const int cin = i == 0 ? e.in_channels : e.hidden_channels;
    out.push_back({name + ".weight", {e.kernel, cin, e.hidden_channels}});
    out.push_back({name + ".bias", {e.hidden_channels}});
  }
  if (cfg.arch == Arch::BaselineLocalConcat) {
    const int H = cfg.lstm_hidden;
    for (int l = 0; l < cfg.lstm_layers; ++l) {
      const std::string name = "lstm.l" + std::to_string(l);
      const int cin = l == 0 ? e.hidden_channels + cfg.prosody_channels : H;
      out.push_back({name + ".w_ih", {cin, 4 * H}});
      out.push_back({name + ".w_hh", {H, 4 * H}});
      out.push_back({name + ".bias", {4 * H}});
    }
  }
  out.push_back({"sap.w", {cfg.sap.key_dim, 1}});
  out.push_back({"head.weight", {cfg.pooled_dim(), cfg.n_intents}});
  out.push_back({"head.bias", {cfg.n_intents}});
  return out;
}

Model::Model(ModelConfig config, ParameterSet params)
    : config_(std::move(config)), params_(std::move(params)) {
  const auto layout = parameter_layout(config_);
  if (layout.size() != params_.size()) {
    throw Error("parameter count " + std::to_string(params_.size()) + " != " +
                std::to_string(layout.size()) + " expected for " + to_string(config_.arch));
  }
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const auto& p = params_.items()[i];
    if (p.name != layout[i].first) {
      throw Error("parameter " + std::to_string(i) + " is '" + p.name + "', expected '" +
                  layout[i].first + "'");
    }
    if (p.value.shape != layout[i].second) {
      throw Error("parameter '" + p.name + "' has shape " + shape_str(p.value.shape) +
                  ", expected " + shape_str(layout[i].second));
    }
  }
}

Model Model::build(const ModelConfig& config, std::uint64_t seed) {
  ParameterSet params;
  for (const auto& [name, shape] : parameter_layout(config)) {
    const bool is_bias = name.ends_with(".bias");
    if (is_bias) {
      params.add(name, Tensor::zeros(shape));
      continue;
    }
    // Conv kernels are K x C_in x C_out; matrices are fan_in x fan_out.
    const int fan_in = shape.size() == 3 ? shape[0] * shape[1] : shape[0];
    params.add(name, uniform_init(shape, fan_in, seed, name));
  }
  return Model(config, std::move(params));
}

int Model::output_frames(int T) const {
  const int d = config_.encoder.downsample_factor;
  return (T + d - 1) / d;
}

ModelOutputs Model::forward(Graph& graph, const Binding& params, const Matrix* mel,
                            const Matrix* prosody) const {
  auto to_var = [&graph](const Matrix* m, const char* what) {
    if (!m) throw Error(std::string("model input '") + what + "' is required");
    return graph.constant(Tensor({m->rows(), m->cols()}, m->data()));
  };
  const Var mel_var = config_.uses_mel() ? to_var(mel, "mel") : Var();
  const Var prosody_var = config_.uses_prosody() ? to_var(prosody, "prosody") : Var();
  return forward(params, mel_var, prosody_var);
}

ModelOutputs Model::forward(const Binding& params, Var mel, Var prosody) const {
  const ModelConfig& c = config_;
  ModelOutputs out;
  if (c.uses_prosody() && prosody.valid() && prosody.dim(1) != c.prosody_channels) {
    throw Error("prosody track has " + std::to_string(prosody.dim(1)) + " channels, expected " +
                std::to_string(c.prosody_channels));
  }
  if (c.arch == Arch::Teacher) {
    out.frame_features = prosody_encoder_forward(prosody, params, c.encoder);
  } else {
    out.frame_features = acoustic_encoder_forward(mel, params, c.encoder);
  }
  const int frames = out.frame_features.dim(0);

  Var aligned_prosody;
  if (c.arch == Arch::BaselineLocalConcat || c.sap.key_source == KeySource::ProsodyFeatures) {
    aligned_prosody = align_frames(prosody, frames);
  }

  Var pooled_input = out.frame_features;
  if (c.arch == Arch::BaselineLocalConcat) {
    std::vector<LstmLayer> layers;
    for (int l = 0; l < c.lstm_layers; ++l) {
      const std::string name = "lstm.l" + std::to_string(l);
      layers.push_back({params[name + ".w_ih"], params[name + ".w_hh"], params[name + ".bias"]});
    }
    pooled_input = lstm_forward(concat_cols(out.frame_features, aligned_prosody), layers, c.lstm_hidden);
  }

  const Var keys = c.sap.key_source == KeySource::ProsodyFeatures ? aligned_prosody : pooled_input;
  const SapResult sap = sap_forward(pooled_input, keys, params["sap.w"]);
  out.attention = sap.attention;
  out.pooled = sap.pooled;
  out.logits = add(matmul(sap.pooled, params["head.weight"]), reshape(params["head.bias"], {1, c.n_intents}));
  return out;
}

}  // namespace pdistill::model
