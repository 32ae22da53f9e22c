#include "pdistill/model/config.h"

#include "pdistill/common/error.h"

namespace pdistill::model {

std::string to_string(Arch a) {
  switch (a) {
    case Arch::Teacher: return "Teacher";
    case Arch::Student: return "Student";
    case Arch::BaselinePlain: return "BaselinePlain";
    case Arch::BaselineLocalConcat: return "BaselineLocalConcat";
  }
  return "?";
}

std::string to_string(EncoderKind k) {
  return k == EncoderKind::AcousticConv ? "AcousticConv" : "ProsodyConv";
}

std::string to_string(KeySource k) {
  return k == KeySource::SelfFeatures ? "SelfFeatures" : "ProsodyFeatures";
}

Arch parse_arch(const std::string& s) {
  for (Arch a : {Arch::Teacher, Arch::Student, Arch::BaselinePlain, Arch::BaselineLocalConcat}) {
    if (to_string(a) == s) return a;
  }
  throw ConfigError("unknown arch '" + s + "'");
}

EncoderKind parse_encoder_kind(const std::string& s) {
  if (s == "AcousticConv") return EncoderKind::AcousticConv;
  if (s == "ProsodyConv") return EncoderKind::ProsodyConv;
  throw ConfigError("unknown encoder kind '" + s + "'");
}

KeySource parse_key_source(const std::string& s) {
  if (s == "SelfFeatures") return KeySource::SelfFeatures;
  if (s == "ProsodyFeatures") return KeySource::ProsodyFeatures;
  throw ConfigError("unknown key source '" + s + "'");
}

void EncoderConfig::validate() const {
  if (kernel % 2 == 0 || kernel < 1) {
    throw ConfigError("encoder kernel must be odd, got " + std::to_string(kernel));
  }
  if (downsample_factor != 1 && downsample_factor != 2) {
    throw ConfigError("downsample_factor must be 1 or 2");
  }
  if (kind == EncoderKind::ProsodyConv && downsample_factor != 1) {
    throw ConfigError("prosody encoder preserves frame count; downsample_factor must be 1");
  }
  if (in_channels < 1 || hidden_channels < 1 || n_layers < 1) {
    throw ConfigError("encoder dimensions must be positive");
  }
}

int ModelConfig::pooled_dim() const {
  return arch == Arch::BaselineLocalConcat ? lstm_hidden : encoder.hidden_channels;
}

bool ModelConfig::uses_prosody() const {
  return encoder.kind == EncoderKind::ProsodyConv || arch == Arch::BaselineLocalConcat ||
         sap.key_source == KeySource::ProsodyFeatures;
}

void ModelConfig::validate() const {
  encoder.validate();
  if (n_intents <= 1) throw ConfigError("n_intents must be > 1");
  const bool teacher = arch == Arch::Teacher;
  if (teacher != (encoder.kind == EncoderKind::ProsodyConv)) {
    throw ConfigError(to_string(arch) + " cannot use a " + to_string(encoder.kind) + " encoder");
  }
  if (teacher && sap.key_source != KeySource::SelfFeatures) {
    throw ConfigError("Teacher pools with SelfFeatures keys");
  }
  const int expected_key = sap.key_source == KeySource::ProsodyFeatures ? prosody_channels : pooled_dim();
  if (sap.key_dim != expected_key) {
    throw ConfigError("sap key_dim " + std::to_string(sap.key_dim) + " != feature dim " +
                      std::to_string(expected_key) + " of the key source");
  }
  if (arch == Arch::BaselineLocalConcat && (lstm_hidden < 1 || lstm_layers < 1)) {
    throw ConfigError("LSTM dimensions must be positive");
  }
}

void to_json(nlohmann::json& j, const EncoderConfig& c) {
  j = {{"kind", to_string(c.kind)},
       {"in_channels", c.in_channels},
       {"hidden_channels", c.hidden_channels},
       {"n_layers", c.n_layers},
       {"kernel", c.kernel},
       {"downsample_factor", c.downsample_factor}};
}

void from_json(const nlohmann::json& j, EncoderConfig& c) {
  c.kind = parse_encoder_kind(j.at("kind").get<std::string>());
  j.at("in_channels").get_to(c.in_channels);
  j.at("hidden_channels").get_to(c.hidden_channels);
  j.at("n_layers").get_to(c.n_layers);
  j.at("kernel").get_to(c.kernel);
  j.at("downsample_factor").get_to(c.downsample_factor);
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = {{"arch", to_string(c.arch)},
       {"n_intents", c.n_intents},
       {"encoder", c.encoder},
       {"sap", {{"key_source", to_string(c.sap.key_source)}, {"key_dim", c.sap.key_dim}}},
       {"lstm_hidden", c.lstm_hidden},
       {"lstm_layers", c.lstm_layers},
       {"prosody_channels", c.prosody_channels}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  c.arch = parse_arch(j.at("arch").get<std::string>());
  j.at("n_intents").get_to(c.n_intents);
  j.at("encoder").get_to(c.encoder);
  c.sap.key_source = parse_key_source(j.at("sap").at("key_source").get<std::string>());
  j.at("sap").at("key_dim").get_to(c.sap.key_dim);
  j.at("lstm_hidden").get_to(c.lstm_hidden);
  j.at("lstm_layers").get_to(c.lstm_layers);
  j.at("prosody_channels").get_to(c.prosody_channels);
}

ModelConfig make_model_config(Arch arch, const ModelDims& dims, int n_intents,
                              bool prosody_attention) {
  ModelConfig c;
  c.arch = arch;
  c.n_intents = n_intents;
  c.prosody_channels = dims.prosody_channels;
  c.lstm_hidden = dims.lstm_hidden;
  c.encoder.hidden_channels = dims.hidden;
  c.encoder.kernel = dims.kernel;
  c.encoder.n_layers = dims.n_layers;
  if (arch == Arch::Teacher) {
    if (prosody_attention) throw ConfigError("prosody_attention does not apply to the Teacher");
    c.encoder.kind = EncoderKind::ProsodyConv;
    c.encoder.in_channels = dims.prosody_channels;
    c.encoder.downsample_factor = 1;
  } else {
    c.encoder.kind = EncoderKind::AcousticConv;
    c.encoder.in_channels = dims.mel_channels;
    c.encoder.downsample_factor = dims.downsample;
  }
  c.sap.key_source = prosody_attention ? KeySource::ProsodyFeatures : KeySource::SelfFeatures;
  c.sap.key_dim = prosody_attention ? dims.prosody_channels : c.pooled_dim();
  c.validate();
  return c;
}

}  // namespace pdistill::model
