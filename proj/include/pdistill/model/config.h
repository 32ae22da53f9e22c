#pragma once

#include <string>

#include "json.hpp"

namespace pdistill::model {

enum class Arch { Teacher, Student, BaselinePlain, BaselineLocalConcat };
enum class EncoderKind { AcousticConv, ProsodyConv };
enum class KeySource { SelfFeatures, ProsodyFeatures };

std::string to_string(Arch a);
std::string to_string(EncoderKind k);
std::string to_string(KeySource k);
Arch parse_arch(const std::string& s);
EncoderKind parse_encoder_kind(const std::string& s);
KeySource parse_key_source(const std::string& s);

struct EncoderConfig {
  EncoderKind kind = EncoderKind::AcousticConv;
  int in_channels = 80;
  int hidden_channels = 64;
  int n_layers = 3;
  int kernel = 5;
  // Stride of the first conv layer; acoustic encoders only.
  int downsample_factor = 2;

  void validate() const;
  bool operator==(const EncoderConfig&) const = default;
};

struct SapConfig {
  KeySource key_source = KeySource::SelfFeatures;
  int key_dim = 64;

  bool operator==(const SapConfig&) const = default;
};

struct ModelConfig {
  Arch arch = Arch::Teacher;
  int n_intents = 8;
  EncoderConfig encoder;
  SapConfig sap;
  int lstm_hidden = 32;
  int lstm_layers = 2;
  int prosody_channels = 6;

  void validate() const;
  // Feature width the SAP layer pools over.
  int pooled_dim() const;
  bool uses_mel() const { return encoder.kind == EncoderKind::AcousticConv; }
  bool uses_prosody() const;

  bool operator==(const ModelConfig&) const = default;
};

void to_json(nlohmann::json& j, const EncoderConfig& c);
void from_json(const nlohmann::json& j, EncoderConfig& c);
void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

// Dimension knobs shared by all architectures.
struct ModelDims {
  int hidden = 64;
  int mel_channels = 80;
  int prosody_channels = 6;
  int downsample = 2;
  int lstm_hidden = 32;
  int kernel = 5;
  int n_layers = 3;
  bool operator==(const ModelDims&) const = default;
};

// Architecture wiring. prosody_attention switches the SAP keys to the raw
// prosody track and is only meaningful for the acoustic architectures.
ModelConfig make_model_config(Arch arch, const ModelDims& dims, int n_intents,
                              bool prosody_attention = false);

}  // namespace pdistill::model
