#include "pdistill/train/config.h"

#include <algorithm>
#include <cstdio>

#include "pdistill/common/error.h"
#include "pdistill/common/rng.h"

namespace pdistill::train {

using nlohmann::json;

namespace {

template <typename E>
E parse_enum(const std::string& s, std::initializer_list<std::pair<const char*, E>> options,
             const char* what) {
  std::string names;
  for (const auto& [name, value] : options) {
    if (s == name) return value;
    names += names.empty() ? name : std::string(", ") + name;
  }
  throw ConfigError(std::string("unknown ") + what + " '" + s + "' (expected one of " + names + ")");
}

template <typename T>
T get_field(const json& j, const char* key, const std::string& where) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

template <typename T>
void read_opt(const json& j, const char* key, T& out, const std::string& where) {
  if (j.contains(key)) out = get_field<T>(j, key, where);
}

}  // namespace

std::string to_string(MtlScheme s) { return s == MtlScheme::Fixed ? "Fixed" : "RandomPerStep"; }

std::string to_string(DistillParts p) {
  switch (p) {
    case DistillParts::AttentionOnly: return "AttentionOnly";
    case DistillParts::FeatureOnly: return "FeatureOnly";
    case DistillParts::Both: return "Both";
  }
  return "?";
}

std::string to_string(DistillLevel l) { return l == DistillLevel::FrameLevel ? "FrameLevel" : "Global"; }

std::string to_string(TeacherMode m) {
  return m == TeacherMode::PretrainedFrozen ? "PretrainedFrozen" : "JointFromScratch";
}

MtlScheme parse_mtl_scheme(const std::string& s) {
  return parse_enum<MtlScheme>(s, {{"Fixed", MtlScheme::Fixed}, {"RandomPerStep", MtlScheme::RandomPerStep}},
                               "mtl scheme");
}

DistillParts parse_distill_parts(const std::string& s) {
  return parse_enum<DistillParts>(s,
                                  {{"AttentionOnly", DistillParts::AttentionOnly},
                                   {"FeatureOnly", DistillParts::FeatureOnly},
                                   {"Both", DistillParts::Both}},
                                  "distill_parts");
}

DistillLevel parse_distill_level(const std::string& s) {
  return parse_enum<DistillLevel>(
      s, {{"FrameLevel", DistillLevel::FrameLevel}, {"Global", DistillLevel::Global}}, "distill_level");
}

TeacherMode parse_teacher_mode(const std::string& s) {
  return parse_enum<TeacherMode>(s,
                                 {{"PretrainedFrozen", TeacherMode::PretrainedFrozen},
                                  {"JointFromScratch", TeacherMode::JointFromScratch}},
                                 "teacher mode");
}

const std::vector<std::string>& prosody_channel_names() {
  static const std::vector<std::string> names = {"log_pitch",    "nccf",         "pitch_delta",
                                                 "total_energy", "upper_energy", "lower_energy"};
  return names;
}

int parse_prosody_channel(const std::string& name) {
  const auto& names = prosody_channel_names();
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw ConfigError("unknown prosody channel '" + name + "'");
  return static_cast<int>(it - names.begin());
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (early_stop_patience < 1) throw ConfigError("early_stop_patience must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(lr_head > 0)) throw ConfigError("lr_head must be > 0");
  if (lr_encoder && !(*lr_encoder > 0)) throw ConfigError("lr_encoder must be > 0");
  if (mtl.scheme == MtlScheme::Fixed && (mtl.a < 0 || mtl.b < 0)) {
    throw ConfigError("mtl weights must be >= 0");
  }
  for (int c : feature_mask) {
    if (c < 0 || c >= 6) throw ConfigError("feature_mask channel " + std::to_string(c) + " out of range");
  }
  const bool needs_prosody = arch == model::Arch::Teacher || arch == model::Arch::BaselineLocalConcat ||
                             prosody_attention ||
                             (arch == model::Arch::Student && teacher.mode == TeacherMode::JointFromScratch);
  if (needs_prosody && feature_mask.empty()) {
    throw ConfigError("feature_mask must be nonempty for " + model::to_string(arch));
  }
  if (prosody_attention && arch == model::Arch::Teacher) {
    throw ConfigError("prosody_attention does not apply to the Teacher");
  }
}

void check_keys(const json& j, const std::vector<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, _] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ConfigError("unknown config key '" + (where.empty() ? key : where + "." + key) + "'");
    }
  }
}

json dims_to_json(const model::ModelDims& d) {
  return {{"hidden", d.hidden},       {"mel_channels", d.mel_channels}, {"prosody_channels", d.prosody_channels},
       {"downsample", d.downsample}, {"lstm_hidden", d.lstm_hidden},   {"kernel", d.kernel},
       {"n_layers", d.n_layers}};
}

void dims_from_json(const json& j, model::ModelDims& d) {
  const std::string w = "dims";
  check_keys(j, {"hidden", "mel_channels", "prosody_channels", "downsample", "lstm_hidden", "kernel", "n_layers"}, w);
  read_opt(j, "hidden", d.hidden, w);
  read_opt(j, "mel_channels", d.mel_channels, w);
  read_opt(j, "prosody_channels", d.prosody_channels, w);
  read_opt(j, "downsample", d.downsample, w);
  read_opt(j, "lstm_hidden", d.lstm_hidden, w);
  read_opt(j, "kernel", d.kernel, w);
  read_opt(j, "n_layers", d.n_layers, w);
}

void to_json(json& j, const TrainConfig& c) {
  std::vector<std::string> mask;
  for (int ch : c.feature_mask) mask.push_back(prosody_channel_names()[ch]);
  j = {{"arch", model::to_string(c.arch)},
       {"epochs", c.epochs},
       {"early_stop_patience", c.early_stop_patience},
       {"batch_size", c.batch_size},
       {"lr_head", c.lr_head},
       {"lr_encoder", c.lr_encoder ? json(*c.lr_encoder) : json(nullptr)},
       {"mtl", {{"scheme", to_string(c.mtl.scheme)}, {"a", c.mtl.a}, {"b", c.mtl.b}}},
       {"distill_parts", to_string(c.distill_parts)},
       {"distill_level", to_string(c.distill_level)},
       {"teacher", {{"mode", to_string(c.teacher.mode)}, {"checkpoint", c.teacher.checkpoint}}},
       {"feature_mask", mask},
       {"prosody_attention", c.prosody_attention},
       {"dims", dims_to_json(c.dims)},
       {"seed", c.seed}};
}

void from_json(const json& j, TrainConfig& c) {
  const std::string w = "train";
  check_keys(j,
             {"arch", "epochs", "early_stop_patience", "batch_size", "lr_head", "lr_encoder", "mtl",
              "distill_parts", "distill_level", "teacher", "feature_mask", "prosody_attention", "dims",
              "seed"},
             w);
  if (j.contains("arch")) c.arch = model::parse_arch(get_field<std::string>(j, "arch", w));
  read_opt(j, "epochs", c.epochs, w);
  read_opt(j, "early_stop_patience", c.early_stop_patience, w);
  read_opt(j, "batch_size", c.batch_size, w);
  read_opt(j, "lr_head", c.lr_head, w);
  if (j.contains("lr_encoder")) {
    if (j["lr_encoder"].is_null()) c.lr_encoder.reset();
    else c.lr_encoder = get_field<double>(j, "lr_encoder", w);
  }
  if (j.contains("mtl")) {
    const json& m = j["mtl"];
    check_keys(m, {"scheme", "a", "b"}, "train.mtl");
    if (m.contains("scheme")) c.mtl.scheme = parse_mtl_scheme(get_field<std::string>(m, "scheme", "train.mtl"));
    read_opt(m, "a", c.mtl.a, "train.mtl");
    read_opt(m, "b", c.mtl.b, "train.mtl");
  }
  if (j.contains("distill_parts")) c.distill_parts = parse_distill_parts(get_field<std::string>(j, "distill_parts", w));
  if (j.contains("distill_level")) c.distill_level = parse_distill_level(get_field<std::string>(j, "distill_level", w));
  if (j.contains("teacher")) {
    const json& t = j["teacher"];
    check_keys(t, {"mode", "checkpoint"}, "train.teacher");
    if (t.contains("mode")) c.teacher.mode = parse_teacher_mode(get_field<std::string>(t, "mode", "train.teacher"));
    read_opt(t, "checkpoint", c.teacher.checkpoint, "train.teacher");
  }
  if (j.contains("feature_mask")) {
    c.feature_mask.clear();
    for (const auto& name : get_field<std::vector<std::string>>(j, "feature_mask", w)) {
      const int ch = parse_prosody_channel(name);
      if (std::find(c.feature_mask.begin(), c.feature_mask.end(), ch) == c.feature_mask.end()) {
        c.feature_mask.push_back(ch);
      }
    }
    std::sort(c.feature_mask.begin(), c.feature_mask.end());
  }
  read_opt(j, "prosody_attention", c.prosody_attention, w);
  if (j.contains("dims")) {
    model::ModelDims d = c.dims;
    dims_from_json(j["dims"], d);
    c.dims = d;
  }
  read_opt(j, "seed", c.seed, w);
}

std::string config_hash(const TrainConfig& c) {
  json j = c;
  j.erase("seed");
  j["teacher"].erase("checkpoint");
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(j.dump())));
  return buf;
}

std::string describe(const TrainConfig& c) {
  std::string out = model::to_string(c.arch);
  if (c.prosody_attention) out += " prosody_attention";
  if (c.arch == model::Arch::Student) {
    out += " parts=" + to_string(c.distill_parts) + " level=" + to_string(c.distill_level) +
           " teacher=" + to_string(c.teacher.mode) + " mtl=" + to_string(c.mtl.scheme);
    if (c.mtl.scheme == MtlScheme::Fixed) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "(%g,%g)", c.mtl.a, c.mtl.b);
      out += buf;
    }
  }
  if (c.feature_mask.size() != prosody_channel_names().size()) {
    out += " mask=";
    for (std::size_t i = 0; i < c.feature_mask.size(); ++i) {
      out += (i ? "," : "") + prosody_channel_names()[c.feature_mask[i]];
    }
  }
  return out;
}

}  // namespace pdistill::train
