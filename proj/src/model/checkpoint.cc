#include "pdistill/model/checkpoint.h"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace pdistill::model {

using nlohmann::json;
using ad::numel;
using ad::shape_str;

namespace {

constexpr char kMagic[4] = {'P', 'D', 'C', 'K'};

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(const std::string& in, std::size_t off) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[off + i])) << (8 * i);
  return v;
}

void put_f32(std::string& out, double value) {
  const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(value));
  put_u32(out, bits);
}

double get_f32(const std::string& in, std::size_t off) {
  return std::bit_cast<float>(get_u32(in, off));
}

}  // namespace

ModelCheckpoint make_checkpoint(const Model& model, json metadata) {
  ModelCheckpoint c;
  c.config = model.config();
  c.params = model.params();
  // Stored values are float32; round now so the object equals its file.
  for (auto& p : c.params.items()) {
    for (double& v : p.value.data) v = static_cast<float>(v);
  }
  c.metadata = std::move(metadata);
  return c;
}

std::string serialize_checkpoint(const ModelCheckpoint& ckpt) {
  json table = json::array();
  std::size_t offset = 0;
  for (const auto& p : ckpt.params.items()) {
    table.push_back({{"name", p.name}, {"shape", p.value.shape}, {"offset", offset}});
    offset += p.value.size();
  }
  const json header = {{"config", ckpt.config}, {"metadata", ckpt.metadata}, {"params", table}};
  const std::string text = header.dump();

  std::string out(kMagic, 4);
  put_u32(out, ckpt.format_version);
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  out += text;
  out.reserve(out.size() + 4 * offset);
  for (const auto& p : ckpt.params.items())
    for (double v : p.value.data) put_f32(out, v);
  return out;
}

ModelCheckpoint parse_checkpoint(const std::string& bytes) {
  using Kind = CheckpointError::Kind;
  if (bytes.size() < 12) throw CheckpointError(Kind::Truncated, "truncated checkpoint: missing preamble");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw CheckpointError(Kind::BadMagic, "not a checkpoint: bad magic bytes");
  }
  ModelCheckpoint ckpt;
  ckpt.format_version = get_u32(bytes, 4);
  if (ckpt.format_version != kCheckpointVersion) {
    throw CheckpointError(Kind::VersionMismatch,
                          "checkpoint format_version " + std::to_string(ckpt.format_version) +
                              " != supported " + std::to_string(kCheckpointVersion));
  }
  const std::size_t header_len = get_u32(bytes, 8);
  if (bytes.size() < 12 + header_len) {
    throw CheckpointError(Kind::Truncated, "truncated checkpoint: header cut short");
  }

  json header;
  try {
    header = json::parse(bytes.begin() + 12, bytes.begin() + 12 + static_cast<std::ptrdiff_t>(header_len));
    ckpt.config = header.at("config").get<ModelConfig>();
    ckpt.metadata = header.at("metadata");
  } catch (const CheckpointError&) {
    throw;
  } catch (const std::exception& e) {
    throw CheckpointError(Kind::Malformed, std::string("malformed checkpoint header: ") + e.what());
  }

  std::vector<std::pair<std::string, Shape>> layout;
  try {
    layout = parameter_layout(ckpt.config);
  } catch (const std::exception& e) {
    throw CheckpointError(Kind::Malformed, std::string("checkpoint config invalid: ") + e.what());
  }
  const json& table = header.at("params");
  if (!table.is_array() || table.size() != layout.size()) {
    throw CheckpointError(Kind::ShapeMismatch, "checkpoint parameter table does not match its config");
  }

  const std::size_t data_start = 12 + header_len;
  std::size_t expected_offset = 0;
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const json& row = table[i];
    std::string name;
    Shape shape;
    std::size_t offset = 0;
    try {
      name = row.at("name").get<std::string>();
      shape = row.at("shape").get<Shape>();
      offset = row.at("offset").get<std::size_t>();
    } catch (const std::exception& e) {
      throw CheckpointError(Kind::Malformed, std::string("malformed parameter entry: ") + e.what());
    }
    if (name != layout[i].first || shape != layout[i].second) {
      throw CheckpointError(Kind::ShapeMismatch,
                            "shape mismatch for parameter '" + name + "': file says " + shape_str(shape) +
                                ", config implies " + shape_str(layout[i].second) + " for '" +
                                layout[i].first + "'");
    }
    if (offset != expected_offset) {
      throw CheckpointError(Kind::Malformed, "parameter '" + name + "' has offset " +
                                                 std::to_string(offset) + ", expected " +
                                                 std::to_string(expected_offset));
    }
    const std::size_t n = numel(shape);
    if (bytes.size() < data_start + 4 * (offset + n)) {
      throw CheckpointError(Kind::Truncated, "truncated checkpoint: data for '" + name + "' cut short");
    }
    std::vector<double> data(n);
    for (std::size_t k = 0; k < n; ++k) data[k] = get_f32(bytes, data_start + 4 * (offset + k));
    ckpt.params.add(name, ad::Tensor(shape, std::move(data)));
    expected_offset += n;
  }
  if (bytes.size() != data_start + 4 * expected_offset) {
    throw CheckpointError(Kind::Malformed, "checkpoint has trailing bytes");
  }
  return ckpt;
}

void save_checkpoint(const ModelCheckpoint& ckpt, const std::filesystem::path& path) {
  const std::string bytes = serialize_checkpoint(ckpt);
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw Error("cannot write checkpoint " + path.string());
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw Error("failed writing checkpoint " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

ModelCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot read checkpoint " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_checkpoint(ss.str());
}

}  // namespace pdistill::model
