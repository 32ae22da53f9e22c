#include "pdistill/data/manifest.h"

#include <algorithm>
#include <fstream>

#include "json.hpp"
#include "pdistill/common/error.h"

namespace pdistill::data {

using nlohmann::json;

std::string to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Validation: return "validation";
    case Split::Test: return "test";
  }
  return "?";
}

Split parse_split(const std::string& s) {
  if (s == "train") return Split::Train;
  if (s == "validation") return Split::Validation;
  if (s == "test") return Split::Test;
  throw Error("unknown split '" + s + "'");
}

std::vector<ManifestEntry> Manifest::split(Split s) const {
  std::vector<ManifestEntry> out;
  std::copy_if(entries.begin(), entries.end(), std::back_inserter(out),
               [s](const ManifestEntry& e) { return e.split == s; });
  return out;
}

int Manifest::n_intents() const {
  int n = 0;
  for (const auto& e : entries) n = std::max(n, e.intent + 1);
  return n;
}

std::string serialize_manifest(const std::vector<ManifestEntry>& entries) {
  std::string out;
  for (const auto& e : entries) {
    out += json{{"audio", e.audio}, {"intent", e.intent}, {"split", to_string(e.split)}}.dump();
    out += '\n';
  }
  return out;
}

void write_manifest(const std::vector<ManifestEntry>& entries, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("cannot write manifest " + path.string());
  f << serialize_manifest(entries);
  if (!f) throw Error("failed writing manifest " + path.string());
}

Manifest read_manifest(const std::filesystem::path& path, int n_intents) {
  std::ifstream f(path);
  if (!f) throw Error("cannot read manifest " + path.string());
  Manifest m;
  m.root = path.parent_path();
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ManifestEntry e;
    try {
      const json j = json::parse(line);
      e.audio = j.at("audio").get<std::string>();
      e.intent = j.at("intent").get<int>();
      e.split = parse_split(j.at("split").get<std::string>());
    } catch (const std::exception& ex) {
      throw Error(path.string() + ":" + std::to_string(lineno) + ": " + ex.what());
    }
    if (e.intent < 0 || (n_intents >= 0 && e.intent >= n_intents)) {
      throw Error(path.string() + ":" + std::to_string(lineno) + ": intent " +
                  std::to_string(e.intent) + " outside [0, " + std::to_string(n_intents) + ")");
    }
    if (!std::filesystem::exists(m.root / e.audio)) {
      throw Error(path.string() + ":" + std::to_string(lineno) + ": missing audio " + e.audio);
    }
    m.entries.push_back(std::move(e));
  }
  return m;
}

}  // namespace pdistill::data
