#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace pdistill::data {

enum class Split { Train, Validation, Test };

std::string to_string(Split s);
Split parse_split(const std::string& s);

struct ManifestEntry {
  std::string audio;  // relative to the manifest's directory
  int intent = 0;
  Split split = Split::Train;
};

struct Manifest {
  std::filesystem::path root;  // directory the audio paths are relative to
  std::vector<ManifestEntry> entries;

  std::vector<ManifestEntry> split(Split s) const;
  // One past the largest intent id.
  int n_intents() const;
  std::filesystem::path audio_path(const ManifestEntry& e) const { return root / e.audio; }
};

// JSON-lines: {"audio": "<relative path>", "intent": <int>, "split": "train"|"validation"|"test"}
std::string serialize_manifest(const std::vector<ManifestEntry>& entries);
void write_manifest(const std::vector<ManifestEntry>& entries, const std::filesystem::path& path);
// Checks every audio file exists; n_intents < 0 skips the range check.
Manifest read_manifest(const std::filesystem::path& path, int n_intents = -1);

}  // namespace pdistill::data
