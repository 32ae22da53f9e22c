#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pdistill/common/matrix.h"
#include "pdistill/data/features.h"
#include "pdistill/data/manifest.h"

namespace pdistill::data {

struct Utterance {
  std::string audio;
  int label = 0;
  Matrix mel;      // T x n_mels
  Matrix prosody;  // T x 6
  int frames() const { return mel.rows(); }
};

// Extracts features for every entry of a split. Work fans out over `workers`
// threads; the result order always follows the manifest.
std::vector<Utterance> load_split(const Manifest& m, Split split, const FeatureCache& cache,
                                  int workers);

int default_workers();

struct Batch {
  std::vector<Matrix> mel;      // B entries of T x n_mels, zero-padded
  std::vector<Matrix> prosody;  // B entries of T x 6, zero-padded
  std::vector<int> labels;
  std::vector<int> lengths;     // true frame count per item
  Matrix frame_mask;            // B x T, row i has lengths[i] leading ones
  std::vector<std::size_t> indices;  // positions in the source utterance list

  int size() const { return static_cast<int>(labels.size()); }
  int max_frames() const { return frame_mask.cols(); }
};

// Seeded permutation of [0, n) for one epoch.
std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, int epoch);

// Batches in epoch order; the final short batch is kept.
std::vector<Batch> batch_iter(const std::vector<Utterance>& utts, int batch_size,
                              std::uint64_t seed, int epoch);

// Batches in the given order without shuffling.
std::vector<Batch> make_batches(const std::vector<Utterance>& utts,
                                const std::vector<std::size_t>& order, int batch_size);

}  // namespace pdistill::data
