#include "pdistill/data/dataset.h"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <numeric>
#include <thread>

#include "pdistill/common/error.h"
#include "pdistill/common/rng.h"

namespace pdistill::data {

int default_workers() {
  const unsigned hw = std::thread::hardware_concurrency();
  return static_cast<int>(std::clamp(hw == 0 ? 1u : hw, 1u, 8u));
}

std::vector<Utterance> load_split(const Manifest& m, Split split, const FeatureCache& cache,
                                  int workers) {
  const std::vector<ManifestEntry> entries = m.split(split);
  if (entries.empty()) throw Error("split '" + to_string(split) + "' is empty");
  std::vector<Utterance> out(entries.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;

  auto work = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= entries.size()) return;
      try {
        dsp::Features f = cache.get(m.audio_path(entries[i]));
        out[i] = {entries[i].audio, entries[i].intent, std::move(f.mel), std::move(f.prosody)};
      } catch (...) {
        std::lock_guard lock(error_mu);
        if (!error) error = std::current_exception();
        next = entries.size();
        return;
      }
    }
  };
  const int n = std::max(1, std::min<int>(workers, static_cast<int>(entries.size())));
  std::vector<std::jthread> threads;
  for (int t = 1; t < n; ++t) threads.emplace_back(work);
  work();
  threads.clear();
  if (error) std::rethrow_exception(error);
  return out;
}

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, int epoch) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(derive_seed(seed, "epoch"), static_cast<std::uint64_t>(epoch)));
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  return order;
}

std::vector<Batch> make_batches(const std::vector<Utterance>& utts,
                                const std::vector<std::size_t>& order, int batch_size) {
  if (batch_size < 1) throw Error("batch_size must be >= 1");
  std::vector<Batch> batches;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t end = std::min(order.size(), start + batch_size);
    Batch b;
    int t_max = 0;
    for (std::size_t k = start; k < end; ++k) t_max = std::max(t_max, utts[order[k]].frames());
    b.frame_mask = Matrix(static_cast<int>(end - start), t_max);
    for (std::size_t k = start; k < end; ++k) {
      const Utterance& u = utts[order[k]];
      const int row = static_cast<int>(k - start);
      Matrix mel(t_max, u.mel.cols());
      Matrix pro(t_max, u.prosody.cols());
      std::copy(u.mel.data().begin(), u.mel.data().end(), mel.data().begin());
      std::copy(u.prosody.data().begin(), u.prosody.data().end(), pro.data().begin());
      for (int t = 0; t < u.frames(); ++t) b.frame_mask(row, t) = 1.0;
      b.mel.push_back(std::move(mel));
      b.prosody.push_back(std::move(pro));
      b.labels.push_back(u.label);
      b.lengths.push_back(u.frames());
      b.indices.push_back(order[k]);
    }
    batches.push_back(std::move(b));
  }
  return batches;
}

std::vector<Batch> batch_iter(const std::vector<Utterance>& utts, int batch_size,
                              std::uint64_t seed, int epoch) {
  if (utts.empty()) throw Error("batch_iter: empty split");
  return make_batches(utts, epoch_order(utts.size(), seed, epoch), batch_size);
}

}  // namespace pdistill::data
