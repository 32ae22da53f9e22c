#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "pdistill/data/dataset.h"
#include "pdistill/model/checkpoint.h"

namespace pdistill::eval {

// Rows are true classes, columns predicted classes.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(int n_classes);
  void add(int truth, int predicted);
  long at(int truth, int predicted) const { return counts_[truth * k_ + predicted]; }
  int n_classes() const { return k_; }
  long total() const;
  long trace() const;

 private:
  int k_;
  std::vector<long> counts_;
};

struct ClassMetrics {
  int intent = 0;
  double precision = 0;
  double recall = 0;
  double f1 = 0;
};

// Per-class precision, recall and f1 with 0/0 taken as 0.
std::vector<ClassMetrics> per_class_metrics(const ConfusionMatrix& cm);
// Unweighted mean of per-class f1 over all classes. Requires total > 0.
double macro_f1(const ConfusionMatrix& cm);

struct EvalReport {
  double accuracy = 0;
  double macro_f1 = 0;
  std::vector<ClassMetrics> per_class;
  long n = 0;
  std::string checkpoint;
  std::string dataset;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::vector<std::pair<int, int>> pairs;  // (true, predicted) per utterance, in input order
};

EvalReport report_from_pairs(const std::vector<std::pair<int, int>>& pairs, int n_classes);

// Logits of one utterance; the checkpoint's feature mask is applied first.
std::vector<double> logits(const model::Model& m, const data::Utterance& u);

// Single deterministic pass with argmax decisions (lower index on ties).
EvalReport evaluate(const model::ModelCheckpoint& ckpt, const std::vector<data::Utterance>& utts);
EvalReport evaluate(const model::ModelCheckpoint& ckpt, const data::Manifest& manifest, data::Split split,
                    const data::FeatureCache& cache, int workers);

// Share of utterances whose true intent outscores every intent with the same
// content class and a different contour class. Intents are laid out as
// content * n_contour + contour.
double contour_pair_accuracy(const model::ModelCheckpoint& ckpt, const std::vector<data::Utterance>& utts,
                             int n_contour_classes);

// {"accuracy","macro_f1","per_class":[{"intent","precision","recall","f1"}],"n","checkpoint","config_hash","seed"}
nlohmann::json metrics_json(const EvalReport& r);
EvalReport parse_metrics(const nlohmann::json& j);

struct AttentionRow {
  int frame_index = 0;
  double time_seconds = 0;
  double alpha = 0;
};

// Attention of the checkpoint's SAP layer over one utterance's features.
std::vector<AttentionRow> attention_rows(const model::ModelCheckpoint& ckpt, const data::Utterance& u,
                                         const dsp::FrameSpec& frame);
std::string attention_csv(const std::vector<AttentionRow>& rows);
// Reads the WAV, extracts features and writes frame_index,time_seconds,alpha.
std::vector<AttentionRow> dump_attention(const model::ModelCheckpoint& ckpt,
                                         const std::filesystem::path& wav_path,
                                         const std::filesystem::path& out_path, const dsp::FrameSpec& frame,
                                         const dsp::PitchConfig& pitch, double crop_seconds);

struct CompareRow {
  std::string config_hash;
  std::string label;
  int runs = 0;
  double accuracy_mean = 0;
  double accuracy_std = 0;
  double macro_f1_mean = 0;
  double macro_f1_std = 0;
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> run_dirs;
};

// Groups runs by config hash, averages across seeds (sample stddev, 0 for a
// single run) and sorts by mean accuracy, best first. The label comes from
// the run's config.json when present.
std::vector<CompareRow> compare_runs(const std::vector<std::filesystem::path>& run_dirs);
std::string compare_table_text(const std::vector<CompareRow>& rows);
nlohmann::json compare_table_json(const std::vector<CompareRow>& rows);

}  // namespace pdistill::eval
