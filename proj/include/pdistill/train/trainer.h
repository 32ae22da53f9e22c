#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

#include "json.hpp"
#include "pdistill/data/dataset.h"
#include "pdistill/model/checkpoint.h"
#include "pdistill/train/config.h"
#include "pdistill/train/losses.h"

namespace pdistill::train {

struct TrainData {
  std::vector<data::Utterance> train;
  std::vector<data::Utterance> validation;
  int n_intents = 0;
};

struct EpochRecord {
  int epoch = 0;  // 1-based
  LossBreakdown loss;  // mean over the epoch's steps
  double teacher_loss = 0;  // joint teacher CE; 0 otherwise
  double train_accuracy = 0;
  double val_accuracy = 0;
  int steps = 0;
  double wall_seconds = 0;
};

struct TrainLog {
  std::uint64_t seed = 0;
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;  // 1-based; 0 before any epoch

  // argmax of validation accuracy, earliest on ties.
  void update_best();
};

nlohmann::json to_json(const EpochRecord& r, std::uint64_t seed, int best_epoch, bool with_wall_time = true);
// JSON-lines, one epoch per line.
std::string serialize_log(const TrainLog& log, bool with_wall_time = true);

// True when the latest epoch is at least `patience` epochs past the best.
bool early_stop(const TrainLog& log, int patience);

// Seen after every optimizer step.
struct StepRecord {
  int epoch = 0;
  int step = 0;  // global, 1-based
  LossBreakdown loss;
  // Largest |sum(alpha) - 1| over the step's student and teacher attention
  // vectors, including the aligned teacher attention used as a target.
  double max_alpha_sum_error = 0;
  const ad::ParameterSet* student = nullptr;
  const ad::ParameterSet* teacher = nullptr;  // null without a teacher
};

struct TrainHooks {
  std::function<void(const StepRecord&)> on_step;
  std::function<void(const EpochRecord&)> on_epoch;
};

struct TrainResult {
  model::ModelCheckpoint best;
  model::ModelCheckpoint last;
  TrainLog log;
  std::optional<model::ModelCheckpoint> teacher;  // joint teacher after training
};

// Zeroes prosody channels outside the mask.
void apply_feature_mask(std::vector<data::Utterance>& utts, const std::vector<int>& mask);

TrainResult train_teacher(const TrainData& data, const TrainConfig& cfg, const TrainHooks& hooks = {});
// teacher is required for PretrainedFrozen and ignored for JointFromScratch.
TrainResult train_student(const TrainData& data, const TrainConfig& cfg,
                          const model::ModelCheckpoint* teacher, const TrainHooks& hooks = {});
TrainResult train_baseline(const TrainData& data, const TrainConfig& cfg, const TrainHooks& hooks = {});

// Dispatches on cfg.arch; loads the teacher checkpoint for frozen students.
TrainResult train_any(const TrainData& data, const TrainConfig& cfg, const TrainHooks& hooks = {});

// Argmax class, lower index on ties.
int predict(const model::Model& m, const data::Utterance& u);
double accuracy(const model::Model& m, const std::vector<data::Utterance>& utts);

// log.jsonl, best.ckpt and last.ckpt under run_dir, plus teacher.ckpt for
// a jointly trained teacher.
void write_run_outputs(const TrainResult& r, const std::filesystem::path& run_dir);

}  // namespace pdistill::train
