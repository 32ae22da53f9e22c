#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "pdistill/app/run_config.h"
#include "pdistill/eval/report.h"
#include "pdistill/train/trainer.h"

namespace pdistill::app {

// One JSON object per line on stderr.
void log_event(const std::string& event, nlohmann::json fields = nlohmann::json::object());

data::FeatureCache make_cache(const RunConfig& cfg);
// Train and validation splits of the configured manifest.
train::TrainData load_train_data(const RunConfig& cfg);
std::vector<data::Utterance> load_eval_split(const RunConfig& cfg, data::Split split);

struct TrainOutcome {
  train::TrainResult result;
  eval::EvalReport test_report;  // best.ckpt on the test split
};

// Trains cfg.train on the given data and writes config.json, log.jsonl,
// best.ckpt, last.ckpt and metrics.json into cfg.run_dir.
TrainOutcome run_train(const RunConfig& cfg, const train::TrainData& data,
                       const std::vector<data::Utterance>& test, const train::TrainHooks& hooks = {});

data::Manifest cmd_synth_data(const RunConfig& cfg);
void cmd_extract(const RunConfig& cfg, const std::filesystem::path& wav, const std::filesystem::path& out_prefix);
TrainOutcome cmd_train(const RunConfig& cfg);
eval::EvalReport cmd_eval(const RunConfig& cfg, const std::filesystem::path& checkpoint, data::Split split);
std::vector<eval::AttentionRow> cmd_attn_dump(const RunConfig& cfg, const std::filesystem::path& checkpoint,
                                              const std::filesystem::path& wav, const std::filesystem::path& out);
std::vector<eval::CompareRow> cmd_compare(const std::vector<std::filesystem::path>& run_dirs);

}  // namespace pdistill::app
