#include "pdistill/app/commands.h"

#include <fstream>
#include <iostream>

#include "pdistill/common/error.h"
#include "pdistill/data/wav.h"

namespace pdistill::app {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw Error("cannot write " + tmp.string());
    f << text;
    if (!f) throw Error("failed writing " + tmp.string());
  }
  fs::rename(tmp, path);
}

}  // namespace

void log_event(const std::string& event, json fields) {
  json line = {{"event", event}};
  line.update(fields);
  std::cerr << line.dump() << '\n';
}

data::FeatureCache make_cache(const RunConfig& cfg) {
  return data::FeatureCache(cfg.cache_path(), cfg.frame, cfg.pitch, cfg.crop_seconds);
}

train::TrainData load_train_data(const RunConfig& cfg) {
  const data::Manifest m = data::read_manifest(cfg.manifest_path());
  const data::FeatureCache cache = make_cache(cfg);
  train::TrainData d;
  d.n_intents = m.n_intents();
  log_event("features", {{"split", "train"}, {"manifest", cfg.manifest_path().string()}});
  d.train = data::load_split(m, data::Split::Train, cache, cfg.workers);
  log_event("features", {{"split", "validation"}, {"manifest", cfg.manifest_path().string()}});
  d.validation = data::load_split(m, data::Split::Validation, cache, cfg.workers);
  return d;
}

std::vector<data::Utterance> load_eval_split(const RunConfig& cfg, data::Split split) {
  const data::Manifest m = data::read_manifest(cfg.manifest_path());
  log_event("features", {{"split", data::to_string(split)}, {"manifest", cfg.manifest_path().string()}});
  return data::load_split(m, split, make_cache(cfg), cfg.workers);
}

TrainOutcome run_train(const RunConfig& cfg, const train::TrainData& data, const std::vector<data::Utterance>& test,
                       const train::TrainHooks& hooks) {
  cfg.validate();
  if (cfg.run_dir.empty()) throw ConfigError("run_dir is required for train");
  const fs::path dir = cfg.run_dir;
  fs::create_directories(dir);
  write_text(dir / "config.json", to_json(cfg).dump(2) + "\n");

  train::TrainHooks h = hooks;
  int best_epoch = 0;
  double best_acc = -1.0;
  h.on_epoch = [&](const train::EpochRecord& r) {
    if (r.val_accuracy > best_acc) {
      best_acc = r.val_accuracy;
      best_epoch = r.epoch;
    }
    log_event("epoch", to_json(r, cfg.train.seed, best_epoch));
    if (hooks.on_epoch) hooks.on_epoch(r);
  };
  log_event("train_start", {{"arch", model::to_string(cfg.train.arch)},
                            {"config_hash", train::config_hash(cfg.train)},
                            {"seed", cfg.train.seed},
                            {"run_dir", cfg.run_dir}});
  TrainOutcome out;
  out.result = train::train_any(data, cfg.train, h);
  train::write_run_outputs(out.result, dir);

  out.test_report = eval::evaluate(out.result.best, test);
  out.test_report.checkpoint = (dir / "best.ckpt").string();
  write_text(dir / "metrics.json", eval::metrics_json(out.test_report).dump(2) + "\n");
  log_event("train_done", {{"best_epoch", out.result.log.best_epoch},
                           {"test_accuracy", out.test_report.accuracy},
                           {"test_macro_f1", out.test_report.macro_f1}});
  return out;
}

data::Manifest cmd_synth_data(const RunConfig& cfg) {
  cfg.synth.validate();
  log_event("synth_start", {{"dir", cfg.dataset_dir}, {"seed", cfg.synth.seed}});
  data::Manifest m = data::build_synth_dataset(cfg.synth, cfg.dataset_dir);
  log_event("synth_done", {{"entries", m.entries.size()}, {"manifest", (fs::path(cfg.dataset_dir) / "manifest.jsonl").string()}});
  return m;
}

void cmd_extract(const RunConfig& cfg, const fs::path& wav, const fs::path& out_prefix) {
  dsp::Waveform w = data::load_wav(wav);
  if (cfg.crop_seconds > 0) w = data::crop_or_pad(w, cfg.crop_seconds);
  const dsp::Features f = data::compute_features(w, cfg.frame, cfg.pitch);
  if (out_prefix.has_parent_path()) fs::create_directories(out_prefix.parent_path());
  data::write_feature_dump(f.mel, "mel", out_prefix.string() + ".mel");
  data::write_feature_dump(f.prosody, "prosody", out_prefix.string() + ".prosody");
  log_event("extract_done", {{"wav", wav.string()}, {"frames", f.mel.rows()}});
}

TrainOutcome cmd_train(const RunConfig& cfg) {
  cfg.validate();
  if (cfg.run_dir.empty()) throw ConfigError("run_dir is required for train");
  const train::TrainData data = load_train_data(cfg);
  const auto test = load_eval_split(cfg, data::Split::Test);
  return run_train(cfg, data, test);
}

eval::EvalReport cmd_eval(const RunConfig& cfg, const fs::path& checkpoint, data::Split split) {
  const model::ModelCheckpoint ckpt = model::load_checkpoint(checkpoint);
  const data::Manifest m = data::read_manifest(cfg.manifest_path());
  eval::EvalReport r = eval::evaluate(ckpt, m, split, make_cache(cfg), cfg.workers);
  r.checkpoint = checkpoint.string();
  r.dataset = cfg.manifest_path().string();
  return r;
}

std::vector<eval::AttentionRow> cmd_attn_dump(const RunConfig& cfg, const fs::path& checkpoint, const fs::path& wav,
                                              const fs::path& out) {
  const model::ModelCheckpoint ckpt = model::load_checkpoint(checkpoint);
  return eval::dump_attention(ckpt, wav, out, cfg.frame, cfg.pitch, cfg.crop_seconds);
}

std::vector<eval::CompareRow> cmd_compare(const std::vector<fs::path>& run_dirs) {
  return eval::compare_runs(run_dirs);
}

}  // namespace pdistill::app
