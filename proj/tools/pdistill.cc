#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "pdistill/app/commands.h"
#include "pdistill/common/error.h"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace pdistill;

namespace {

// Applies "a.b.c=value" overrides to the raw config document. The value is
// parsed as JSON when possible, otherwise taken as a string.
void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override '" + assignment + "' is not key=value");
  }
  std::string pointer = "/" + assignment.substr(0, eq);
  for (char& c : pointer) {
    if (c == '.') c = '/';
  }
  const std::string text = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(text);
  } catch (const json::exception&) {
    value = text;
  }
  doc[json::json_pointer(pointer)] = value;
}

int fail(const std::string& stage, const std::exception& e, int code) {
  std::cerr << "error: " << stage << ": " << e.what() << '\n';
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Prosody-aware intent classification: features, training, evaluation"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string run_dir;
  std::optional<int> workers;
  std::vector<std::string> overrides;
  app.add_option("--config", config_path, "JSON run configuration");
  app.add_option("--seed", seed, "seed for the subcommand (dataset seed for synth-data, training seed for train)");
  app.add_option("--run-dir", run_dir, "run directory for train");
  app.add_option("--workers", workers, "feature extraction threads (default: cores, at most 8)")->check(CLI::PositiveNumber);
  app.add_option("--set", overrides, "config override key.path=value, applied after --config");

  auto* synth = app.add_subcommand("synth-data", "generate the synthetic intent corpus");
  std::string synth_out;
  synth->add_option("--out", synth_out, "dataset directory (overrides data.dir)");

  auto* extract = app.add_subcommand("extract", "write mel and prosody feature dumps for one WAV");
  std::string extract_wav, extract_out;
  extract->add_option("wav", extract_wav, "input WAV")->required();
  extract->add_option("out", extract_out, "output prefix; writes <out>.mel and <out>.prosody")->required();

  auto* train = app.add_subcommand("train", "train the configured architecture into --run-dir");

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a manifest split");
  std::string eval_ckpt, eval_split = "test", eval_manifest, eval_out;
  eval->add_option("--checkpoint", eval_ckpt, "checkpoint file")->required();
  eval->add_option("--split", eval_split, "train, validation or test");
  eval->add_option("--manifest", eval_manifest, "manifest (overrides data.manifest)");
  eval->add_option("--out", eval_out, "also write the metrics JSON here");

  auto* attn = app.add_subcommand("attn-dump", "write the attention weights of one utterance as CSV");
  std::string attn_ckpt, attn_wav, attn_out;
  attn->add_option("--checkpoint", attn_ckpt, "checkpoint file")->required();
  attn->add_option("--wav", attn_wav, "input WAV")->required();
  attn->add_option("--out", attn_out, "output CSV")->required();

  auto* compare = app.add_subcommand("compare", "tabulate metrics of several runs grouped by config");
  std::vector<std::string> compare_dirs;
  std::string compare_json;
  compare->add_option("run_dirs", compare_dirs, "run directories")->required();
  compare->add_option("--json", compare_json, "also write the table as JSON here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  app::RunConfig cfg;
  try {
    json doc = json::object();
    if (!config_path.empty()) {
      std::ifstream f(config_path);
      if (!f) throw ConfigError("cannot read config " + config_path);
      try {
        doc = json::parse(f);
      } catch (const json::exception& e) {
        throw ConfigError("config " + config_path + ": " + e.what());
      }
    }
    for (const auto& o : overrides) apply_override(doc, o);
    cfg = app::run_config_from_json(doc);
    if (!run_dir.empty()) cfg.run_dir = run_dir;
    if (workers) cfg.workers = *workers;
    if (seed) {
      if (synth->parsed()) cfg.synth.seed = *seed;
      else cfg.train.seed = *seed;
    }
    if (!synth_out.empty()) cfg.dataset_dir = synth_out;
    if (!eval_manifest.empty()) cfg.manifest = eval_manifest;
    cfg.validate();
    if (train->parsed()) {
      if (cfg.run_dir.empty()) throw ConfigError("train needs --run-dir or run_dir in the config");
      if (cfg.train.arch == model::Arch::Student &&
          cfg.train.teacher.mode == train::TeacherMode::PretrainedFrozen && cfg.train.teacher.checkpoint.empty()) {
        throw ConfigError("train.teacher.checkpoint is required for a PretrainedFrozen teacher");
      }
    }
  } catch (const std::exception& e) {
    return fail("config", e, 2);
  }

  std::string stage = app.get_subcommands().front()->get_name();
  try {
    if (synth->parsed()) {
      app::cmd_synth_data(cfg);
    } else if (extract->parsed()) {
      app::cmd_extract(cfg, extract_wav, extract_out);
    } else if (train->parsed()) {
      app::cmd_train(cfg);
    } else if (eval->parsed()) {
      const data::Split split = data::parse_split(eval_split);
      const auto report = app::cmd_eval(cfg, eval_ckpt, split);
      json j = eval::metrics_json(report);
      j["split"] = eval_split;
      j["dataset"] = report.dataset;
      std::cout << j.dump(2) << '\n';
      if (!eval_out.empty()) {
        std::ofstream f(eval_out, std::ios::trunc);
        f << j.dump(2) << '\n';
        if (!f) throw Error("cannot write " + eval_out);
      }
    } else if (attn->parsed()) {
      const auto rows = app::cmd_attn_dump(cfg, attn_ckpt, attn_wav, attn_out);
      app::log_event("attn_dump_done", {{"rows", rows.size()}, {"out", attn_out}});
    } else if (compare->parsed()) {
      std::vector<fs::path> dirs(compare_dirs.begin(), compare_dirs.end());
      const auto rows = app::cmd_compare(dirs);
      std::cout << eval::compare_table_text(rows);
      if (!compare_json.empty()) {
        std::ofstream f(compare_json, std::ios::trunc);
        f << eval::compare_table_json(rows).dump(2) << '\n';
        if (!f) throw Error("cannot write " + compare_json);
      }
    }
  } catch (const ConfigError& e) {
    return fail(stage, e, 2);
  } catch (const std::exception& e) {
    return fail(stage, e, 1);
  }
  return 0;
}
