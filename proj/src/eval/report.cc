#include "pdistill/eval/report.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "pdistill/autodiff/ops.h"
#include "pdistill/common/error.h"
#include "pdistill/data/wav.h"
#include "pdistill/train/config.h"
#include "pdistill/train/trainer.h"

namespace pdistill::eval {

namespace fs = std::filesystem;
using nlohmann::json;

ConfusionMatrix::ConfusionMatrix(int n_classes) : k_(n_classes), counts_(static_cast<std::size_t>(n_classes) * n_classes, 0) {
  if (n_classes < 1) throw Error("confusion matrix needs at least one class");
}

void ConfusionMatrix::add(int truth, int predicted) {
  if (truth < 0 || truth >= k_ || predicted < 0 || predicted >= k_) {
    throw Error("confusion matrix entry (" + std::to_string(truth) + ", " + std::to_string(predicted) +
                ") outside " + std::to_string(k_) + " classes");
  }
  ++counts_[truth * k_ + predicted];
}

long ConfusionMatrix::total() const {
  long t = 0;
  for (long c : counts_) t += c;
  return t;
}

long ConfusionMatrix::trace() const {
  long t = 0;
  for (int i = 0; i < k_; ++i) t += at(i, i);
  return t;
}

std::vector<ClassMetrics> per_class_metrics(const ConfusionMatrix& cm) {
  const int k = cm.n_classes();
  std::vector<ClassMetrics> out(k);
  for (int c = 0; c < k; ++c) {
    long tp = cm.at(c, c), predicted = 0, actual = 0;
    for (int j = 0; j < k; ++j) {
      predicted += cm.at(j, c);
      actual += cm.at(c, j);
    }
    ClassMetrics& m = out[c];
    m.intent = c;
    m.precision = predicted > 0 ? static_cast<double>(tp) / predicted : 0.0;
    m.recall = actual > 0 ? static_cast<double>(tp) / actual : 0.0;
    const double denom = m.precision + m.recall;
    m.f1 = denom > 0 ? 2.0 * m.precision * m.recall / denom : 0.0;
  }
  return out;
}

double macro_f1(const ConfusionMatrix& cm) {
  if (cm.total() == 0) throw Error("macro_f1: empty confusion matrix");
  double s = 0.0;
  for (const auto& m : per_class_metrics(cm)) s += m.f1;
  return s / cm.n_classes();
}

EvalReport report_from_pairs(const std::vector<std::pair<int, int>>& pairs, int n_classes) {
  if (pairs.empty()) throw Error("evaluation split is empty");
  ConfusionMatrix cm(n_classes);
  for (const auto& [t, p] : pairs) cm.add(t, p);
  EvalReport r;
  r.n = cm.total();
  r.accuracy = static_cast<double>(cm.trace()) / static_cast<double>(r.n);
  r.per_class = per_class_metrics(cm);
  r.macro_f1 = macro_f1(cm);
  r.pairs = pairs;
  return r;
}

namespace {

std::vector<int> checkpoint_mask(const model::ModelCheckpoint& ckpt) {
  std::vector<int> mask;
  if (!ckpt.metadata.contains("feature_mask")) return {0, 1, 2, 3, 4, 5};
  for (const auto& name : ckpt.metadata["feature_mask"]) mask.push_back(train::parse_prosody_channel(name));
  return mask;
}

data::Utterance masked(const data::Utterance& u, const std::vector<int>& mask) {
  std::vector<data::Utterance> one = {u};
  train::apply_feature_mask(one, mask);
  return std::move(one.front());
}

template <typename Fn>
void for_each_masked(const model::ModelCheckpoint& ckpt, const std::vector<data::Utterance>& utts, Fn fn) {
  const auto mask = checkpoint_mask(ckpt);
  const model::Model m = ckpt.model();
  for (const auto& u : utts) fn(m, masked(u, mask), u);
}

}  // namespace

std::vector<double> logits(const model::Model& m, const data::Utterance& u) {
  ad::Graph g;
  ad::Binding b(g, m.params(), false);
  return m.forward(g, b, &u.mel, &u.prosody).logits.value();
}

EvalReport evaluate(const model::ModelCheckpoint& ckpt, const std::vector<data::Utterance>& utts) {
  if (utts.empty()) throw Error("evaluation split is empty");
  const int k = ckpt.config.n_intents;
  for (const auto& u : utts) {
    if (u.label < 0 || u.label >= k) {
      throw Error("intent count mismatch: checkpoint has " + std::to_string(k) + " intents but " + u.audio +
                  " is labelled " + std::to_string(u.label));
    }
  }
  std::vector<std::pair<int, int>> pairs;
  for_each_masked(ckpt, utts, [&](const model::Model& m, const data::Utterance& u, const data::Utterance&) {
    const auto l = logits(m, u);
    pairs.push_back({u.label, static_cast<int>(std::max_element(l.begin(), l.end()) - l.begin())});
  });
  EvalReport r = report_from_pairs(pairs, k);
  r.config_hash = ckpt.metadata.value("config_hash", std::string());
  r.seed = ckpt.metadata.value("seed", std::uint64_t{0});
  return r;
}

EvalReport evaluate(const model::ModelCheckpoint& ckpt, const data::Manifest& manifest, data::Split split,
                    const data::FeatureCache& cache, int workers) {
  const int n = manifest.n_intents();
  if (n > ckpt.config.n_intents) {
    throw Error("intent count mismatch: checkpoint has " + std::to_string(ckpt.config.n_intents) +
                " intents, manifest has " + std::to_string(n));
  }
  return evaluate(ckpt, data::load_split(manifest, split, cache, workers));
}

double contour_pair_accuracy(const model::ModelCheckpoint& ckpt, const std::vector<data::Utterance>& utts,
                             int n_contour_classes) {
  if (utts.empty()) throw Error("evaluation split is empty");
  long correct = 0;
  for_each_masked(ckpt, utts, [&](const model::Model& m, const data::Utterance& u, const data::Utterance&) {
    const auto l = logits(m, u);
    const int base = u.label - u.label % n_contour_classes;
    bool ok = true;
    for (int c = 0; c < n_contour_classes; ++c) {
      if (base + c != u.label && l[base + c] >= l[u.label]) ok = false;
    }
    correct += ok;
  });
  return static_cast<double>(correct) / static_cast<double>(utts.size());
}

json metrics_json(const EvalReport& r) {
  json per_class = json::array();
  for (const auto& c : r.per_class) {
    per_class.push_back({{"intent", c.intent}, {"precision", c.precision}, {"recall", c.recall}, {"f1", c.f1}});
  }
  return {{"accuracy", r.accuracy},     {"macro_f1", r.macro_f1},         {"per_class", per_class},
          {"n", r.n},                   {"checkpoint", r.checkpoint},     {"config_hash", r.config_hash},
          {"seed", r.seed}};
}

EvalReport parse_metrics(const json& j) {
  EvalReport r;
  r.accuracy = j.at("accuracy").get<double>();
  r.macro_f1 = j.at("macro_f1").get<double>();
  for (const auto& c : j.at("per_class")) {
    r.per_class.push_back({c.at("intent").get<int>(), c.at("precision").get<double>(),
                           c.at("recall").get<double>(), c.at("f1").get<double>()});
  }
  r.n = j.at("n").get<long>();
  r.checkpoint = j.at("checkpoint").get<std::string>();
  r.config_hash = j.at("config_hash").get<std::string>();
  r.seed = j.at("seed").get<std::uint64_t>();
  return r;
}

std::vector<AttentionRow> attention_rows(const model::ModelCheckpoint& ckpt, const data::Utterance& u,
                                         const dsp::FrameSpec& frame) {
  if (!ckpt.params.contains("sap.w")) {
    throw Error("checkpoint arch " + model::to_string(ckpt.config.arch) + " has no attention pooling layer");
  }
  const model::Model m = ckpt.model();
  const data::Utterance x = masked(u, checkpoint_mask(ckpt));
  ad::Graph g;
  ad::Binding b(g, m.params(), false);
  const auto out = m.forward(g, b, &x.mel, &x.prosody);
  const double step = static_cast<double>(frame.hop_samples) / dsp::kSampleRate *
                      ckpt.config.encoder.downsample_factor;
  std::vector<AttentionRow> rows;
  const auto& alpha = out.attention.value();
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    rows.push_back({static_cast<int>(i), static_cast<double>(i) * step, alpha[i]});
  }
  return rows;
}

std::string attention_csv(const std::vector<AttentionRow>& rows) {
  std::string out = "frame_index,time_seconds,alpha\n";
  char buf[96];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%d,%.6f,%.17g\n", r.frame_index, r.time_seconds, r.alpha);
    out += buf;
  }
  return out;
}

std::vector<AttentionRow> dump_attention(const model::ModelCheckpoint& ckpt, const fs::path& wav_path,
                                         const fs::path& out_path, const dsp::FrameSpec& frame,
                                         const dsp::PitchConfig& pitch, double crop_seconds) {
  dsp::Waveform w = data::load_wav(wav_path);
  if (crop_seconds > 0) w = data::crop_or_pad(w, crop_seconds);
  dsp::Features f = data::compute_features(w, frame, pitch);
  data::Utterance u{wav_path.string(), 0, std::move(f.mel), std::move(f.prosody)};
  const auto rows = attention_rows(ckpt, u, frame);
  std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + out_path.string());
  out << attention_csv(rows);
  if (!out) throw Error("failed writing " + out_path.string());
  return rows;
}

namespace {

double mean_of(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double sample_std(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

std::string run_label(const fs::path& dir, const std::string& fallback) {
  std::ifstream f(dir / "config.json");
  if (!f) return fallback;
  try {
    const json j = json::parse(f);
    train::TrainConfig c;
    from_json(j.contains("train") ? j["train"] : j, c);
    return train::describe(c);
  } catch (const std::exception&) {
    return fallback;
  }
}

}  // namespace

std::vector<CompareRow> compare_runs(const std::vector<fs::path>& run_dirs) {
  if (run_dirs.empty()) throw Error("no run directories given");
  std::vector<std::string> missing;
  for (const auto& d : run_dirs) {
    if (!fs::exists(d / "metrics.json")) missing.push_back(d.string());
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
    throw Error("missing metrics.json in " + list);
  }
  struct Group {
    CompareRow row;
    std::vector<double> acc, f1;
  };
  std::map<std::string, Group> groups;
  for (const auto& d : run_dirs) {
    std::ifstream f(d / "metrics.json");
    EvalReport r;
    try {
      r = parse_metrics(json::parse(f));
    } catch (const std::exception& e) {
      throw Error("bad metrics.json in " + d.string() + ": " + e.what());
    }
    Group& g = groups[r.config_hash];
    if (g.row.runs == 0) {
      g.row.config_hash = r.config_hash;
      g.row.label = run_label(d, r.config_hash);
    }
    ++g.row.runs;
    g.row.seeds.push_back(r.seed);
    g.row.run_dirs.push_back(d.string());
    g.acc.push_back(r.accuracy);
    g.f1.push_back(r.macro_f1);
  }
  std::vector<CompareRow> rows;
  for (auto& [_, g] : groups) {
    g.row.accuracy_mean = mean_of(g.acc);
    g.row.accuracy_std = sample_std(g.acc);
    g.row.macro_f1_mean = mean_of(g.f1);
    g.row.macro_f1_std = sample_std(g.f1);
    rows.push_back(std::move(g.row));
  }
  std::stable_sort(rows.begin(), rows.end(), [](const CompareRow& a, const CompareRow& b) {
    return a.accuracy_mean > b.accuracy_mean;
  });
  return rows;
}

std::string compare_table_text(const std::vector<CompareRow>& rows) {
  std::size_t width = 6;
  for (const auto& r : rows) width = std::max(width, r.label.size());
  std::ostringstream out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-*s  %-16s  %4s  %-17s  %-17s\n", static_cast<int>(width), "config", "hash",
                "runs", "accuracy", "macro_f1");
  out << buf;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%-*s  %-16s  %4d  %.4f +- %.4f  %.4f +- %.4f\n", static_cast<int>(width),
                  r.label.c_str(), r.config_hash.c_str(), r.runs, r.accuracy_mean, r.accuracy_std,
                  r.macro_f1_mean, r.macro_f1_std);
    out << buf;
  }
  return out.str();
}

json compare_table_json(const std::vector<CompareRow>& rows) {
  json out = json::array();
  for (const auto& r : rows) {
    out.push_back({{"config_hash", r.config_hash},
                   {"label", r.label},
                   {"runs", r.runs},
                   {"accuracy_mean", r.accuracy_mean},
                   {"accuracy_std", r.accuracy_std},
                   {"macro_f1_mean", r.macro_f1_mean},
                   {"macro_f1_std", r.macro_f1_std},
                   {"seeds", r.seeds},
                   {"run_dirs", r.run_dirs}});
  }
  return out;
}

}  // namespace pdistill::eval
