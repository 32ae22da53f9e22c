// Acceptance suite: prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "grad_cases.h"
#include "pdistill/app/commands.h"
#include "pdistill/data/wav.h"
#include "pdistill/eval/report.h"
#include "pdistill/model/checkpoint.h"
#include "pdistill/train/trainer.h"

using namespace pdistill;
using namespace pdistill::testing;
namespace fs = std::filesystem;

namespace {

constexpr int kSeeds = 3;

struct Outcome {
  Outcome(int id = 0, std::string name = "") : id(id), name(std::move(name)) {}

  int id;
  std::string name;
  bool pass = false;
  std::string detail;
  double seconds = 0;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string join(const std::vector<double>& v, const char* f = "%.4f") {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + fmt(f, v[i]);
  return "[" + s + "]";
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

// Shared state across criteria. Later criteria reuse the dataset and the
// teachers trained for criterion 5.
struct Context {
  fs::path work;
  app::RunConfig base;
  std::optional<train::TrainData> data;
  std::vector<data::Utterance> test;
  std::map<std::uint64_t, fs::path> teachers;  // seed -> best.ckpt

  fs::path run_dir(const std::string& name) const { return work / "runs" / name; }

  void ensure_data() {
    if (data) return;
    const fs::path manifest = base.manifest_path();
    const fs::path spec_file = fs::path(base.dataset_dir) / "synth.json";
    const nlohmann::json spec = base.synth;
    if (!fs::exists(manifest) || !fs::exists(spec_file) || nlohmann::json::parse(slurp(spec_file)) != spec) {
      fs::remove_all(base.dataset_dir);
      app::cmd_synth_data(base);
      std::ofstream(spec_file) << spec.dump();
    }
    data = app::load_train_data(base);
    test = app::load_eval_split(base, data::Split::Test);
  }

  app::RunConfig config(const std::string& run, const train::TrainConfig& t) const {
    app::RunConfig c = base;
    c.train = t;
    c.run_dir = run_dir(run).string();
    return c;
  }

  app::TrainOutcome train(const std::string& run, const train::TrainConfig& t,
                          const train::TrainHooks& hooks = {}) {
    ensure_data();
    return app::run_train(config(run, t), *data, test, hooks);
  }

  fs::path teacher(std::uint64_t seed) {
    if (!teachers.contains(seed)) {
      train::TrainConfig t;
      t.arch = model::Arch::Teacher;
      t.seed = seed;
      const std::string run = "teacher_s" + std::to_string(seed);
      train(run, t);
      teachers[seed] = run_dir(run) / "best.ckpt";
    }
    return teachers[seed];
  }
};

// 1. Finite-difference checks of every op and every architecture.
Outcome gradient_suite(Context&) {
  Outcome o{1, "gradient suite"};
  double worst = 0;
  std::string worst_case;
  int checks = 0;
  auto record = [&](const std::string& name, double err) {
    ++checks;
    if (err > worst || std::isnan(err)) {
      worst = std::isnan(err) ? INFINITY : err;
      worst_case = name;
    }
  };

  for (const auto& [name, build] : op_grad_cases()) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      Rng rng(derive_seed(seed, name));
      auto [inputs, f] = build(rng);
      record(name, grad_check(f, inputs).max_rel_err);
    }
  }

  model::ModelDims dims;
  dims.hidden = 5;
  dims.mel_channels = 7;
  dims.lstm_hidden = 4;
  const int n_intents = 3;
  struct ArchCase {
    std::string name;
    model::Arch arch;
    bool prosody_attention;
  };
  const std::vector<ArchCase> archs = {
      {"Teacher", model::Arch::Teacher, false},
      {"Student+Both", model::Arch::Student, false},
      {"BaselinePlain", model::Arch::BaselinePlain, false},
      {"BaselineLocalConcat", model::Arch::BaselineLocalConcat, false},
      {"ProsodyAttention", model::Arch::BaselinePlain, true},
  };
  for (const auto& c : archs) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      Rng rng(derive_seed(seed, c.name));
      const model::Model m = model::Model::build(model::make_model_config(c.arch, dims, n_intents, c.prosody_attention), seed);
      const model::Model teacher = model::Model::build(model::make_model_config(model::Arch::Teacher, dims, n_intents), seed + 100);
      const int T = 2 + static_cast<int>(rng.below(11));
      const Matrix mel = [&] {
        Matrix x(T, dims.mel_channels);
        for (double& v : x.data()) v = rng.uniform(-1.0, 1.0);
        return x;
      }();
      const Matrix prosody = [&] {
        Matrix x(T, 6);
        for (double& v : x.data()) v = rng.uniform(-1.0, 1.0);
        return x;
      }();
      const int label = static_cast<int>(rng.below(n_intents));
      const double a = rng.uniform(0.1, 0.9);
      std::vector<Tensor> inputs;
      for (const auto& p : m.params().items()) {
        Tensor t = p.value;
        for (double& v : t.data) v += 0.05 * rng.uniform(-1.0, 1.0);
        inputs.push_back(std::move(t));
      }
      const bool distill = c.arch == model::Arch::Student;
      const auto r = grad_check(
          [&](Graph& g, const std::vector<Var>& vars) {
            const ad::Binding b(m.params(), vars);
            const auto out = m.forward(g, b, &mel, &prosody);
            Var loss = cross_entropy(out.logits, label);
            if (!distill) return loss;
            const ad::Binding tb(g, teacher.params(), false);
            const auto t = teacher.forward(g, tb, &mel, &prosody);
            const auto d = train::distillation_loss(out.frame_features, out.attention, t.frame_features,
                                                    t.attention, train::DistillParts::Both,
                                                    train::DistillLevel::FrameLevel);
            return add(scale(loss, a), scale(add(d.l_attn, d.l_feat), 1.0 - a));
          },
          inputs);
      record(c.name, r.max_rel_err);
    }
  }
  o.pass = worst < 1e-3;
  o.detail = std::to_string(checks) + " checks (" + std::to_string(op_grad_cases().size()) + " ops, " +
             std::to_string(archs.size()) + " architectures, 20 seeds each), max rel err " + fmt("%.2e", worst) +
             " in " + worst_case + " (limit 1e-3)";
  return o;
}

dsp::Waveform tone(double hz, double seconds) {
  dsp::Waveform w;
  w.samples.resize(static_cast<std::size_t>(seconds * dsp::kSampleRate));
  for (std::size_t i = 0; i < w.samples.size(); ++i) {
    w.samples[i] = static_cast<float>(0.5 * std::sin(2.0 * std::numbers::pi * hz * i / dsp::kSampleRate));
  }
  return w;
}

dsp::Waveform glide(double f_start, double f_end, double seconds) {
  dsp::Waveform w;
  const std::size_t n = static_cast<std::size_t>(seconds * dsp::kSampleRate);
  w.samples.resize(n);
  double phase = 0;
  for (std::size_t i = 0; i < n; ++i) {
    phase += 2.0 * std::numbers::pi * (f_start + (f_end - f_start) * i / n) / dsp::kSampleRate;
    w.samples[i] = static_cast<float>(0.5 * std::sin(phase));
  }
  return w;
}

// 2. Frame counts, band-energy partition and pitch on tones and a glide.
Outcome dsp_oracles(Context&) {
  Outcome o{2, "DSP oracles"};
  const dsp::FrameSpec frame;
  const dsp::PitchConfig pitch;
  Rng rng(2);
  int count_errors = 0;
  double partition_err = 0;
  for (int i = 0; i < 100; ++i) {
    const std::size_t n = 400 + rng.below(80000 - 400 + 1);
    dsp::Waveform w;
    w.samples.resize(n);
    for (float& s : w.samples) s = static_cast<float>(rng.uniform(-0.5, 0.5));
    const Matrix mel = dsp::mel_spectrogram(w, frame);
    const long expected = 1 + (static_cast<long>(n) - 400) / 160;
    count_errors += mel.rows() != expected;
    const dsp::BandEnergies e = dsp::band_energies(mel);
    for (std::size_t t = 0; t < e.total.size(); ++t) {
      const double total = std::exp(e.total[t]);
      partition_err = std::max(partition_err, std::abs(total - std::exp(e.upper[t]) - std::exp(e.lower[t])) / total);
    }
  }
  // The prosody track carries the same energies.
  for (int i = 0; i < 5; ++i) {
    dsp::Waveform w;
    w.samples.resize(8000 + rng.below(24000));
    for (float& s : w.samples) s = static_cast<float>(rng.uniform(-0.5, 0.5));
    const Matrix p = dsp::prosody_track_raw(w, frame, pitch);
    count_errors += p.rows() != dsp::mel_spectrogram(w, frame).rows();
    for (int t = 0; t < p.rows(); ++t) {
      const double total = std::exp(p(t, dsp::kTotalEnergy));
      partition_err = std::max(partition_err, std::abs(total - std::exp(p(t, dsp::kUpperEnergy)) -
                                                       std::exp(p(t, dsp::kLowerEnergy))) / total);
    }
  }

  double tone_err = 0;
  for (double hz : {100.0, 220.0, 330.0}) {
    const auto track = dsp::track_pitch(dsp::nccf(tone(hz, 2.0), frame, pitch), pitch);
    for (double f : track.f0_hz) tone_err = std::max(tone_err, std::abs(f - hz));
  }

  const auto rising = dsp::track_pitch(dsp::nccf(glide(150.0, 300.0, 2.0), frame, pitch), pitch);
  const auto falling = dsp::track_pitch(dsp::nccf(glide(300.0, 150.0, 2.0), frame, pitch), pitch);
  int violations = 0;
  for (std::size_t t = 1; t < rising.f0_hz.size(); ++t) violations += rising.f0_hz[t] < rising.f0_hz[t - 1];
  for (std::size_t t = 1; t < falling.f0_hz.size(); ++t) violations += falling.f0_hz[t] > falling.f0_hz[t - 1];

  o.pass = count_errors == 0 && partition_err <= 1e-6 && tone_err <= 4.0 && violations == 0;
  o.detail = "frame-count mismatches " + std::to_string(count_errors) + "/105, partition rel err " +
             fmt("%.2e", partition_err) + " (limit 1e-6), tone error " + fmt("%.2f", tone_err) +
             " Hz (limit 4), glide monotonicity violations " + std::to_string(violations);
  return o;
}

// 3. Per-step structure of the student objective over a 3-epoch run.
Outcome objective_structure(Context& ctx) {
  Outcome o{3, "student objective structure"};
  ctx.ensure_data();
  const model::ModelCheckpoint teacher = model::load_checkpoint(ctx.teacher(0));
  const ad::ParameterSet snapshot = teacher.params;

  train::TrainConfig t;
  t.arch = model::Arch::Student;
  t.epochs = 3;
  t.mtl.scheme = train::MtlScheme::RandomPerStep;
  int steps = 0, identity_bad = 0, weight_bad = 0, alpha_bad = 0, frozen_bad = 0;
  double worst_identity = 0, worst_alpha = 0;
  train::TrainHooks hooks;
  hooks.on_step = [&](const train::StepRecord& s) {
    ++steps;
    const double err = s.loss.identity_error();
    worst_identity = std::max(worst_identity, err);
    identity_bad += !(err <= 1e-6);
    weight_bad += !(s.loss.a > 0 && s.loss.b > 0 && std::abs(s.loss.a + s.loss.b - 1.0) <= 1e-7);
    worst_alpha = std::max(worst_alpha, s.max_alpha_sum_error);
    alpha_bad += !(s.max_alpha_sum_error <= 1e-6);
    frozen_bad += s.teacher == nullptr || !(*s.teacher == snapshot);
  };
  const train::TrainResult r = train::train_student(*ctx.data, t, &teacher, hooks);
  frozen_bad += !(teacher.params == snapshot);

  o.pass = steps > 0 && identity_bad == 0 && weight_bad == 0 && alpha_bad == 0 && frozen_bad == 0 &&
           static_cast<int>(r.log.epochs.size()) == 3;
  o.detail = std::to_string(steps) + " steps over " + std::to_string(r.log.epochs.size()) +
             " epochs; identity max rel err " + fmt("%.2e", worst_identity) + ", weight violations " +
             std::to_string(weight_bad) + ", alpha sum max err " + fmt("%.2e", worst_alpha) +
             ", teacher changes " + std::to_string(frozen_bad);
  return o;
}

// 4. Non-learned oracles separate both factors of the synthetic intents.
Outcome dataset_oracles(Context& ctx) {
  Outcome o{4, "dataset oracles"};
  ctx.ensure_data();
  const data::Manifest manifest = data::read_manifest(ctx.base.manifest_path(), ctx.base.synth.n_intents());
  const int n_contour = ctx.base.synth.n_contour_classes;
  const int n_content = ctx.base.synth.n_content_classes;

  // Contour: sign of the least-squares slope of raw log pitch over the
  // central 80% of frames.
  int contour_ok = 0;
  const auto test_entries = manifest.split(data::Split::Test);
  for (const auto& e : test_entries) {
    const Matrix p = dsp::prosody_track_raw(data::load_wav(manifest.audio_path(e)), ctx.base.frame, ctx.base.pitch);
    const int t0 = p.rows() / 10, t1 = p.rows() - p.rows() / 10;
    double mt = 0, mp = 0;
    for (int t = t0; t < t1; ++t) {
      mt += t;
      mp += p(t, dsp::kLogPitch);
    }
    mt /= t1 - t0;
    mp /= t1 - t0;
    double num = 0;
    for (int t = t0; t < t1; ++t) num += (t - mt) * (p(t, dsp::kLogPitch) - mp);
    contour_ok += (num > 0 ? 0 : 1) == e.intent % n_contour;
  }
  const double contour_acc = static_cast<double>(contour_ok) / test_entries.size();

  // Content: nearest train-split centroid of the time-averaged log-mel.
  auto mean_mel = [](const data::Utterance& u) {
    std::vector<double> v(u.mel.cols(), 0.0);
    for (int t = 0; t < u.mel.rows(); ++t) {
      for (int c = 0; c < u.mel.cols(); ++c) v[c] += u.mel(t, c) / u.mel.rows();
    }
    return v;
  };
  std::vector<std::vector<double>> centroid(n_content);
  std::vector<int> count(n_content, 0);
  for (const auto& u : ctx.data->train) {
    const auto v = mean_mel(u);
    auto& c = centroid[u.label / n_contour];
    if (c.empty()) c.assign(v.size(), 0.0);
    for (std::size_t k = 0; k < v.size(); ++k) c[k] += v[k];
    ++count[u.label / n_contour];
  }
  for (int c = 0; c < n_content; ++c) {
    for (double& x : centroid[c]) x /= count[c];
  }
  int content_ok = 0;
  for (const auto& u : ctx.test) {
    const auto v = mean_mel(u);
    int best = 0;
    double best_d = INFINITY;
    for (int c = 0; c < n_content; ++c) {
      double d = 0;
      for (std::size_t k = 0; k < v.size(); ++k) d += (v[k] - centroid[c][k]) * (v[k] - centroid[c][k]);
      if (d < best_d) {
        best_d = d;
        best = c;
      }
    }
    content_ok += best == u.label / n_contour;
  }
  const double content_acc = static_cast<double>(content_ok) / ctx.test.size();

  o.pass = contour_acc >= 0.95 && content_acc >= 0.95;
  o.detail = "contour slope oracle " + fmt("%.4f", contour_acc) + ", content centroid oracle " +
             fmt("%.4f", content_acc) + " on " + std::to_string(ctx.test.size()) + " test utterances (limit 0.95)";
  return o;
}

// 5. Teachers reach 0.90 validation accuracy within 20 epochs.
Outcome teacher_competence(Context& ctx) {
  Outcome o{5, "teacher competence"};
  std::vector<double> val;
  for (std::uint64_t seed = 0; seed < kSeeds; ++seed) {
    const fs::path ckpt = ctx.teacher(seed);
    const auto log = slurp(ckpt.parent_path() / "log.jsonl");
    std::istringstream lines(log);
    std::string line;
    int epochs = 0;
    while (std::getline(lines, line)) ++epochs;
    const auto meta = model::load_checkpoint(ckpt).metadata;
    if (epochs > 20) throw Error("teacher ran more than 20 epochs");
    val.push_back(meta.at("val_accuracy").get<double>());
  }
  const double med = median(val);
  o.pass = med >= 0.90;
  o.detail = "median best validation accuracy " + fmt("%.4f", med) + " over seeds " + join(val) + " (limit 0.90)";
  return o;
}

// 6. Student versus the plain baseline, overall and on contour pairs.
Outcome comparative(Context& ctx) {
  Outcome o{6, "comparative experiment"};
  std::vector<double> s_acc, b_acc, s_pair, b_pair;
  const int n_contour = ctx.base.synth.n_contour_classes;
  for (std::uint64_t seed = 0; seed < kSeeds; ++seed) {
    train::TrainConfig b;
    b.arch = model::Arch::BaselinePlain;
    b.seed = seed;
    const auto base = ctx.train("baseline_s" + std::to_string(seed), b);
    b_acc.push_back(base.test_report.accuracy);
    b_pair.push_back(eval::contour_pair_accuracy(base.result.best, ctx.test, n_contour));

    train::TrainConfig s;
    s.arch = model::Arch::Student;
    s.seed = seed;
    s.teacher.checkpoint = ctx.teacher(seed).string();
    const auto student = ctx.train("student_s" + std::to_string(seed), s);
    s_acc.push_back(student.test_report.accuracy);
    s_pair.push_back(eval::contour_pair_accuracy(student.result.best, ctx.test, n_contour));
  }
  const double sa = median(s_acc), ba = median(b_acc), sp = median(s_pair), bp = median(b_pair);
  const bool overall = sa >= ba - 0.02;
  const bool pairs = sp >= bp + 0.05;
  o.pass = overall && pairs;
  o.detail = "test accuracy student " + fmt("%.4f", sa) + " " + join(s_acc) + " vs baseline " + fmt("%.4f", ba) +
             " " + join(b_acc) + " (need student >= baseline - 0.02: " + (overall ? "met" : "NOT met") +
             "); contour-pair accuracy student " + fmt("%.4f", sp) + " " + join(s_pair) + " vs baseline " +
             fmt("%.4f", bp) + " " + join(b_pair) + " (need student >= baseline + 0.05: " +
             (pairs ? "met" : "NOT met") + ")";
  return o;
}

// 7. Every ablation axis yields its own hash, run and comparison row.
Outcome ablations(Context& ctx) {
  Outcome o{7, "ablation machinery"};
  train::TrainConfig base;
  base.arch = model::Arch::Student;
  base.epochs = 5;
  base.teacher.checkpoint = ctx.teacher(0).string();

  // Feature-mask variants need a teacher trained on the same channels.
  train::TrainConfig masked_teacher;
  masked_teacher.arch = model::Arch::Teacher;
  masked_teacher.epochs = 5;
  masked_teacher.feature_mask = {dsp::kTotalEnergy, dsp::kUpperEnergy, dsp::kLowerEnergy};
  ctx.train("ablation_teacher_energy", masked_teacher);

  std::vector<std::pair<std::string, train::TrainConfig>> variants;
  variants.push_back({"base", base});
  auto add = [&](const std::string& name, const std::function<void(train::TrainConfig&)>& edit) {
    train::TrainConfig c = base;
    edit(c);
    variants.push_back({name, c});
  };
  add("level_global", [](auto& c) { c.distill_level = train::DistillLevel::Global; });
  add("parts_attention", [](auto& c) { c.distill_parts = train::DistillParts::AttentionOnly; });
  add("parts_feature", [](auto& c) { c.distill_parts = train::DistillParts::FeatureOnly; });
  add("teacher_joint", [](auto& c) {
    c.teacher.mode = train::TeacherMode::JointFromScratch;
    c.teacher.checkpoint.clear();
  });
  add("mtl_fixed", [](auto& c) {
    c.mtl.scheme = train::MtlScheme::Fixed;
    c.mtl.a = 0.5;
    c.mtl.b = 0.5;
  });
  add("mask_energy", [&](auto& c) {
    c.feature_mask = masked_teacher.feature_mask;
    c.teacher.checkpoint = (ctx.run_dir("ablation_teacher_energy") / "best.ckpt").string();
  });

  std::set<std::string> hashes;
  std::vector<fs::path> dirs;
  int incomplete = 0;
  for (const auto& [name, cfg] : variants) {
    hashes.insert(train::config_hash(cfg));
    const auto out = ctx.train("ablation_" + name, cfg);
    incomplete += out.result.log.epochs.size() != 5;
    dirs.push_back(ctx.run_dir("ablation_" + name));
  }
  const auto rows = app::cmd_compare(dirs);
  std::set<std::string> row_hashes;
  for (const auto& r : rows) row_hashes.insert(r.config_hash);
  std::printf("%s", eval::compare_table_text(rows).c_str());

  o.pass = hashes.size() == variants.size() && incomplete == 0 && rows.size() == variants.size() &&
           row_hashes == hashes;
  o.detail = std::to_string(variants.size()) + " variants, " + std::to_string(hashes.size()) + " distinct hashes, " +
             std::to_string(incomplete) + " incomplete runs, " + std::to_string(rows.size()) + " compare rows";
  return o;
}

// 8. Reproducible checkpoints, lossless checkpoint files and exact metrics.
Outcome determinism(Context& ctx) {
  Outcome o{8, "determinism and serialization"};
  train::TrainConfig t;
  t.arch = model::Arch::Student;
  t.epochs = 2;
  t.seed = 11;
  t.teacher.checkpoint = ctx.teacher(0).string();
  ctx.train("determinism_a", t);
  ctx.train("determinism_b", t);
  const fs::path a = ctx.run_dir("determinism_a");
  const bool same_ckpt = slurp(a / "best.ckpt") == slurp(ctx.run_dir("determinism_b") / "best.ckpt");
  // metrics.json names its own checkpoint path; everything else must match.
  auto metrics_without_path = [](const fs::path& dir) {
    auto j = nlohmann::json::parse(slurp(dir / "metrics.json"));
    j.erase("checkpoint");
    return j.dump();
  };
  const bool same_metrics = metrics_without_path(a) == metrics_without_path(ctx.run_dir("determinism_b"));

  const model::ModelCheckpoint loaded = model::load_checkpoint(a / "best.ckpt");
  model::save_checkpoint(loaded, a / "resaved.ckpt");
  const bool round_trip = slurp(a / "best.ckpt") == slurp(a / "resaved.ckpt");

  // Recount metrics.json from raw logits without the evaluation library.
  const auto metrics = nlohmann::json::parse(slurp(a / "metrics.json"));
  const model::Model m = loaded.model();
  const int k = loaded.config.n_intents;
  std::vector<long> cm(static_cast<std::size_t>(k * k), 0);
  for (const auto& u : ctx.test) {
    ad::Graph g;
    const ad::Binding b(g, m.params(), false);
    const auto& l = m.forward(g, b, &u.mel, &u.prosody).logits.value();
    const int pred = static_cast<int>(std::max_element(l.begin(), l.end()) - l.begin());
    ++cm[u.label * k + pred];
  }
  long correct = 0, total = 0;
  double f1_sum = 0;
  bool per_class_ok = metrics.at("per_class").size() == static_cast<std::size_t>(k);
  for (int c = 0; c < k; ++c) {
    long tp = cm[c * k + c], predicted = 0, actual = 0;
    for (int j = 0; j < k; ++j) {
      predicted += cm[j * k + c];
      actual += cm[c * k + j];
    }
    correct += tp;
    total += actual;
    const double p = predicted > 0 ? static_cast<double>(tp) / predicted : 0.0;
    const double r = actual > 0 ? static_cast<double>(tp) / actual : 0.0;
    const double f1 = p + r > 0 ? 2.0 * p * r / (p + r) : 0.0;
    f1_sum += f1;
    if (per_class_ok) {
      const auto& row = metrics["per_class"][c];
      per_class_ok = row.at("precision").get<double>() == p && row.at("recall").get<double>() == r &&
                     row.at("f1").get<double>() == f1;
    }
  }
  const bool recount = metrics.at("accuracy").get<double>() == static_cast<double>(correct) / total &&
                       metrics.at("macro_f1").get<double>() == f1_sum / k &&
                       metrics.at("n").get<long>() == total && per_class_ok;

  o.pass = same_ckpt && same_metrics && round_trip && recount;
  o.detail = std::string("repeat run best.ckpt ") + (same_ckpt ? "identical" : "DIFFERS") + ", metrics.json " +
             (same_metrics ? "identical" : "DIFFERS") + ", save/load/save " + (round_trip ? "identical" : "DIFFERS") +
             ", metrics recount " + (recount ? "exact" : "MISMATCH") + " (accuracy " +
             fmt("%.4f", static_cast<double>(correct) / total) + ")";
  return o;
}

// 9. The prosody-attention model concentrates attention on voiced frames.
Outcome attention_sanity(Context& ctx) {
  Outcome o{9, "attention on voiced frames"};
  train::TrainConfig t;
  t.arch = model::Arch::BaselinePlain;
  t.prosody_attention = true;
  const auto out = ctx.train("prosody_attention", t);
  const model::ModelCheckpoint& ckpt = out.result.best;

  double voiced_mass = 0, top_mass = 0;
  int n = 0;
  for (const auto& u : ctx.test) {
    if (n == 20) break;
    ++n;
    const auto rows = eval::attention_rows(ckpt, u, ctx.base.frame);
    const int Tp = static_cast<int>(rows.size());
    // NCCF at the attention frame rate: mean of consecutive frame pairs.
    std::vector<double> nccf(Tp, 0.0);
    for (int i = 0; i < Tp; ++i) {
      const int r0 = 2 * i, r1 = std::min(2 * i + 1, u.prosody.rows() - 1);
      nccf[i] = r0 == r1 ? u.prosody(r0, dsp::kNccf) : 0.5 * (u.prosody(r0, dsp::kNccf) + u.prosody(r1, dsp::kNccf));
    }
    const double med = median(nccf);
    std::vector<int> order(Tp);
    for (int i = 0; i < Tp; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](int x, int y) { return rows[x].alpha > rows[y].alpha; });
    const int top = std::max(1, static_cast<int>(std::ceil(0.1 * Tp)));
    for (int j = 0; j < top; ++j) {
      const int i = order[j];
      top_mass += rows[i].alpha;
      if (nccf[i] > med) voiced_mass += rows[i].alpha;
    }
  }
  const double share = voiced_mass / top_mass;
  o.pass = n == 20 && share >= 0.60;
  o.detail = "top-decile attention mass on above-median NCCF frames " + fmt("%.4f", share) + " over " +
             std::to_string(n) + " test utterances (limit 0.60)";
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App cli{"Acceptance suite"};
  std::string work = "acceptance_work";
  std::vector<int> only;
  cli.add_option("--work-dir", work, "Dataset, cache and run outputs");
  cli.add_option("--only", only, "Criteria to run (default: all)")->check(CLI::Range(1, 9));
  CLI11_PARSE(cli, argc, argv);

  Context ctx;
  ctx.work = fs::absolute(work);
  ctx.base.dataset_dir = (ctx.work / "data").string();
  ctx.base.workers = data::default_workers();
  fs::remove_all(ctx.work / "runs");
  fs::create_directories(ctx.work / "runs");

  // Criterion 5 runs before 3 so its seed-0 teacher is reused.
  const std::vector<std::pair<int, Outcome (*)(Context&)>> order = {
      {1, gradient_suite}, {2, dsp_oracles},  {4, dataset_oracles}, {5, teacher_competence}, {3, objective_structure},
      {6, comparative},    {7, ablations},    {8, determinism},     {9, attention_sanity},
  };
  std::vector<Outcome> results;
  for (const auto& [id, run] : order) {
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = run(ctx);
    } catch (const std::exception& e) {
      o = Outcome(id, "criterion " + std::to_string(id));
      o.detail = std::string("error: ") + e.what();
    }
    o.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("[%d] %s %s: %s (%.1f s)\n", o.id, o.pass ? "PASS" : "FAIL", o.name.c_str(), o.detail.c_str(),
                o.seconds);
    std::fflush(stdout);
    results.push_back(o);
  }

  std::sort(results.begin(), results.end(), [](const Outcome& a, const Outcome& b) { return a.id < b.id; });
  std::printf("\nsummary\n");
  int failed = 0;
  for (const auto& o : results) {
    std::printf("criterion %d: %s  %s\n", o.id, o.pass ? "PASS" : "FAIL", o.name.c_str());
    failed += !o.pass;
  }
  std::printf("%zu criteria, %d failed\n", results.size(), failed);
  return failed == 0 ? 0 : 1;
}
