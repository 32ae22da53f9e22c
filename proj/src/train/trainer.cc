#include "pdistill/train/trainer.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>

#include "pdistill/autodiff/adam.h"
#include "pdistill/autodiff/ops.h"
#include "pdistill/common/error.h"

namespace pdistill::train {

using nlohmann::json;
using namespace pdistill::ad;
using model::Arch;
using model::Model;
using model::ModelCheckpoint;

void TrainLog::update_best() {
  best_epoch = 0;
  double best = -1.0;
  for (const auto& e : epochs) {
    if (e.val_accuracy > best) {
      best = e.val_accuracy;
      best_epoch = e.epoch;
    }
  }
}

json to_json(const EpochRecord& r, std::uint64_t seed, int best_epoch, bool with_wall_time) {
  json j = {{"epoch", r.epoch},
            {"l_cls", r.loss.l_cls},
            {"l_attn", r.loss.l_attn},
            {"l_feat", r.loss.l_feat},
            {"l_dis", r.loss.l_dis},
            {"a", r.loss.a},
            {"b", r.loss.b},
            {"l_total", r.loss.l_total},
            {"teacher_loss", r.teacher_loss},
            {"train_accuracy", r.train_accuracy},
            {"val_accuracy", r.val_accuracy},
            {"steps", r.steps},
            {"best_epoch", best_epoch},
            {"seed", seed}};
  if (with_wall_time) j["wall_seconds"] = r.wall_seconds;
  return j;
}

std::string serialize_log(const TrainLog& log, bool with_wall_time) {
  std::string out;
  int best = 0;
  double best_acc = -1.0;
  for (const auto& e : log.epochs) {
    if (e.val_accuracy > best_acc) {
      best_acc = e.val_accuracy;
      best = e.epoch;
    }
    out += to_json(e, log.seed, best, with_wall_time).dump() + "\n";
  }
  return out;
}

bool early_stop(const TrainLog& log, int patience) {
  if (log.epochs.empty()) throw Error("early_stop: no completed epoch");
  return log.epochs.back().epoch - log.best_epoch >= patience;
}

void apply_feature_mask(std::vector<data::Utterance>& utts, const std::vector<int>& mask) {
  std::vector<bool> keep(dsp::kProsodyChannels, false);
  for (int c : mask) keep.at(c) = true;
  for (auto& u : utts) {
    for (int t = 0; t < u.prosody.rows(); ++t) {
      for (int c = 0; c < u.prosody.cols(); ++c) {
        if (!keep[c]) u.prosody(t, c) = 0.0;
      }
    }
  }
}

namespace {

int argmax(const std::vector<double>& v) {
  return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
}

double alpha_sum_error(Var alpha) {
  double s = 0.0;
  for (double v : alpha.value()) s += v;
  return std::abs(s - 1.0);
}

json mask_json(const std::vector<int>& mask) {
  json j = json::array();
  for (int c : mask) j.push_back(prosody_channel_names()[c]);
  return j;
}

enum class TeacherRole { None, Frozen, Joint };

class Trainer {
 public:
  Trainer(const TrainData& data, const TrainConfig& cfg, const TrainHooks& hooks, Model student,
          std::optional<Model> teacher, TeacherRole role)
      : cfg_(cfg), hooks_(hooks), student_(std::move(student)), teacher_(std::move(teacher)),
        role_(role), train_(data.train), val_(data.validation) {
    apply_feature_mask(train_, cfg.feature_mask);
    apply_feature_mask(val_, cfg.feature_mask);
    lr_.base = cfg.lr_head;
    if (cfg.lr_encoder) lr_.by_prefix.push_back({"encoder.", *cfg.lr_encoder});
    teacher_lr_.base = cfg.lr_head;
  }

  TrainResult run() {
    TrainResult result;
    result.log.seed = cfg_.seed;
    const ParameterSet frozen_copy = teacher_ ? teacher_->params() : ParameterSet();
    Rng mtl_rng(derive_seed(cfg_.seed, "mtl"));
    const std::uint64_t data_seed = derive_seed(cfg_.seed, "data");
    int global_step = 0;
    bool have_best = false;

    for (int epoch = 1; epoch <= cfg_.epochs; ++epoch) {
      const auto start = std::chrono::steady_clock::now();
      const auto order = data::epoch_order(train_.size(), data_seed, epoch - 1);
      EpochRecord rec;
      rec.epoch = epoch;
      LossBreakdown sum{0, 0, 0, 0, 0, 0, 0};
      int correct = 0;
      for (std::size_t begin = 0; begin < order.size(); begin += cfg_.batch_size) {
        const std::size_t end = std::min(order.size(), begin + cfg_.batch_size);
        const auto [a, b] = role_ == TeacherRole::None ? std::pair{1.0, 0.0} : mtl_weights(cfg_.mtl, mtl_rng);
        StepRecord step;
        step.epoch = epoch;
        step.step = ++global_step;
        double teacher_loss = 0.0;
        correct += train_step(order, begin, end, a, b, step, teacher_loss);
        sum.l_cls += step.loss.l_cls;
        sum.l_attn += step.loss.l_attn;
        sum.l_feat += step.loss.l_feat;
        sum.l_dis += step.loss.l_dis;
        sum.a += step.loss.a;
        sum.b += step.loss.b;
        sum.l_total += step.loss.l_total;
        rec.teacher_loss += teacher_loss;
        ++rec.steps;
        step.student = &student_.params();
        step.teacher = teacher_ ? &teacher_->params() : nullptr;
        if (hooks_.on_step) hooks_.on_step(step);
      }
      const double n = rec.steps;
      rec.loss = {sum.l_cls / n, sum.l_attn / n, sum.l_feat / n, sum.l_dis / n,
                  sum.a / n,     sum.b / n,      sum.l_total / n};
      rec.teacher_loss /= n;
      rec.train_accuracy = static_cast<double>(correct) / static_cast<double>(train_.size());
      rec.val_accuracy = accuracy(student_, val_);
      rec.wall_seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      result.log.epochs.push_back(rec);
      result.log.update_best();
      if (result.log.best_epoch == epoch) {
        result.best = checkpoint(epoch, rec.val_accuracy);
        have_best = true;
      }
      if (hooks_.on_epoch) hooks_.on_epoch(rec);
      if (early_stop(result.log, cfg_.early_stop_patience)) break;
    }
    if (!have_best) throw Error("training produced no checkpoint");
    const auto& last = result.log.epochs.back();
    result.last = checkpoint(last.epoch, last.val_accuracy);
    if (role_ == TeacherRole::Frozen && !(teacher_->params() == frozen_copy)) {
      throw Error("frozen teacher parameters changed during training");
    }
    if (role_ == TeacherRole::Joint) {
      result.teacher = model::make_checkpoint(
          *teacher_, {{"seed", cfg_.seed}, {"feature_mask", mask_json(cfg_.feature_mask)}});
    }
    return result;
  }

 private:
  // Returns the number of correctly classified items.
  int train_step(const std::vector<std::size_t>& order, std::size_t begin, std::size_t end, double a,
                 double b, StepRecord& step, double& teacher_loss) {
    const double inv_b = 1.0 / static_cast<double>(end - begin);
    GradientSet grads = zero_gradients(student_.params());
    GradientSet teacher_grads;
    if (role_ == TeacherRole::Joint) teacher_grads = zero_gradients(teacher_->params());
    LossBreakdown& L = step.loss;
    L = {0, 0, 0, 0, a, b, 0};
    int correct = 0;

    for (std::size_t k = begin; k < end; ++k) {
      const data::Utterance& u = train_[order[k]];
      Graph g;
      Binding sb(g, student_.params(), true);
      const auto so = student_.forward(g, sb, &u.mel, &u.prosody);
      const Var ce = cross_entropy(so.logits, u.label);
      if (argmax(so.logits.value()) == u.label) ++correct;
      step.max_alpha_sum_error = std::max(step.max_alpha_sum_error, alpha_sum_error(so.attention));

      Var total = ce;
      Var root;
      double l_attn = 0, l_feat = 0;
      if (role_ == TeacherRole::None) {
        root = scale(ce, inv_b);
      } else {
        Binding tb(g, teacher_->params(), role_ == TeacherRole::Joint);
        const auto to = teacher_->forward(g, tb, nullptr, &u.prosody);
        Var t_zF = to.frame_features;
        Var t_alpha = to.attention;
        Var t_ce;
        if (role_ == TeacherRole::Joint) {
          t_ce = cross_entropy(to.logits, u.label);
          teacher_loss += t_ce.item() * inv_b;
          t_zF = detach(t_zF);
          t_alpha = detach(t_alpha);
        }
        const DistillTerms d = distillation_loss(so.frame_features, so.attention, t_zF, t_alpha,
                                                 cfg_.distill_parts, cfg_.distill_level);
        step.max_alpha_sum_error = std::max({step.max_alpha_sum_error, alpha_sum_error(to.attention),
                                             alpha_sum_error(d.teacher_alpha_aligned)});
        const Var dis = add(d.l_attn, d.l_feat);
        total = add(scale(ce, a), scale(dis, b));
        l_attn = d.l_attn.item();
        l_feat = d.l_feat.item();
        root = scale(total, inv_b);
        if (role_ == TeacherRole::Joint) root = add(root, scale(t_ce, inv_b));
        g.backward(root);
        if (role_ == TeacherRole::Joint) accumulate(teacher_grads, tb.gradients());
      }
      if (role_ == TeacherRole::None) g.backward(root);
      accumulate(grads, sb.gradients());

      L.l_cls += ce.item() * inv_b;
      L.l_attn += l_attn * inv_b;
      L.l_feat += l_feat * inv_b;
      L.l_total += total.item() * inv_b;
    }
    L.l_dis = L.l_attn + L.l_feat;
    if (L.l_cls < 0 || L.l_attn < 0 || L.l_feat < 0 || L.identity_error() > 1e-6) {
      throw Error("loss breakdown identity violated at step " + std::to_string(step.step));
    }
    adam_step(student_.params(), grads, adam_, lr_);
    if (role_ == TeacherRole::Joint) adam_step(teacher_->params(), teacher_grads, teacher_adam_, teacher_lr_);
    return correct;
  }

  ModelCheckpoint checkpoint(int epoch, double val_accuracy) const {
    json train_cfg = cfg_;
    return model::make_checkpoint(student_, {{"epoch", epoch},
                                             {"val_accuracy", val_accuracy},
                                             {"seed", cfg_.seed},
                                             {"config_hash", config_hash(cfg_)},
                                             {"feature_mask", mask_json(cfg_.feature_mask)},
                                             {"train_config", train_cfg}});
  }

  const TrainConfig& cfg_;
  const TrainHooks& hooks_;
  Model student_;
  std::optional<Model> teacher_;
  TeacherRole role_;
  std::vector<data::Utterance> train_;
  std::vector<data::Utterance> val_;
  LearningRates lr_;
  LearningRates teacher_lr_;
  AdamState adam_;
  AdamState teacher_adam_;
};

void check_data(const TrainData& data) {
  if (data.train.empty()) throw Error("training split is empty");
  if (data.validation.empty()) throw Error("validation split is empty");
  if (data.n_intents < 1) throw Error("n_intents must be >= 1");
  for (const auto* split : {&data.train, &data.validation}) {
    for (const auto& u : *split) {
      if (u.label < 0 || u.label >= data.n_intents) {
        throw Error("label " + std::to_string(u.label) + " of " + u.audio + " outside [0, " +
                    std::to_string(data.n_intents) + ")");
      }
    }
  }
}

model::ModelConfig model_config(const TrainConfig& cfg, int n_intents) {
  return model::make_model_config(cfg.arch, cfg.dims, n_intents, cfg.prosody_attention);
}

}  // namespace

int predict(const Model& m, const data::Utterance& u) {
  Graph g;
  Binding b(g, m.params(), false);
  return argmax(m.forward(g, b, &u.mel, &u.prosody).logits.value());
}

double accuracy(const Model& m, const std::vector<data::Utterance>& utts) {
  if (utts.empty()) throw Error("accuracy: empty split");
  int correct = 0;
  for (const auto& u : utts) correct += predict(m, u) == u.label;
  return static_cast<double>(correct) / static_cast<double>(utts.size());
}

TrainResult train_teacher(const TrainData& data, const TrainConfig& cfg, const TrainHooks& hooks) {
  cfg.validate();
  check_data(data);
  if (cfg.arch != Arch::Teacher) throw ConfigError("train_teacher needs arch Teacher");
  Model m = Model::build(model_config(cfg, data.n_intents), derive_seed(cfg.seed, "model"));
  return Trainer(data, cfg, hooks, std::move(m), std::nullopt, TeacherRole::None).run();
}

TrainResult train_baseline(const TrainData& data, const TrainConfig& cfg, const TrainHooks& hooks) {
  cfg.validate();
  check_data(data);
  if (cfg.arch != Arch::BaselinePlain && cfg.arch != Arch::BaselineLocalConcat) {
    throw ConfigError("train_baseline needs arch BaselinePlain or BaselineLocalConcat");
  }
  Model m = Model::build(model_config(cfg, data.n_intents), derive_seed(cfg.seed, "model"));
  return Trainer(data, cfg, hooks, std::move(m), std::nullopt, TeacherRole::None).run();
}

TrainResult train_student(const TrainData& data, const TrainConfig& cfg, const ModelCheckpoint* teacher,
                          const TrainHooks& hooks) {
  cfg.validate();
  check_data(data);
  if (cfg.arch != Arch::Student) throw ConfigError("train_student needs arch Student");
  Model student = Model::build(model_config(cfg, data.n_intents), derive_seed(cfg.seed, "model"));

  if (cfg.teacher.mode == TeacherMode::JointFromScratch) {
    TrainConfig tcfg = cfg;
    tcfg.arch = Arch::Teacher;
    tcfg.prosody_attention = false;
    Model t = Model::build(model_config(tcfg, data.n_intents), derive_seed(cfg.seed, "teacher"));
    return Trainer(data, cfg, hooks, std::move(student), std::move(t), TeacherRole::Joint).run();
  }
  if (!teacher) throw Error("train_student: a PretrainedFrozen teacher checkpoint is required");
  if (teacher->config.arch != Arch::Teacher) {
    throw Error("teacher checkpoint has arch " + model::to_string(teacher->config.arch));
  }
  if (teacher->config.n_intents != data.n_intents) {
    throw Error("teacher has " + std::to_string(teacher->config.n_intents) + " intents, dataset has " +
                std::to_string(data.n_intents));
  }
  if (teacher->config.encoder.hidden_channels != cfg.dims.hidden) {
    throw Error("teacher hidden size " + std::to_string(teacher->config.encoder.hidden_channels) +
                " != student hidden size " + std::to_string(cfg.dims.hidden));
  }
  if (teacher->metadata.contains("feature_mask") && teacher->metadata["feature_mask"] != mask_json(cfg.feature_mask)) {
    throw Error("teacher was trained with feature_mask " + teacher->metadata["feature_mask"].dump() +
                " but the student uses " + mask_json(cfg.feature_mask).dump());
  }
  return Trainer(data, cfg, hooks, std::move(student), teacher->model(), TeacherRole::Frozen).run();
}

TrainResult train_any(const TrainData& data, const TrainConfig& cfg, const TrainHooks& hooks) {
  switch (cfg.arch) {
    case Arch::Teacher: return train_teacher(data, cfg, hooks);
    case Arch::BaselinePlain:
    case Arch::BaselineLocalConcat: return train_baseline(data, cfg, hooks);
    case Arch::Student: {
      if (cfg.teacher.mode == TeacherMode::JointFromScratch) return train_student(data, cfg, nullptr, hooks);
      if (cfg.teacher.checkpoint.empty()) {
        throw ConfigError("teacher.checkpoint is required for a PretrainedFrozen teacher");
      }
      const ModelCheckpoint t = model::load_checkpoint(cfg.teacher.checkpoint);
      return train_student(data, cfg, &t, hooks);
    }
  }
  throw Error("unknown arch");
}

void write_run_outputs(const TrainResult& r, const std::filesystem::path& run_dir) {
  std::filesystem::create_directories(run_dir);
  {
    std::ofstream f(run_dir / "log.jsonl", std::ios::binary | std::ios::trunc);
    if (!f) throw Error("cannot write " + (run_dir / "log.jsonl").string());
    f << serialize_log(r.log);
  }
  model::save_checkpoint(r.best, run_dir / "best.ckpt");
  model::save_checkpoint(r.last, run_dir / "last.ckpt");
  if (r.teacher) model::save_checkpoint(*r.teacher, run_dir / "teacher.ckpt");
}

}  // namespace pdistill::train
