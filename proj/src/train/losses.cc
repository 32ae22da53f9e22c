#include "pdistill/train/losses.h"

#include <algorithm>
#include <cmath>

#include "pdistill/autodiff/ops.h"
#include "pdistill/common/error.h"
#include "pdistill/model/model.h"

namespace pdistill::train {

using namespace pdistill::ad;

double LossBreakdown::identity_error() const {
  const double expect = a * l_cls + b * l_dis;
  return std::abs(l_total - expect) / std::max({std::abs(l_total), std::abs(expect), 1e-12});
}

std::pair<double, double> mtl_weights(const MtlConfig& cfg, Rng& rng) {
  if (cfg.scheme == MtlScheme::Fixed) return {cfg.a, cfg.b};
  const double x = rng.normal();
  const double y = rng.normal();
  const double m = std::max(x, y);
  const double ex = std::exp(x - m), ey = std::exp(y - m);
  return {ex / (ex + ey), ey / (ex + ey)};
}

DistillTerms distillation_loss(Var student_zF, Var student_alpha, Var teacher_zF, Var teacher_alpha,
                               DistillParts parts, DistillLevel level) {
  Graph& g = student_zF.graph();
  const int frames = student_zF.dim(0);
  const Var zero = g.constant(Tensor({1}, {0.0}));
  DistillTerms out{zero, zero, {}};

  const Var t_alpha = teacher_alpha.dim(0) == frames
                          ? teacher_alpha
                          : normalize_sum(model::align_frames(teacher_alpha, frames));
  if (t_alpha.shape() != student_alpha.shape()) {
    throw Error("distillation_loss: attention shapes " + shape_str(student_alpha.shape()) + " vs " +
                shape_str(t_alpha.shape()));
  }
  out.teacher_alpha_aligned = t_alpha;
  if (parts != DistillParts::FeatureOnly) out.l_attn = mse(student_alpha, t_alpha);
  if (parts == DistillParts::AttentionOnly) return out;

  if (level == DistillLevel::FrameLevel) {
    const Var t_zF = model::align_frames(teacher_zF, frames);
    if (t_zF.shape() != student_zF.shape()) {
      throw Error("distillation_loss: feature shapes " + shape_str(student_zF.shape()) + " vs " +
                  shape_str(t_zF.shape()));
    }
    out.l_feat = mse(student_zF, t_zF);
  } else {
    const Var s_u = matmul(transpose(student_alpha), student_zF);
    const Var t_u = matmul(transpose(teacher_alpha), teacher_zF);
    if (t_u.shape() != s_u.shape()) {
      throw Error("distillation_loss: pooled shapes " + shape_str(s_u.shape()) + " vs " +
                  shape_str(t_u.shape()));
    }
    out.l_feat = mse(s_u, t_u);
  }
  return out;
}

}  // namespace pdistill::train
