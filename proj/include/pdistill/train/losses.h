#pragma once

#include <utility>

#include "pdistill/autodiff/tensor.h"
#include "pdistill/common/rng.h"
#include "pdistill/train/config.h"

namespace pdistill::train {

// Batch-mean loss components of one optimizer step.
struct LossBreakdown {
  double l_cls = 0;
  double l_attn = 0;
  double l_feat = 0;
  double l_dis = 0;  // l_attn + l_feat
  double a = 1;
  double b = 0;
  double l_total = 0;  // a * l_cls + b * l_dis

  // Relative deviation of l_total from a * l_cls + b * l_dis.
  double identity_error() const;
};

// Fixed returns (a, b); RandomPerStep draws two standard normals and
// softmax-normalizes them.
std::pair<double, double> mtl_weights(const MtlConfig& cfg, Rng& rng);

struct DistillTerms {
  ad::Var l_attn;
  ad::Var l_feat;
  ad::Var teacher_alpha_aligned;  // attention target at the student's rate
};

// Student/teacher frame features z_F [T x H] and attention alpha [T x 1].
// Teacher tensors are aligned to the student's frame count first: features
// with align_frames, attention with pair pooling then renormalization. Global
// level compares the attention-pooled vectors alpha^T z_F instead of frames.
// Disabled parts are exact zeros.
DistillTerms distillation_loss(ad::Var student_zF, ad::Var student_alpha, ad::Var teacher_zF,
                               ad::Var teacher_alpha, DistillParts parts, DistillLevel level);

}  // namespace pdistill::train
