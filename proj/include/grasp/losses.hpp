#pragma once

#include "grasp/types.hpp"

namespace grasp {

inline constexpr int kWeightWindow = 15;
inline constexpr double kWeightGain = 5.0;
inline constexpr double kIouSmooth = 1.0;
inline constexpr double kBceClamp = 1e-7;

struct LossValue {
  double total = 0.0;
  double wbce = 0.0;
  double wiou = 0.0;
};

struct LossAndGrad {
  double loss = 0.0;
  MatrixXd grad;  // dL/ds, same shape as s
};

// Boundary-emphasis weights: 1 + 5 |boxmean_15x15(gt) - gt|, zero-padded.
MatrixXd weight_map(const SaliencyMap& gt);

// Weighted BCE, normalized by sum(w). Predictions are clamped to
// [1e-7, 1 - 1e-7] before the log; the gradient is zero where the clamp bites.
LossAndGrad wbce(const SaliencyMap& s, const SaliencyMap& gt, const MatrixXd& w);

// 1 - (sum w s g + 1) / (sum w (s + g - s g) + 1).
LossAndGrad wiou(const SaliencyMap& s, const SaliencyMap& gt, const MatrixXd& w);

struct Objective {
  LossValue value;
  MatrixXd grad;
};

// wiou + wbce with weights derived from gt.
Objective saliency_objective(const SaliencyMap& s, const SaliencyMap& gt);

}  // namespace grasp
