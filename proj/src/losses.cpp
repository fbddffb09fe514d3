#include "grasp/losses.hpp"

#include <algorithm>
#include <cmath>

#include "grasp/image_ops.hpp"

namespace grasp {

namespace {

void check_shapes(const SaliencyMap& s, const SaliencyMap& gt, const MatrixXd& w) {
  if (s.rows() != gt.rows() || s.cols() != gt.cols() || w.rows() != s.rows() || w.cols() != s.cols())
    throw UsageError("loss inputs must share one shape");
}

}  // namespace

MatrixXd weight_map(const SaliencyMap& gt) {
  const MatrixXd local = box_mean_zero_pad(gt, kWeightWindow);
  return (1.0 + kWeightGain * (local - gt).array().abs()).matrix();
}

LossAndGrad wbce(const SaliencyMap& s, const SaliencyMap& gt, const MatrixXd& w) {
  check_shapes(s, gt, w);
  const double w_sum = w.sum();
  LossAndGrad r;
  r.grad.resize(s.rows(), s.cols());
  double acc = 0.0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    const double raw = s.data()[i];
    const double p = std::clamp(raw, kBceClamp, 1.0 - kBceClamp);
    const double g = gt.data()[i];
    const double wi = w.data()[i];
    acc += wi * (-g * std::log(p) - (1.0 - g) * std::log(1.0 - p));
    const bool clamped = raw < kBceClamp || raw > 1.0 - kBceClamp;
    r.grad.data()[i] = clamped ? 0.0 : wi * (-g / p + (1.0 - g) / (1.0 - p)) / w_sum;
  }
  r.loss = acc / w_sum;
  return r;
}

LossAndGrad wiou(const SaliencyMap& s, const SaliencyMap& gt, const MatrixXd& w) {
  check_shapes(s, gt, w);
  const auto sa = s.array(), ga = gt.array(), wa = w.array();
  const double inter = (wa * sa * ga).sum() + kIouSmooth;
  const double uni = (wa * (sa + ga - sa * ga)).sum() + kIouSmooth;
  LossAndGrad r;
  r.loss = 1.0 - inter / uni;
  // d/ds of -(I/U) = -(w g U - I w (1 - g)) / U^2
  r.grad = (-(wa * ga * uni - inter * wa * (1.0 - ga)) / (uni * uni)).matrix();
  return r;
}

Objective saliency_objective(const SaliencyMap& s, const SaliencyMap& gt) {
  const MatrixXd w = weight_map(gt);
  const LossAndGrad bce = wbce(s, gt, w);
  const LossAndGrad iou = wiou(s, gt, w);
  Objective o;
  o.value.wbce = bce.loss;
  o.value.wiou = iou.loss;
  o.value.total = bce.loss + iou.loss;
  o.grad = bce.grad + iou.grad;
  return o;
}

}  // namespace grasp
