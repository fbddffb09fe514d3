#pragma once

#include <array>
#include <cstddef>

#include "grasp/array_io.hpp"
#include "grasp/types.hpp"

namespace grasp {

// Saliency metric constants.
inline constexpr int kThresholds = 256;        // t = k / 255, k = 0..255
inline constexpr double kFBetaSq = 0.3;        // F-max
inline constexpr double kEAlignEps = 1e-8;     // E-max alignment denominator
inline constexpr int kFbwKernelSize = 7;
inline constexpr double kFbwKernelSigma = 5.0;
inline constexpr double kFbwBetaSq = 1.0;
inline const double kFbwAlpha = std::log(0.5) / 5.0;

// Reconstruction metric constants.
inline constexpr int kReconSize = 256;
inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimC1 = (0.01 * 255) * (0.01 * 255);
inline constexpr double kSsimC2 = (0.03 * 255) * (0.03 * 255);

using ThresholdCurve = std::array<double, kThresholds>;

double mae(const SaliencyMap& s, const SaliencyMap& g);

// F_beta (beta^2 = 0.3) of binarize(s, k/255) against g > 0.5 for every k.
// Empty predictions score 0. Throws DataError when g has no positives.
ThresholdCurve f_curve(const SaliencyMap& s, const SaliencyMap& g);
double f_max(const SaliencyMap& s, const SaliencyMap& g);

// Enhanced-alignment score per threshold.
ThresholdCurve e_curve(const SaliencyMap& s, const SaliencyMap& g);
double e_max(const SaliencyMap& s, const SaliencyMap& g);

// Weighted F-measure. Throws DataError when g has no positives.
double fbw(const SaliencyMap& s, const SaliencyMap& g);

struct SaliencyReport {
  double mae = 0.0;
  double f_max = 0.0;
  double e_max = 0.0;
  double fbw = 0.0;
  std::size_t count = 0;
  std::size_t skipped_empty_gt = 0;  // excluded from F-max and Fbw
};

// Dataset aggregation: MAE and Fbw are averaged per image; F-max and E-max are
// the maxima of the per-threshold mean curves.
class SaliencyEvaluator {
 public:
  void add(const SaliencyMap& s, const SaliencyMap& g);
  SaliencyReport report() const;
  std::size_t count() const { return count_; }

 private:
  ThresholdCurve f_sum_{};
  ThresholdCurve e_sum_{};
  double mae_sum_ = 0.0;
  double fbw_sum_ = 0.0;
  std::size_t count_ = 0;
  std::size_t f_count_ = 0;
};

// Pearson correlation of two equally sized samples. Throws DataError on zero
// variance.
double pearson(const Eigen::Ref<const Eigen::VectorXd>& a, const Eigen::Ref<const Eigen::VectorXd>& b);

// Pearson correlation over all RGB values after bilinear resize of both images
// to 256 x 256 (grayscale is replicated across channels).
double pixcorr(const ImageBuffer& a, const ImageBuffer& b);

// Mean single-scale SSIM over valid 11x11 Gaussian windows of two luma planes.
double ssim_planes(const MatrixXd& a, const MatrixXd& b);
// Luma of both images at 256 x 256, then ssim_planes.
double ssim(const ImageBuffer& a, const ImageBuffer& b);

// Percentage of ordered pairs (i, j != i) with corr(r_i, g_i) > corr(r_i, g_j).
double two_way_identification(const MatrixXd& recon_feats, const MatrixXd& gt_feats);

// Mean over rows of 1 - corr(r_i, g_i).
double mean_correlation_distance(const MatrixXd& recon_feats, const MatrixXd& gt_feats);

}  // namespace grasp
