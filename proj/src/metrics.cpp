#include "grasp/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "grasp/image_ops.hpp"

namespace grasp {

namespace {

void check_same_shape(const MatrixXd& a, const MatrixXd& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw UsageError("maps must share one shape");
}

// Largest k in [0, 255] with k/255 <= v, or -1 when v < 0.
int threshold_bin(double v) {
  int k = static_cast<int>(std::floor(v * 255.0));
  k = std::clamp(k, -1, kThresholds - 1);
  while (k + 1 < kThresholds && (k + 1) / 255.0 <= v) ++k;
  while (k >= 0 && k / 255.0 > v) --k;
  return k;
}

// Per-threshold confusion counts. tp[k], fp[k] count pixels with s >= k/255.
struct Confusion {
  std::array<double, kThresholds> tp{};
  std::array<double, kThresholds> fp{};
  double positives = 0.0;
  double total = 0.0;
};

Confusion confusion(const SaliencyMap& s, const SaliencyMap& g) {
  check_same_shape(s, g);
  std::array<double, kThresholds + 1> pos_hist{}, neg_hist{};
  Confusion c;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    const int bin = threshold_bin(s.data()[i]);
    const bool positive = g.data()[i] > 0.5;
    if (bin >= 0) (positive ? pos_hist : neg_hist)[bin] += 1.0;
    c.positives += positive ? 1.0 : 0.0;
  }
  c.total = static_cast<double>(s.size());
  double tp = 0.0, fp = 0.0;
  for (int k = kThresholds - 1; k >= 0; --k) {
    tp += pos_hist[k];
    fp += neg_hist[k];
    c.tp[k] = tp;
    c.fp[k] = fp;
  }
  return c;
}

}  // namespace

double mae(const SaliencyMap& s, const SaliencyMap& g) {
  check_same_shape(s, g);
  return (s - g).cwiseAbs().mean();
}

ThresholdCurve f_curve(const SaliencyMap& s, const SaliencyMap& g) {
  const Confusion c = confusion(s, g);
  if (c.positives == 0.0) throw DataError("F-measure is undefined for an empty ground-truth mask");
  ThresholdCurve f{};
  for (int k = 0; k < kThresholds; ++k) {
    const double predicted = c.tp[k] + c.fp[k];
    if (predicted == 0.0 || c.tp[k] == 0.0) continue;
    const double precision = c.tp[k] / predicted;
    const double recall = c.tp[k] / c.positives;
    f[k] = (1.0 + kFBetaSq) * precision * recall / (kFBetaSq * precision + recall);
  }
  return f;
}

double f_max(const SaliencyMap& s, const SaliencyMap& g) {
  const auto f = f_curve(s, g);
  return *std::max_element(f.begin(), f.end());
}

ThresholdCurve e_curve(const SaliencyMap& s, const SaliencyMap& g) {
  const Confusion c = confusion(s, g);
  const double n = c.total;
  const double mean_g = c.positives / n;
  ThresholdCurve e{};
  for (int k = 0; k < kThresholds; ++k) {
    const double tp = c.tp[k], fp = c.fp[k];
    const double mean_b = (tp + fp) / n;
    if (c.positives == 0.0) {
      e[k] = 1.0 - mean_b;
      continue;
    }
    if (c.positives == n) {
      e[k] = mean_b;
      continue;
    }
    const double fn = c.positives - tp;
    const double tn = n - c.positives - fp;
    // Enhanced alignment for a pixel with binary prediction b and label y.
    auto score = [&](double b, double y) {
      const double pb = b - mean_b, pg = y - mean_g;
      const double xi = 2.0 * pb * pg / (pb * pb + pg * pg + kEAlignEps);
      return (xi + 1.0) * (xi + 1.0) / 4.0;
    };
    e[k] = (tp * score(1, 1) + fp * score(1, 0) + fn * score(0, 1) + tn * score(0, 0)) / n;
  }
  return e;
}

double e_max(const SaliencyMap& s, const SaliencyMap& g) {
  const auto e = e_curve(s, g);
  return *std::max_element(e.begin(), e.end());
}

double fbw(const SaliencyMap& s, const SaliencyMap& g) {
  check_same_shape(s, g);
  const BinaryMask gt = (g.array() > 0.5).cast<std::uint8_t>();
  if (!(gt != 0).any()) throw DataError("weighted F-measure is undefined for an empty ground-truth mask");

  const MatrixXd err = (s - gt.cast<double>().matrix()).cwiseAbs();
  const MatrixXd spread =
      filter2d(err, gaussian_kernel(kFbwKernelSize, kFbwKernelSigma), Border::Replicate);
  const MatrixXd dist = distance_transform(gt);

  const double eps = std::numeric_limits<double>::epsilon();
  double tp = 0.0, fp = 0.0, err_in_gt = 0.0, gt_count = 0.0;
  for (Eigen::Index i = 0; i < err.size(); ++i) {
    if (gt.data()[i]) {
      const double e = std::min(err.data()[i], spread.data()[i]);
      err_in_gt += e;
      gt_count += 1.0;
    } else {
      const double importance = 2.0 - std::exp(kFbwAlpha * dist.data()[i]);
      fp += err.data()[i] * importance;
    }
  }
  tp = gt_count - err_in_gt;
  const double recall = 1.0 - err_in_gt / gt_count;
  const double precision = tp / (eps + tp + fp);
  return (1.0 + kFbwBetaSq) * recall * precision / (eps + recall + kFbwBetaSq * precision);
}

void SaliencyEvaluator::add(const SaliencyMap& s, const SaliencyMap& g) {
  check_same_shape(s, g);
  mae_sum_ += mae(s, g);
  const auto e = e_curve(s, g);
  for (int k = 0; k < kThresholds; ++k) e_sum_[k] += e[k];
  ++count_;
  if ((g.array() > 0.5).any()) {
    const auto f = f_curve(s, g);
    for (int k = 0; k < kThresholds; ++k) f_sum_[k] += f[k];
    fbw_sum_ += fbw(s, g);
    ++f_count_;
  }
}

SaliencyReport SaliencyEvaluator::report() const {
  SaliencyReport r;
  r.count = count_;
  r.skipped_empty_gt = count_ - f_count_;
  if (count_ == 0) return r;
  r.mae = mae_sum_ / count_;
  r.e_max = *std::max_element(e_sum_.begin(), e_sum_.end()) / count_;
  if (f_count_ > 0) {
    r.f_max = *std::max_element(f_sum_.begin(), f_sum_.end()) / f_count_;
    r.fbw = fbw_sum_ / f_count_;
  }
  return r;
}

double pearson(const Eigen::Ref<const Eigen::VectorXd>& a, const Eigen::Ref<const Eigen::VectorXd>& b) {
  if (a.size() != b.size() || a.size() < 2) throw UsageError("pearson needs two samples of equal length >= 2");
  const Eigen::VectorXd da = a.array() - a.mean();
  const Eigen::VectorXd db = b.array() - b.mean();
  const double va = da.squaredNorm(), vb = db.squaredNorm();
  if (va == 0.0 || vb == 0.0) throw DataError("correlation undefined for zero-variance input");
  return da.dot(db) / std::sqrt(va * vb);
}

namespace {

Eigen::VectorXd flatten_rgb(const ImageBuffer& img) {
  auto planes = resize_planes(img, kReconSize, kReconSize);
  if (planes.size() == 1) planes = {planes[0], planes[0], planes[0]};
  const Eigen::Index n = static_cast<Eigen::Index>(kReconSize) * kReconSize;
  Eigen::VectorXd v(3 * n);
  for (int ch = 0; ch < 3; ++ch) v.segment(ch * n, n) = Eigen::Map<const Eigen::VectorXd>(planes[ch].data(), n);
  return v;
}

// Valid-mode correlation.
MatrixXd filter_valid(const MatrixXd& x, const MatrixXd& k) {
  const Eigen::Index oh = x.rows() - k.rows() + 1, ow = x.cols() - k.cols() + 1;
  MatrixXd out(oh, ow);
  for (Eigen::Index r = 0; r < oh; ++r)
    for (Eigen::Index c = 0; c < ow; ++c) out(r, c) = x.block(r, c, k.rows(), k.cols()).cwiseProduct(k).sum();
  return out;
}

}  // namespace

double pixcorr(const ImageBuffer& a, const ImageBuffer& b) { return pearson(flatten_rgb(a), flatten_rgb(b)); }

double ssim_planes(const MatrixXd& a, const MatrixXd& b) {
  check_same_shape(a, b);
  if (a.rows() < kSsimWindow || a.cols() < kSsimWindow)
    throw DataError("image smaller than the 11x11 SSIM window");
  const MatrixXd k = gaussian_kernel(kSsimWindow, kSsimSigma);
  const Eigen::ArrayXXd mu_a = filter_valid(a, k).array();
  const Eigen::ArrayXXd mu_b = filter_valid(b, k).array();
  const Eigen::ArrayXXd var_a = filter_valid(a.cwiseProduct(a), k).array() - mu_a.square();
  const Eigen::ArrayXXd var_b = filter_valid(b.cwiseProduct(b), k).array() - mu_b.square();
  const Eigen::ArrayXXd cov = filter_valid(a.cwiseProduct(b), k).array() - mu_a * mu_b;
  const Eigen::ArrayXXd map = ((2.0 * mu_a * mu_b + kSsimC1) * (2.0 * cov + kSsimC2)) /
                              ((mu_a.square() + mu_b.square() + kSsimC1) * (var_a + var_b + kSsimC2));
  return map.mean();
}

double ssim(const ImageBuffer& a, const ImageBuffer& b) {
  auto gray = [](const ImageBuffer& img) {
    const auto planes = resize_planes(img, kReconSize, kReconSize);
    if (planes.size() == 1) return planes[0];
    return MatrixXd(0.299 * planes[0] + 0.587 * planes[1] + 0.114 * planes[2]);
  };
  return ssim_planes(gray(a), gray(b));
}

namespace {

MatrixXd correlation_matrix(const MatrixXd& r, const MatrixXd& g) {
  if (r.rows() != g.rows() || r.cols() != g.cols()) throw UsageError("feature matrices must share one shape");
  if (!r.allFinite() || !g.allFinite()) throw DataError("non-finite feature values");
  const Eigen::Index n = r.rows();
  MatrixXd c(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) c(i, j) = pearson(r.row(i).transpose(), g.row(j).transpose());
  return c;
}

}  // namespace

double two_way_identification(const MatrixXd& recon_feats, const MatrixXd& gt_feats) {
  if (recon_feats.rows() < 2) throw UsageError("two-way identification needs at least 2 samples");
  const MatrixXd c = correlation_matrix(recon_feats, gt_feats);
  const Eigen::Index n = c.rows();
  long correct = 0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      if (j != i && c(i, i) > c(i, j)) ++correct;
  return 100.0 * static_cast<double>(correct) / static_cast<double>(n * (n - 1));
}

double mean_correlation_distance(const MatrixXd& recon_feats, const MatrixXd& gt_feats) {
  if (recon_feats.rows() != gt_feats.rows() || recon_feats.cols() != gt_feats.cols())
    throw UsageError("feature matrices must share one shape");
  if (recon_feats.rows() < 1) throw UsageError("no feature rows");
  double total = 0.0;
  for (Eigen::Index i = 0; i < recon_feats.rows(); ++i)
    total += 1.0 - pearson(recon_feats.row(i).transpose(), gt_feats.row(i).transpose());
  return total / static_cast<double>(recon_feats.rows());
}

}  // namespace grasp
