#include "grasp/composition.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <numeric>

#include <unsupported/Eigen/FFT>

#include "grasp/image_ops.hpp"
#include "grasp/saliency_head.hpp"

namespace grasp {

ImageBuffer mask_blend(const ImageBuffer& fg, const ImageBuffer& bg, const SaliencyMap& s) {
  if (fg.height != bg.height || fg.width != bg.width || fg.channels != bg.channels)
    throw DataError("foreground and background images differ in shape");
  if (s.rows() != fg.height || s.cols() != fg.width) throw DataError("saliency map does not match image size");
  ImageBuffer out(fg.height, fg.width, fg.channels);
  for (int r = 0; r < fg.height; ++r)
    for (int c = 0; c < fg.width; ++c) {
      const double w = std::clamp(s(r, c), 0.0, 1.0);
      for (int ch = 0; ch < fg.channels; ++ch) {
        const double v = w * fg.at(r, c, ch) + (1.0 - w) * bg.at(r, c, ch);
        out.at(r, c, ch) = static_cast<std::uint8_t>(std::clamp(std::floor(v + 0.5), 0.0, 255.0));
      }
    }
  return out;
}

BinaryMask inpaint_mask(const SaliencyMap& s, double theta, int dilate_radius) {
  return dilate(binarize(s, theta), dilate_radius);
}

namespace {

using Complex = std::complex<double>;
using ComplexGrid = std::vector<std::vector<Complex>>;

ComplexGrid fft2(const ComplexGrid& in, bool inverse) {
  Eigen::FFT<double> fft;
  const std::size_t h = in.size(), w = in[0].size();
  ComplexGrid rows(h);
  for (std::size_t r = 0; r < h; ++r) {
    if (inverse) fft.inv(rows[r], in[r]);
    else fft.fwd(rows[r], in[r]);
  }
  ComplexGrid out(h, std::vector<Complex>(w));
  std::vector<Complex> col(h), res;
  for (std::size_t c = 0; c < w; ++c) {
    for (std::size_t r = 0; r < h; ++r) col[r] = rows[r][c];
    if (inverse) fft.inv(res, col);
    else fft.fwd(res, col);
    for (std::size_t r = 0; r < h; ++r) out[r][c] = res[r];
  }
  return out;
}

constexpr double kAmplitudeFloor = 1e-9;
constexpr double kRelativeFloor = 1e-4;

}  // namespace

SaliencyMap fallback_saliency(const ImageBuffer& img) {
  if (img.height < 1 || img.width < 1) throw DataError("empty image");
  const MatrixXd gray = resize_bilinear(luma(img), kFallbackSize, kFallbackSize);
  const int n = kFallbackSize;

  ComplexGrid spatial(n, std::vector<Complex>(n));
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) spatial[r][c] = gray(r, c);
  const ComplexGrid spectrum = fft2(spatial, false);

  double peak = 0.0;
  for (const auto& row : spectrum)
    for (const Complex& v : row) peak = std::max(peak, std::abs(v));
  // Exact spectral zeros (box-like inputs) would otherwise swamp the local mean.
  const double floor = std::max(kAmplitudeFloor, kRelativeFloor * peak);
  MatrixXd log_amp(n, n);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) log_amp(r, c) = std::log(std::max(std::abs(spectrum[r][c]), floor));
  const MatrixXd kernel = MatrixXd::Constant(3, 3, 1.0 / 9.0);
  const MatrixXd residual = log_amp - filter2d(log_amp, kernel, Border::Replicate);

  // Bins with (near) zero amplitude have no phase and contribute nothing.
  ComplexGrid rebuilt(n, std::vector<Complex>(n));
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) {
      const double amp = std::abs(spectrum[r][c]);
      rebuilt[r][c] = amp > floor ? std::exp(residual(r, c)) * (spectrum[r][c] / amp) : Complex(0.0);
    }
  const ComplexGrid back = fft2(rebuilt, true);

  MatrixXd energy(n, n);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) energy(r, c) = std::norm(back[r][c]);
  MatrixXd smooth = filter2d(energy, gaussian_kernel(5, 1.5), Border::Replicate);

  const double lo = smooth.minCoeff(), hi = smooth.maxCoeff();
  // Relative tolerance so that round-off on a flat spectrum still counts as flat.
  if (!(hi - lo > 1e-12 * std::max(1.0, std::abs(hi)))) {
    smooth.setZero();
  } else {
    smooth = (smooth.array() - lo) / (hi - lo);
  }
  return resize_bilinear(smooth, img.height, img.width).cwiseMax(0.0).cwiseMin(1.0);
}

namespace {

void check_mask_shapes(const BinaryMask& a, const BinaryMask& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw UsageError("masks must share one shape");
}

}  // namespace

double iou(const BinaryMask& a, const BinaryMask& b) {
  check_mask_shapes(a, b);
  const auto inter = ((a != 0) && (b != 0)).count();
  const auto uni = ((a != 0) || (b != 0)).count();
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

double dice(const BinaryMask& a, const BinaryMask& b) {
  check_mask_shapes(a, b);
  const auto inter = ((a != 0) && (b != 0)).count();
  const auto total = (a != 0).count() + (b != 0).count();
  return total == 0 ? 1.0 : 2.0 * static_cast<double>(inter) / static_cast<double>(total);
}

double cosine_similarity(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size()) throw DataError("vector dimensions differ");
  const double na = a.norm(), nb = b.norm();
  if (!(na > 0.0) || !(nb > 0.0)) throw DataError("cosine similarity of a zero-norm vector");
  return a.dot(b) / (na * nb);
}

Consistency parse_consistency(const std::string& s) {
  if (s == "iou" || s == "IoU") return Consistency::IoU;
  if (s == "dice" || s == "Dice") return Consistency::Dice;
  throw UsageError("unknown consistency mode '" + s + "' (expected iou or dice)");
}

RankResult rank_scores(const std::vector<double>& s_clip, const std::vector<double>& s_mask, double lambda_clip,
                       double lambda_mask) {
  if (s_clip.empty()) throw DataError("empty candidate set");
  if (s_clip.size() != s_mask.size()) throw UsageError("score vectors differ in length");
  RankResult r;
  r.scores.resize(s_clip.size());
  for (std::size_t i = 0; i < s_clip.size(); ++i) {
    r.scores[i].s_clip = s_clip[i];
    r.scores[i].s_mask = s_mask[i];
    r.scores[i].total = lambda_clip * s_clip[i] + lambda_mask * s_mask[i];
  }
  r.order.resize(s_clip.size());
  std::iota(r.order.begin(), r.order.end(), std::size_t{0});
  std::stable_sort(r.order.begin(), r.order.end(),
                   [&](std::size_t a, std::size_t b) { return r.scores[a].total > r.scores[b].total; });
  return r;
}

RankResult rank(const CandidateSet& cs) {
  if (cs.candidates.empty()) throw DataError("empty candidate set");
  const RankConfig& cfg = cs.config;
  const int h = static_cast<int>(cs.reference_saliency.rows()), w = static_cast<int>(cs.reference_saliency.cols());
  const BinaryMask reference = binarize(cs.reference_saliency, cfg.theta);

  std::vector<double> s_clip, s_mask;
  std::vector<bool> fallback;
  for (const auto& c : cs.candidates) {
    s_clip.push_back(cosine_similarity(c.clip_vec, cs.text_vec));
    SaliencyMap m;
    if (c.mask) {
      m = resize_bilinear(*c.mask, h, w);
      fallback.push_back(false);
    } else {
      m = fallback_saliency(resize_image(c.image, h, w));
      fallback.push_back(true);
    }
    const BinaryMask b = binarize(m, cfg.theta);
    s_mask.push_back(cfg.consistency == Consistency::IoU ? iou(b, reference) : dice(b, reference));
  }
  RankResult r = rank_scores(s_clip, s_mask, cfg.lambda_clip, cfg.lambda_mask);
  for (std::size_t i = 0; i < fallback.size(); ++i) r.scores[i].fallback_mask = fallback[i];
  return r;
}

std::string format_rank_csv(const RankResult& r) {
  std::string out = "rank,index,total,s_clip,s_mask\n";
  char buf[160];
  for (std::size_t k = 0; k < r.order.size(); ++k) {
    const auto& s = r.scores[r.order[k]];
    std::snprintf(buf, sizeof buf, "%zu,%zu,%.17g,%.17g,%.17g\n", k + 1, r.order[k], s.total, s.s_clip, s.s_mask);
    out += buf;
  }
  return out;
}

}  // namespace grasp
