#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "grasp/array_io.hpp"
#include "grasp/types.hpp"

namespace grasp {

// I = S * fg + (1 - S) * bg per pixel and channel, rounded half up.
ImageBuffer mask_blend(const ImageBuffer& fg, const ImageBuffer& bg, const SaliencyMap& s);

// Binarize at theta, then dilate. 1 marks the region to regenerate.
BinaryMask inpaint_mask(const SaliencyMap& s, double theta, int dilate_radius);

inline constexpr int kFallbackSize = 64;

// Spectral-residual saliency at 64 x 64, upsampled to the image size.
SaliencyMap fallback_saliency(const ImageBuffer& img);

// Both-empty masks score 1.
double iou(const BinaryMask& a, const BinaryMask& b);
double dice(const BinaryMask& a, const BinaryMask& b);

double cosine_similarity(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

enum class Consistency { IoU, Dice };

Consistency parse_consistency(const std::string& s);

struct RankConfig {
  double lambda_clip = 1.0;
  double lambda_mask = 0.5;
  double theta = 0.5;
  Consistency consistency = Consistency::IoU;
};

struct Candidate {
  ImageBuffer image;
  Eigen::VectorXd clip_vec;
  std::optional<SaliencyMap> mask;
};

struct CandidateSet {
  std::vector<Candidate> candidates;
  SaliencyMap reference_saliency;
  Eigen::VectorXd text_vec;
  RankConfig config;
};

struct CandidateScore {
  double total = 0.0;
  double s_clip = 0.0;
  double s_mask = 0.0;
  bool fallback_mask = false;
};

struct RankResult {
  std::vector<std::size_t> order;      // candidate indices, best first
  std::vector<CandidateScore> scores;  // indexed by candidate
};

// Totals lambda_clip * s_clip + lambda_mask * s_mask, sorted descending with
// ties to the lower index.
RankResult rank_scores(const std::vector<double>& s_clip, const std::vector<double>& s_mask, double lambda_clip,
                       double lambda_mask);

RankResult rank(const CandidateSet& cs);

// `rank,index,total,s_clip,s_mask`
std::string format_rank_csv(const RankResult& r);

}  // namespace grasp
