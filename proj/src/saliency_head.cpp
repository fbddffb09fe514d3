#include "grasp/saliency_head.hpp"

#include <algorithm>
#include <string>

#include "grasp/image_ops.hpp"

namespace grasp {

namespace {

MatrixXd patch_grid(const Eigen::VectorXd& alpha, const PatchGrid& grid) {
  if (grid.rows < 1 || grid.cols < 1) throw UsageError("patch grid must be non-empty");
  if (alpha.size() != grid.num_nodes())
    throw UsageError("expected " + std::to_string(grid.num_nodes()) + " node logits, got " +
                     std::to_string(alpha.size()));
  const Eigen::Index offset = grid.has_cls ? 1 : 0;
  MatrixXd g(grid.rows, grid.cols);
  for (int r = 0; r < grid.rows; ++r)
    for (int c = 0; c < grid.cols; ++c) g(r, c) = alpha(offset + r * grid.cols + c);
  return g;
}

}  // namespace

MatrixXd interpolate_logits(const Eigen::VectorXd& alpha, int out_h, int out_w, const PatchGrid& grid) {
  if (out_h < 1 || out_w < 1) throw UsageError("output size must be positive");
  const MatrixXd g = patch_grid(alpha, grid);
  return bilinear_matrix(grid.rows, out_h) * g * bilinear_matrix(grid.cols, out_w).transpose();
}

SaliencyMap rasterize(const Eigen::VectorXd& alpha, int out_h, int out_w, const PatchGrid& grid) {
  return interpolate_logits(alpha, out_h, out_w, grid).unaryExpr([](double z) { return logistic(z); });
}

Eigen::VectorXd rasterize_backward(const SaliencyMap& s, const MatrixXd& d_s, const PatchGrid& grid) {
  if (s.rows() != d_s.rows() || s.cols() != d_s.cols()) throw UsageError("gradient shape does not match map");
  const MatrixXd d_z = d_s.cwiseProduct(s.cwiseProduct((1.0 - s.array()).matrix()));
  const MatrixXd ry = bilinear_matrix(grid.rows, static_cast<int>(s.rows()));
  const MatrixXd rx = bilinear_matrix(grid.cols, static_cast<int>(s.cols()));
  const MatrixXd d_grid = ry.transpose() * d_z * rx;
  Eigen::VectorXd d_alpha = Eigen::VectorXd::Zero(grid.num_nodes());
  const Eigen::Index offset = grid.has_cls ? 1 : 0;
  for (int r = 0; r < grid.rows; ++r)
    for (int c = 0; c < grid.cols; ++c) d_alpha(offset + r * grid.cols + c) = d_grid(r, c);
  return d_alpha;
}

BinaryMask binarize(const SaliencyMap& s, double theta) {
  return (s.array() >= theta).cast<std::uint8_t>();
}

BinaryMask dilate(const BinaryMask& mask, int radius) {
  if (radius < 0) throw UsageError("dilation radius must be non-negative");
  if (radius == 0) return mask;
  const int h = static_cast<int>(mask.rows()), w = static_cast<int>(mask.cols());
  // Separable: a square structuring element is a row pass then a column pass.
  BinaryMask rows = BinaryMask::Zero(h, w);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      if (!mask(r, c)) continue;
      for (int cc = std::max(c - radius, 0); cc <= std::min(c + radius, w - 1); ++cc) rows(r, cc) = 1;
    }
  BinaryMask out = BinaryMask::Zero(h, w);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      if (!rows(r, c)) continue;
      for (int rr = std::max(r - radius, 0); rr <= std::min(r + radius, h - 1); ++rr) out(rr, c) = 1;
    }
  return out;
}

}  // namespace grasp
