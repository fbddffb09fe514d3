#pragma once

#include <cmath>

#include "grasp/types.hpp"

namespace grasp {

// Spatial layout of the node logits: an optional leading CLS token followed by
// rows x cols patch tokens in row-major order.
struct PatchGrid {
  int rows = kPatchGridSide;
  int cols = kPatchGridSide;
  bool has_cls = true;

  int num_nodes() const { return rows * cols + (has_cls ? 1 : 0); }
};

inline double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Patch logits bilinearly interpolated to out_h x out_w (align-corners-false)
// before the logistic. CLS is dropped.
MatrixXd interpolate_logits(const Eigen::VectorXd& alpha, int out_h, int out_w, const PatchGrid& grid = {});

SaliencyMap rasterize(const Eigen::VectorXd& alpha, int out_h, int out_w, const PatchGrid& grid = {});

// dL/dalpha given dL/dS and the map S produced by rasterize(). The CLS entry
// of the result is zero.
Eigen::VectorXd rasterize_backward(const SaliencyMap& s, const MatrixXd& d_s, const PatchGrid& grid = {});

BinaryMask binarize(const SaliencyMap& s, double theta);

// Dilation with a (2r+1) x (2r+1) square.
BinaryMask dilate(const BinaryMask& mask, int radius);

}  // namespace grasp
