#pragma once

#include <vector>

#include "grasp/array_io.hpp"
#include "grasp/types.hpp"

namespace grasp {

// Row-stochastic (out x in) bilinear resampling operator, align-corners-false:
// output sample i reads source coordinate (i + 0.5) * in / out - 0.5, clamped
// to the valid range. Identity when out == in.
MatrixXd bilinear_matrix(int in, int out);

// Separable bilinear resize of a single-channel plane.
MatrixXd resize_bilinear(const MatrixXd& plane, int out_h, int out_w);

// Channel planes of an image as doubles in [0, 255].
std::vector<MatrixXd> image_planes(const ImageBuffer& img);

// Inverse of image_planes: round half up and clamp to [0, 255].
ImageBuffer planes_to_image(const std::vector<MatrixXd>& planes);

// 0.299 R + 0.587 G + 0.114 B; grayscale images pass through.
MatrixXd luma(const ImageBuffer& img);

// Bilinear resize, keeping float precision (no requantization).
std::vector<MatrixXd> resize_planes(const ImageBuffer& img, int out_h, int out_w);

ImageBuffer resize_image(const ImageBuffer& img, int out_h, int out_w);

// Normalized size x size Gaussian kernel.
MatrixXd gaussian_kernel(int size, double sigma);

enum class Border { Zero, Replicate };

// Same-size 2-D correlation with an odd-sized kernel.
MatrixXd filter2d(const MatrixXd& plane, const MatrixXd& kernel, Border border);

// Sliding box mean with zero padding; every window divides by size^2.
MatrixXd box_mean_zero_pad(const MatrixXd& plane, int size);

// Euclidean distance from each pixel to the nearest true pixel of `mask`
// (exact, separable squared-distance transform). Pixels of the mask get 0.
// Throws if the mask is empty.
MatrixXd distance_transform(const BinaryMask& mask);

}  // namespace grasp
