#pragma once

#include <cmath>
#include <vector>

#include "grasp/random.hpp"
#include "grasp/training.hpp"

namespace grasp::testing {

struct Disc {
  double cx, cy, r;  // pixel units
};

// 16 discs on a 64 x 64 canvas. Every token is a fixed linear mix of the disc
// centre and radius (and, for patches, the patch centre) plus small noise, so
// inside/outside is a nonlinear function the model has to learn.
inline std::vector<Sample> disc_dataset(std::size_t n = 16, int size = 64, std::uint64_t seed = 7) {
  Rng rng(seed);
  const auto direction = [&] {
    Eigen::RowVectorXf v(kTokenDim);
    for (int i = 0; i < kTokenDim; ++i) v(i) = static_cast<float>(normal01(rng));
    return Eigen::RowVectorXf(v / v.norm());
  };
  const Eigen::RowVectorXf u_r = direction(), u_cx = direction(), u_cy = direction(), u_px = direction(),
                           u_py = direction(), u_bias = direction();
  const double cell = static_cast<double>(size) / kPatchGridSide;
  constexpr float kScale = 4.0f;

  std::vector<Sample> out;
  for (std::size_t k = 0; k < n; ++k) {
    const Disc d{uniform(rng, 0.3, 0.7) * size, uniform(rng, 0.3, 0.7) * size, uniform(rng, 0.15, 0.25) * size};
    Sample s;
    s.gt.resize(size, size);
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x) s.gt(y, x) = std::hypot(x - d.cx, y - d.cy) <= d.r ? 1.0 : 0.0;

    s.tokens.resize(kNumTokens, kTokenDim);
    const float ncx = static_cast<float>(d.cx / size - 0.5), ncy = static_cast<float>(d.cy / size - 0.5),
                nr = static_cast<float>(d.r / size);
    const Eigen::RowVectorXf shared = kScale * (u_cx * ncx + u_cy * ncy + u_r * nr) + u_bias;
    s.tokens.row(0) = shared;
    for (int i = 0; i < kPatchGridSide; ++i)
      for (int j = 0; j < kPatchGridSide; ++j) {
        const double py = (i + 0.5) * cell - 0.5, px = (j + 0.5) * cell - 0.5;
        Eigen::RowVectorXf t =
            shared + kScale * (u_px * static_cast<float>(px / size - 0.5) + u_py * static_cast<float>(py / size - 0.5));
        for (int c = 0; c < kTokenDim; ++c) t(c) += static_cast<float>(0.01 * normal01(rng));
        s.tokens.row(1 + i * kPatchGridSide + j) = t;
      }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace grasp::testing
