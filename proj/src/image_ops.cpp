#include "grasp/image_ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace grasp {

MatrixXd bilinear_matrix(int in, int out) {
  if (in < 1 || out < 1) throw UsageError("resample sizes must be positive");
  MatrixXd r = MatrixXd::Zero(out, in);
  const double scale = static_cast<double>(in) / out;
  for (int i = 0; i < out; ++i) {
    const double src = std::clamp((i + 0.5) * scale - 0.5, 0.0, static_cast<double>(in - 1));
    const int i0 = static_cast<int>(std::floor(src));
    const int i1 = std::min(i0 + 1, in - 1);
    const double w = src - i0;
    r(i, i0) += 1.0 - w;
    r(i, i1) += w;
  }
  return r;
}

MatrixXd resize_bilinear(const MatrixXd& plane, int out_h, int out_w) {
  if (plane.rows() == out_h && plane.cols() == out_w) return plane;
  const MatrixXd ry = bilinear_matrix(static_cast<int>(plane.rows()), out_h);
  const MatrixXd rx = bilinear_matrix(static_cast<int>(plane.cols()), out_w);
  return ry * plane * rx.transpose();
}

std::vector<MatrixXd> image_planes(const ImageBuffer& img) {
  std::vector<MatrixXd> planes(img.channels, MatrixXd(img.height, img.width));
  for (int r = 0; r < img.height; ++r)
    for (int c = 0; c < img.width; ++c)
      for (int ch = 0; ch < img.channels; ++ch) planes[ch](r, c) = img.at(r, c, ch);
  return planes;
}

ImageBuffer planes_to_image(const std::vector<MatrixXd>& planes) {
  if (planes.size() != 1 && planes.size() != 3) throw UsageError("expected 1 or 3 planes");
  ImageBuffer img(static_cast<int>(planes[0].rows()), static_cast<int>(planes[0].cols()),
                  static_cast<int>(planes.size()));
  for (int r = 0; r < img.height; ++r)
    for (int c = 0; c < img.width; ++c)
      for (int ch = 0; ch < img.channels; ++ch)
        img.at(r, c, ch) = static_cast<std::uint8_t>(std::clamp(std::floor(planes[ch](r, c) + 0.5), 0.0, 255.0));
  return img;
}

MatrixXd luma(const ImageBuffer& img) {
  const auto planes = image_planes(img);
  if (img.channels == 1) return planes[0];
  return 0.299 * planes[0] + 0.587 * planes[1] + 0.114 * planes[2];
}

std::vector<MatrixXd> resize_planes(const ImageBuffer& img, int out_h, int out_w) {
  auto planes = image_planes(img);
  for (auto& p : planes) p = resize_bilinear(p, out_h, out_w);
  return planes;
}

ImageBuffer resize_image(const ImageBuffer& img, int out_h, int out_w) {
  if (img.height == out_h && img.width == out_w) return img;
  return planes_to_image(resize_planes(img, out_h, out_w));
}

MatrixXd gaussian_kernel(int size, double sigma) {
  MatrixXd k(size, size);
  const double c = (size - 1) / 2.0;
  for (int r = 0; r < size; ++r)
    for (int col = 0; col < size; ++col) {
      const double dy = r - c, dx = col - c;
      k(r, col) = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
    }
  return k / k.sum();
}

MatrixXd filter2d(const MatrixXd& plane, const MatrixXd& kernel, Border border) {
  const int h = static_cast<int>(plane.rows()), w = static_cast<int>(plane.cols());
  const int kr = static_cast<int>(kernel.rows()) / 2, kc = static_cast<int>(kernel.cols()) / 2;
  MatrixXd out = MatrixXd::Zero(h, w);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      double acc = 0.0;
      for (int i = -kr; i <= kr; ++i)
        for (int j = -kc; j <= kc; ++j) {
          int rr = r + i, cc = c + j;
          if (border == Border::Replicate) {
            rr = std::clamp(rr, 0, h - 1);
            cc = std::clamp(cc, 0, w - 1);
          } else if (rr < 0 || rr >= h || cc < 0 || cc >= w) {
            continue;
          }
          acc += kernel(i + kr, j + kc) * plane(rr, cc);
        }
      out(r, c) = acc;
    }
  return out;
}

MatrixXd box_mean_zero_pad(const MatrixXd& plane, int size) {
  const int h = static_cast<int>(plane.rows()), w = static_cast<int>(plane.cols());
  const int half = size / 2;
  // Summed-area table with a zero border row/column.
  MatrixXd sat = MatrixXd::Zero(h + 1, w + 1);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) sat(r + 1, c + 1) = plane(r, c) + sat(r, c + 1) + sat(r + 1, c) - sat(r, c);
  MatrixXd out(h, w);
  const double area = static_cast<double>(size) * size;
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      const int r0 = std::max(r - half, 0), r1 = std::min(r + half + 1, h);
      const int c0 = std::max(c - half, 0), c1 = std::min(c + half + 1, w);
      out(r, c) = (sat(r1, c1) - sat(r0, c1) - sat(r1, c0) + sat(r0, c0)) / area;
    }
  return out;
}

namespace {

// 1-D lower envelope of parabolas (Felzenszwalb & Huttenlocher). Missing
// samples carry kFar.
constexpr double kFar = 1e20;

void edt_1d(const std::vector<double>& f, std::vector<double>& d) {
  const int n = static_cast<int>(f.size());
  std::vector<int> v(n);
  std::vector<double> z(n + 1);
  int k = 0;
  v[0] = 0;
  z[0] = -std::numeric_limits<double>::infinity();
  z[1] = std::numeric_limits<double>::infinity();
  for (int q = 1; q < n; ++q) {
    double s = ((f[q] + double(q) * q) - (f[v[k]] + double(v[k]) * v[k])) / (2.0 * q - 2.0 * v[k]);
    while (s <= z[k]) {
      --k;
      s = ((f[q] + double(q) * q) - (f[v[k]] + double(v[k]) * v[k])) / (2.0 * q - 2.0 * v[k]);
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = std::numeric_limits<double>::infinity();
  }
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[k + 1] < q) ++k;
    const double dq = q - v[k];
    d[q] = dq * dq + f[v[k]];
  }
}

}  // namespace

MatrixXd distance_transform(const BinaryMask& mask) {
  const int h = static_cast<int>(mask.rows()), w = static_cast<int>(mask.cols());
  if (!(mask != 0).any()) throw DataError("distance transform of an empty mask");
  MatrixXd sq(h, w);
  std::vector<double> f, d;
  f.resize(h);
  d.resize(h);
  for (int c = 0; c < w; ++c) {
    for (int r = 0; r < h; ++r) f[r] = mask(r, c) ? 0.0 : kFar;
    edt_1d(f, d);
    for (int r = 0; r < h; ++r) sq(r, c) = d[r];
  }
  f.resize(w);
  d.resize(w);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) f[c] = sq(r, c);
    edt_1d(f, d);
    for (int c = 0; c < w; ++c) sq(r, c) = d[c];
  }
  return sq.cwiseSqrt();
}

}  // namespace grasp
