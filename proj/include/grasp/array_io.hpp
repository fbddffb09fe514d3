#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "grasp/types.hpp"

namespace grasp {

enum class DType { F32, F64, U8 };

const char* dtype_name(DType dtype);

// N-dimensional row-major array as stored in an .npy file.
class DenseArray {
 public:
  using Storage = std::variant<std::vector<float>, std::vector<double>, std::vector<std::uint8_t>>;

  DenseArray() = default;
  DenseArray(std::vector<std::size_t> shape, std::vector<float> data);
  DenseArray(std::vector<std::size_t> shape, std::vector<double> data);
  DenseArray(std::vector<std::size_t> shape, std::vector<std::uint8_t> data);

  template <typename Derived>
  static DenseArray from_matrix(const Eigen::DenseBase<Derived>& m);

  const std::vector<std::size_t>& shape() const { return shape_; }
  DType dtype() const;
  std::size_t size() const;
  const Storage& storage() const { return data_; }

  // Element i converted to double.
  double at(std::size_t i) const;

  // 2-D view converted to Scalar. 1-D arrays become a single row.
  template <typename Scalar>
  Matrix<Scalar> to_matrix() const;

  friend bool operator==(const DenseArray&, const DenseArray&) = default;

 private:
  std::vector<std::size_t> shape_;
  Storage data_;
};

struct NpyHeader {
  DType dtype;
  std::vector<std::size_t> shape;
  std::size_t data_offset;
};

DenseArray read_array(const std::filesystem::path& path);
NpyHeader read_array_header(const std::filesystem::path& path);
void write_array(const std::filesystem::path& path, const DenseArray& a, bool allow_nonfinite = false);

std::vector<char> encode_array(const DenseArray& a, bool allow_nonfinite = false);
DenseArray decode_array(const std::vector<char>& bytes);

// 8-bit grayscale or RGB image, interleaved row-major.
struct ImageBuffer {
  int height = 0;
  int width = 0;
  int channels = 1;
  std::vector<std::uint8_t> data;

  ImageBuffer() = default;
  ImageBuffer(int h, int w, int c, std::uint8_t fill = 0);

  std::uint8_t& at(int r, int col, int ch = 0) {
    return data[(static_cast<std::size_t>(r) * width + col) * channels + ch];
  }
  std::uint8_t at(int r, int col, int ch = 0) const {
    return data[(static_cast<std::size_t>(r) * width + col) * channels + ch];
  }

  friend bool operator==(const ImageBuffer&, const ImageBuffer&) = default;
};

ImageBuffer read_image(const std::filesystem::path& path);
void write_image(const std::filesystem::path& path, const ImageBuffer& img);

// Grayscale mask scaled to [0,1] by 1/255. Rejects color files.
SaliencyMap read_mask(const std::filesystem::path& path);
// Writes round_half_up(255 * v) as PGM.
void write_saliency_pgm(const std::filesystem::path& path, const SaliencyMap& s);
void write_mask_pgm(const std::filesystem::path& path, const BinaryMask& m);

ImageBuffer saliency_to_image(const SaliencyMap& s);

enum class Split { Train, Val, Test };

const char* split_name(Split s);
// Throws UsageError for anything but train, val or test.
Split parse_split(const std::string& s);

struct ManifestEntry {
  Split split;
  std::filesystem::path embedding;
  std::filesystem::path mask;
  std::optional<std::filesystem::path> caption;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;

  std::vector<ManifestEntry> with_split(Split s) const;
};

// Parses `split<TAB>emb<TAB>mask[<TAB>caption]` lines. Relative paths resolve
// against the manifest's directory. With check_files, every referenced file
// must exist and carry a valid header; any failure throws and nothing is
// returned.
DatasetManifest load_manifest(const std::filesystem::path& path, bool check_files = true);

// Generic tab-separated list reader used by the evaluation and ranking
// manifests. Blank lines and `#` comments are skipped; relative paths resolve
// against the list file's directory.
std::vector<std::vector<std::filesystem::path>> read_path_table(const std::filesystem::path& path,
                                                                std::size_t min_cols,
                                                                std::size_t max_cols);

std::vector<std::string> read_lines(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

// ---------------------------------------------------------------------------

template <typename Derived>
DenseArray DenseArray::from_matrix(const Eigen::DenseBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  std::vector<std::size_t> shape{static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())};
  std::vector<Scalar> data(m.size());
  std::size_t k = 0;
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) data[k++] = m(r, c);
  return DenseArray(std::move(shape), std::move(data));
}

template <typename Scalar>
Matrix<Scalar> DenseArray::to_matrix() const {
  Eigen::Index rows = 1, cols = 0;
  if (shape_.size() == 1) {
    cols = static_cast<Eigen::Index>(shape_[0]);
  } else if (shape_.size() == 2) {
    rows = static_cast<Eigen::Index>(shape_[0]);
    cols = static_cast<Eigen::Index>(shape_[1]);
  } else {
    throw DataError("expected a 1-D or 2-D array, got " + std::to_string(shape_.size()) + " dimensions");
  }
  Matrix<Scalar> m(rows, cols);
  std::visit(
      [&](const auto& v) {
        for (std::size_t i = 0; i < v.size(); ++i) m.data()[i] = static_cast<Scalar>(v[i]);
      },
      data_);
  return m;
}

}  // namespace grasp
