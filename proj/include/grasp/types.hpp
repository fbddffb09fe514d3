#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace grasp {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

using MatrixXf = Matrix<float>;
using MatrixXd = Matrix<double>;

// Token matrix: row 0 is the CLS token, rows 1.. are patch tokens row-major.
template <typename Scalar>
using EmbeddingTensor = Matrix<Scalar>;

// H x W map with values in [0,1].
using SaliencyMap = MatrixXd;

// H x W map with values in {0,1}.
using BinaryMask = Eigen::Array<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr int kNumTokens = 257;
inline constexpr int kTokenDim = 768;
inline constexpr int kPatchGridSide = 16;

// Malformed or inconsistent input data: bad files, shapes, values.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Caller violated an API contract (bad arguments, stale state).
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace grasp
