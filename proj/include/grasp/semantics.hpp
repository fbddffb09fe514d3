#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "grasp/types.hpp"

namespace grasp {

inline constexpr double kDefaultRidgeLambda = 1e3;

// Linear map from a pooled embedding (length 768) into the text space.
struct ProjectionMap {
  MatrixXd weight;  // input_dim x d
  double lambda = 0.0;
  std::size_t samples = 0;
  double residual = 0.0;  // Frobenius norm of X W - Y at fit time

  int text_dim() const { return static_cast<int>(weight.cols()); }
  Eigen::VectorXd apply(const Eigen::VectorXd& pooled) const;
};

class Vocabulary {
 public:
  // Rows are L2-normalized; throws on a zero row or a count mismatch.
  Vocabulary(std::vector<std::string> terms, MatrixXd vectors);

  static Vocabulary load(const std::filesystem::path& terms_txt, const std::filesystem::path& vectors_npy);

  std::size_t size() const { return terms_.size(); }
  const std::vector<std::string>& terms() const { return terms_; }
  const MatrixXd& vectors() const { return vectors_; }

 private:
  std::vector<std::string> terms_;
  MatrixXd vectors_;
};

struct Cue {
  std::size_t index;
  std::string term;
  double cosine;
};

// Mean over all tokens, accumulated in double.
template <typename Derived>
Eigen::VectorXd pool(const Eigen::MatrixBase<Derived>& tokens) {
  if (tokens.rows() < 1) throw UsageError("cannot pool an empty token matrix");
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(tokens.cols());
  for (Eigen::Index r = 0; r < tokens.rows(); ++r) acc += tokens.row(r).transpose().template cast<double>();
  return acc / static_cast<double>(tokens.rows());
}

// Ridge regression W = (X^T X + lambda I)^{-1} X^T Y via Cholesky.
ProjectionMap fit_projection(const MatrixXd& x, const MatrixXd& y, double lambda);

// Top-k vocabulary terms by cosine against t, descending, ties to lower index.
std::vector<Cue> rank_terms(const Eigen::VectorXd& t, const Vocabulary& vocab, std::size_t k);

template <typename Derived>
std::vector<Cue> extract_cues(const Eigen::MatrixBase<Derived>& tokens, const ProjectionMap& p, const Vocabulary& vocab,
                              std::size_t k) {
  return rank_terms(p.apply(pool(tokens)), vocab, k);
}

// "a photo of t1, t2, ..."
std::string assemble_prompt(const std::vector<Cue>& cues);
std::string assemble_prompt(const std::vector<std::string>& terms);

}  // namespace grasp
