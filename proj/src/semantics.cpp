#include "grasp/semantics.hpp"

#include <algorithm>
#include <numeric>

#include <Eigen/Cholesky>

#include "grasp/array_io.hpp"

namespace grasp {

Eigen::VectorXd ProjectionMap::apply(const Eigen::VectorXd& pooled) const {
  if (pooled.size() != weight.rows())
    throw UsageError("pooled embedding has length " + std::to_string(pooled.size()) + ", projection expects " +
                     std::to_string(weight.rows()));
  return weight.transpose() * pooled;
}

Vocabulary::Vocabulary(std::vector<std::string> terms, MatrixXd vectors)
    : terms_(std::move(terms)), vectors_(std::move(vectors)) {
  if (static_cast<Eigen::Index>(terms_.size()) != vectors_.rows())
    throw DataError("vocabulary has " + std::to_string(terms_.size()) + " terms but " +
                    std::to_string(vectors_.rows()) + " vectors");
  if (terms_.empty()) throw DataError("empty vocabulary");
  for (Eigen::Index i = 0; i < vectors_.rows(); ++i) {
    const double n = vectors_.row(i).norm();
    if (!(n > 0.0) || !std::isfinite(n)) throw DataError("vocabulary vector " + std::to_string(i) + " is zero or non-finite");
    vectors_.row(i) /= n;
  }
}

Vocabulary Vocabulary::load(const std::filesystem::path& terms_txt, const std::filesystem::path& vectors_npy) {
  std::vector<std::string> terms = read_lines(terms_txt);
  while (!terms.empty() && terms.back().empty()) terms.pop_back();
  return Vocabulary(std::move(terms), read_array(vectors_npy).to_matrix<double>());
}

ProjectionMap fit_projection(const MatrixXd& x, const MatrixXd& y, double lambda) {
  if (x.rows() < 1) throw UsageError("ridge fit needs at least one sample");
  if (x.rows() != y.rows()) throw UsageError("inputs and targets must have the same number of rows");
  if (!(lambda >= 0.0)) throw UsageError("ridge lambda must be non-negative");
  Eigen::MatrixXd gram = x.transpose() * x;
  gram.diagonal().array() += lambda;
  const Eigen::LLT<Eigen::MatrixXd> llt(gram);
  if (llt.info() != Eigen::Success) throw DataError("ridge system is singular; increase lambda");
  ProjectionMap p;
  p.weight = llt.solve(Eigen::MatrixXd(x.transpose() * y));
  if (!p.weight.allFinite()) throw DataError("ridge solution is not finite");
  p.lambda = lambda;
  p.samples = static_cast<std::size_t>(x.rows());
  p.residual = (x * p.weight - y).norm();
  return p;
}

std::vector<Cue> rank_terms(const Eigen::VectorXd& t, const Vocabulary& vocab, std::size_t k) {
  if (k < 1 || k > vocab.size()) throw UsageError("k must lie in [1, vocabulary size]");
  if (t.size() != vocab.vectors().cols()) throw UsageError("text vector dimension does not match vocabulary");
  const double norm = t.norm();
  if (!(norm > 0.0)) throw DataError("projected text vector is zero");
  const Eigen::VectorXd cos = vocab.vectors() * (t / norm);
  std::vector<std::size_t> order(vocab.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      const auto ia = static_cast<Eigen::Index>(a), ib = static_cast<Eigen::Index>(b);
                      if (cos(ia) != cos(ib)) return cos(ia) > cos(ib);
                      return a < b;
                    });
  std::vector<Cue> cues;
  for (std::size_t i = 0; i < k; ++i)
    cues.push_back({order[i], vocab.terms()[order[i]], cos(static_cast<Eigen::Index>(order[i]))});
  return cues;
}

std::string assemble_prompt(const std::vector<std::string>& terms) {
  if (terms.empty()) throw UsageError("cannot assemble a prompt from zero cues");
  std::string prompt = "a photo of ";
  for (std::size_t i = 0; i < terms.size(); ++i) {
    if (i) prompt += ", ";
    prompt += terms[i];
  }
  return prompt;
}

std::string assemble_prompt(const std::vector<Cue>& cues) {
  std::vector<std::string> terms;
  for (const auto& c : cues) terms.push_back(c.term);
  return assemble_prompt(terms);
}

}  // namespace grasp
