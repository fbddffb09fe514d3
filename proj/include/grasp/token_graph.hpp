#pragma once

#include <utility>
#include <vector>

#include "grasp/types.hpp"

namespace grasp {

struct GraphConfig {
  bool use_semantic = false;
  int k = 8;
  bool connect_cls = true;
};

// Simple undirected graph over embedding tokens. Edges are stored once with
// i < j, sorted ascending; self-loops are never stored.
class TokenGraph {
 public:
  using Edge = std::pair<int, int>;

  TokenGraph() = default;
  // Edges may come in any order or orientation; duplicates are merged.
  TokenGraph(int n_nodes, const std::vector<Edge>& edges);

  int num_nodes() const { return n_; }
  const std::vector<Edge>& edges() const { return edges_; }
  int degree(int i) const { return static_cast<int>(neighbors_[i].size()); }
  const std::vector<int>& neighbors(int i) const { return neighbors_[i]; }
  bool has_edge(int i, int j) const;

  // Dense 0/1 adjacency without self-loops.
  template <typename Scalar>
  Matrix<Scalar> adjacency() const;

 private:
  int n_ = 0;
  std::vector<Edge> edges_;
  std::vector<std::vector<int>> neighbors_;
};

// Undirected 8-neighborhood edges of a rows x cols grid whose node ids start
// at `offset` and run row-major.
std::vector<TokenGraph::Edge> grid_edges(int rows, int cols, int offset = 0);

// Per-row indices of the k most cosine-similar other rows, descending by
// similarity with ties going to the lower index.
std::vector<std::vector<int>> cosine_knn(const MatrixXd& features, int k);

// Token graph for a CLS + 16x16 patch embedding.
template <typename Scalar>
TokenGraph build_graph(const EmbeddingTensor<Scalar>& e, const GraphConfig& cfg);

// D^{-1/2} (A + I) D^{-1/2} with D the degree matrix of A + I.
MatrixXd normalized_adjacency(const TokenGraph& g);

// ---------------------------------------------------------------------------

template <typename Scalar>
Matrix<Scalar> TokenGraph::adjacency() const {
  Matrix<Scalar> a = Matrix<Scalar>::Zero(n_, n_);
  for (const auto& [i, j] : edges_) {
    a(i, j) = Scalar(1);
    a(j, i) = Scalar(1);
  }
  return a;
}

TokenGraph build_graph_impl(const MatrixXd& tokens, const GraphConfig& cfg);

template <typename Scalar>
TokenGraph build_graph(const EmbeddingTensor<Scalar>& e, const GraphConfig& cfg) {
  return build_graph_impl(e.template cast<double>(), cfg);
}

}  // namespace grasp
