#include "grasp/token_graph.hpp"

#include <algorithm>
#include <numeric>
#include <string>

namespace grasp {

TokenGraph::TokenGraph(int n_nodes, const std::vector<Edge>& edges) : n_(n_nodes), neighbors_(n_nodes) {
  if (n_nodes < 0) throw UsageError("negative node count");
  for (auto [i, j] : edges) {
    if (i < 0 || j < 0 || i >= n_nodes || j >= n_nodes) throw UsageError("edge endpoint out of range");
    if (i == j) continue;
    if (i > j) std::swap(i, j);
    edges_.emplace_back(i, j);
  }
  std::sort(edges_.begin(), edges_.end());
  edges_.erase(std::unique(edges_.begin(), edges_.end()), edges_.end());
  for (const auto& [i, j] : edges_) {
    neighbors_[i].push_back(j);
    neighbors_[j].push_back(i);
  }
  for (auto& nb : neighbors_) std::sort(nb.begin(), nb.end());
}

bool TokenGraph::has_edge(int i, int j) const {
  if (i > j) std::swap(i, j);
  return std::binary_search(edges_.begin(), edges_.end(), Edge{i, j});
}

std::vector<TokenGraph::Edge> grid_edges(int rows, int cols, int offset) {
  std::vector<TokenGraph::Edge> edges;
  auto id = [&](int r, int c) { return offset + r * cols + c; };
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      if (c + 1 < cols) edges.emplace_back(id(r, c), id(r, c + 1));
      if (r + 1 < rows) edges.emplace_back(id(r, c), id(r + 1, c));
      if (r + 1 < rows && c + 1 < cols) edges.emplace_back(id(r, c), id(r + 1, c + 1));
      if (r + 1 < rows && c > 0) edges.emplace_back(id(r, c), id(r + 1, c - 1));
    }
  }
  return edges;
}

std::vector<std::vector<int>> cosine_knn(const MatrixXd& features, int k) {
  const int n = static_cast<int>(features.rows());
  if (k < 1 || k >= n) throw UsageError("k must satisfy 1 <= k < number of rows");
  MatrixXd unit = features;
  for (int i = 0; i < n; ++i) {
    const double norm = unit.row(i).norm();
    if (!(norm > 0.0)) throw DataError("zero-norm feature row " + std::to_string(i));
    unit.row(i) /= norm;
  }
  const MatrixXd sim = unit * unit.transpose();

  std::vector<std::vector<int>> result(n);
  std::vector<int> order(n - 1);
  for (int i = 0; i < n; ++i) {
    std::iota(order.begin(), order.begin() + i, 0);
    std::iota(order.begin() + i, order.end(), i + 1);
    std::partial_sort(order.begin(), order.begin() + k, order.end(), [&](int a, int b) {
      if (sim(i, a) != sim(i, b)) return sim(i, a) > sim(i, b);
      return a < b;
    });
    result[i].assign(order.begin(), order.begin() + k);
  }
  return result;
}

TokenGraph build_graph_impl(const MatrixXd& tokens, const GraphConfig& cfg) {
  constexpr int side = kPatchGridSide;
  constexpr int patches = side * side;
  if (tokens.rows() != kNumTokens)
    throw DataError("embedding must have " + std::to_string(kNumTokens) + " tokens, got " +
                    std::to_string(tokens.rows()));
  if (!tokens.allFinite()) throw DataError("embedding contains non-finite values");

  std::vector<TokenGraph::Edge> edges = grid_edges(side, side, 1);
  if (cfg.connect_cls)
    for (int p = 1; p <= patches; ++p) edges.emplace_back(0, p);

  if (cfg.use_semantic) {
    if (cfg.k < 1 || cfg.k >= patches) throw UsageError("semantic k must satisfy 1 <= k < 256");
    const auto knn = cosine_knn(tokens.bottomRows(patches), cfg.k);
    for (int i = 0; i < patches; ++i)
      for (int j : knn[i]) edges.emplace_back(1 + i, 1 + j);
  }
  return TokenGraph(kNumTokens, edges);
}

MatrixXd normalized_adjacency(const TokenGraph& g) {
  const int n = g.num_nodes();
  MatrixXd a = g.adjacency<double>();
  a.diagonal().array() += 1.0;
  Eigen::VectorXd inv_sqrt(n);
  for (int i = 0; i < n; ++i) inv_sqrt(i) = 1.0 / std::sqrt(static_cast<double>(g.degree(i) + 1));
  return inv_sqrt.asDiagonal() * a * inv_sqrt.asDiagonal();
}

}  // namespace grasp
