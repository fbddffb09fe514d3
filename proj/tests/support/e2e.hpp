#pragma once

#include <algorithm>

#include "grasp/random.hpp"
#include "grasp/training.hpp"

namespace grasp::testing {

struct EndToEndReport {
  double max_rel_err = 0.0;
  std::size_t num_params = 0;
};

// 8 nodes laid out as a 2 x 4 patch grid (no CLS), 8 x 8 ground truth, loss
// wIoU + wBCE through rasterize and the GNN; analytic vs central differences.
inline EndToEndReport end_to_end_check(Variant v, std::uint64_t seed) {
  Rng rng(seed);
  const PatchGrid grid{2, 4, false};
  ModelDims dims;
  dims.input = 6;
  dims.hidden = 4;
  dims.depth = 2;
  dims.heads = 2;
  dims.dropout = 0.0;

  std::vector<TokenGraph::Edge> edges = grid_edges(2, 4);
  for (int i = 0; i < 8; ++i)
    for (int j = i + 1; j < 8; ++j)
      if (uniform01(rng) < 0.2) edges.push_back({i, j});
  const TokenGraph g(8, edges);

  Matrix<double> x(8, dims.input);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = normal01(rng);
  SaliencyMap gt(8, 8);
  for (Eigen::Index i = 0; i < gt.size(); ++i) gt.data()[i] = uniform01(rng) < 0.4 ? 1.0 : 0.0;

  SaliencyModel<double> model = init_model<double>(v, dims, seed + 100);
  for (auto& l : model.mutable_params().layers)
    if (l.bias.size())
      for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias.data()[i] = 0.1 * normal01(rng);

  Rng unused(0);
  const auto analytic = sample_gradient(model, g, x, gt, grid, false, unused).grads;

  auto loss_at = [&](const SaliencyModel<double>& m) {
    Rng r(0);
    const auto fwd = forward(m, g, x, false, r);
    return saliency_objective(rasterize(fwd.alpha, 8, 8, grid), gt).value.total;
  };

  std::vector<const Matrix<double>*> grads;
  analytic.visit([&](const Matrix<double>& m) { grads.push_back(&m); });
  EndToEndReport rep;
  std::size_t slot = 0;
  Parameters<double> base = model.params();
  std::vector<Matrix<double>*> targets;
  base.visit([&](Matrix<double>& m) { targets.push_back(&m); });
  for (Matrix<double>* t : targets) {
    for (Eigen::Index i = 0; i < t->size(); ++i) {
      const double orig = t->data()[i];
      t->data()[i] = orig + kGradCheckStep;
      const double up = loss_at(SaliencyModel<double>(v, dims, base));
      t->data()[i] = orig - kGradCheckStep;
      const double down = loss_at(SaliencyModel<double>(v, dims, base));
      t->data()[i] = orig;
      const double numeric = (up - down) / (2 * kGradCheckStep);
      rep.max_rel_err = std::max(rep.max_rel_err, relative_error(grads[slot]->data()[i], numeric));
      ++rep.num_params;
    }
    ++slot;
  }
  return rep;
}

}  // namespace grasp::testing
