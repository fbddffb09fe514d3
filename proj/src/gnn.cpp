#include "grasp/gnn.hpp"

namespace grasp {

GradCheckReport grad_check(Variant variant, std::uint64_t seed) {
  constexpr int n = 8;
  ModelDims dims;
  dims.input = 6;
  dims.hidden = 4;
  dims.depth = 2;
  dims.heads = 2;
  dims.dropout = 0.0;

  Rng rng(seed ^ 0x9E3779B97F4A7C15ULL);
  std::vector<TokenGraph::Edge> edges;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (uniform01(rng) < 0.35) edges.emplace_back(i, j);
  const TokenGraph graph(n, edges);

  MatrixXd x(n, dims.input);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = normal01(rng);
  Eigen::VectorXd coeff(n);
  for (int i = 0; i < n; ++i) coeff(i) = normal01(rng);

  SaliencyModel<double> model = init_model<double>(variant, dims, seed);
  model.mutable_params().visit([&](MatrixXd& m) {
    if (m.rows() == 1) m = m.unaryExpr([&](double) { return 0.1 * normal01(rng); });
  });

  auto loss = [&](const SaliencyModel<double>& m) {
    Rng unused(0);
    return coeff.dot(forward(m, graph, x, false, unused).alpha);
  };

  Rng unused(0);
  const auto fwd = forward(model, graph, x, false, unused);
  const GradientBundle<double> analytic = backward(model, fwd.cache, coeff);

  std::vector<const MatrixXd*> grads;
  analytic.visit([&](const MatrixXd& m) { grads.push_back(&m); });

  GradCheckReport report{variant, seed, 0, 0.0, 0.0, false};
  std::size_t slot = 0;
  std::vector<MatrixXd*> slots;
  model.mutable_params().visit([&](MatrixXd& m) { slots.push_back(&m); });
  for (MatrixXd* param : slots) {
    const MatrixXd& grad = *grads[slot++];
    for (Eigen::Index i = 0; i < param->size(); ++i) {
      const double saved = param->data()[i];
      param->data()[i] = saved + kGradCheckStep;
      const double up = loss(model);
      param->data()[i] = saved - kGradCheckStep;
      const double down = loss(model);
      param->data()[i] = saved;
      const double numeric = (up - down) / (2.0 * kGradCheckStep);
      const double a = grad.data()[i];
      report.max_rel_err = std::max(report.max_rel_err, relative_error(a, numeric));
      report.max_abs_err = std::max(report.max_abs_err, std::abs(a - numeric));
      ++report.num_params;
    }
  }
  report.passed = report.max_rel_err < kGradCheckTolerance;
  return report;
}

}  // namespace grasp
