#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "grasp/gnn.hpp"

namespace grasp {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename Scalar>
struct AdamState {
  AdamConfig config;
  std::uint64_t step = 0;
  Parameters<Scalar> m;
  Parameters<Scalar> v;

  static AdamState init(const Parameters<Scalar>& like, const AdamConfig& cfg = {}) {
    return AdamState{cfg, 0, like.zeros_like(), like.zeros_like()};
  }
};

// Bias-corrected Adam. Per-element arithmetic runs in double and is stored
// back in Scalar.
template <typename Scalar>
void adam_step(Parameters<Scalar>& params, const Parameters<Scalar>& grads, AdamState<Scalar>& state) {
  if (!same_layout(params, grads) || !same_layout(params, state.m) || !same_layout(params, state.v))
    throw UsageError("Adam: parameter, gradient and moment layouts differ");
  ++state.step;
  const AdamConfig& c = state.config;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(c.beta1, t);
  const double correction2 = 1.0 - std::pow(c.beta2, t);

  std::vector<Matrix<Scalar>*> p, m, v;
  std::vector<const Matrix<Scalar>*> g;
  params.visit([&](Matrix<Scalar>& x) { p.push_back(&x); });
  state.m.visit([&](Matrix<Scalar>& x) { m.push_back(&x); });
  state.v.visit([&](Matrix<Scalar>& x) { v.push_back(&x); });
  grads.visit([&](const Matrix<Scalar>& x) { g.push_back(&x); });

  for (std::size_t k = 0; k < p.size(); ++k) {
    Scalar* theta = p[k]->data();
    Scalar* mk = m[k]->data();
    Scalar* vk = v[k]->data();
    const Scalar* gk = g[k]->data();
    for (Eigen::Index i = 0; i < p[k]->size(); ++i) {
      const double grad = gk[i];
      const double m_new = c.beta1 * static_cast<double>(mk[i]) + (1.0 - c.beta1) * grad;
      const double v_new = c.beta2 * static_cast<double>(vk[i]) + (1.0 - c.beta2) * grad * grad;
      mk[i] = static_cast<Scalar>(m_new);
      vk[i] = static_cast<Scalar>(v_new);
      const double m_hat = m_new / correction1;
      const double v_hat = v_new / correction2;
      theta[i] = static_cast<Scalar>(static_cast<double>(theta[i]) - c.lr * m_hat / (std::sqrt(v_hat) + c.eps));
    }
  }
}

}  // namespace grasp
