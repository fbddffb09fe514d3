#include <doctest.h>

#include <cmath>
#include <cstring>

#include "grasp/losses.hpp"
#include "grasp/optimizer.hpp"
#include "grasp/random.hpp"
#include "support/e2e.hpp"

using namespace grasp;

namespace {

MatrixXd random_map(int h, int w, Rng& rng, double lo = 0.05, double hi = 0.95) {
  MatrixXd m(h, w);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = uniform(rng, lo, hi);
  return m;
}

MatrixXd random_mask(int h, int w, Rng& rng) {
  MatrixXd m(h, w);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = uniform01(rng) < 0.5 ? 1.0 : 0.0;
  return m;
}

template <typename F>
void check_gradient(F loss_and_grad, const MatrixXd& s) {
  const MatrixXd grad = loss_and_grad(s).grad;
  const double h = 1e-6;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    MatrixXd up = s, down = s;
    up.data()[i] += h;
    down.data()[i] -= h;
    const double numeric = (loss_and_grad(up).loss - loss_and_grad(down).loss) / (2 * h);
    CHECK(relative_error(grad.data()[i], numeric) < 1e-6);
  }
}

}  // namespace

TEST_CASE("weight map") {
  const MatrixXd zeros = MatrixXd::Zero(32, 32), ones = MatrixXd::Ones(32, 32);
  const MatrixXd wz = weight_map(zeros), wo = weight_map(ones);
  CHECK((wz.array() == 1.0).all());
  CHECK((wo.block(7, 7, 18, 18).array() - 1.0).abs().maxCoeff() < 1e-12);
  CHECK(wo(0, 0) > 1.0);

  MatrixXd dot = MatrixXd::Zero(31, 31);
  dot(15, 15) = 1.0;
  CHECK(weight_map(dot)(15, 15) == doctest::Approx(1.0 + 5.0 * (1.0 - 1.0 / 225.0)).epsilon(1e-14));
  CHECK(weight_map(dot)(15, 10) == doctest::Approx(1.0 + 5.0 / 225.0).epsilon(1e-14));

  Rng rng(1);
  for (int t = 0; t < 20; ++t) {
    const MatrixXd w = weight_map(random_map(20, 17, rng, 0.0, 1.0));
    CHECK(w.maxCoeff() <= 6.0);
    CHECK(w.minCoeff() >= 1.0);
  }
}

TEST_CASE("wBCE values and gradient") {
  Rng rng(2);
  const MatrixXd g = random_mask(6, 5, rng);
  const MatrixXd w = weight_map(g);
  CHECK(wbce(MatrixXd::Constant(6, 5, 0.5), g, w).loss == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(std::abs(wbce(MatrixXd::Constant(6, 5, 0.5), g, w).loss - std::log(2.0)) < 1e-9);
  CHECK(wbce(g, g, w).loss <= 1e-6);

  for (int t = 0; t < 5; ++t) {
    const MatrixXd gt = t % 2 ? random_mask(4, 4, rng) : random_map(4, 4, rng, 0.0, 1.0);
    const MatrixXd wt = weight_map(gt);
    check_gradient([&](const MatrixXd& s) { return wbce(s, gt, wt); }, random_map(4, 4, rng));
  }

  MatrixXd clamped = MatrixXd::Constant(2, 2, 0.5);
  clamped(0, 0) = 0.0;
  CHECK(wbce(clamped, MatrixXd::Ones(2, 2), MatrixXd::Ones(2, 2)).grad(0, 0) == 0.0);
  CHECK_THROWS(wbce(MatrixXd::Zero(2, 2), MatrixXd::Zero(2, 3), MatrixXd::Ones(2, 2)));
}

TEST_CASE("wIoU values and gradient") {
  Rng rng(3);
  const MatrixXd g = random_mask(6, 5, rng);
  CHECK(wiou(g, g, weight_map(g)).loss == 0.0);
  const int n = 30;
  CHECK(wiou(MatrixXd::Zero(6, 5), MatrixXd::Ones(6, 5), MatrixXd::Ones(6, 5)).loss ==
        doctest::Approx(1.0 - 1.0 / (n + 1.0)).epsilon(1e-15));
  for (int t = 0; t < 5; ++t) {
    const MatrixXd gt = t % 2 ? random_mask(4, 4, rng) : random_map(4, 4, rng, 0.0, 1.0);
    const MatrixXd wt = weight_map(gt);
    check_gradient([&](const MatrixXd& s) { return wiou(s, gt, wt); }, random_map(4, 4, rng));
  }
}

TEST_CASE("objective decomposes") {
  Rng rng(4);
  for (int t = 0; t < 10; ++t) {
    const MatrixXd s = random_map(9, 7, rng), g = random_mask(9, 7, rng);
    const Objective o = saliency_objective(s, g);
    CHECK(o.value.total == doctest::Approx(o.value.wbce + o.value.wiou).epsilon(1e-12));
    CHECK(o.value.wbce >= 0.0);
    CHECK(o.value.wiou >= 0.0);
    CHECK(o.value.wiou <= 1.0);
  }
}

TEST_CASE("end-to-end gradient through rasterize and the GNN") {
  for (Variant v : {Variant::GCN, Variant::GAT, Variant::SAGE})
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      const auto r = testing::end_to_end_check(v, seed);
      INFO(variant_name(v) << " seed " << seed);
      CHECK(r.max_rel_err < 1e-4);
      CHECK(r.num_params > 0);
    }
}

TEST_CASE("adam") {
  ModelDims d;
  d.input = 3;
  d.hidden = 2;
  d.depth = 1;
  Parameters<double> p = zero_parameters<double>(Variant::GCN, d);
  const Parameters<double> start = p;
  AdamState<double> st = AdamState<double>::init(p);

  Parameters<double> zero = p.zeros_like();
  adam_step(p, zero, st);
  std::vector<double> before, after;
  start.visit([&](const Matrix<double>& m) { before.insert(before.end(), m.data(), m.data() + m.size()); });
  p.visit([&](const Matrix<double>& m) { after.insert(after.end(), m.data(), m.data() + m.size()); });
  CHECK(before == after);

  Parameters<double> q = start;
  AdamState<double> s2 = AdamState<double>::init(q);
  Parameters<double> half = p.zeros_like();
  half.visit([](Matrix<double>& m) { m.setConstant(0.5); });
  adam_step(q, half, s2);
  q.visit([](const Matrix<double>& m) {
    for (Eigen::Index i = 0; i < m.size(); ++i) CHECK(m.data()[i] == doctest::Approx(-1e-3).epsilon(1e-6));
  });
  CHECK(s2.step == 1);

  // Same inputs, same states.
  Parameters<float> a = start.cast<float>(), b = start.cast<float>();
  AdamState<float> sa = AdamState<float>::init(a), sb = AdamState<float>::init(b);
  Rng rng(1);
  for (int step = 0; step < 5; ++step) {
    Parameters<float> gr = a.zeros_like();
    gr.visit([&](Matrix<float>& m) {
      for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<float>(normal01(rng));
    });
    adam_step(a, gr, sa);
    adam_step(b, gr, sb);
  }
  std::vector<float> fa, fb;
  a.visit([&](const Matrix<float>& m) { fa.insert(fa.end(), m.data(), m.data() + m.size()); });
  b.visit([&](const Matrix<float>& m) { fb.insert(fb.end(), m.data(), m.data() + m.size()); });
  CHECK(std::memcmp(fa.data(), fb.data(), fa.size() * sizeof(float)) == 0);
  sa.v.visit([](const Matrix<float>& m) { CHECK(m.minCoeff() >= 0.0f); });
}
