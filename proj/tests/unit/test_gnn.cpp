#include <doctest.h>

#include <cmath>

#include "grasp/gnn.hpp"
#include "grasp/random.hpp"

using namespace grasp;

namespace {

constexpr Variant kAll[] = {Variant::GCN, Variant::GAT, Variant::SAGE};

ModelDims tiny_dims(int input = 6) {
  ModelDims d;
  d.input = input;
  d.hidden = 4;
  d.depth = 2;
  d.heads = 2;
  d.dropout = 0.0;
  return d;
}

TokenGraph random_graph(int n, Rng& rng) {
  std::vector<TokenGraph::Edge> edges;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (uniform01(rng) < 0.4) edges.push_back({i, j});
  return TokenGraph(n, edges);
}

Matrix<double> random_matrix(int r, int c, Rng& rng) {
  Matrix<double> m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal01(rng);
  return m;
}

template <typename Scalar>
void check_all_zero(const Parameters<Scalar>& p) {
  p.visit([](const Matrix<Scalar>& m) { CHECK(m.cwiseAbs().maxCoeff() == Scalar(0)); });
}

}  // namespace

TEST_CASE("init is seeded glorot with zero biases") {
  for (Variant v : kAll) {
    const ModelDims d;
    const auto a = init_model<float>(v, d, 11), b = init_model<float>(v, d, 11), c = init_model<float>(v, d, 12);
    std::vector<Matrix<float>> pa, pb, pc;
    a.params().visit([&](const Matrix<float>& m) { pa.push_back(m); });
    b.params().visit([&](const Matrix<float>& m) { pb.push_back(m); });
    c.params().visit([&](const Matrix<float>& m) { pc.push_back(m); });
    REQUIRE(pa.size() == pb.size());
    bool same = true, differs = false;
    for (std::size_t i = 0; i < pa.size(); ++i) {
      same = same && std::memcmp(pa[i].data(), pb[i].data(), sizeof(float) * pa[i].size()) == 0;
      differs = differs || pa[i] != pc[i];
    }
    CHECK(same);
    CHECK(differs);
    for (std::size_t l = 0; l < a.params().layers.size(); ++l) {
      const auto& lp = a.params().layers[l];
      const double in = l == 0 ? d.input : d.hidden;
      const double s = std::sqrt(6.0 / (in + d.hidden));
      CHECK(lp.weight.cwiseAbs().maxCoeff() <= s);
      if (lp.bias.size()) CHECK(lp.bias.cwiseAbs().maxCoeff() == 0.0f);
    }
    CHECK(a.params().readout_bias(0, 0) == 0.0f);
    CHECK(a.params().readout_weight.cwiseAbs().maxCoeff() <= std::sqrt(6.0 / (d.hidden + 1)));
  }
  ModelDims bad;
  bad.hidden = 0;
  CHECK_THROWS_AS(init_model<float>(Variant::GCN, bad, 0), UsageError);
}

TEST_CASE("single isolated node GCN passes non-negative input through") {
  ModelDims d = tiny_dims(4);
  d.depth = 1;
  Parameters<double> p = zero_parameters<double>(Variant::GCN, d);
  p.layers[0].weight.setIdentity();
  p.readout_weight.setOnes();
  const SaliencyModel<double> m(Variant::GCN, d, p);
  Matrix<double> h(1, 4);
  h << 0.5, 0.0, 2.0, 1.25;
  Rng rng(0);
  const auto r = forward(m, TokenGraph(1, {}), h, false, rng);
  CHECK(r.cache.layers[0].output == h);
  CHECK(r.alpha(0) == doctest::Approx(3.75));
}

TEST_CASE("3-node path GCN matches a hand evaluation") {
  ModelDims d = tiny_dims(2);
  d.hidden = 2;
  d.depth = 1;
  Parameters<double> p = zero_parameters<double>(Variant::GCN, d);
  p.layers[0].weight << 1.0, -0.5, 0.25, 2.0;
  p.layers[0].bias << 0.1, -0.2;
  p.readout_weight << 1.5, -1.0;
  p.readout_bias << 0.3;
  const SaliencyModel<double> m(Variant::GCN, d, p);
  Matrix<double> h(3, 2);
  h << 1.0, 2.0, -1.0, 0.5, 0.0, 3.0;
  Rng rng(0);
  const auto alpha = forward(m, TokenGraph(3, {{0, 1}, {1, 2}}), h, false, rng).alpha;

  // deg+1 = 2, 3, 2
  const double a00 = 0.5, a01 = 1 / std::sqrt(6.0), a11 = 1.0 / 3.0;
  const double agg[3][2] = {{a00 * 1.0 + a01 * -1.0, a00 * 2.0 + a01 * 0.5},
                            {a01 * 1.0 + a11 * -1.0 + a01 * 0.0, a01 * 2.0 + a11 * 0.5 + a01 * 3.0},
                            {a01 * -1.0 + a00 * 0.0, a01 * 0.5 + a00 * 3.0}};
  for (int i = 0; i < 3; ++i) {
    const double z0 = std::max(0.0, agg[i][0] * 1.0 + agg[i][1] * 0.25 + 0.1);
    const double z1 = std::max(0.0, agg[i][0] * -0.5 + agg[i][1] * 2.0 - 0.2);
    CHECK(alpha(i) == doctest::Approx(1.5 * z0 - 1.0 * z1 + 0.3).epsilon(1e-14));
  }
}

TEST_CASE("GAT attention on identical features is uniform and rows sum to one") {
  Rng rng(3);
  const TokenGraph g = random_graph(8, rng);
  const auto m = init_model<double>(Variant::GAT, tiny_dims(), 5);
  Matrix<double> same(8, 6);
  same.rowwise() = random_matrix(1, 6, rng).row(0);
  const auto r = forward(m, g, same, false, rng);
  for (int head = 0; head < 2; ++head) {
    const auto& att = attention_weights(r.cache, 0, head);
    for (int i = 0; i < 8; ++i) {
      CHECK(att.row(i).sum() == doctest::Approx(1.0).epsilon(1e-12));
      for (int j = 0; j < 8; ++j) {
        const bool in = i == j || g.has_edge(i, j);
        CHECK(att(i, j) == doctest::Approx(in ? 1.0 / (g.degree(i) + 1) : 0.0).epsilon(1e-12));
      }
    }
  }
  const auto m32 = init_model<float>(Variant::GAT, ModelDims{}, 1);
  Matrix<float> e = random_matrix(kNumTokens, kTokenDim, rng).cast<float>();
  std::vector<TokenGraph::Edge> ring;
  for (int i = 0; i < kNumTokens; ++i) ring.push_back({i, (i + 1) % kNumTokens});
  const auto big = forward(m32, TokenGraph(kNumTokens, ring), e, false, rng);
  for (int head = 0; head < 4; ++head)
    for (int layer = 0; layer < 2; ++layer)
      CHECK((attention_weights(big.cache, layer, head).rowwise().sum().array() - 1.0f).abs().maxCoeff() < 1e-6f);
}

TEST_CASE("SAGE output does not depend on neighbor order") {
  Rng rng(9);
  const int n = 12;
  std::vector<TokenGraph::Edge> edges;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (uniform01(rng) < 0.5) edges.push_back({i, j});
  const auto m = init_model<float>(Variant::SAGE, tiny_dims(), 2);
  const Matrix<float> h = random_matrix(n, 6, rng).cast<float>();
  const auto base = forward(m, TokenGraph(n, edges), h, false, rng).alpha;
  for (int trial = 0; trial < 10; ++trial) {
    auto shuffled = edges;
    shuffle(shuffled, rng);
    for (auto& e : shuffled)
      if (uniform01(rng) < 0.5) std::swap(e.first, e.second);
    const auto again = forward(m, TokenGraph(n, shuffled), h, false, rng).alpha;
    CHECK((again - base).cwiseAbs().maxCoeff() <= 1e-6f);
  }

  // Relabeling nodes permutes the output.
  std::vector<int> perm(n);
  for (int i = 0; i < n; ++i) perm[i] = i;
  shuffle(perm, rng);
  std::vector<TokenGraph::Edge> relabeled;
  for (const auto& [a, b] : edges) relabeled.push_back({perm[a], perm[b]});
  Matrix<float> hp(n, 6);
  for (int i = 0; i < n; ++i) hp.row(perm[i]) = h.row(i);
  const auto moved = forward(m, TokenGraph(n, relabeled), hp, false, rng).alpha;
  for (int i = 0; i < n; ++i) CHECK(std::abs(moved(perm[i]) - base(i)) <= 1e-5f);
}

TEST_CASE("SAGE isolated node aggregates a zero vector") {
  ModelDims d = tiny_dims();
  d.depth = 1;
  auto m = init_model<double>(Variant::SAGE, d, 4);
  Rng rng(1);
  const Matrix<double> h = random_matrix(3, 6, rng);
  const auto r = forward(m, TokenGraph(3, {{0, 1}}), h, false, rng);
  const auto& lp = m.params().layers[0];
  Matrix<double> pre = h.row(2) * lp.weight + lp.bias;
  pre = pre.cwiseMax(0.0);
  const Matrix<double> expect = pre / std::max(pre.norm(), kNormEps);
  CHECK((r.cache.layers[0].output.row(2) - expect).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("backward is linear in the upstream gradient") {
  for (Variant v : kAll) {
    Rng rng(21);
    const TokenGraph g = random_graph(8, rng);
    const auto m = init_model<double>(v, tiny_dims(), 3);
    const Matrix<double> h = random_matrix(8, 6, rng);
    const auto r = forward(m, g, h, false, rng);
    check_all_zero(backward(m, r.cache, Vector<double>(Vector<double>::Zero(8))));

    const Vector<double> d = random_matrix(8, 1, rng).col(0);
    const auto g1 = backward(m, r.cache, d);
    const auto g2 = backward(m, r.cache, Vector<double>(2.0 * d));
    std::vector<Matrix<double>> a, b;
    g1.visit([&](const Matrix<double>& x) { a.push_back(x); });
    g2.visit([&](const Matrix<double>& x) { b.push_back(x); });
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(b[i] == 2.0 * a[i]);
    CHECK(same_layout(g1, m.params()));
  }
}

TEST_CASE("stale caches are rejected") {
  Rng rng(1);
  auto m = init_model<double>(Variant::GCN, tiny_dims(), 3);
  const auto r = forward(m, random_graph(8, rng), random_matrix(8, 6, rng), false, rng);
  m.mutable_params().readout_bias(0, 0) += 1.0;
  CHECK_THROWS_AS(backward(m, r.cache, Vector<double>(Vector<double>::Ones(8))), UsageError);
}

TEST_CASE("forward checks shapes") {
  Rng rng(1);
  const auto m = init_model<double>(Variant::SAGE, tiny_dims(), 3);
  CHECK_THROWS(forward(m, random_graph(8, rng), random_matrix(7, 6, rng), false, rng));
  CHECK_THROWS(forward(m, random_graph(8, rng), random_matrix(8, 5, rng), false, rng));
}

TEST_CASE("inference is deterministic and finite; training mode applies dropout") {
  for (Variant v : kAll) {
    Rng rng(5);
    const auto m = init_model<float>(v, ModelDims{}, 8);
    const Matrix<float> e = random_matrix(kNumTokens, kTokenDim, rng).cast<float>();
    const TokenGraph g = build_graph(e, GraphConfig{});
    Rng r1(1), r2(2);
    const auto a = forward(m, g, e, false, r1).alpha;
    const auto b = forward(m, g, e, false, r2).alpha;
    CHECK(std::memcmp(a.data(), b.data(), sizeof(float) * a.size()) == 0);
    CHECK(a.allFinite());
    Rng r3(1), r4(1);
    const auto t1 = forward(m, g, e, true, r3).alpha;
    const auto t2 = forward(m, g, e, true, r4).alpha;
    CHECK(t1 == t2);
    CHECK(t1 != a);
  }
}

TEST_CASE("gradient check on small random instances") {
  for (Variant v : kAll)
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const GradCheckReport r = grad_check(v, seed);
      INFO(variant_name(v) << " seed " << seed << " rel " << r.max_rel_err);
      CHECK(r.passed);
      CHECK(r.max_rel_err < 1e-4);
      CHECK(r.num_params > 0);
    }
}

TEST_CASE("variant names round trip") {
  for (Variant v : kAll) CHECK(parse_variant(variant_name(v)) == v);
  CHECK_THROWS_AS(parse_variant("gin"), UsageError);
}
