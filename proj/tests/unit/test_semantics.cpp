#include <doctest.h>

#include <algorithm>

#include "grasp/array_io.hpp"
#include "grasp/random.hpp"
#include "grasp/semantics.hpp"
#include "support/tempdir.hpp"

using namespace grasp;

namespace {

MatrixXd gaussian(int r, int c, Rng& rng) {
  MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal01(rng);
  return m;
}

}  // namespace

TEST_CASE("pooling") {
  Rng rng(1);
  const Eigen::RowVectorXd u = gaussian(1, 8, rng);
  MatrixXd same(5, 8);
  same.rowwise() = u;
  CHECK((pool(same) - u.transpose()).cwiseAbs().maxCoeff() < 1e-15);

  MatrixXd alt(7, 8);
  alt.row(0).setZero();
  for (int i = 1; i < 7; ++i) alt.row(i) = (i % 2 ? 1.0 : -1.0) * u;
  CHECK(pool(alt).cwiseAbs().maxCoeff() == 0.0);

  const Matrix<float> e = gaussian(kNumTokens, kTokenDim, rng).cast<float>();
  const Eigen::VectorXd p = pool(e);
  for (int c = 0; c < kTokenDim; c += 37) {
    long double acc = 0;
    for (int r = 0; r < kNumTokens; ++r) acc += static_cast<long double>(e(r, c));
    CHECK(p(c) == doctest::Approx(static_cast<double>(acc / kNumTokens)).epsilon(1e-12));
  }
}

TEST_CASE("ridge projection") {
  Rng rng(2);
  const MatrixXd y = gaussian(768, 4, rng);
  const ProjectionMap exact = fit_projection(MatrixXd::Identity(768, 768), y, 0.0);
  CHECK((exact.weight - y).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(exact.residual < 1e-10);

  const MatrixXd sq = gaussian(30, 30, rng) + 5.0 * MatrixXd::Identity(30, 30);
  const MatrixXd ys = gaussian(30, 3, rng);
  CHECK((sq * fit_projection(sq, ys, 0.0).weight - ys).cwiseAbs().maxCoeff() < 1e-8);

  const MatrixXd x = gaussian(50, 768, rng), t = gaussian(50, 16, rng);
  CHECK(fit_projection(x, t, 1e12).weight.norm() < 1e-6);

  // Gradient descent on the same objective, run to convergence.
  const double lambda = 1e3;
  const ProjectionMap p = fit_projection(x, t, lambda);
  MatrixXd w = MatrixXd::Zero(768, 16);
  const MatrixXd xtx = x.transpose() * x, xty = x.transpose() * t;
  Eigen::VectorXd v = Eigen::VectorXd::Ones(768);
  for (int it = 0; it < 100; ++it) v = (xtx * v).normalized();
  const double step = 1.0 / (1.05 * v.dot(xtx * v) + lambda);
  for (int it = 0; it < 400; ++it) w -= step * (xtx * w - xty + lambda * w);
  CHECK(std::abs((x * w - t).norm() - p.residual) < 1e-4);
  CHECK((w - p.weight).cwiseAbs().maxCoeff() < 1e-4);

  CHECK_THROWS_AS(fit_projection(MatrixXd::Zero(3, 5), MatrixXd::Zero(3, 2), 0.0), DataError);
  CHECK_THROWS_AS(fit_projection(x, t.topRows(10), 1.0), UsageError);
}

TEST_CASE("term ranking") {
  Rng rng(3);
  std::vector<std::string> terms;
  for (int i = 0; i < 20; ++i) terms.push_back("t" + std::to_string(i));
  const MatrixXd vecs = gaussian(20, 12, rng);
  const Vocabulary vocab(terms, vecs);

  const auto top = rank_terms(vecs.row(3).transpose(), vocab, 1);
  REQUIRE(top.size() == 1);
  CHECK(top[0].index == 3);
  CHECK(top[0].term == "t3");
  CHECK(top[0].cosine == doctest::Approx(1.0).epsilon(1e-12));

  MatrixXd axes = MatrixXd::Zero(4, 5);
  for (int i = 0; i < 4; ++i) axes(i, i) = 1.0;
  const Vocabulary ortho({"a", "b", "c", "d"}, axes);
  Eigen::VectorXd off = Eigen::VectorXd::Zero(5);
  off(4) = 2.0;
  const auto flat = rank_terms(off, ortho, 4);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(flat[i].index == i);
    CHECK(flat[i].cosine == 0.0);
  }

  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::VectorXd t = gaussian(12, 1, rng).col(0);
    const auto got = rank_terms(t, vocab, 5);
    std::vector<std::pair<double, std::size_t>> all;
    for (int i = 0; i < 20; ++i) all.push_back({-vecs.row(i).dot(t) / (vecs.row(i).norm() * t.norm()), i});
    std::sort(all.begin(), all.end());
    REQUIRE(got.size() == 5);
    for (int i = 0; i < 5; ++i) {
      CHECK(got[i].index == all[i].second);
      CHECK(got[i].cosine == doctest::Approx(-all[i].first).epsilon(1e-12));
    }
    const auto scaled = rank_terms(Eigen::VectorXd(7.5 * t), vocab, 5);
    for (int i = 0; i < 5; ++i) CHECK(scaled[i].index == got[i].index);
  }

  CHECK_THROWS_AS(rank_terms(Eigen::VectorXd::Ones(12), vocab, 0), UsageError);
  CHECK_THROWS_AS(rank_terms(Eigen::VectorXd::Ones(12), vocab, 21), UsageError);
  CHECK_THROWS_AS(Vocabulary({"a"}, MatrixXd::Zero(1, 3)), DataError);
  CHECK_THROWS_AS(Vocabulary({"a", "b"}, MatrixXd::Ones(1, 3)), DataError);
}

TEST_CASE("cue extraction end to end") {
  Rng rng(4);
  const MatrixXd vecs = gaussian(6, 10, rng);
  const Vocabulary vocab({"dog", "beach", "sky", "car", "tree", "café"}, vecs);
  ProjectionMap p;
  p.weight = MatrixXd::Zero(kTokenDim, 10);
  p.weight.topRows(10) = MatrixXd::Identity(10, 10);
  EmbeddingTensor<float> e = EmbeddingTensor<float>::Zero(kNumTokens, kTokenDim);
  e.leftCols(10).rowwise() = vecs.row(5).cast<float>();
  const auto cues = extract_cues(e, p, vocab, 2);
  CHECK(cues[0].term == "café");
  CHECK(assemble_prompt(cues).rfind("a photo of café, ", 0) == 0);
}

TEST_CASE("prompt template") {
  CHECK(assemble_prompt(std::vector<std::string>{"dog"}) == "a photo of dog");
  CHECK(assemble_prompt(std::vector<std::string>{"dog", "beach"}) == "a photo of dog, beach");
  CHECK(assemble_prompt(std::vector<std::string>{"猫", "naïve"}) == "a photo of 猫, naïve");
  CHECK_THROWS_AS(assemble_prompt(std::vector<std::string>{}), UsageError);
}

TEST_CASE("vocabulary files") {
  testing::TempDir dir;
  write_text(dir / "vocab.txt", "dog\nbeach\n");
  write_array(dir / "vocab.npy", DenseArray({2, 3}, std::vector<float>{1, 0, 0, 0, 2, 0}));
  const Vocabulary v = Vocabulary::load(dir / "vocab.txt", dir / "vocab.npy");
  CHECK(v.size() == 2);
  CHECK(v.vectors()(1, 1) == 1.0);
  write_text(dir / "short.txt", "dog\n");
  CHECK_THROWS_AS(Vocabulary::load(dir / "short.txt", dir / "vocab.npy"), DataError);
}
