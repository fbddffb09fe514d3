#include <doctest.h>

#include <cmath>
#include <cstring>

#include "grasp/checkpoint.hpp"
#include "grasp/training.hpp"
#include "support/synthetic.hpp"
#include "support/tempdir.hpp"

using namespace grasp;
using grasp::testing::file_bytes;
using grasp::testing::TempDir;

namespace {

TrainConfig small_config(Variant v) {
  TrainConfig c;
  c.variant = v;
  c.dims.hidden = 16;
  c.dims.heads = 4;
  c.epochs = 3;
  c.batch_size = 3;
  c.seed = 5;
  return c;
}

template <typename Scalar>
bool bitwise_equal(const Matrix<Scalar>& a, const Matrix<Scalar>& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::memcmp(a.data(), b.data(), sizeof(Scalar) * static_cast<std::size_t>(a.size())) == 0;
}

}  // namespace

TEST_CASE("untrained epoch-0 loss is in range") {
  const auto data = testing::disc_dataset(4);
  for (Variant v : {Variant::GCN, Variant::GAT, Variant::SAGE}) {
    const auto m = init_model<float>(v, ModelDims{}, 1);
    for (const auto& s : data) {
      Rng rng(0);
      const auto r = sample_gradient(m, build_graph(s.tokens, GraphConfig{}), s.tokens, s.gt, PatchGrid{}, true, rng);
      CHECK(std::isfinite(r.loss.total));
      CHECK(r.loss.total > 0.0);
      CHECK(r.loss.total < 1.0 + -std::log(kBceClamp));
    }
  }
}

TEST_CASE("training is bitwise reproducible, single or multi threaded") {
  const auto data = testing::disc_dataset(5);
  for (Variant v : {Variant::GCN, Variant::GAT, Variant::SAGE}) {
    TrainConfig cfg = small_config(v);
    const TrainResult a = train(data, {}, cfg);
    const TrainResult b = train(data, {}, cfg);
    cfg.threads = 3;
    const TrainResult c = train(data, {}, cfg);
    REQUIRE(a.log.size() == b.log.size());
    for (std::size_t i = 0; i < a.log.size(); ++i) {
      CHECK(std::memcmp(&a.log[i].train_loss, &b.log[i].train_loss, sizeof(double)) == 0);
      CHECK(std::memcmp(&a.log[i].train_loss, &c.log[i].train_loss, sizeof(double)) == 0);
    }
    CHECK(encode_checkpoint(a.best) == encode_checkpoint(b.best));
    CHECK(encode_checkpoint(a.best) == encode_checkpoint(c.best));
    CHECK(format_train_log(a.log) == format_train_log(b.log));
  }
}

TEST_CASE("training selects the best epoch and stops early") {
  const auto data = testing::disc_dataset(4);
  TrainConfig cfg = small_config(Variant::SAGE);
  cfg.epochs = 40;
  cfg.patience = 2;
  const TrainResult r = train(data, {}, cfg);
  CHECK(r.epochs_run <= 40);
  double best = -1.0;
  for (const auto& e : r.log) best = std::max(best, e.val_fmax);
  CHECK(r.best.meta.best_val_fmax == best);
  CHECK(r.log[r.best.meta.epoch].val_fmax == best);
  if (r.epochs_run < 40) CHECK(r.epochs_run - 1 - static_cast<int>(r.best.meta.epoch) == 2);

  const std::string csv = format_train_log(r.log);
  CHECK(csv.rfind("epoch,train_loss,val_fmax\n", 0) == 0);
}

TEST_CASE("training input errors") {
  CHECK_THROWS_AS(train(std::vector<Sample>{}, {}, TrainConfig{}), DataError);
  auto data = testing::disc_dataset(2);
  data[1].gt = SaliencyMap::Zero(32, 32);
  CHECK_THROWS_AS(train(data, {}, small_config(Variant::GCN)), DataError);
  TrainConfig bad = small_config(Variant::GCN);
  bad.epochs = 0;
  CHECK_THROWS_AS(train(testing::disc_dataset(2), {}, bad), UsageError);
  CHECK_THROWS_AS(train(DatasetManifest{}, TrainConfig{}), DataError);
}

TEST_CASE("checkpoint round trip reproduces forward bitwise") {
  TempDir dir;
  const auto data = testing::disc_dataset(3);
  for (Variant v : {Variant::GCN, Variant::GAT, Variant::SAGE}) {
    const TrainResult r = train(data, {}, small_config(v));
    save_checkpoint(dir / "a.grsp", r.best);
    const Checkpoint back = load_checkpoint(dir / "a.grsp");
    save_checkpoint(dir / "b.grsp", back);
    CHECK(file_bytes(dir / "a.grsp") == file_bytes(dir / "b.grsp"));
    CHECK(back.variant == v);
    CHECK(back.dims == r.best.dims);
    CHECK(back.meta.epoch == r.best.meta.epoch);
    CHECK(back.optimizer.has_value());
    const SaliencyMap before = predict(r.best, data[0].tokens, 40, 24);
    const SaliencyMap after = predict(back, data[0].tokens, 40, 24);
    CHECK(bitwise_equal(before, after));
  }

  Checkpoint bare = train(data, {}, small_config(Variant::GCN)).best;
  bare.optimizer.reset();
  CHECK_FALSE(decode_checkpoint(encode_checkpoint(bare)).optimizer.has_value());
}

TEST_CASE("corrupt checkpoints are rejected") {
  const auto data = testing::disc_dataset(2);
  auto bytes = encode_checkpoint(train(data, {}, small_config(Variant::GCN)).best);
  CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "GRSP");
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  CHECK_THROWS_AS(decode_checkpoint(bad_magic), DataError);
  auto bad_version = bytes;
  bad_version[4] = 2;
  CHECK_THROWS_AS(decode_checkpoint(bad_version), DataError);
  CHECK_THROWS_AS(decode_checkpoint(std::vector<char>(bytes.begin(), bytes.end() - 3)), DataError);
  auto extra = bytes;
  extra.push_back(0);
  CHECK_THROWS_AS(decode_checkpoint(extra), DataError);
}
