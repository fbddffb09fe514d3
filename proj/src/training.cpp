#include "grasp/training.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <thread>

#include "grasp/metrics.hpp"

namespace grasp {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Dropout stream for one sample visit; independent of thread scheduling.
std::uint64_t sample_seed(std::uint64_t seed, int epoch, std::size_t index) {
  return splitmix64(splitmix64(seed ^ 0xD1B54A32D192ED03ULL) + static_cast<std::uint64_t>(epoch) * 0x100000001ULL +
                    index);
}

void add_into(GradientBundle<float>& acc, const GradientBundle<float>& g) {
  std::vector<MatrixXf*> a;
  acc.visit([&](MatrixXf& m) { a.push_back(&m); });
  std::size_t k = 0;
  g.visit([&](const MatrixXf& m) { *a[k++] += m; });
}

void scale(GradientBundle<float>& g, float factor) {
  g.visit([&](MatrixXf& m) { m *= factor; });
}

// Runs fn(i) for i in [0, n) on up to `threads` workers.
template <typename F>
void parallel_for(std::size_t n, int threads, F&& fn) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(threads), n);
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += workers) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace

SaliencyMap predict(const Checkpoint& ckpt, const EmbeddingTensor<float>& tokens, int out_h, int out_w) {
  const TokenGraph graph = build_graph(tokens, ckpt.graph);
  return predict(ckpt.model(), graph, tokens, out_h, out_w);
}

std::vector<Sample> load_samples(const std::vector<ManifestEntry>& entries) {
  std::vector<Sample> samples;
  samples.reserve(entries.size());
  for (const auto& e : entries) {
    Sample s;
    s.tokens = read_array(e.embedding).to_matrix<float>();
    if (s.tokens.rows() != kNumTokens)
      throw DataError(e.embedding.string() + ": expected " + std::to_string(kNumTokens) + " tokens");
    if (!s.tokens.allFinite()) throw DataError(e.embedding.string() + ": non-finite embedding values");
    s.gt = read_mask(e.mask);
    samples.push_back(std::move(s));
  }
  return samples;
}

double dataset_fmax(const SaliencyModel<float>& model, const GraphConfig& graph, const std::vector<Sample>& samples) {
  SaliencyEvaluator eval;
  for (const auto& s : samples) {
    const TokenGraph g = build_graph(s.tokens, graph);
    eval.add(predict(model, g, s.tokens, static_cast<int>(s.gt.rows()), static_cast<int>(s.gt.cols())), s.gt);
  }
  return eval.report().f_max;
}

TrainResult train(const std::vector<Sample>& train_set, const std::vector<Sample>& val_set, const TrainConfig& cfg) {
  if (train_set.empty()) throw DataError("empty manifest: no training samples");
  if (cfg.epochs < 1) throw UsageError("epochs must be positive");
  if (cfg.batch_size < 1) throw UsageError("batch size must be positive");
  if (cfg.patience < 1) throw UsageError("patience must be positive");
  const Eigen::Index gt_h = train_set.front().gt.rows(), gt_w = train_set.front().gt.cols();
  for (const auto* set : {&train_set, &val_set})
    for (const auto& s : *set) {
      if (s.gt.rows() != gt_h || s.gt.cols() != gt_w)
        throw DataError("ground-truth masks of one run must share a resolution");
      if (s.tokens.cols() != cfg.dims.input)
        throw DataError("embedding width does not match the model input dimension");
    }

  std::vector<TokenGraph> graphs;
  graphs.reserve(train_set.size());
  for (const auto& s : train_set) graphs.push_back(build_graph(s.tokens, cfg.graph));
  const std::vector<Sample>& selection_set = val_set.empty() ? train_set : val_set;

  SaliencyModel<float> model = init_model<float>(cfg.variant, cfg.dims, cfg.seed);
  AdamState<float> adam = AdamState<float>::init(model.params(), cfg.adam);
  Rng shuffle_rng(splitmix64(cfg.seed ^ 0x5DEECE66DULL));

  TrainResult result;
  double best = -1.0;
  int since_best = 0;
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle(order, shuffle_rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t count = std::min(order.size() - start, static_cast<std::size_t>(cfg.batch_size));
      std::vector<SampleGradient<float>> parts(count);
      parallel_for(count, cfg.threads, [&](std::size_t b) {
        const std::size_t idx = order[start + b];
        Rng rng(sample_seed(cfg.seed, epoch, idx));
        parts[b] = sample_gradient(model, graphs[idx], train_set[idx].tokens, train_set[idx].gt, PatchGrid{}, true, rng);
      });
      GradientBundle<float> total = std::move(parts[0].grads);
      loss_sum += parts[0].loss.total;
      for (std::size_t b = 1; b < count; ++b) {
        add_into(total, parts[b].grads);
        loss_sum += parts[b].loss.total;
      }
      scale(total, 1.0f / static_cast<float>(count));
      adam_step(model.mutable_params(), total, adam);
    }

    EpochLog entry;
    entry.epoch = epoch;
    entry.train_loss = loss_sum / static_cast<double>(train_set.size());
    entry.val_fmax = dataset_fmax(model, cfg.graph, selection_set);
    result.log.push_back(entry);
    result.epochs_run = epoch + 1;

    if (entry.val_fmax > best) {
      best = entry.val_fmax;
      since_best = 0;
      Checkpoint& c = result.best;
      c.variant = cfg.variant;
      c.dims = cfg.dims;
      c.graph = cfg.graph;
      c.meta = TrainingMeta{static_cast<std::uint32_t>(epoch), cfg.seed, best};
      c.params = model.params();
      c.optimizer = adam;
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }
  return result;
}

TrainResult train(const DatasetManifest& manifest, const TrainConfig& cfg) {
  auto train_entries = manifest.with_split(Split::Train);
  auto val_entries = manifest.with_split(Split::Val);
  if (train_entries.empty()) throw DataError("empty manifest: no train entries");
  if (val_entries.empty() && cfg.val_fraction > 0.0) {
    const auto held = static_cast<std::size_t>(cfg.val_fraction * static_cast<double>(train_entries.size()));
    if (held >= train_entries.size()) throw UsageError("val_fraction leaves no training samples");
    val_entries.assign(train_entries.end() - static_cast<std::ptrdiff_t>(held), train_entries.end());
    train_entries.resize(train_entries.size() - held);
  }
  return train(load_samples(train_entries), load_samples(val_entries), cfg);
}

std::string format_train_log(const std::vector<EpochLog>& log) {
  std::string out = "epoch,train_loss,val_fmax\n";
  char buf[128];
  for (const auto& e : log) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g\n", e.epoch, e.train_loss, e.val_fmax);
    out += buf;
  }
  return out;
}

}  // namespace grasp
