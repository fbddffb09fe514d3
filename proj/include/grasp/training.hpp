#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "grasp/array_io.hpp"
#include "grasp/checkpoint.hpp"
#include "grasp/gnn.hpp"
#include "grasp/losses.hpp"
#include "grasp/optimizer.hpp"
#include "grasp/saliency_head.hpp"
#include "grasp/token_graph.hpp"

namespace grasp {

struct TrainConfig {
  Variant variant = Variant::SAGE;
  ModelDims dims;
  GraphConfig graph;
  AdamConfig adam;
  int epochs = 200;
  int batch_size = 8;
  std::uint64_t seed = 0;
  // Fraction of train entries held out for validation when the manifest has
  // no `val` split. With no validation samples at all, model selection uses
  // the training set.
  double val_fraction = 0.0;
  int patience = 30;
  int threads = 1;
};

struct Sample {
  EmbeddingTensor<float> tokens;
  SaliencyMap gt;
};

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double val_fmax = 0.0;
};

struct TrainResult {
  Checkpoint best;
  std::vector<EpochLog> log;
  int epochs_run = 0;
};

template <typename Scalar>
struct SampleGradient {
  LossValue loss;
  GradientBundle<Scalar> grads;
};

// Forward through GNN and rasterizer, objective against gt, and the full
// reverse pass back to the GNN parameters.
template <typename Scalar>
SampleGradient<Scalar> sample_gradient(const SaliencyModel<Scalar>& model, const TokenGraph& graph,
                                       const EmbeddingTensor<Scalar>& tokens, const SaliencyMap& gt,
                                       const PatchGrid& grid, bool train_mode, Rng& rng) {
  auto fwd = forward(model, graph, tokens, train_mode, rng);
  const Eigen::VectorXd alpha = fwd.alpha.template cast<double>();
  const SaliencyMap s = rasterize(alpha, static_cast<int>(gt.rows()), static_cast<int>(gt.cols()), grid);
  const Objective obj = saliency_objective(s, gt);
  const Eigen::VectorXd d_alpha = rasterize_backward(s, obj.grad, grid);
  SampleGradient<Scalar> out;
  out.loss = obj.value;
  out.grads = backward(model, fwd.cache, Vector<Scalar>(d_alpha.template cast<Scalar>()));
  return out;
}

template <typename Scalar>
SaliencyMap predict(const SaliencyModel<Scalar>& model, const TokenGraph& graph, const EmbeddingTensor<Scalar>& tokens,
                    int out_h, int out_w, const PatchGrid& grid = {}) {
  Rng unused(0);
  const auto fwd = forward(model, graph, tokens, false, unused);
  return rasterize(fwd.alpha.template cast<double>(), out_h, out_w, grid);
}

SaliencyMap predict(const Checkpoint& ckpt, const EmbeddingTensor<float>& tokens, int out_h, int out_w);

// Loads embeddings (any float dtype, stored as f32) and masks.
std::vector<Sample> load_samples(const std::vector<ManifestEntry>& entries);

// Dataset F-max (max over thresholds of the mean F curve) of model
// predictions at each sample's ground-truth resolution.
double dataset_fmax(const SaliencyModel<float>& model, const GraphConfig& graph, const std::vector<Sample>& samples);

TrainResult train(const std::vector<Sample>& train_set, const std::vector<Sample>& val_set, const TrainConfig& cfg);
TrainResult train(const DatasetManifest& manifest, const TrainConfig& cfg);

// `epoch,train_loss,val_fmax` with 17 significant digits.
std::string format_train_log(const std::vector<EpochLog>& log);

}  // namespace grasp
