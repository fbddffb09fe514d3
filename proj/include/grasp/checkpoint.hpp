#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "grasp/gnn.hpp"
#include "grasp/optimizer.hpp"
#include "grasp/token_graph.hpp"

namespace grasp {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct TrainingMeta {
  std::uint32_t epoch = 0;
  std::uint64_t seed = 0;
  double best_val_fmax = 0.0;
};

// Binary layout, little-endian throughout:
//   "GRSP" u32 version
//   u32 variant (0 gcn, 1 gat, 2 sage)
//   u32 input, hidden, depth, heads; f64 dropout
//   u8 use_semantic, u8 connect_cls, u32 k
//   u32 epoch, u64 seed, f64 best_val_fmax
//   parameters in declared order as f32
//   u8 has_optimizer; if 1: u64 step, f64 lr, beta1, beta2, eps, then m and v
//   in parameter order as f32
struct Checkpoint {
  Variant variant = Variant::SAGE;
  ModelDims dims;
  GraphConfig graph;
  TrainingMeta meta;
  Parameters<float> params;
  std::optional<AdamState<float>> optimizer;

  SaliencyModel<float> model() const { return SaliencyModel<float>(variant, dims, params); }
};

std::vector<char> encode_checkpoint(const Checkpoint& c);
Checkpoint decode_checkpoint(const std::vector<char>& bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace grasp
