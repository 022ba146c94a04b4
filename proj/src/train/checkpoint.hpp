#pragma once

#include <string>

#include "model/params.hpp"
#include "train/config.hpp"
#include "train/optimizer.hpp"

namespace meev {

inline constexpr int kCheckpointVersion = 1;

// Everything needed to continue a run: weights, optimizer moments, where
// the schedule stands, and the exact config it was produced under.
struct CheckpointMeta {
  int format_version = kCheckpointVersion;
  int epoch = -1;          // last completed epoch
  std::int64_t step = 0;   // optimizer steps taken
  std::uint64_t rng_state = 0;  // seed the derived per-epoch streams use
  TrainConfig config;
  int model_joints = 0;
  int model_vertices = 0;
};

void save_checkpoint(const std::string& path, const ParamStore& store,
                     const Adam& adam, const CheckpointMeta& meta);

// Restores weights into an existing store (every archived parameter must
// already exist with the same shape) and moments into the optimizer.
CheckpointMeta load_checkpoint(const std::string& path, ParamStore& store,
                               Adam& adam);

// Reads only the metadata block.
CheckpointMeta read_checkpoint_meta(const std::string& path);

// Weights-only variants for inference-time loading.
void save_weights(const std::string& path, const ParamStore& store);
void load_weights(const std::string& path, ParamStore& store);

}  // namespace meev
