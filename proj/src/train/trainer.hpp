#pragma once

#include <string>
#include <vector>

#include "data/crop.hpp"
#include "data/dataset.hpp"
#include "model/pipeline.hpp"
#include "train/checkpoint.hpp"
#include "train/config.hpp"

namespace meev {

struct TrainLoopOptions {
  CropConfig crop;
  // continue from this checkpoint (weights, optimizer, next epoch)
  std::string resume_from;
  // keep only the newest N epoch checkpoints; 0 keeps all of them
  int keep_checkpoints = 0;
};

struct TrainProgress {
  std::vector<double> step_losses;  // batch loss per optimizer step
  std::vector<std::string> checkpoints;  // paths still on disk, oldest first
  int last_epoch = -1;
  std::int64_t steps = 0;
};

// Adam over the full pipeline with the staged lr schedule. Every epoch is
// shuffled, augmented, and checkpointed deterministically from
// (config.seed, epoch), so a resumed run retraces an uninterrupted one
// exactly. A non-finite batch loss aborts with the epoch and batch named.
TrainProgress train_loop(Pipeline& pipeline, const SampleSource& source,
                         const TrainConfig& config,
                         const std::string& out_dir,
                         const TrainLoopOptions& options = {});

}  // namespace meev
