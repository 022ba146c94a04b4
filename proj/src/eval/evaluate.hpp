#pragma once

#include "data/crop.hpp"
#include "eval/metrics.hpp"
#include "model/pipeline.hpp"

namespace meev {

struct EvalOptions {
  CropConfig crop;
  // Scores the ground-truth parameters through the body model instead of
  // the network output. A correct data path reports exactly zero, which
  // makes this a plumbing self-check.
  bool inject_gt = false;
};

// Runs the model over every sample and aggregates pelvis-aligned joint and
// vertex errors. Samples must carry 3D joints and body parameters; anything
// less cannot be scored and is a data error naming the sample.
MetricReport evaluate_model(Pipeline& pipeline, const SampleSource& source,
                            const EvalOptions& options = {});

}  // namespace meev
