#pragma once

#include <map>
#include <string>

#include "data/dataset.hpp"
#include "model/pipeline.hpp"
#include "train/config.hpp"

namespace meev {

// Weighted multi-task L1 loss. Every term is masked by the annotation's
// availability flags; a missing signal contributes exactly zero and no
// graph nodes. Term values in `terms` are the raw unweighted means; `total`
// applies the weights on the tape.
//
// Terms and their units:
//   coord     soft-argmax coordinates, volume units normalized to [0,1];
//             x and y are supervised from 2D joints, depth from the
//             root-relative 3D z. Masked entries divide by the full 3J
//             count, so dropping a signal can only shrink the term.
//   joints3d  body-model joints vs GT, metres
//   reproj2d  weak-perspective reprojection vs 2D joints, crop px / 256
//   theta     rotation-matrix elements vs GT pose
//   beta      shape coefficients
//   trans     root translation, metres
struct LossResult {
  ad::Var total;
  std::map<std::string, double> terms;
};

LossResult compute_loss(ad::Tape& tape, const ForwardProducts& fwd,
                        const SampleAnnotation& annotation,
                        const std::map<std::string, double>& weights,
                        const PipelineConfig& cfg);

}  // namespace meev
