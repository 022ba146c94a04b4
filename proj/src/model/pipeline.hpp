#pragma once

#include <memory>

#include "body/body_model.hpp"
#include "model/decoder.hpp"
#include "model/encoder.hpp"
#include "model/heatmap.hpp"
#include "model/neck.hpp"
#include "model/params.hpp"

namespace meev {

struct PipelineConfig {
  std::string backbone = "toy";
  int channels = 8;        // encoder tap channels
  int fused_channels = 8;  // neck output channels
  int depth = 8;           // heatmap depth bins
  double z_range = 2.0;    // metres spanned by the depth axis
  int hidden = 512;        // decoder MLP width
  std::uint64_t seed = 1;  // parameter initialization stream
};

struct ForwardOptions {
  // stop gradients into the joint coordinates consumed by the decoder
  bool detach_coords = false;
  // stop gradients into the fused features sampled by the decoder
  bool detach_features = false;
};

struct ForwardProducts {
  ad::Var logits;       // [J, D*8*6]
  ad::Var coords_vol;   // [J,3] volume units
  ad::Var coords_crop;  // [J,3] crop px x,y and metric z
  ad::Var rotations;    // [J,3,3]
  ad::Var beta;         // [10]
  ad::Var trans;        // [3]
  ad::Var cam;          // [3]
  ad::Var joints3d;     // [J,3] metres
  ad::Var vertices;     // [V,3] metres
  ad::Var reproj2d;     // [J,2] crop px
  std::vector<std::uint8_t> degenerate;
};

// End-to-end trainable graph: encoder taps -> fused grid -> per-joint
// volume soft-argmax -> parameter decoder -> skinned body.
class Pipeline {
 public:
  Pipeline(PipelineConfig cfg, BodyModelDefinition body);

  const PipelineConfig& config() const { return cfg_; }
  const BodyModelDefinition& body() const { return body_; }
  ParamStore& params() { return store_; }
  const ParamStore& params() const { return store_; }
  int num_joints() const { return body_.num_joints(); }

  ForwardProducts forward(ad::Tape& tape, TapeBinding& binding,
                          const Image& crop,
                          const ForwardOptions& options = {});

 private:
  PipelineConfig cfg_;
  BodyModelDefinition body_;
  std::unique_ptr<Backbone> backbone_;
  Neck neck_;
  HeatmapHead heatmap_;
  SmplDecoder decoder_;
  ParamStore store_;
};

}  // namespace meev
