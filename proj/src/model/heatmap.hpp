#pragma once

#include "model/encoder.hpp"
#include "model/params.hpp"

namespace meev {

// Joint localization head: a 1x1 convolution turns the fused grid into
// J*D logit channels, read as a [J, D, 8, 6] volume per joint. Soft-argmax
// over the volume yields continuous (x, y, z) in volume units:
// x in [0, W), y in [0, H), z in [0, D), cell centers at integer + 0.5.
class HeatmapHead {
 public:
  HeatmapHead(int fused_channels, int num_joints, int depth)
      : fused_channels_(fused_channels), num_joints_(num_joints),
        depth_(depth) {
    check_arg(fused_channels >= 1 && num_joints >= 1 && depth >= 1,
              "heatmap head: sizes must be positive");
  }

  int depth() const { return depth_; }
  int num_joints() const { return num_joints_; }

  void register_params(ParamStore& store) const;
  // logits [J, D*8*6], flat index (d*8 + y)*6 + x
  ad::Var logits(ad::Tape& tape, ParamStore& store, TapeBinding& binding,
                 ad::Var fused) const;

 private:
  int fused_channels_;
  int num_joints_;
  int depth_;
};

// softmax over each joint's volume then probability-weighted cell centers;
// returns [J,3] columns (x, y, z) in volume units
ad::Var soft_argmax(ad::Tape& tape, ad::Var logits, int depth);

// volume units -> crop space: x,y scaled by the stride-32 cell size (32 px),
// z mapped to metres in [-z_range/2, z_range/2)
ad::Var coords_to_crop_space(ad::Tape& tape, ad::Var coords, int depth,
                             double z_range);

}  // namespace meev
