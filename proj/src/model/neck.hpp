#pragma once

#include "model/encoder.hpp"
#include "model/params.hpp"

namespace meev {

// Fuses the two encoder taps into one grid at stride 32:
// f1 -> 3x3 conv -> instance norm -> relu -> 2x2 avgpool, concatenated with
// f0 along channels, then a 1x1 projection to fused_channels.
class Neck {
 public:
  Neck(int in_channels, int fused_channels)
      : in_channels_(in_channels), fused_channels_(fused_channels) {
    check_arg(in_channels >= 1 && fused_channels >= 1,
              "neck: channel counts must be positive");
  }

  int fused_channels() const { return fused_channels_; }

  void register_params(ParamStore& store) const;
  // returns fused features [fused_channels, 8, 6]
  ad::Var fuse(ad::Tape& tape, ParamStore& store, TapeBinding& binding,
               const FeaturePair& features) const;

 private:
  int in_channels_;
  int fused_channels_;
};

}  // namespace meev
