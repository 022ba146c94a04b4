#pragma once

#include "body/body_model.hpp"
#include "model/encoder.hpp"
#include "model/params.hpp"

namespace meev {

// Regresses body parameters from per-joint features. For each joint the
// fused grid is sampled bilinearly at its (x, y) and concatenated with its
// normalized (x, y, z); the flattened bundle feeds a two-layer MLP with
// per-quantity linear heads:
//   root rotation (6d), 21 body rotations (6d), shape (10), translation (3)
// plus a weak-perspective camera (scale, tx, ty).
class SmplDecoder {
 public:
  SmplDecoder(int fused_channels, int num_joints, int depth, int hidden = 512)
      : fused_channels_(fused_channels), num_joints_(num_joints),
        depth_(depth), hidden_(hidden) {
    check_arg(fused_channels >= 1 && num_joints >= 2 && depth >= 1 &&
                  hidden >= 1,
              "decoder: sizes must be positive");
  }

  struct Outputs {
    ad::Var rotations;  // [J,3,3]
    ad::Var beta;       // [10]
    ad::Var trans;      // [3]
    ad::Var cam;        // [3] scale, tx, ty in crop pixels
    std::vector<std::uint8_t> degenerate;  // per joint, 6d fallback hit
  };

  void register_params(ParamStore& store) const;
  Outputs decode(ad::Tape& tape, ParamStore& store, TapeBinding& binding,
                 ad::Var fused, ad::Var coords) const;

 private:
  int input_size() const { return num_joints_ * (fused_channels_ + 3); }

  int fused_channels_;
  int num_joints_;
  int depth_;
  int hidden_;
};

}  // namespace meev
