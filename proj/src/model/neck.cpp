#include "model/neck.hpp"

#include <cmath>

namespace meev {

void Neck::register_params(ParamStore& store) const {
  int c = in_channels_;
  store.create_uniform("neck.refine.weight", {c, c, 3, 3},
                       std::sqrt(6.0 / (c * 9)));
  store.create_constant("neck.refine.bias", {c}, 0.0);
  store.create_constant("neck.norm.gamma", {c}, 1.0);
  store.create_constant("neck.norm.beta", {c}, 0.0);
  store.create_uniform("neck.project.weight", {fused_channels_, 2 * c, 1, 1},
                       std::sqrt(6.0 / (2 * c)));
  store.create_constant("neck.project.bias", {fused_channels_}, 0.0);
}

ad::Var Neck::fuse(ad::Tape& tape, ParamStore& store, TapeBinding& binding,
                   const FeaturePair& features) const {
  check_feature_pair(features, in_channels_);
  ad::Var x = tape.conv2d(features.f1,
                          store.use(tape, binding, "neck.refine.weight"),
                          store.use(tape, binding, "neck.refine.bias"), 1, 1);
  x = tape.instance_norm(x, store.use(tape, binding, "neck.norm.gamma"),
                         store.use(tape, binding, "neck.norm.beta"));
  x = tape.avgpool2x2(tape.relu(x));                 // [C,8,6]
  ad::Var stacked = tape.concat_axis0({x, features.f0});  // [2C,8,6]
  return tape.conv2d(stacked,
                     store.use(tape, binding, "neck.project.weight"),
                     store.use(tape, binding, "neck.project.bias"), 1, 0);
}

}  // namespace meev
