#include "model/heatmap.hpp"

#include <cmath>

namespace meev {

void HeatmapHead::register_params(ParamStore& store) const {
  store.create_uniform("heatmap.weight",
                       {num_joints_ * depth_, fused_channels_, 1, 1},
                       std::sqrt(6.0 / fused_channels_));
  store.create_constant("heatmap.bias", {num_joints_ * depth_}, 0.0);
}

ad::Var HeatmapHead::logits(ad::Tape& tape, ParamStore& store,
                            TapeBinding& binding, ad::Var fused) const {
  check_arg(fused.shape() ==
                ad::Shape{fused_channels_, kF0Height, kF0Width},
            "heatmap head expects fused [", fused_channels_, ",", kF0Height,
            ",", kF0Width, "], got ", ad::shape_str(fused.shape()));
  ad::Var vol = tape.conv2d(fused, store.use(tape, binding, "heatmap.weight"),
                            store.use(tape, binding, "heatmap.bias"), 1, 0);
  // [J*D, 8, 6] rows flatten to (d*8 + y)*6 + x per joint
  return tape.reshape(vol, {num_joints_, depth_ * kF0Height * kF0Width});
}

ad::Var soft_argmax(ad::Tape& tape, ad::Var logits, int depth) {
  check_arg(logits.shape().size() == 2, "soft_argmax expects [J, D*H*W]");
  int cells = depth * kF0Height * kF0Width;
  check_arg(logits.shape()[1] == cells, "soft_argmax: row length ",
            logits.shape()[1], " != D*H*W = ", cells);
  ad::Var probs = tape.softmax_rows(logits);
  // expectation of cell centers is one fixed linear map of the probabilities
  std::vector<double> centers(static_cast<std::size_t>(cells) * 3);
  for (int d = 0; d < depth; ++d)
    for (int y = 0; y < kF0Height; ++y)
      for (int x = 0; x < kF0Width; ++x) {
        int idx = (d * kF0Height + y) * kF0Width + x;
        centers[idx * 3 + 0] = x + 0.5;
        centers[idx * 3 + 1] = y + 0.5;
        centers[idx * 3 + 2] = d + 0.5;
      }
  return tape.matmul(probs, tape.constant({cells, 3}, std::move(centers)));
}

ad::Var coords_to_crop_space(ad::Tape& tape, ad::Var coords, int depth,
                             double z_range) {
  check_arg(coords.shape().size() == 2 && coords.shape()[1] == 3,
            "coords_to_crop_space expects [J,3]");
  check_arg(depth >= 1 && z_range > 0,
            "coords_to_crop_space: bad depth or z range");
  std::vector<double> scales = {32.0, 0, 0, 0, 32.0, 0, 0, 0, z_range / depth};
  ad::Var scaled = tape.matmul(coords, tape.constant({3, 3}, scales));
  return tape.add_broadcast_row(
      scaled, tape.constant({3}, {0.0, 0.0, -0.5 * z_range}));
}

}  // namespace meev
