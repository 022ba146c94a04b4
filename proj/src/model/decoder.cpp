#include "model/decoder.hpp"

#include <cmath>

namespace meev {

namespace {

double linear_limit(int fan_in, int fan_out) {
  return std::sqrt(6.0 / (fan_in + fan_out));
}

}  // namespace

void SmplDecoder::register_params(ParamStore& store) const {
  int in = input_size();
  store.create_uniform("decoder.fc1.weight", {hidden_, in},
                       linear_limit(in, hidden_));
  store.create_constant("decoder.fc1.bias", {hidden_}, 0.0);
  store.create_uniform("decoder.fc2.weight", {hidden_, hidden_},
                       linear_limit(hidden_, hidden_));
  store.create_constant("decoder.fc2.bias", {hidden_}, 0.0);

  auto head = [&](const std::string& name, int out) {
    store.create_uniform("decoder.head." + name + ".weight", {out, hidden_},
                         linear_limit(hidden_, out));
    store.create_constant("decoder.head." + name + ".bias", {out}, 0.0);
  };
  head("root6", 6);
  head("body6", 6 * (num_joints_ - 1));
  head("beta", kNumBetas);
  head("trans", 3);
  head("cam", 3);
}

SmplDecoder::Outputs SmplDecoder::decode(ad::Tape& tape, ParamStore& store,
                                         TapeBinding& binding, ad::Var fused,
                                         ad::Var coords) const {
  check_arg(fused.shape() ==
                ad::Shape{fused_channels_, kF0Height, kF0Width},
            "decoder expects fused [", fused_channels_, ",", kF0Height, ",",
            kF0Width, "], got ", ad::shape_str(fused.shape()));
  check_arg(coords.shape() == ad::Shape{num_joints_, 3},
            "decoder expects coords [", num_joints_, ",3], got ",
            ad::shape_str(coords.shape()));

  ad::Var xy = tape.slice_cols(coords, 0, 2);
  ad::Var sampled = tape.bilinear_sample(fused, xy);  // [J,C]
  std::vector<double> norm = {1.0 / kF0Width, 0, 0,
                              0, 1.0 / kF0Height, 0,
                              0, 0, 1.0 / depth_};
  ad::Var coords_norm = tape.matmul(coords, tape.constant({3, 3}, norm));
  ad::Var bundle = tape.concat_cols({sampled, coords_norm});  // [J,C+3]
  ad::Var x = tape.reshape(bundle, {input_size()});

  x = tape.relu(tape.linear(x, store.use(tape, binding, "decoder.fc1.weight"),
                            store.use(tape, binding, "decoder.fc1.bias")));
  x = tape.relu(tape.linear(x, store.use(tape, binding, "decoder.fc2.weight"),
                            store.use(tape, binding, "decoder.fc2.bias")));

  auto head = [&](const std::string& name) {
    return tape.linear(
        x, store.use(tape, binding, "decoder.head." + name + ".weight"),
        store.use(tape, binding, "decoder.head." + name + ".bias"));
  };

  ad::Var root6 = tape.reshape(head("root6"), {1, 6});
  ad::Var body6 = tape.reshape(head("body6"), {num_joints_ - 1, 6});
  ad::Var all6 = tape.concat_axis0({root6, body6});  // [J,6]

  Outputs out;
  out.rotations = tape.rot6d_to_matrix_rows(all6, &out.degenerate);
  out.beta = head("beta");
  out.trans = head("trans");
  out.cam = head("cam");
  return out;
}

}  // namespace meev
