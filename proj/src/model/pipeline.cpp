#include "model/pipeline.hpp"

namespace meev {

Pipeline::Pipeline(PipelineConfig cfg, BodyModelDefinition body)
    : cfg_(std::move(cfg)),
      body_(std::move(body)),
      backbone_(make_backbone(cfg_.backbone, cfg_.channels)),
      neck_(cfg_.channels, cfg_.fused_channels),
      heatmap_(cfg_.fused_channels, body_.num_joints(), cfg_.depth),
      decoder_(cfg_.fused_channels, body_.num_joints(), cfg_.depth,
               cfg_.hidden),
      store_(cfg_.seed) {
  body_.validate();
  check(body_.num_betas() == kNumBetas, Status::config_error,
        "pipeline: body model has ", body_.num_betas(),
        " shape coefficients, decoder head emits ", kNumBetas);
  check(cfg_.depth >= 1 && cfg_.z_range > 0, Status::config_error,
        "pipeline: bad depth or z range");
  backbone_->register_params(store_);
  neck_.register_params(store_);
  heatmap_.register_params(store_);
  decoder_.register_params(store_);
}

ForwardProducts Pipeline::forward(ad::Tape& tape, TapeBinding& binding,
                                  const Image& crop,
                                  const ForwardOptions& options) {
  FeaturePair taps = backbone_->encode(tape, store_, binding, crop);
  check_feature_pair(taps, cfg_.channels);
  ad::Var fused = neck_.fuse(tape, store_, binding, taps);

  ForwardProducts out;
  out.logits = heatmap_.logits(tape, store_, binding, fused);
  out.coords_vol = soft_argmax(tape, out.logits, cfg_.depth);
  out.coords_crop =
      coords_to_crop_space(tape, out.coords_vol, cfg_.depth, cfg_.z_range);

  ad::Var dec_coords =
      options.detach_coords ? tape.detach(out.coords_vol) : out.coords_vol;
  ad::Var dec_fused = options.detach_features ? tape.detach(fused) : fused;
  SmplDecoder::Outputs dec =
      decoder_.decode(tape, store_, binding, dec_fused, dec_coords);
  out.rotations = dec.rotations;
  out.beta = dec.beta;
  out.trans = dec.trans;
  out.cam = dec.cam;
  out.degenerate = std::move(dec.degenerate);

  BodyTapeResult posed =
      body_forward_tape(tape, body_, out.rotations, out.beta, out.trans);
  out.joints3d = posed.joints;
  out.vertices = posed.vertices;

  ad::Var x3 = tape.slice_cols(out.joints3d, 0, 1);
  ad::Var y3 = tape.slice_cols(out.joints3d, 1, 1);
  ad::Var s = tape.slice_axis0(out.cam, 0, 1);
  ad::Var tx = tape.slice_axis0(out.cam, 1, 1);
  ad::Var ty = tape.slice_axis0(out.cam, 2, 1);
  // weak perspective with the image y axis pointing down
  ad::Var u = tape.add_broadcast_row(tape.scale_by(x3, s), tx);
  ad::Var v = tape.add_broadcast_row(tape.neg(tape.scale_by(y3, s)), ty);
  out.reproj2d = tape.concat_cols({u, v});
  return out;
}

}  // namespace meev
