#include "train/loss.hpp"

#include "core/rotations.hpp"

namespace meev {

namespace {

double term_weight(const std::map<std::string, double>& weights,
                   const std::string& name) {
  auto it = weights.find(name);
  double w = it == weights.end() ? 1.0 : it->second;
  check(w >= 0.0 && std::isfinite(w), Status::config_error,
        concat("loss weight ", name, " must be >= 0, got ", w));
  return w;
}

// sum(|pred - gt| * mask) / denom as a tape scalar
ad::Var masked_l1(ad::Tape& tape, ad::Var pred, std::vector<double> gt,
                  std::vector<double> mask, double denom) {
  ad::Var gt_c = tape.constant(pred.shape(), std::move(gt));
  ad::Var mask_c = tape.constant(pred.shape(), std::move(mask));
  ad::Var diff = tape.abs(tape.sub(pred, gt_c));
  return tape.scale(tape.sum(tape.mul(diff, mask_c)), 1.0 / denom);
}

ad::Var l1_mean(ad::Tape& tape, ad::Var pred, std::vector<double> gt) {
  double n = static_cast<double>(pred.numel());
  std::vector<double> mask(pred.numel(), 1.0);
  return masked_l1(tape, pred, std::move(gt), std::move(mask), n);
}

}  // namespace

LossResult compute_loss(ad::Tape& tape, const ForwardProducts& fwd,
                        const SampleAnnotation& annotation,
                        const std::map<std::string, double>& weights,
                        const PipelineConfig& cfg) {
  const SampleAnnotation& a = annotation;
  check(a.any_supervision(), Status::data_error,
        "compute_loss: annotation carries no supervision signal");

  const int j = static_cast<int>(fwd.coords_vol.shape()[0]);
  if (a.has_joints2d) {
    check_arg(a.joints2d.rows() == j, "compute_loss: joints2d has ",
              a.joints2d.rows(), " rows, model has ", j, " joints");
  }
  if (a.has_joints3d) {
    check_arg(a.joints3d.rows() == j, "compute_loss: joints3d has ",
              a.joints3d.rows(), " rows, model has ", j, " joints");
  }

  LossResult result;
  for (const std::string& name : loss_term_names()) result.terms[name] = 0.0;
  std::vector<ad::Var> weighted;

  auto push_term = [&](const std::string& name, ad::Var term) {
    result.terms[name] = term.value()[0];
    double w = term_weight(weights, name);
    weighted.push_back(tape.scale(term, w));
  };

  // soft-argmax coordinates in [0,1] volume units; x,y from 2D GT, depth
  // from the root-relative 3D z
  if (a.has_joints2d || a.has_joints3d) {
    std::vector<double> norm(static_cast<std::size_t>(j) * 3);
    for (int r = 0; r < j; ++r) {
      norm[static_cast<std::size_t>(r) * 3 + 0] = 1.0 / kF0Width;
      norm[static_cast<std::size_t>(r) * 3 + 1] = 1.0 / kF0Height;
      norm[static_cast<std::size_t>(r) * 3 + 2] = 1.0 / cfg.depth;
    }
    ad::Var pred_norm =
        tape.mul(fwd.coords_vol, tape.constant({j, 3}, std::move(norm)));

    std::vector<double> gt(static_cast<std::size_t>(j) * 3, 0.0);
    std::vector<double> mask(static_cast<std::size_t>(j) * 3, 0.0);
    if (a.has_joints2d) {
      for (int r = 0; r < j; ++r) {
        gt[static_cast<std::size_t>(r) * 3 + 0] =
            a.joints2d(r, 0) / kCropWidth;
        gt[static_cast<std::size_t>(r) * 3 + 1] =
            a.joints2d(r, 1) / kCropHeight;
        mask[static_cast<std::size_t>(r) * 3 + 0] = 1.0;
        mask[static_cast<std::size_t>(r) * 3 + 1] = 1.0;
      }
    }
    if (a.has_joints3d) {
      double root_z = a.joints3d(0, 2);
      for (int r = 0; r < j; ++r) {
        gt[static_cast<std::size_t>(r) * 3 + 2] =
            (a.joints3d(r, 2) - root_z) / cfg.z_range + 0.5;
        mask[static_cast<std::size_t>(r) * 3 + 2] = 1.0;
      }
    }
    push_term("coord", masked_l1(tape, pred_norm, std::move(gt),
                                 std::move(mask), 3.0 * j));
  }

  if (a.has_joints3d) {
    // Eigen stores column-major; flatten row-major to match the tape layout
    std::vector<double> gt(static_cast<std::size_t>(j) * 3);
    for (int r = 0; r < j; ++r) {
      for (int c = 0; c < 3; ++c) {
        gt[static_cast<std::size_t>(r) * 3 + c] = a.joints3d(r, c);
      }
    }
    push_term("joints3d", l1_mean(tape, fwd.joints3d, std::move(gt)));
  }

  if (a.has_joints2d) {
    std::vector<double> gt(static_cast<std::size_t>(j) * 2);
    for (int r = 0; r < j; ++r) {
      gt[static_cast<std::size_t>(r) * 2 + 0] = a.joints2d(r, 0);
      gt[static_cast<std::size_t>(r) * 2 + 1] = a.joints2d(r, 1);
    }
    ad::Var px = l1_mean(tape, fwd.reproj2d, std::move(gt));
    push_term("reproj2d", tape.scale(px, 1.0 / kCropHeight));
  }

  if (a.has_params) {
    check_arg(a.theta.rows() == j, "compute_loss: theta has ", a.theta.rows(),
              " rows, model has ", j, " joints");
    std::vector<double> gt_rot(static_cast<std::size_t>(j) * 9);
    for (int r = 0; r < j; ++r) {
      Eigen::Matrix3d rot = axis_angle_to_matrix(a.theta.row(r).transpose());
      for (int rr = 0; rr < 3; ++rr) {
        for (int cc = 0; cc < 3; ++cc) {
          gt_rot[static_cast<std::size_t>(r) * 9 + rr * 3 + cc] = rot(rr, cc);
        }
      }
    }
    push_term("theta", l1_mean(tape, fwd.rotations, std::move(gt_rot)));

    check_arg(a.beta.size() == fwd.beta.numel(), "compute_loss: beta has ",
              a.beta.size(), " entries, model expects ", fwd.beta.numel());
    std::vector<double> gt_beta(a.beta.data(), a.beta.data() + a.beta.size());
    push_term("beta", l1_mean(tape, fwd.beta, std::move(gt_beta)));

    std::vector<double> gt_trans = {a.trans.x(), a.trans.y(), a.trans.z()};
    push_term("trans", l1_mean(tape, fwd.trans, std::move(gt_trans)));
  }

  check(!weighted.empty(), Status::data_error,
        "compute_loss: no loss terms were produced");
  ad::Var total = weighted[0];
  for (std::size_t i = 1; i < weighted.size(); ++i) {
    total = tape.add(total, weighted[i]);
  }
  result.total = total;
  return result;
}

}  // namespace meev
