#include "eval/evaluate.hpp"

namespace meev {

namespace {

Eigen::MatrixXd var_to_matrix(const ad::Var& v, int rows, int cols) {
  check(v.numel() == rows * cols, Status::runtime_error,
        concat("var_to_matrix: expected ", rows * cols, " values, got ",
               v.numel()));
  Eigen::MatrixXd m(rows, cols);
  const std::vector<double>& data = v.value();
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      m(r, c) = data[static_cast<std::size_t>(r) * cols + c];
    }
  }
  return m;
}

}  // namespace

MetricReport evaluate_model(Pipeline& pipeline, const SampleSource& source,
                            const EvalOptions& options) {
  check_arg(source.size() >= 1, "evaluate_model: empty sample source");
  const BodyModelDefinition& body = pipeline.body();
  MetricReport report;

  for (int i = 0; i < source.size(); ++i) {
    const SampleAnnotation& ann = source.record(i).annotation;
    check(ann.has_joints3d && ann.has_params, Status::data_error,
          concat("evaluate_model: sample ", i,
                 " lacks 3D joints or body parameters and cannot be scored"));

    BodyParams gt_params;
    gt_params.theta = ann.theta;
    gt_params.beta = ann.beta;
    gt_params.trans = ann.trans;
    BodyForwardResult gt = body_forward(body, gt_params);

    Eigen::MatrixXd pred_joints, pred_vertices, pred_aux_joints;
    if (options.inject_gt) {
      pred_joints = gt.joints;
      pred_vertices = gt.vertices;
      pred_aux_joints = gt.joints;
    } else {
      TrainingSample sample =
          assemble_training_sample(source.image(i), ann, options.crop);
      ad::Tape tape;
      TapeBinding binding;
      ForwardProducts fwd = pipeline.forward(tape, binding, sample.crop);
      pred_joints = var_to_matrix(fwd.joints3d, body.num_joints(), 3);
      pred_vertices = var_to_matrix(fwd.vertices, body.num_vertices(), 3);
      pred_aux_joints = pred_joints;
    }

    double jerr = mpjpe_mm(pred_joints, ann.joints3d);
    double verr = mpvpe_mm(pred_vertices, gt.vertices, pred_aux_joints,
                           gt.joints);
    report.add_sample(jerr, verr);
  }
  return report;
}

}  // namespace meev
