#include "eval/metrics.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "core/common.hpp"

namespace meev {

Points root_align(const Points& points, const Points& joints,
                  int root_index) {
  check_arg(root_index >= 0 && root_index < joints.rows(),
            "root_align: root index ", root_index, " out of range for ",
            joints.rows(), " joints");
  return points.rowwise() - joints.row(root_index);
}

namespace {

void check_finite(const Points& p, const char* label) {
  if (!p.allFinite()) {
    throw Error(Status::runtime_error,
                concat("metrics: non-finite values in ", label));
  }
}

double mean_row_distance_mm(const Points& a, const Points& b) {
  return (a - b).rowwise().norm().mean() * 1000.0;
}

}  // namespace

double mpjpe_mm(const Points& pred_joints, const Points& gt_joints) {
  check_arg(pred_joints.rows() == gt_joints.rows(),
            "mpjpe: joint count mismatch: ", pred_joints.rows(), " vs ",
            gt_joints.rows());
  check_finite(pred_joints, "predicted joints");
  check_finite(gt_joints, "ground-truth joints");
  Points pa = root_align(pred_joints, pred_joints, kRootJoint);
  Points ga = root_align(gt_joints, gt_joints, kRootJoint);
  return mean_row_distance_mm(pa, ga);
}

double mpvpe_mm(const Points& pred_mesh, const Points& gt_mesh,
                const Points& pred_joints, const Points& gt_joints) {
  check_arg(pred_mesh.rows() == gt_mesh.rows(),
            "mpvpe: vertex count mismatch: ", pred_mesh.rows(), " vs ",
            gt_mesh.rows());
  check_finite(pred_mesh, "predicted mesh");
  check_finite(gt_mesh, "ground-truth mesh");
  check_finite(pred_joints, "predicted joints");
  check_finite(gt_joints, "ground-truth joints");
  Points pa = root_align(pred_mesh, pred_joints, kRootJoint);
  Points ga = root_align(gt_mesh, gt_joints, kRootJoint);
  return mean_row_distance_mm(pa, ga);
}

double pa_mpjpe_mm(const Points& pred_joints, const Points& gt_joints) {
  check_arg(pred_joints.rows() == gt_joints.rows(),
            "pa_mpjpe: joint count mismatch: ", pred_joints.rows(), " vs ",
            gt_joints.rows());
  check_finite(pred_joints, "predicted joints");
  check_finite(gt_joints, "ground-truth joints");
  const Eigen::Index n = pred_joints.rows();
  check_arg(n >= 3, "pa_mpjpe: needs at least 3 joints, got ", n);

  Eigen::RowVector3d mu_p = pred_joints.colwise().mean();
  Eigen::RowVector3d mu_g = gt_joints.colwise().mean();
  Points xp = pred_joints.rowwise() - mu_p;
  Points xg = gt_joints.rowwise() - mu_g;

  Eigen::Matrix3d cov = xg.transpose() * xp / double(n);
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(
      cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d u = svd.matrixU();
  Eigen::Matrix3d v = svd.matrixV();
  Eigen::Vector3d d = Eigen::Vector3d::Ones();
  if ((u * v.transpose()).determinant() < 0.0) d(2) = -1.0;
  Eigen::Matrix3d rot = u * d.asDiagonal() * v.transpose();

  double var_p = xp.rowwise().squaredNorm().mean();
  double scale =
      var_p > 0.0 ? (svd.singularValues().dot(d)) / var_p : 1.0;

  Points fitted =
      (scale * (rot * xp.transpose())).transpose().rowwise() + mu_g;
  return mean_row_distance_mm(fitted, gt_joints);
}

void MetricReport::add_sample(double mpjpe_mm_value, double mpvpe_mm_value) {
  check_arg(std::isfinite(mpjpe_mm_value) && std::isfinite(mpvpe_mm_value),
            "MetricReport: non-finite sample values");
  n_ += 1;
  mpjpe_sum_ += mpjpe_mm_value;
  mpvpe_sum_ += mpvpe_mm_value;
}

void MetricReport::merge(const MetricReport& other) {
  n_ += other.n_;
  mpjpe_sum_ += other.mpjpe_sum_;
  mpvpe_sum_ += other.mpvpe_sum_;
}

double MetricReport::mpjpe_mm() const {
  if (n_ == 0) {
    throw Error(Status::runtime_error, "MetricReport: no samples");
  }
  return mpjpe_sum_ / double(n_);
}

double MetricReport::mpvpe_mm() const {
  if (n_ == 0) {
    throw Error(Status::runtime_error, "MetricReport: no samples");
  }
  return mpvpe_sum_ / double(n_);
}

namespace {

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

std::string MetricReport::to_json() const {
  return concat("{\"mpjpe_mm\": ", format_double(mpjpe_mm()),
                ", \"mpvpe_mm\": ", format_double(mpvpe_mm()),
                ", \"n_samples\": ", n_, "}");
}

std::string MetricReport::to_text() const {
  return concat("mpjpe_mm: ", format_double(mpjpe_mm()), "\n",
                "mpvpe_mm: ", format_double(mpvpe_mm()), "\n",
                "n_samples: ", n_, "\n");
}

}  // namespace meev
