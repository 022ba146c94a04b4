#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

namespace meev {

// Pelvis-relative joint/vertex error metrics. Geometry is carried in meters
// everywhere inside the library; conversion to millimeters happens only at
// the reporting boundary in mpjpe_mm / mpvpe_mm.

using Points = Eigen::Matrix<double, Eigen::Dynamic, 3>;

inline constexpr int kRootJoint = 0;

// Subtracts joints.row(root_index) from every row of points.
Points root_align(const Points& points, const Points& joints, int root_index);

// Mean per-joint position error in millimeters. Each skeleton is aligned by
// its own pelvis before the distances are taken.
double mpjpe_mm(const Points& pred_joints, const Points& gt_joints);

// Mean per-vertex position error in millimeters. Each mesh is aligned by the
// pelvis of its own regressed skeleton.
double mpvpe_mm(const Points& pred_mesh, const Points& gt_mesh,
                const Points& pred_joints, const Points& gt_joints);

// Procrustes-aligned MPJPE (similarity transform fitted from pred to gt).
// Not part of the default evaluation protocol; offered behind this separate
// entry point.
double pa_mpjpe_mm(const Points& pred_joints, const Points& gt_joints);

// Sample-count-weighted accumulator for per-sample metric values. merge() is
// associative, so partial reports from parallel workers can be combined in
// any order.
class MetricReport {
 public:
  void add_sample(double mpjpe_mm_value, double mpvpe_mm_value);
  void merge(const MetricReport& other);

  std::int64_t n_samples() const { return n_; }
  double mpjpe_mm() const;
  double mpvpe_mm() const;

  // Machine-readable summary with keys mpjpe_mm, mpvpe_mm, n_samples.
  std::string to_json() const;
  // Human-readable one-per-line summary of the same fields.
  std::string to_text() const;

 private:
  std::int64_t n_ = 0;
  double mpjpe_sum_ = 0.0;
  double mpvpe_sum_ = 0.0;
};

}  // namespace meev
