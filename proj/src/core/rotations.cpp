#include "core/rotations.hpp"

#include <Eigen/Geometry>
#include <cmath>

namespace meev {

namespace {
constexpr double kTinyAngleSq = 1e-16;  // (1e-8)^2 on the angle
}

double rodrigues_k1(double s) {
  if (s < kTinyAngleSq) return 1.0 - s / 6.0 + s * s / 120.0;
  double a = std::sqrt(s);
  return std::sin(a) / a;
}

double rodrigues_k2(double s) {
  if (s < kTinyAngleSq) return 0.5 - s / 24.0 + s * s / 720.0;
  double a = std::sqrt(s);
  return (1.0 - std::cos(a)) / s;
}

double rodrigues_dk1(double s) {
  if (s < kTinyAngleSq) return -1.0 / 6.0 + s / 60.0;
  double a = std::sqrt(s);
  return (a * std::cos(a) - std::sin(a)) / (2.0 * a * a * a);
}

double rodrigues_dk2(double s) {
  if (s < kTinyAngleSq) return -1.0 / 24.0 + s / 360.0;
  double a = std::sqrt(s);
  return std::sin(a) / (2.0 * a * s) - (1.0 - std::cos(a)) / (s * s);
}

Eigen::Matrix3d axis_angle_to_matrix(const Eigen::Vector3d& v) {
  check_arg(v.allFinite(), "axis_angle_to_matrix: non-finite input");
  double s = v.squaredNorm();
  double k1 = rodrigues_k1(s);
  double k2 = rodrigues_k2(s);
  Eigen::Matrix3d skew;
  skew << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  // R = (1 - k2*s) I + k2 v v^T + k1 [v]_x  (uses [v]_x^2 = v v^T - s I)
  return (1.0 - k2 * s) * Eigen::Matrix3d::Identity() +
         k2 * (v * v.transpose()) + k1 * skew;
}

Eigen::Vector3d matrix_to_axis_angle(const Eigen::Matrix3d& r) {
  check_arg(r.allFinite(), "matrix_to_axis_angle: non-finite input");
  Eigen::Vector3d w(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));
  w *= 0.5;  // = sin(angle) * axis
  double cos_angle = std::clamp((r.trace() - 1.0) * 0.5, -1.0, 1.0);
  // atan2 of (sin, cos) stays well conditioned where acos alone does not
  double angle = std::atan2(w.norm(), cos_angle);

  if (angle < 1e-7) {
    // first order: w already equals axis*angle to O(angle^3)
    return w;
  }
  if (angle < M_PI - 1e-4) {
    return (angle / w.norm()) * w;
  }
  // Near pi the skew part vanishes. The symmetric part gives
  // (R + R^T)/2 - cos(angle) I = (1 - cos(angle)) a a^T with the
  // O(sin(angle)) skew contamination cancelled, so any nonzero column
  // recovers the axis to machine precision.
  Eigen::Matrix3d b = 0.5 * (r + r.transpose()) -
                      cos_angle * Eigen::Matrix3d::Identity();
  int k = 0;
  b.diagonal().maxCoeff(&k);
  Eigen::Vector3d axis = b.col(k);
  double norm = axis.norm();
  check(norm > 0, Status::runtime_error,
        "matrix_to_axis_angle: degenerate rotation matrix");
  axis /= norm;
  if (axis.dot(w) < 0) axis = -axis;
  return angle * axis;
}

Rot6dResult rot6d_to_matrix(const Eigen::Matrix<double, 6, 1>& r) {
  check_arg(r.allFinite(), "rot6d_to_matrix: non-finite input");
  Rot6dResult out;
  Eigen::Vector3d u = r.head<3>();
  Eigen::Vector3d w = r.tail<3>();
  double un = u.norm();
  if (un < 1e-8) {
    out.rotation.setIdentity();
    out.degenerate = true;
    return out;
  }
  Eigen::Vector3d a = u / un;
  Eigen::Vector3d p = w - a.dot(w) * a;
  double pn = p.norm();
  if (pn < 1e-8) {
    out.rotation.setIdentity();
    out.degenerate = true;
    return out;
  }
  Eigen::Vector3d b = p / pn;
  Eigen::Vector3d c = a.cross(b);
  out.rotation.col(0) = a;
  out.rotation.col(1) = b;
  out.rotation.col(2) = c;
  return out;
}

}  // namespace meev
