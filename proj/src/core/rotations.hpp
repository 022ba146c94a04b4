#pragma once

#include <Eigen/Core>

#include "core/common.hpp"

namespace meev {

// Rodrigues formula, series-safe near zero: for ||v|| < 1e-8 the sin/cos
// ratio terms switch to their Taylor expansions so values and gradients
// stay finite at the identity.
Eigen::Matrix3d axis_angle_to_matrix(const Eigen::Vector3d& v);

// Inverse Rodrigues. Angle returned in [0, pi]; near pi the axis is
// recovered from R + I instead of the vanishing skew part.
Eigen::Vector3d matrix_to_axis_angle(const Eigen::Matrix3d& r);

struct Rot6dResult {
  Eigen::Matrix3d rotation;
  bool degenerate = false;  // input collapsed; rotation is identity
};

// First two rotation-matrix columns -> full rotation via Gram-Schmidt.
// Near-zero first column or near-parallel columns fall back to identity
// and set the degenerate flag.
Rot6dResult rot6d_to_matrix(const Eigen::Matrix<double, 6, 1>& r);

// smooth coefficient helpers shared with the differentiable path;
// s = squared angle
double rodrigues_k1(double s);  // sin(a)/a
double rodrigues_k2(double s);  // (1 - cos(a)) / a^2
double rodrigues_dk1(double s);
double rodrigues_dk2(double s);

}  // namespace meev
