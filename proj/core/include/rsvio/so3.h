// Copyright 2026 The rsvio Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <Eigen/Core>

namespace rsvio::so3 {

/// Below this rotation angle (rad) the closed forms switch to Taylor series.
inline constexpr double kSmallAngle = 1e-8;

Eigen::Matrix3d skew(const Eigen::Vector3d& v);

/// Exponential map (Rodrigues).
Eigen::Matrix3d exp(const Eigen::Vector3d& phi);

/// Rotation vector of R, angle in [0, pi].
Eigen::Vector3d log(const Eigen::Matrix3d& R);

/// Right Jacobian Jr(phi): exp(phi + d) ~= exp(phi) exp(Jr(phi) d).
Eigen::Matrix3d right_jacobian(const Eigen::Vector3d& phi);

/// Closest rotation in Frobenius norm (SVD projection).
Eigen::Matrix3d nearest_rotation(const Eigen::Matrix3d& M);

/// Geodesic interpolation, s in [0, 1].
Eigen::Matrix3d slerp(const Eigen::Matrix3d& R0, const Eigen::Matrix3d& R1,
                      double s);

bool is_rotation(const Eigen::Matrix3d& R, double tol = 1e-9);

}  // namespace rsvio::so3
