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

// Optional IMU bias unknowns appended between g0 and the homogeneous column.
//
// Biases are corrections added to the readings: the true specific force is
// a_k + e_a and the true rate is omega_k + e_w. The accelerometer bias enters
// kappa linearly; the gyroscope bias is linearized around e_w = 0.

#pragma once

#include <array>
#include <cstdint>

#include <Eigen/Core>

#include "rsvio/system.h"

namespace rsvio {

struct BiasConfig {
  bool model_accel = false;
  bool model_gyro = false;
};

/// zeta_ij = E_i - E_j with E_i = (sum_{k<i} beta_{k,i} R_k) dt^2 / 2.
Eigen::Matrix3d accel_bias_columns(const ScanlineIntegrator& integrator,
                                   std::int64_t i, std::int64_t j);

struct GyroBiasJacobians {
  Eigen::Matrix3d dR;         // right-perturbation Jacobian of R_i
  Eigen::Matrix3d dkappa;     // d(R_i t_c + D_i) / d e_w
  Eigen::Matrix3d dray;       // d p_i / d e_w (third row zero)
  /// d(dray)/du_x and d(dray)/du_y.
  std::array<Eigen::Matrix3d, 2> dray_du;
};

/// First-order effect of a gyro bias on the pose-dependent terms of one
/// observation. Requires an integrator built with gyro_bias_jacobians.
GyroBiasJacobians gyro_bias_jacobians(const Geometry& geometry,
                                      const Observation& obs);

/// assemble() plus the configured bias columns. With both flags off the
/// result is identical to assemble().
FullSystem assemble_with_bias(const CorrespondenceSet& corrs,
                              const Geometry& geometry, const BiasConfig& cfg);

}  // namespace rsvio
