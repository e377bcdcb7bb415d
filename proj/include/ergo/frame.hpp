#pragma once

#include <optional>

#include <Eigen/Core>

#include "ergo/types.hpp"

namespace ergo {

using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;

/// One synchronised sample of every recorded channel, in world axes
/// (x forward, y lateral, z up).
struct KinodynamicFrame {
  double time = 0.0;
  JointVector q = JointVector::Zero();
  /// Sagittal base pose (x, z, pitch); absent when the feet stay at the
  /// profile's ankle height.
  std::optional<Vec3> base;
  /// CoP on the ground plane (x, y).
  std::optional<Eigen::Vector2d> cop;
  std::optional<Vec3> grf;
  std::optional<Vec3> grm;
  /// Force (fx, fy, fz) and torque (tx, ty, tz) exerted on the hand.
  std::optional<Vec6> wrench;
  /// Normalised muscle activation, kMuscleNames order.
  std::optional<MuscleVector> emg;
};

/// Reduction of 3D inputs to the sagittal plane, whose forward axis is at
/// `heading` radians from world x about z.
struct SagittalProjection {
  double heading = 0.0;

  double forward(double x, double y) const;
  /// CoP as a point (x, 0) of the sagittal ground line.
  Vec2 cop(const Eigen::Vector2d& c) const;
  /// Force as (forward, vertical).
  Vec2 force(const Vec3& f) const;
  /// Moment about the sagittal normal.
  double moment(const Vec3& m) const;
};

}  // namespace ergo
