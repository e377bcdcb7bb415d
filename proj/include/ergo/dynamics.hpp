#pragma once

#include <optional>
#include <vector>

#include <Eigen/Core>

#include "ergo/model.hpp"

namespace ergo::dynamics {

using model::HumanModel;
using model::JointConfiguration;
using model::SescParameters;

/// Wrench exerted by the environment on the hand (last segment).
/// A carried box of mass m is {force = (0, -m g)}.
struct ExternalWrench {
  /// Application point in the last segment's (axis, normal) coordinates.
  Vec2 point{0, 0};
  Vec2 force{0, 0};    // [N]
  double torque = 0.0; // about +y [N m]

  /// Wrench applied at the distal end of the hand.
  static ExternalWrench at_tip(const HumanModel& model, const Vec2& force, double torque = 0.0);
  bool is_zero() const { return force.isZero(0.0) && torque == 0.0; }
};

struct InverseDynamicsResult {
  /// Generalised joint torques (sign follows each JointDef).
  Eigen::VectorXd torques;
  /// Force exerted by the proximal segment on the distal one at each joint.
  std::vector<Vec2> joint_forces;
  /// y moment exerted by the proximal segment on the distal one at each joint.
  std::vector<double> joint_moments;
  /// Ground reaction on the feet implied by the motion and loads.
  Vec2 ground_force{0, 0};
  /// Ground reaction moment about the base origin.
  double ground_moment = 0.0;
  /// CoP of the implied ground reaction on the z = 0 plane.
  Vec2 ground_cop{0, 0};
  /// measured GRF + body weight + hand force - M a_CoM; zero when no GRF is given.
  Vec2 force_residual{0, 0};
};

/// Planar recursive Newton-Euler from the hand down to the feet.
InverseDynamicsResult inverse_dynamics(const HumanModel& model, const JointConfiguration& cfg,
                                       const std::optional<ExternalWrench>& external = std::nullopt,
                                       const std::optional<Vec2>& measured_grf = std::nullopt,
                                       double gravity = kGravity);

/// Torque increment caused by the external wrench alone, via the hand
/// Jacobian: dtau = tau(with wrench) - tau(without).
Eigen::VectorXd overloading_torque(const HumanModel& model, const JointConfiguration& cfg,
                                   const ExternalWrench& external);

/// Same quantity as the difference of two inverse-dynamics passes.
Eigen::VectorXd overloading_torque_by_difference(const HumanModel& model, const JointConfiguration& cfg,
                                                 const ExternalWrench& external);

/// Inward axial component of the transmitted joint force along the distal
/// segment axis, clipped at zero.
Eigen::VectorXd compressive_forces(const HumanModel& model, const JointConfiguration& cfg,
                                   const ExternalWrench& external,
                                   const std::optional<Vec2>& measured_grf = std::nullopt);

/// Same, from an already computed inverse-dynamics pass.
Eigen::VectorXd compressive_forces(const HumanModel& model, const JointConfiguration& cfg,
                                   const InverseDynamicsResult& id);

struct ExternalLoadEstimate {
  /// Downward external force at the hands [N]; about m g for a carried mass m.
  double vertical_force = 0.0;
  /// Load-free CoP predicted from the SESC model.
  Vec2 estimated_cop{0, 0};
  /// measured CoP - estimated_cop.
  Vec2 cop_residual{0, 0};
  /// Horizontal load position implied by the residual; NaN when the force is ~0.
  double load_x = 0.0;
  /// False when M (g + ddz_CoM) or the measured vertical GRF is at most
  /// invalid_eps * M g; the other fields are then meaningless.
  bool valid = true;
};

struct LoadEstimatorOptions {
  /// Below this joint speed (inf-norm, rad/s) the sample counts as static.
  double static_speed = 0.05;
  double invalid_eps = 1e-6;
};

/// External vertical force from the ground reaction:
///   f = GRF_z - M (g + ddz_CoM),
/// with the CoM motion taken from the calibrated SESC.
ExternalLoadEstimate estimate_external_vertical_force(const HumanModel& model, const SescParameters& sesc,
                                                      const JointConfiguration& cfg, const Vec2& measured_cop,
                                                      const Vec2& measured_grf,
                                                      const LoadEstimatorOptions& options = {});

}  // namespace ergo::dynamics
