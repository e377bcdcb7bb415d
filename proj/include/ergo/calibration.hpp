#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "ergo/dynamics.hpp"
#include "ergo/frame.hpp"
#include "ergo/profile.hpp"
#include "ergo/signal.hpp"

namespace ergo::calibration {

using model::HumanModel;
using model::JointConfiguration;
using model::SescParameters;

/// Joint and base states of a uniformly sampled trial, with smoothed
/// derivatives. Frames without a base pose use (0, base_height, 0).
std::vector<JointConfiguration> trial_configurations(std::span<const KinodynamicFrame> frames,
                                                     double sample_rate, double base_height,
                                                     const signal::DifferentiatorSpec& spec = {});

/// Hand wrench of a frame reduced to the sagittal plane and applied at the
/// distal end of the last segment.
dynamics::ExternalWrench hand_wrench(const HumanModel& model, const Vec6& wrench,
                                     const SagittalProjection& projection);

// ---------------------------------------------------------------------------
// SESC identification

struct StaticPose {
  JointConfiguration cfg;  // velocities and accelerations are zero
  Vec2 cop{0, 0};          // sagittal CoP
  double start = 0.0, end = 0.0;
};

struct StaticPoseOptions {
  double max_speed = 0.05;    // inf-norm of joint speed [rad/s]
  double min_duration = 0.5;  // [s]
};

/// Averages q, base pose and CoP over every run where the joints stay below
/// max_speed for at least min_duration. Half a differentiator window is
/// dropped from both ends of a run before averaging.
std::vector<StaticPose> detect_static_poses(std::span<const KinodynamicFrame> frames, double sample_rate,
                                            double base_height, const SagittalProjection& projection = {},
                                            const StaticPoseOptions& options = {},
                                            const signal::DifferentiatorSpec& spec = {});

struct SescFitOptions {
  /// Upper bound on the condition number of the column-scaled regressor.
  double max_condition = 1e6;
  /// Base-frame vertical offset used when the poses cannot observe it.
  /// Defaults to the value implied by the model's base segment.
  std::optional<double> vertical_offset;
};

struct SescFit {
  SescParameters params;
  double residual_rms = 0.0;  // CoP residual on the training poses [m]
  double condition = 0.0;
  /// True when the vertical offset came from the prior instead of the data.
  bool vertical_offset_fixed = false;
};

/// Names of the SESC coefficients in storage order.
std::vector<std::string> sesc_parameter_names(const HumanModel& model);

/// Least-squares fit of CoP_x - base_x = Phi_x(q) p over static poses.
SescFit fit_sesc(const HumanModel& model, std::span<const StaticPose> poses, const SescFitOptions& options = {});

NeutralPosture register_neutral(const HumanModel& model, const SescParameters& sesc,
                                const JointConfiguration& cfg);

// ---------------------------------------------------------------------------
// Kinematic maxima

struct KinematicMaxima {
  JointVector qd_max = JointVector::Zero();
  JointVector qdd_max = JointVector::Zero();
  double com_range = 0.0;
  /// Joints whose peak speed stayed below the excitation threshold.
  std::vector<std::string> unexcited;
};

KinematicMaxima extract_kinematic_maxima(const HumanModel& model, const SescParameters& sesc,
                                         double neutral_com_z, std::span<const JointConfiguration> states,
                                         double excitation_speed = 0.05);

// ---------------------------------------------------------------------------
// Torque maxima

/// Per joint: the experimental value when it lies within band * literature
/// of the literature value, otherwise the smaller of the two.
JointVector resolve_torque_maxima(const JointVector& experimental, const JointVector& literature,
                                  double band = 0.2);

// ---------------------------------------------------------------------------
// Fatigue

struct MetObservation {
  double load = 0.0;       // sustained |dtau| [N m]
  double endurance = 0.0;  // time until exhaustion [s]
};

struct MetFit {
  double fatigue_rate = 0.0;  // lambda_f [1/s]
  double fatigue_max = 0.0;   // tau_F reached at exhaustion [N m]
  double residual_rms = 0.0;  // [s]
};

/// Fits T(L) = -ln(1 - tau_F_max / L) / lambda_f to endurance observations
/// of one joint: the time a constant load needs to drive tau_F from zero to
/// tau_F_max.
MetFit fit_met_curve(std::span<const MetObservation> observations);

struct FatigueFitOptions {
  double recovery_ratio = 0.4;     // lambda_r / lambda_f
  double threshold_fraction = 0.1; // theta_f / dtau_max
};

struct FatigueFit {
  FatigueCalibration calibration;
  JointVector residual_rms = JointVector::Zero();
};

FatigueFit fit_fatigue_params(const std::array<std::vector<MetObservation>, kNumJoints>& observations,
                              const JointVector& torque_max, const FatigueFitOptions& options = {});

// ---------------------------------------------------------------------------
// Force maxima

/// Per-joint peak compressive force over a maximal-exertion trial.
JointVector extract_force_maxima(const HumanModel& model, std::span<const JointConfiguration> states,
                                 std::span<const dynamics::ExternalWrench> wrenches);

/// Same from recorded frames; every frame must carry the hand wrench.
JointVector extract_force_maxima(const HumanModel& model, std::span<const KinodynamicFrame> frames,
                                 double sample_rate, double base_height,
                                 const SagittalProjection& projection = {},
                                 const signal::DifferentiatorSpec& spec = {});

}  // namespace ergo::calibration
