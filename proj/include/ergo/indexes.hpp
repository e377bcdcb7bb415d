#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ergo/types.hpp"

namespace ergo::indexes {

enum class IndexId : int {
  JointDisplacement = 0,
  JointVelocity,
  JointAcceleration,
  OverloadingTorque,
  OverloadingFatigue,
  OverloadingPower,
  ComEnergy,
  CompressiveForce,
};

inline constexpr int kNumIndexes = 8;

/// Short labels w1..w8 used in files and reports.
inline constexpr std::array<std::string_view, kNumIndexes> kIndexLabels = {"w1", "w2", "w3", "w4",
                                                                           "w5", "w6", "w7", "w8"};
inline constexpr std::array<std::string_view, kNumIndexes> kIndexNames = {
    "joint displacement",  "joint velocity",       "joint acceleration", "overloading torque",
    "overloading fatigue", "overloading power",    "CoM potential energy", "compressive force"};

inline constexpr int to_int(IndexId id) { return static_cast<int>(id); }
inline constexpr IndexId index_at(int i) { return static_cast<IndexId>(i); }

/// Index values at one instant. Missing indexes stay empty; they are never 0.
/// The CoM energy index is joint independent and reads the same for every joint.
struct IndexVector {
  double timestamp = 0.0;
  std::optional<JointVector> displacement;
  std::optional<JointVector> velocity;
  std::optional<JointVector> acceleration;
  std::optional<JointVector> torque;
  std::optional<JointVector> fatigue;
  std::optional<JointVector> power;
  std::optional<double> com_energy;
  std::optional<JointVector> compressive;

  bool available(IndexId id) const;
  std::optional<double> value(IndexId id, int joint) const;
};

// ---------------------------------------------------------------------------
// Per-frame indexes

/// w1 = |q| / (q_max - q_min).
JointVector joint_displacement(const JointVector& q, const JointVector& q_max, const JointVector& q_min);
/// w2 = |qd| / qd_max.
JointVector joint_velocity_index(const JointVector& qd, const JointVector& qd_max);
/// w3 = |qdd| / qdd_max.
JointVector joint_acceleration_index(const JointVector& qdd, const JointVector& qdd_max);
/// w4 = |dtau| / dtau_max.
JointVector overloading_torque_index(const JointVector& dtau, const JointVector& dtau_max);
/// w5 = tau_F / tau_F_max.
JointVector fatigue_index(const JointVector& fatigue_torque, const JointVector& fatigue_max);
/// w6 = w2 * w4, the normalised overloading power.
JointVector overloading_power_index(const JointVector& w2, const JointVector& w4);
/// w7 = |C_z - C0_z| / dC_max. Body mass and gravity cancel and are not used.
double com_energy_index(double com_z, double neutral_com_z, double com_range);
/// w8 = f_C / f_C_max.
JointVector compressive_force_index(const JointVector& fc, const JointVector& fc_max);

// ---------------------------------------------------------------------------
// Fatigue

enum class FatiguePhase { Recovering, Fatiguing };

struct FatigueParams {
  JointVector fatigue_rate;   // lambda_f [1/s]
  JointVector recovery_rate;  // lambda_r [1/s]
  JointVector threshold;      // theta_f [N m]

  void validate() const;
};

struct FatigueState {
  JointVector torque = JointVector::Zero();
  std::array<FatiguePhase, kNumJoints> phase{};
  double time = 0.0;
};

/// Advances the fatigue torque over dt with dtau held constant: above the
/// threshold it relaxes toward |dtau| at rate lambda_f, below it decays at
/// rate lambda_r. Both phases are integrated exactly.
FatigueState update_fatigue(const FatigueState& state, const JointVector& dtau, double dt,
                            const FatigueParams& params);

// ---------------------------------------------------------------------------
// Risk categories

enum class Risk : int { Green = 0, Yellow = 1, Red = 2 };
std::string_view to_string(Risk r);

struct Thresholds {
  double yellow = 1.0 / 3.0;
  double red = 2.0 / 3.0;
  void validate() const;
};

Risk categorize(double value, const Thresholds& t);

/// Category per index per joint; empty where the index is missing.
using RiskCategory = std::array<std::array<std::optional<Risk>, kNumJoints>, kNumIndexes>;
RiskCategory categorize(const IndexVector& v, const Thresholds& t);

// ---------------------------------------------------------------------------
// Aggregation

struct ActionWindow {
  double start = 0.0;
  double end = 0.0;  // exclusive
  std::string label;
};

struct Stat {
  std::size_t count = 0;
  double max = 0.0;
  double rms = 0.0;
  double argmax_time = 0.0;
  /// Activation of the recorded muscles when the maximum occurred.
  std::optional<MuscleVector> emg_at_max;
  bool available() const { return count > 0; }
};

struct ActionAggregate {
  ActionWindow window;
  std::size_t frames = 0;
  std::array<std::array<Stat, kNumJoints>, kNumIndexes> stats{};
};

/// Running max / RMS over one window.
class WindowAccumulator {
 public:
  explicit WindowAccumulator(ActionWindow window);
  void add(const IndexVector& v, const MuscleVector* emg = nullptr);
  ActionAggregate finish() const;
  const ActionWindow& window() const { return window_; }
  std::size_t frames() const { return frames_; }

 private:
  ActionWindow window_;
  std::size_t frames_ = 0;
  std::array<std::array<Stat, kNumJoints>, kNumIndexes> stats_{};
  std::array<std::array<double, kNumJoints>, kNumIndexes> sumsq_{};
};

/// Checks that windows are ordered, non-overlapping and non-empty in time.
void validate_windows(std::span<const ActionWindow> windows);

/// Max and RMS per window, index and joint over the available samples.
std::vector<ActionAggregate> aggregate(std::span<const IndexVector> stream,
                                       std::span<const ActionWindow> windows);

}  // namespace ergo::indexes
