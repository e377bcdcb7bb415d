#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ergo/indexes.hpp"
#include "ergo/model_io.hpp"

namespace ergo {

enum class TaskMode { LoadEstimation, MeasuredWrench, LightTool };

std::string_view to_string(TaskMode mode);
TaskMode parse_task_mode(std::string_view text);

struct NeutralPosture {
  JointVector q = JointVector::Zero();
  double com_z = 0.0;
};

struct FatigueCalibration {
  indexes::FatigueParams params;
  JointVector fatigue_max;  // tau_F at which endurance is exhausted [N m]
};

/// Per-subject calibration record. Fields stay empty until calibrated so
/// that missing data can be reported before a session starts.
struct SubjectProfile {
  std::string id;
  double mass = 0.0;
  double height = 0.0;
  std::string gender;

  std::optional<model::ModelDocument> body;
  std::optional<model::SescParameters> sesc;
  std::optional<NeutralPosture> neutral;

  std::optional<JointVector> q_min, q_max;
  std::optional<JointVector> qd_max, qdd_max;
  std::optional<JointVector> torque_max;
  std::optional<FatigueCalibration> fatigue;
  std::optional<double> com_range;
  std::optional<JointVector> compressive_max;
  std::optional<MuscleVector> mvc;

  /// Names of the fields a session in `mode` needs but this profile lacks.
  std::vector<std::string> missing_fields(TaskMode mode, bool needs_mvc = false) const;
  /// Throws ValidationError listing every missing field.
  void require(TaskMode mode, bool needs_mvc = false) const;
  /// Checks the invariants of the fields that are present.
  void validate() const;
};

std::string profile_to_json(const SubjectProfile& profile);
SubjectProfile profile_from_json(std::string_view text);

void save_profile(const SubjectProfile& profile, const std::filesystem::path& path);
SubjectProfile load_profile(const std::filesystem::path& path);

}  // namespace ergo
