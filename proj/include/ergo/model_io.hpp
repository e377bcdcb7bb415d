#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ergo/model.hpp"

namespace ergo::model {

/// One row of an anthropometric scaling table. Masses are fractions of body
/// mass, lengths fractions of stature, CoM and gyration fractions of the
/// segment length.
struct BsipRow {
  std::string name;
  std::string joint;  // empty for the base segment
  double sign = 1.0;
  double mass_fraction = 0.0;
  double length_fraction = 0.0;
  double com_axis_fraction = 0.0;
  double com_normal_fraction = 0.0;
  double gyration_fraction = 0.0;
};

struct BsipTable {
  double base_height_fraction = 0.0;
  std::optional<BsipRow> base;
  std::vector<BsipRow> segments;

  static BsipTable parse(std::string_view text);
  /// Table shipped in data/bsip_default.txt.
  static const BsipTable& defaults();
};

/// A model together with the subject data stored next to it in model files.
struct ModelDocument {
  std::string name;
  double subject_mass = 0.0;
  double base_height = 0.0;  // ankle height above ground [m]
  HumanModel model;
};

/// Builds a subject model by scaling a table with body mass and stature.
ModelDocument scaled_model(const BsipTable& table, double mass, double height,
                           std::string name = "scaled");

ModelDocument parse_model(std::string_view text);
std::string format_model(const ModelDocument& doc);
ModelDocument load_model(const std::filesystem::path& path);

/// Literature joint limits shipped in data/joint_limits.txt.
struct JointLimits {
  JointVector q_min, q_max, qd_max, torque_max;
  static JointLimits parse(std::string_view text);
  static const JointLimits& defaults();
};

std::string read_text_file(const std::filesystem::path& path);

}  // namespace ergo::model
