#pragma once

// Synthetic subjects, trajectories and recordings shared by the unit and
// acceptance tests.

#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "ergo/dynamics.hpp"
#include "ergo/frame.hpp"
#include "ergo/ingest.hpp"
#include "ergo/model_io.hpp"
#include "ergo/profile.hpp"
#include "ergo/session.hpp"

namespace synth {

using ergo::JointVector;
using ergo::Vec2;

/// Default scaled body.
ergo::model::ModelDocument body(double mass = 75.0, double height = 1.75);

/// Upright with the arms hanging along the trunk.
JointVector standing();
/// Upright with straight arms held horizontally forward.
JointVector arms_forward();

ergo::model::JointConfiguration at_rest(const ergo::model::ModelDocument& doc, const JointVector& q);

/// Complete profile built from the model itself (exact SESC, literature limits).
ergo::SubjectProfile profile(const ergo::model::ModelDocument& doc, const std::string& id = "S01");

/// Joint trajectory through key postures with minimum-jerk blends; the
/// posture is held before the first and after the last key.
class PostureTrack {
 public:
  void add(double time, const JointVector& q);
  ergo::model::JointConfiguration at(double t, const ergo::model::ModelDocument& doc) const;
  double end() const { return keys_.empty() ? 0.0 : keys_.back().first; }

 private:
  std::vector<std::pair<double, JointVector>> keys_;
};

using LoadFn = std::function<std::optional<ergo::dynamics::ExternalWrench>(double t)>;

struct RecordOptions {
  double rate = 60.0;
  bool ground = true;    // CoP and GRF from the implied ground reaction
  bool wrench = false;   // hand wrench columns from the load
  bool base = true;      // base pose columns
};

/// Frames of a motion with hand load, with exact ground reactions.
std::vector<ergo::KinodynamicFrame> record(const ergo::model::ModelDocument& doc,
                                           const std::function<ergo::model::JointConfiguration(double)>& motion,
                                           const LoadFn& load, double duration, const RecordOptions& options = {});

ergo::pipeline::FrameSchema schema_for(const RecordOptions& options);
std::string to_csv(const std::vector<ergo::KinodynamicFrame>& frames, const RecordOptions& options = {});

/// Vertical load of a carried mass at the hand tip.
ergo::dynamics::ExternalWrench carried(const ergo::model::ModelDocument& doc, double mass);

/// Scratch directory removed on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path write(const std::string& name, const std::string& content) const;

 private:
  std::filesystem::path path_;
};

// ---------------------------------------------------------------------------
// Task generators

/// Lifting trial: nine windows (three box masses by three shelf heights),
/// labelled "<mass>kg/V<height>".
struct LiftTrial {
  std::vector<ergo::KinodynamicFrame> frames;
  std::vector<ergo::indexes::ActionWindow> windows;
};
inline constexpr double kBoxMasses[3] = {2.5, 5.0, 10.0};
LiftTrial lift_trial(const ergo::model::ModelDocument& doc, std::mt19937& rng, double rate = 60.0);

/// Drilling against a wall with a mostly axial push of `push` newtons.
std::vector<ergo::KinodynamicFrame> drill_trial(const ergo::model::ModelDocument& doc, double push, double duration,
                                                double rate = 60.0);

/// Random static poses with their exact CoP.
struct Pose {
  ergo::model::JointConfiguration cfg;
  Vec2 cop;
};
std::vector<Pose> random_poses(const ergo::model::ModelDocument& doc, int count, std::mt19937& rng,
                               double cop_noise = 0.0);

}  // namespace synth
