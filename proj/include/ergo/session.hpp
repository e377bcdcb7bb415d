#pragma once

#include <deque>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ergo/calibration.hpp"
#include "ergo/dynamics.hpp"
#include "ergo/indexes.hpp"
#include "ergo/ingest.hpp"
#include "ergo/profile.hpp"
#include "ergo/signal.hpp"
#include "ergo/stats.hpp"

namespace ergo::pipeline {

struct TrialSpec {
  std::string subject;
  std::filesystem::path profile;
  std::filesystem::path frames;  // "-" for the standard input in stream mode
  std::optional<std::filesystem::path> emg;  // raw sEMG at its native rate
  std::optional<double> tool_mass;           // light-tool mode [kg]
  std::vector<indexes::ActionWindow> windows;
};

enum class ConditionFactor { Label, Prefix };

struct StatsSpec {
  bool enabled = false;
  std::vector<indexes::IndexId> indexes;  // empty: all available
  ConditionFactor factor = ConditionFactor::Label;
  char separator = '/';
  bool use_rms = false;  // compare window RMS instead of window maxima
  stats::AnovaOptions anova;
  stats::MultipleComparison correction = stats::MultipleComparison::None;
};

struct OutputSpec {
  std::optional<std::filesystem::path> report;  // structured JSON
  std::optional<std::filesystem::path> text;    // human-readable
  std::optional<std::filesystem::path> polar;   // per-condition CSV
};

struct ProcessorOptions {
  TaskMode mode = TaskMode::LoadEstimation;
  double rate = 60.0;
  indexes::Thresholds thresholds;
  SagittalProjection projection;
  double tool_mass = 0.0;
  signal::DifferentiatorSpec differentiator;
  dynamics::LoadEstimatorOptions load;
};

struct SessionConfig {
  TaskMode mode = TaskMode::LoadEstimation;
  double rate = 60.0;
  indexes::Thresholds thresholds;
  double heading = 0.0;    // sagittal plane direction [rad]
  double tool_mass = 0.0;  // light-tool default [kg]
  signal::DifferentiatorSpec differentiator;
  std::size_t max_gap_samples = 5;
  double static_speed = 0.05;
  std::vector<TrialSpec> trials;
  StatsSpec stats;
  OutputSpec outputs;
  /// Directory that relative paths are resolved against.
  std::filesystem::path base_dir;

  std::filesystem::path resolve(const std::filesystem::path& p) const;
  ProcessorOptions processor_options(const TrialSpec& trial) const;

  /// Relative paths resolve against base_dir.
  static SessionConfig from_json(std::string_view text, const std::filesystem::path& base_dir = {});
  static SessionConfig load(const std::filesystem::path& path);
  /// Canonical JSON used for the provenance hash; paths as stored.
  std::string canonical_json() const;
  /// Checks values, window order and that referenced files exist.
  void validate(bool check_files = true) const;
};

/// Activation envelopes of a raw sEMG recording, sampled on demand.
class EmgTrack {
 public:
  /// Raw file columns: t, AD, PD, BC, TC, TR, ES, GM, RF, BF, TA.
  static EmgTrack from_raw_file(const std::filesystem::path& path, const MuscleVector& mvc,
                                const signal::EmgSpec& spec = {});
  static EmgTrack from_raw(std::vector<double> time, const std::vector<MuscleVector>& raw, const MuscleVector& mvc,
                           const signal::EmgSpec& spec = {});
  /// Linear interpolation; held constant outside the recording.
  MuscleVector at(double t) const;
  const std::vector<double>& time() const { return time_; }
  const std::vector<MuscleVector>& activation() const { return activation_; }

 private:
  std::vector<double> time_;
  std::vector<MuscleVector> activation_;
};

/// Everything computed for one emitted frame.
struct FrameResult {
  indexes::IndexVector indexes;
  indexes::RiskCategory risk{};
  std::optional<MuscleVector> emg;
  JointVector overloading_torque = JointVector::Zero();
  JointVector fatigue_torque = JointVector::Zero();
  bool dynamics_valid = true;
};

/// Per-frame index computation for one trial, strictly in timestamp order.
/// Output trails input by the differentiator lag.
class TrialProcessor {
 public:
  TrialProcessor(const SubjectProfile& profile, ProcessorOptions options,
                 std::vector<indexes::ActionWindow> windows, std::shared_ptr<const EmgTrack> emg = nullptr);

  /// Checks the frame channels the task mode needs.
  void check_schema(const FrameSchema& schema) const;

  std::vector<FrameResult> push(const KinodynamicFrame& frame);
  std::vector<FrameResult> finish();

  /// Aggregates of the windows that received frames so far. Windows that
  /// never received a frame are reported by name in `empty_windows`.
  std::vector<indexes::ActionAggregate> aggregates() const;
  std::vector<std::string> empty_windows() const;

  std::size_t frames_in() const { return frames_in_; }
  std::size_t frames_out() const { return frames_out_; }
  std::size_t invalid_dynamics() const { return invalid_; }
  double latency_seconds() const { return diff_.latency_seconds(); }

 private:
  FrameResult compute(const KinodynamicFrame& frame, const model::JointConfiguration& cfg);
  void emit(std::vector<signal::DerivativeSample>&& samples, std::vector<FrameResult>& out);

  SubjectProfile profile_;
  ProcessorOptions options_;
  std::shared_ptr<const EmgTrack> emg_;
  signal::StreamingDifferentiator diff_;
  std::deque<KinodynamicFrame> waiting_;
  indexes::FatigueState fatigue_;
  JointVector last_dtau_ = JointVector::Zero();
  std::optional<double> last_time_;
  std::vector<indexes::WindowAccumulator> windows_;
  std::size_t next_window_ = 0;
  std::size_t frames_in_ = 0, frames_out_ = 0, invalid_ = 0;
};

struct TrialReport {
  std::string subject;
  std::string profile_id;
  std::string input_sha256;
  std::size_t rows = 0, frames = 0, malformed = 0, invalid_dynamics = 0;
  std::vector<GapReport> gaps;
  std::vector<indexes::ActionAggregate> aggregates;
  std::vector<std::string> empty_windows;
  bool aborted = false;
  std::string abort_reason;
};

struct PosthocEntry {
  std::string first, second;
  std::optional<stats::PairwiseResult> result;
  std::string error;
};

struct StatsEntry {
  std::string index;  // w1..w8, or a free label for external tables
  std::string joint;  // joint name, or "body" for the CoM index
  std::vector<std::string> conditions;
  std::vector<std::string> subjects;
  std::vector<std::string> excluded_subjects;  // lacked a condition
  std::optional<stats::TestResult> anova;
  std::string error;
  std::vector<PosthocEntry> posthoc;
};

struct SessionReport {
  std::string config_sha256;
  std::string software_version;
  TaskMode mode = TaskMode::LoadEstimation;
  double rate = 0.0;
  indexes::Thresholds thresholds;
  std::vector<TrialReport> trials;
  std::vector<StatsEntry> stats;
};

/// Incremental SHA-256.
class Sha256 {
 public:
  Sha256();
  ~Sha256();
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;
  void update(std::string_view bytes);
  std::string hex();

 private:
  void* ctx_;
};

/// One trial from the first input line to its report: loads and checks the
/// profile, ingests records and runs the processor. The batch session and
/// the stream command both drive this class, so they share every step.
class TrialSession {
 public:
  /// strict: batch semantics (malformed records are errors).
  TrialSession(const SessionConfig& config, const TrialSpec& trial, bool strict);

  std::vector<FrameResult> push_line(std::string_view line);
  /// Ends the trial normally; trailing frame results go to `tail`.
  TrialReport finish(std::vector<FrameResult>* tail = nullptr);
  /// Ends the trial after a failure with whatever was aggregated.
  TrialReport abort(const std::string& reason);

  const SubjectProfile& profile() const { return profile_; }
  const TrialProcessor& processor() const { return *processor_; }

 private:
  TrialReport make_report();

  TrialSpec trial_;
  SubjectProfile profile_;
  StreamIngestor ingestor_;
  std::unique_ptr<TrialProcessor> processor_;
  Sha256 hash_;
  bool schema_checked_ = false;
};

/// Condition label of a window under the configured factor.
std::string condition_of(const std::string& label, const StatsSpec& spec);

/// One observation of a cross-trial table.
struct StatsRecord {
  std::string subject;
  std::string label;  // window label; mapped to a condition by the factor
  std::string index;
  std::string joint;
  double value = 0.0;
};

/// Repeated-measures ANOVA and paired post-hoc tests per (index, joint).
/// Repeated observations of a subject under one condition are averaged;
/// subjects lacking a condition are excluded from that table.
std::vector<StatsEntry> compute_stats(const std::vector<StatsRecord>& records, const StatsSpec& spec);

/// Same over the window aggregates of every trial.
std::vector<StatsEntry> compute_stats(const std::vector<TrialReport>& trials, const StatsSpec& spec);

/// Batch session: every trial is ingested from its file and processed.
SessionReport run_session(const SessionConfig& config);

/// Hex SHA-256 of a byte string.
std::string sha256_hex(std::string_view bytes);

}  // namespace ergo::pipeline
