#pragma once

#include <array>
#include <cstddef>
#include <deque>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "ergo/frame.hpp"

namespace ergo::pipeline {

/// Channel groups of the columnar frame format. A group is either fully
/// present in the header or absent.
enum class Group : int { Q = 0, Base, Cop, Grf, Grm, Wrench, Emg };
inline constexpr int kNumGroups = 7;
std::string_view group_name(Group g);
int group_size(Group g);

/// Column layout decoded from a header row.
class FrameSchema {
 public:
  static FrameSchema parse_header(std::string_view line);
  /// Schema holding `t`, the joint angles and the given optional groups.
  static FrameSchema with_groups(std::initializer_list<Group> groups);

  bool has(Group g) const { return present_[static_cast<std::size_t>(g)]; }
  std::size_t columns() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }
  std::string header() const;

 private:
  struct Column {
    Group group;
    int slot;
  };
  std::vector<std::string> names_;
  std::vector<std::optional<Column>> layout_;  // empty for the time column
  std::array<bool, kNumGroups> present_{};

  friend class RowParser;
};

/// One row before resampling; groups with an empty or `nan` cell are absent.
struct RawSample {
  double time = 0.0;
  std::array<std::optional<Eigen::VectorXd>, kNumGroups> groups;
};

class RowParser {
 public:
  explicit RowParser(const FrameSchema& schema) : schema_(&schema) {}
  /// Throws ValidationError naming the line when the row is malformed.
  RawSample parse(std::string_view line, std::size_t line_number) const;

 private:
  const FrameSchema* schema_;
};

struct GapReport {
  std::string channel;
  double start = 0.0;  // last valid sample before the gap [s]
  double end = 0.0;    // first valid sample after it [s]
  std::size_t samples = 0;  // output samples filled inside the gap
};

struct ResampleOptions {
  /// Output rate [Hz]; 0 keeps the input timestamps.
  double rate = 0.0;
  /// Gaps filling more output samples than this are reported.
  std::size_t max_gap_samples = 5;
};

/// Linear interpolation of every channel group onto a uniform grid that
/// starts at the first timestamp. A grid point within 1e-3 sample periods
/// of an input timestamp takes that sample exactly. Output trails input by
/// at most one input sample.
class Resampler {
 public:
  Resampler(const FrameSchema& schema, ResampleOptions options);

  std::vector<KinodynamicFrame> push(const RawSample& s);
  std::vector<KinodynamicFrame> finish();
  const std::vector<GapReport>& gaps() const { return gaps_; }

 private:
  struct Pending {
    double time;
    std::array<std::optional<Eigen::VectorXd>, kNumGroups> values;
  };
  struct Last {
    double time;
    Eigen::VectorXd value;
  };

  void fill(int g, const RawSample& s);
  std::vector<KinodynamicFrame> emit_ready();
  KinodynamicFrame to_frame(const Pending& p) const;

  FrameSchema schema_;
  ResampleOptions options_;
  std::optional<double> t0_;
  std::size_t next_grid_ = 0;
  std::deque<Pending> pending_;
  std::array<std::optional<Last>, kNumGroups> last_;
  std::vector<GapReport> gaps_;
};

struct IngestResult {
  FrameSchema schema;
  std::vector<KinodynamicFrame> frames;
  std::vector<GapReport> gaps;
  std::size_t rows = 0;       // data rows read
  std::size_t malformed = 0;  // rows skipped (stream ingest only)
};

/// Strict batch ingest: any malformed row, unknown channel or
/// non-increasing timestamp is an error that names the line.
IngestResult ingest_text(std::string_view text, const ResampleOptions& options = {});
IngestResult ingest_file(const std::filesystem::path& path, const ResampleOptions& options = {});

/// Raised by the stream path when the source restarts (a repeated header or
/// a timestamp that does not advance).
class StreamReset : public RuntimeError {
 public:
  using RuntimeError::RuntimeError;
};

/// Incremental ingest of newline-delimited records. Malformed records are
/// skipped and counted; everything else matches the batch path exactly.
/// In strict mode (the batch path) malformed records and non-advancing
/// timestamps raise ValidationError instead.
class StreamIngestor {
 public:
  explicit StreamIngestor(ResampleOptions options = {}, bool strict = false);

  std::vector<KinodynamicFrame> push_line(std::string_view line);
  std::vector<KinodynamicFrame> finish();

  bool has_schema() const { return schema_.has_value(); }
  const FrameSchema& schema() const;
  std::size_t rows() const { return rows_; }
  std::size_t malformed() const { return malformed_; }
  std::vector<GapReport> gaps() const;

 private:
  ResampleOptions options_;
  bool strict_;
  std::optional<FrameSchema> schema_;
  std::optional<Resampler> resampler_;
  std::string header_;
  std::size_t line_ = 0, rows_ = 0, malformed_ = 0;
  std::optional<double> last_time_;
};

/// Drains a byte stream through StreamIngestor. A reset propagates as
/// StreamReset.
IngestResult ingest_stream(std::istream& in, const ResampleOptions& options = {});

/// Writes frames in the columnar format; values use the shortest
/// representation that parses back to the same double.
std::string format_frames(const FrameSchema& schema, std::span<const KinodynamicFrame> frames);

}  // namespace ergo::pipeline
