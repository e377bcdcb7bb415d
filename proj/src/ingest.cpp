#include "ergo/ingest.hpp"

#include <cmath>
#include <istream>

#include <fmt/format.h>

#include "ergo/model_io.hpp"
#include "text_format.hpp"

namespace ergo::pipeline {

namespace {

constexpr std::array<std::string_view, kNumGroups> kGroupNames = {"q", "base", "cop", "grf", "grm", "ft", "emg"};
constexpr std::array<int, kNumGroups> kGroupSizes = {kNumJoints, 3, 2, 3, 3, 6, kNumMuscles};

constexpr std::array<std::string_view, 3> kBaseCols = {"base_x", "base_z", "base_pitch"};
constexpr std::array<std::string_view, 2> kCopCols = {"cop_x", "cop_y"};
constexpr std::array<std::string_view, 3> kGrfCols = {"grf_x", "grf_y", "grf_z"};
constexpr std::array<std::string_view, 3> kGrmCols = {"grm_x", "grm_y", "grm_z"};
constexpr std::array<std::string_view, 6> kFtCols = {"ft_fx", "ft_fy", "ft_fz", "ft_tx", "ft_ty", "ft_tz"};

std::string column_name(Group g, int slot) {
  const auto s = static_cast<std::size_t>(slot);
  switch (g) {
    case Group::Q: return "q_" + std::string(kJointNames[s]);
    case Group::Base: return std::string(kBaseCols[s]);
    case Group::Cop: return std::string(kCopCols[s]);
    case Group::Grf: return std::string(kGrfCols[s]);
    case Group::Grm: return std::string(kGrmCols[s]);
    case Group::Wrench: return std::string(kFtCols[s]);
    case Group::Emg: return "emg_" + std::string(kMuscleNames[s]);
  }
  return {};
}

std::optional<std::pair<Group, int>> lookup_column(std::string_view name) {
  for (int g = 0; g < kNumGroups; ++g)
    for (int s = 0; s < kGroupSizes[static_cast<std::size_t>(g)]; ++s)
      if (column_name(static_cast<Group>(g), s) == name) return std::pair{static_cast<Group>(g), s};
  return std::nullopt;
}

std::string at_line(std::size_t line, std::string_view msg) {
  return fmt::format("line {}: {}", line, msg);
}

}  // namespace

std::string_view group_name(Group g) { return kGroupNames[static_cast<std::size_t>(g)]; }
int group_size(Group g) { return kGroupSizes[static_cast<std::size_t>(g)]; }

// ---------------------------------------------------------------------------

FrameSchema FrameSchema::parse_header(std::string_view line) {
  FrameSchema schema;
  std::array<int, kNumGroups> counts{};
  bool seen_time = false;
  for (auto cell : detail::split(detail::trim(line), ',')) {
    const std::string name(detail::trim(cell));
    if (name.empty()) throw ValidationError("header has an empty column name");
    if (std::find(schema.names_.begin(), schema.names_.end(), name) != schema.names_.end())
      throw ValidationError("duplicate channel '" + name + "'");
    schema.names_.push_back(name);
    if (name == "t") {
      if (!schema.layout_.empty()) throw ValidationError("the time column 't' must come first");
      schema.layout_.emplace_back(std::nullopt);
      seen_time = true;
      continue;
    }
    const auto col = lookup_column(name);
    if (!col) throw ValidationError("unknown channel '" + name + "'");
    schema.layout_.emplace_back(Column{col->first, col->second});
    ++counts[static_cast<std::size_t>(col->first)];
  }
  if (!seen_time) throw ValidationError("header lacks the time column 't'");
  for (int g = 0; g < kNumGroups; ++g) {
    const auto gi = static_cast<std::size_t>(g);
    if (counts[gi] == 0) continue;
    if (counts[gi] != kGroupSizes[gi]) {
      std::string missing;
      for (int s = 0; s < kGroupSizes[gi]; ++s) {
        const auto n = column_name(static_cast<Group>(g), s);
        if (std::find(schema.names_.begin(), schema.names_.end(), n) == schema.names_.end())
          missing += (missing.empty() ? "" : ", ") + n;
      }
      throw ValidationError(fmt::format("channel group '{}' is incomplete; missing {}", kGroupNames[gi], missing));
    }
    schema.present_[gi] = true;
  }
  if (!schema.has(Group::Q)) throw ValidationError("header lacks the joint-angle channels q_*");
  return schema;
}

FrameSchema FrameSchema::with_groups(std::initializer_list<Group> groups) {
  std::string header = "t";
  std::array<bool, kNumGroups> want{};
  want[0] = true;
  for (Group g : groups) want[static_cast<std::size_t>(g)] = true;
  for (int g = 0; g < kNumGroups; ++g) {
    if (!want[static_cast<std::size_t>(g)]) continue;
    for (int s = 0; s < kGroupSizes[static_cast<std::size_t>(g)]; ++s)
      header += "," + column_name(static_cast<Group>(g), s);
  }
  return parse_header(header);
}

std::string FrameSchema::header() const {
  std::string out;
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (i) out += ',';
    out += names_[i];
  }
  return out;
}

RawSample RowParser::parse(std::string_view line, std::size_t line_number) const {
  const auto cells = detail::split(line, ',');
  const auto& layout = schema_->layout_;
  if (cells.size() != layout.size())
    throw ValidationError(at_line(line_number, fmt::format("expected {} fields, got {}", layout.size(), cells.size())));
  RawSample s;
  std::array<bool, kNumGroups> missing{};
  for (int g = 0; g < kNumGroups; ++g)
    if (schema_->present_[static_cast<std::size_t>(g)]) s.groups[static_cast<std::size_t>(g)] = Eigen::VectorXd(kGroupSizes[static_cast<std::size_t>(g)]);
  bool have_time = false;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const auto cell = detail::trim(cells[i]);
    const auto& col = layout[i];
    if (!col) {
      if (cell.empty()) throw ValidationError(at_line(line_number, "missing timestamp"));
      s.time = detail::parse_double(cell, line_number, "timestamp");
      if (!std::isfinite(s.time)) throw ValidationError(at_line(line_number, "timestamp is not finite"));
      have_time = true;
      continue;
    }
    const auto g = static_cast<std::size_t>(col->group);
    if (cell.empty() || cell == "nan" || cell == "NaN") {
      missing[g] = true;
      continue;
    }
    const double v = detail::parse_double(cell, line_number, schema_->names_[i]);
    if (!std::isfinite(v)) throw ValidationError(at_line(line_number, "value of '" + schema_->names_[i] + "' is not finite"));
    (*s.groups[g])[col->slot] = v;
  }
  if (!have_time) throw ValidationError(at_line(line_number, "missing timestamp"));
  for (int g = 0; g < kNumGroups; ++g)
    if (missing[static_cast<std::size_t>(g)]) s.groups[static_cast<std::size_t>(g)].reset();
  return s;
}

// ---------------------------------------------------------------------------

Resampler::Resampler(const FrameSchema& schema, ResampleOptions options) : schema_(schema), options_(options) {
  if (!(options_.rate >= 0.0) || !std::isfinite(options_.rate))
    throw ValidationError("resampling rate must be nonnegative");
}

void Resampler::fill(int g, const RawSample& s) {
  const auto gi = static_cast<std::size_t>(g);
  const Eigen::VectorXd& v = *s.groups[gi];
  auto& last = last_[gi];
  std::size_t inside = 0;
  for (auto& p : pending_) {
    if (p.values[gi]) continue;
    if (p.time > s.time) break;
    if (p.time == s.time) {
      p.values[gi] = v;
    } else if (!last) {
      p.values[gi] = v;  // before the first valid sample: hold it
      ++inside;
    } else {
      const double w = (p.time - last->time) / (s.time - last->time);
      p.values[gi] = last->value + w * (v - last->value);
      ++inside;
    }
  }
  if (inside > options_.max_gap_samples)
    gaps_.push_back({std::string(kGroupNames[gi]), last ? last->time : *t0_, s.time, inside});
  last = Last{s.time, v};
}

std::vector<KinodynamicFrame> Resampler::push(const RawSample& s) {
  if (!t0_) t0_ = s.time;
  if (options_.rate > 0.0) {
    const double tol = 1e-3 / options_.rate;
    while (true) {
      double tg = *t0_ + static_cast<double>(next_grid_) / options_.rate;
      if (tg > s.time + tol) break;
      if (std::abs(tg - s.time) <= tol) tg = s.time;
      pending_.push_back({tg, {}});
      ++next_grid_;
    }
  } else {
    pending_.push_back({s.time, {}});
  }
  for (int g = 0; g < kNumGroups; ++g)
    if (schema_.has(static_cast<Group>(g)) && s.groups[static_cast<std::size_t>(g)]) fill(g, s);
  return emit_ready();
}

std::vector<KinodynamicFrame> Resampler::finish() {
  for (int g = 0; g < kNumGroups; ++g) {
    const auto gi = static_cast<std::size_t>(g);
    if (!schema_.has(static_cast<Group>(g))) continue;
    std::size_t held = 0;
    for (auto& p : pending_) {
      if (p.values[gi]) continue;
      if (!last_[gi]) throw ValidationError(fmt::format("channel group '{}' has no valid samples", kGroupNames[gi]));
      p.values[gi] = last_[gi]->value;
      ++held;
    }
    if (held > options_.max_gap_samples)
      gaps_.push_back({std::string(kGroupNames[gi]), last_[gi]->time, pending_.back().time, held});
  }
  return emit_ready();
}

std::vector<KinodynamicFrame> Resampler::emit_ready() {
  std::vector<KinodynamicFrame> out;
  while (!pending_.empty()) {
    const Pending& p = pending_.front();
    bool ready = true;
    for (int g = 0; g < kNumGroups && ready; ++g)
      if (schema_.has(static_cast<Group>(g)) && !p.values[static_cast<std::size_t>(g)]) ready = false;
    if (!ready) break;
    out.push_back(to_frame(p));
    pending_.pop_front();
  }
  return out;
}

KinodynamicFrame Resampler::to_frame(const Pending& p) const {
  KinodynamicFrame f;
  f.time = p.time;
  auto val = [&](Group g) -> const Eigen::VectorXd& { return *p.values[static_cast<std::size_t>(g)]; };
  f.q = val(Group::Q);
  if (schema_.has(Group::Base)) f.base = Vec3(val(Group::Base));
  if (schema_.has(Group::Cop)) f.cop = Eigen::Vector2d(val(Group::Cop));
  if (schema_.has(Group::Grf)) f.grf = Vec3(val(Group::Grf));
  if (schema_.has(Group::Grm)) f.grm = Vec3(val(Group::Grm));
  if (schema_.has(Group::Wrench)) f.wrench = Vec6(val(Group::Wrench));
  if (schema_.has(Group::Emg)) f.emg = MuscleVector(val(Group::Emg));
  return f;
}

// ---------------------------------------------------------------------------

StreamIngestor::StreamIngestor(ResampleOptions options, bool strict) : options_(options), strict_(strict) {}

const FrameSchema& StreamIngestor::schema() const {
  if (!schema_) throw ValidationError("no header received");
  return *schema_;
}

std::vector<GapReport> StreamIngestor::gaps() const {
  return resampler_ ? resampler_->gaps() : std::vector<GapReport>{};
}

std::vector<KinodynamicFrame> StreamIngestor::push_line(std::string_view raw) {
  ++line_;
  const auto line = detail::trim(raw);
  if (line.empty() || line.front() == '#') return {};
  if (!schema_) {
    try {
      schema_ = FrameSchema::parse_header(line);
    } catch (const ValidationError& e) {
      throw ValidationError(at_line(line_, e.what()));
    }
    header_ = std::string(line);
    resampler_.emplace(*schema_, options_);
    return {};
  }
  if (line == header_) {
    if (strict_) throw ValidationError(at_line(line_, "repeated header"));
    throw StreamReset(at_line(line_, "header repeated; the source restarted"));
  }
  RawSample s;
  try {
    s = RowParser(*schema_).parse(line, line_);
  } catch (const ValidationError&) {
    if (strict_) throw;
    ++malformed_;
    return {};
  }
  if (last_time_ && !(s.time > *last_time_)) {
    const auto msg = at_line(line_, fmt::format("timestamp {} does not increase (previous {})", s.time, *last_time_));
    if (strict_) throw ValidationError(msg);
    throw StreamReset(msg);
  }
  last_time_ = s.time;
  ++rows_;
  return resampler_->push(s);
}

std::vector<KinodynamicFrame> StreamIngestor::finish() {
  if (!schema_) throw ValidationError("input is empty: no header row");
  if (rows_ == 0) throw ValidationError("input has a header but no data rows");
  return resampler_->finish();
}

namespace {

template <class NextLine>
IngestResult drain(StreamIngestor& ing, NextLine&& next) {
  IngestResult r;
  std::string_view line;
  while (next(line)) {
    auto frames = ing.push_line(line);
    r.frames.insert(r.frames.end(), frames.begin(), frames.end());
  }
  auto tail = ing.finish();
  r.frames.insert(r.frames.end(), tail.begin(), tail.end());
  r.schema = ing.schema();
  r.gaps = ing.gaps();
  r.rows = ing.rows();
  r.malformed = ing.malformed();
  return r;
}

}  // namespace

IngestResult ingest_text(std::string_view text, const ResampleOptions& options) {
  StreamIngestor ing(options, true);
  std::size_t pos = 0;
  return drain(ing, [&](std::string_view& line) {
    if (pos >= text.size()) return false;
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    line = text.substr(pos, end - pos);
    pos = end + 1;
    return true;
  });
}

IngestResult ingest_file(const std::filesystem::path& path, const ResampleOptions& options) {
  const std::string text = model::read_text_file(path);
  try {
    return ingest_text(text, options);
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

IngestResult ingest_stream(std::istream& in, const ResampleOptions& options) {
  StreamIngestor ing(options, false);
  std::string buffer;
  return drain(ing, [&](std::string_view& line) {
    if (!std::getline(in, buffer)) return false;
    line = buffer;
    return true;
  });
}

std::string format_frames(const FrameSchema& schema, std::span<const KinodynamicFrame> frames) {
  std::vector<std::pair<Group, int>> cols;
  for (const auto& name : schema.names())
    if (name != "t") cols.push_back(*lookup_column(name));
  std::string out = schema.header() + "\n";
  for (const auto& f : frames) {
    out += fmt::format("{}", f.time);
    for (const auto& [g, s] : cols) {
      out += ',';
      auto cell = [&](const auto& opt) {
        if (opt) out += fmt::format("{}", (*opt)[s]);
      };
      switch (g) {
        case Group::Q: out += fmt::format("{}", f.q[s]); break;
        case Group::Base: cell(f.base); break;
        case Group::Cop: cell(f.cop); break;
        case Group::Grf: cell(f.grf); break;
        case Group::Grm: cell(f.grm); break;
        case Group::Wrench: cell(f.wrench); break;
        case Group::Emg: cell(f.emg); break;
      }
    }
    out += '\n';
  }
  return out;
}

}  // namespace ergo::pipeline
