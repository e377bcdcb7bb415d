#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "ergo/session.hpp"

namespace ergo::pipeline {

/// Structured report: JSON with sorted keys and two-space indentation.
/// Numbers use the shortest form that reads back to the same double.
std::string report_to_json(const SessionReport& report);

/// Human-readable report rendered from the structured one, so a stored
/// report re-renders to the same text.
std::string render_text(std::string_view report_json);

/// Per-condition polar-plot records:
/// subject,condition,window_start,window_end,index,joint,max,rms
std::string render_polar_csv(std::string_view report_json);

/// Writes whichever outputs are configured; paths are used as given.
void write_outputs(const SessionReport& report, const OutputSpec& outputs);

/// Stats section alone, as JSON and as text.
std::string stats_to_json(const std::vector<StatsEntry>& entries);
std::string render_stats_text(std::string_view stats_json);

/// Per-frame stream output: time, then every index at every joint
/// (empty when missing), then the dynamics-valid flag.
std::string frame_csv_header();
std::string frame_csv_line(const FrameResult& r);

void write_text_file(const std::filesystem::path& path, std::string_view content);

}  // namespace ergo::pipeline
