// Command-line front end: calibrate, analyze, stream, stats, report.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "ergo/calibration.hpp"
#include "ergo/ingest.hpp"
#include "ergo/model_io.hpp"
#include "ergo/profile.hpp"
#include "ergo/report.hpp"
#include "ergo/session.hpp"
#include "line_source.hpp"

namespace fs = std::filesystem;
using namespace ergo;
using namespace ergo::pipeline;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

void warn(const std::string& msg) { fmt::print(stderr, "warning: {}\n", msg); }

// ---------------------------------------------------------------------------
// Shared flags

struct CommonFlags {
  std::string profile;
  std::string config;
  std::string mode;
  double rate = 0.0;  // 0: keep the config or default value
  std::string thresholds;
  std::string out;
};

void add_common(CLI::App* app, CommonFlags& f) {
  app->add_option("--profile", f.profile, "Subject profile (JSON)");
  app->add_option("--config", f.config, "Session configuration (JSON)");
  app->add_option("--mode", f.mode, "Task mode: load-estimation, measured-wrench or light-tool");
  app->add_option("--rate", f.rate, "Pipeline rate [Hz]");
  app->add_option("--thresholds", f.thresholds, "Risk thresholds as 'yellow,red'");
  app->add_option("--out", f.out, "Output path");
}

indexes::Thresholds parse_thresholds(const std::string& text) {
  const auto comma = text.find(',');
  if (comma == std::string::npos) throw ValidationError("--thresholds expects 'yellow,red'");
  indexes::Thresholds t;
  try {
    std::size_t used = 0;
    t.yellow = std::stod(text.substr(0, comma), &used);
    if (used != comma) throw std::invalid_argument("trailing");
    const auto rest = text.substr(comma + 1);
    t.red = std::stod(rest, &used);
    if (used != rest.size()) throw std::invalid_argument("trailing");
  } catch (const std::logic_error&) {
    throw ValidationError("--thresholds expects two numbers 'yellow,red'");
  }
  t.validate();
  return t;
}

indexes::ActionWindow parse_window(const std::string& text) {
  const auto a = text.find(':');
  const auto b = a == std::string::npos ? a : text.find(':', a + 1);
  if (b == std::string::npos) throw ValidationError("--window expects 'start:end:label', got '" + text + "'");
  try {
    return {std::stod(text.substr(0, a)), std::stod(text.substr(a + 1, b - a - 1)), text.substr(b + 1)};
  } catch (const std::logic_error&) {
    throw ValidationError("--window expects numeric start and end, got '" + text + "'");
  }
}

struct SessionFlags {
  std::string frames;
  std::string emg;
  std::string subject;
  std::vector<std::string> windows;
  double tool_mass = -1.0;
  double heading = 0.0;
  bool heading_set = false;
};

/// Session from --config, or an ad-hoc single trial from the flags; the
/// shared flags override the configuration.
SessionConfig build_session(const CommonFlags& c, const SessionFlags& s, bool need_frames) {
  SessionConfig cfg;
  if (!c.config.empty()) {
    cfg = SessionConfig::load(c.config);
    if (!c.profile.empty()) {
      for (auto& t : cfg.trials) t.profile = fs::absolute(c.profile);
    }
  } else {
    if (c.profile.empty()) throw ValidationError("either --config or --profile is required");
    if (need_frames && s.frames.empty()) throw ValidationError("--frames is required without --config");
    cfg.base_dir = fs::current_path();
    TrialSpec t;
    t.subject = s.subject;
    t.profile = c.profile;
    t.frames = s.frames.empty() ? "-" : s.frames;
    if (!s.emg.empty()) t.emg = s.emg;
    for (const auto& w : s.windows) t.windows.push_back(parse_window(w));
    if (t.windows.empty()) t.windows.push_back({0.0, 1e9, "all"});
    cfg.trials.push_back(std::move(t));
  }
  if (!c.mode.empty()) cfg.mode = parse_task_mode(c.mode);
  if (c.rate != 0.0) cfg.rate = c.rate;
  if (!c.thresholds.empty()) cfg.thresholds = parse_thresholds(c.thresholds);
  if (s.tool_mass >= 0.0) cfg.tool_mass = s.tool_mass;
  if (s.heading_set) cfg.heading = s.heading;
  return cfg;
}

/// With --out DIR every output goes to DIR; otherwise the configured
/// outputs are used, resolved against the config directory.
OutputSpec resolve_outputs(const SessionConfig& cfg, const std::string& out) {
  OutputSpec o;
  if (!out.empty()) {
    o.report = fs::path(out) / "report.json";
    o.text = fs::path(out) / "report.txt";
    o.polar = fs::path(out) / "polar.csv";
    return o;
  }
  if (cfg.outputs.report) o.report = cfg.resolve(*cfg.outputs.report);
  if (cfg.outputs.text) o.text = cfg.resolve(*cfg.outputs.text);
  if (cfg.outputs.polar) o.polar = cfg.resolve(*cfg.outputs.polar);
  return o;
}

bool has_outputs(const OutputSpec& o) { return o.report || o.text || o.polar; }

// ---------------------------------------------------------------------------
// calibrate

struct CalibrateFlags {
  std::string id, gender = "unspecified";
  double mass = 0.0, height = 0.0;
  std::string model, limits;
  std::string static_trial, dynamic_trial, force_trial, met, torque_exp, mvc;
  double heading = 0.0;
  double static_speed = 0.05, static_duration = 0.5;
  double band = 0.2;
  double recovery_ratio = 0.4, threshold_fraction = 0.1;
};

/// Lines of whitespace-separated fields; '#' starts a comment.
std::vector<std::vector<std::string>> read_table(const fs::path& path, std::size_t fields) {
  std::istringstream in(model::read_text_file(path));
  std::vector<std::vector<std::string>> rows;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ls(line);
    std::vector<std::string> row;
    for (std::string f; ls >> f;) row.push_back(f);
    if (row.empty()) continue;
    if (row.size() != fields)
      throw ValidationError(fmt::format("{}:{}: expected {} fields, got {}", path.string(), number, fields, row.size()));
    rows.push_back(std::move(row));
  }
  return rows;
}

double table_number(const std::string& s, const fs::path& path) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size() && std::isfinite(v)) return v;
  } catch (const std::logic_error&) {
  }
  throw ValidationError(fmt::format("{}: '{}' is not a number", path.string(), s));
}

int joint_index(const std::string& name, const fs::path& path) {
  for (int j = 0; j < kNumJoints; ++j)
    if (kJointNames[static_cast<std::size_t>(j)] == name) return j;
  throw ValidationError(fmt::format("{}: unknown joint '{}'", path.string(), name));
}

std::vector<KinodynamicFrame> load_trial(const std::string& path, double rate) {
  auto r = ingest_file(path, ResampleOptions{rate, 5});
  for (const auto& g : r.gaps)
    warn(fmt::format("{}: gap in {} from {} s to {} s", path, g.channel, g.start, g.end));
  return std::move(r.frames);
}

int run_calibrate(const CommonFlags& c, const CalibrateFlags& f) {
  if (c.out.empty()) throw ValidationError("calibrate needs --out for the profile file");
  const double rate = c.rate != 0.0 ? c.rate : 60.0;
  if (!(rate > 0.0)) throw ValidationError("--rate must be positive");
  const SagittalProjection projection{f.heading};

  SubjectProfile p;
  if (!c.profile.empty()) p = load_profile(c.profile);
  if (!f.id.empty()) p.id = f.id;
  if (f.mass > 0.0) p.mass = f.mass;
  if (f.height > 0.0) p.height = f.height;
  if (!f.gender.empty() && (c.profile.empty() || f.gender != "unspecified")) p.gender = f.gender;
  if (p.id.empty()) throw ValidationError("calibrate needs --id");
  if (!(p.mass > 0.0) || !(p.height > 0.0)) throw ValidationError("calibrate needs positive --mass and --height");

  if (!f.model.empty()) p.body = model::load_model(f.model);
  else if (!p.body) p.body = model::scaled_model(model::BsipTable::defaults(), p.mass, p.height, p.id);
  const auto& body = *p.body;

  const model::JointLimits limits =
      f.limits.empty() ? model::JointLimits::defaults() : model::JointLimits::parse(model::read_text_file(f.limits));
  if (!p.q_min) p.q_min = limits.q_min;
  if (!p.q_max) p.q_max = limits.q_max;

  if (!f.static_trial.empty()) {
    const auto frames = load_trial(f.static_trial, rate);
    calibration::StaticPoseOptions so{f.static_speed, f.static_duration};
    const auto poses = calibration::detect_static_poses(frames, rate, body.base_height, projection, so);
    fmt::print(stderr, "static trial: {} static poses\n", poses.size());
    if (poses.empty()) throw ValidationError(f.static_trial + ": no static poses found");
    const auto fit = calibration::fit_sesc(body.model, poses);
    fmt::print(stderr, "SESC fit: residual {:.3g} m, condition {:.3g}{}\n", fit.residual_rms, fit.condition,
               fit.vertical_offset_fixed ? ", vertical offset taken from the model" : "");
    p.sesc = fit.params;
    p.neutral = calibration::register_neutral(body.model, fit.params, poses.front().cfg);
  }

  if (!f.dynamic_trial.empty()) {
    if (!p.sesc || !p.neutral) throw ValidationError("--dynamic needs a SESC fit (--static or an existing profile)");
    const auto frames = load_trial(f.dynamic_trial, rate);
    const auto states = calibration::trial_configurations(frames, rate, body.base_height);
    auto k = calibration::extract_kinematic_maxima(body.model, *p.sesc, p.neutral->com_z, states);
    for (const auto& name : k.unexcited) {
      const int j = joint_index(name, f.dynamic_trial);
      warn(fmt::format("joint {} was not excited by the dynamic trial; using the literature speed limit", name));
      k.qd_max[j] = limits.qd_max[j];
      k.qdd_max[j] = 2.0 * M_PI * limits.qd_max[j];
    }
    if (!(k.com_range > 0.0)) throw ValidationError(f.dynamic_trial + ": the centre of mass did not move vertically");
    p.qd_max = k.qd_max;
    p.qdd_max = k.qdd_max;
    p.com_range = k.com_range;
  }

  JointVector torque_max = limits.torque_max;
  if (!f.torque_exp.empty()) {
    JointVector exp = limits.torque_max;
    std::vector<bool> seen(kNumJoints, false);
    for (const auto& row : read_table(f.torque_exp, 2)) {
      const int j = joint_index(row[0], f.torque_exp);
      exp[j] = table_number(row[1], f.torque_exp);
      seen[static_cast<std::size_t>(j)] = true;
    }
    for (int j = 0; j < kNumJoints; ++j)
      if (!seen[static_cast<std::size_t>(j)])
        warn(fmt::format("no experimental torque for {}; using the literature value", kJointNames[static_cast<std::size_t>(j)]));
    torque_max = calibration::resolve_torque_maxima(exp, limits.torque_max, f.band);
  }
  if (!p.torque_max || !f.torque_exp.empty()) p.torque_max = torque_max;

  if (!f.met.empty()) {
    std::array<std::vector<calibration::MetObservation>, kNumJoints> obs;
    for (const auto& row : read_table(f.met, 3)) {
      const int j = joint_index(row[0], f.met);
      obs[static_cast<std::size_t>(j)].push_back({table_number(row[1], f.met), table_number(row[2], f.met)});
    }
    const auto fit = calibration::fit_fatigue_params(obs, *p.torque_max, {f.recovery_ratio, f.threshold_fraction});
    for (int j = 0; j < kNumJoints; ++j)
      fmt::print(stderr, "MET fit {}: residual {:.3g} s\n", kJointNames[static_cast<std::size_t>(j)], fit.residual_rms[j]);
    p.fatigue = fit.calibration;
  }

  if (!f.force_trial.empty()) {
    const auto frames = load_trial(f.force_trial, rate);
    p.compressive_max = calibration::extract_force_maxima(body.model, frames, rate, body.base_height, projection);
  }

  if (!f.mvc.empty()) {
    const auto track = EmgTrack::from_raw_file(f.mvc, MuscleVector::Ones());
    MuscleVector peak = MuscleVector::Zero();
    for (const auto& a : track.activation()) peak = peak.cwiseMax(a);
    for (int m = 0; m < kNumMuscles; ++m)
      if (!(peak[m] > 0.0))
        throw ValidationError(fmt::format("{}: muscle {} shows no activity", f.mvc, kMuscleNames[static_cast<std::size_t>(m)]));
    p.mvc = peak;
  }

  p.validate();
  save_profile(p, c.out);
  const TaskMode mode = c.mode.empty() ? TaskMode::LoadEstimation : parse_task_mode(c.mode);
  const auto missing = p.missing_fields(mode);
  if (!missing.empty()) {
    std::string list;
    for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
    warn(fmt::format("profile is incomplete for {} sessions; missing: {}", to_string(mode), list));
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// analyze

int run_analyze(const CommonFlags& c, const SessionFlags& s, bool with_stats) {
  SessionConfig cfg = build_session(c, s, true);
  if (with_stats) cfg.stats.enabled = true;
  const auto outputs = resolve_outputs(cfg, c.out);
  const auto report = run_session(cfg);
  if (has_outputs(outputs)) write_outputs(report, outputs);
  else std::cout << render_text(report_to_json(report));
  return kExitOk;
}

// ---------------------------------------------------------------------------
// stream

struct StreamFlags {
  int listen_port = 0;
  std::string frames_out;
  std::size_t trial = 0;
};

int run_stream(const CommonFlags& c, const SessionFlags& s, const StreamFlags& sf) {
  SessionConfig cfg = build_session(c, s, false);
  cfg.validate(false);
  if (sf.trial >= cfg.trials.size()) throw ValidationError(fmt::format("--trial {} is out of range", sf.trial));
  const TrialSpec trial = cfg.trials[sf.trial];
  const auto outputs = resolve_outputs(cfg, c.out);

  SessionReport report;
  report.config_sha256 = sha256_hex(cfg.canonical_json());
  report.software_version = ERGO_VERSION;
  report.mode = cfg.mode;
  report.rate = cfg.rate;
  report.thresholds = cfg.thresholds;

  TrialSession session(cfg, trial, false);

  std::unique_ptr<std::ofstream> file_out;
  std::ostream* frames_out = nullptr;
  if (sf.frames_out == "-") {
    frames_out = &std::cout;
  } else if (!sf.frames_out.empty()) {
    file_out = std::make_unique<std::ofstream>(sf.frames_out);
    if (!*file_out) throw RuntimeError("cannot write '" + sf.frames_out + "'");
    frames_out = file_out.get();
  }
  if (frames_out) *frames_out << frame_csv_header() << '\n';
  auto emit = [&](const std::vector<FrameResult>& results) {
    if (!frames_out) return;
    for (const auto& r : results) *frames_out << frame_csv_line(r) << '\n';
  };

  std::unique_ptr<cli::LineSource> source;
  if (sf.listen_port > 0) {
    fmt::print(stderr, "listening on port {}\n", sf.listen_port);
    source = cli::listen_tcp(static_cast<std::uint16_t>(sf.listen_port));
  } else {
    std::ios::sync_with_stdio(false);
    source = std::make_unique<cli::StreamLineSource>(std::cin);
  }

  using Clock = std::chrono::steady_clock;
  const auto started = Clock::now();
  double worst = 0.0;
  int exit_code = kExitOk;
  std::string line;
  try {
    while (source->next(line)) {
      const auto t0 = Clock::now();
      emit(session.push_line(line));
      worst = std::max(worst, std::chrono::duration<double>(Clock::now() - t0).count());
    }
    std::vector<FrameResult> tail;
    report.trials.push_back(session.finish(&tail));
    emit(tail);
  } catch (const StreamReset& e) {
    fmt::print(stderr, "error: stream reset: {}; writing a partial report\n", e.what());
    report.trials.push_back(session.abort(e.what()));
    exit_code = kExitRuntime;
  }
  if (frames_out) frames_out->flush();

  const double elapsed = std::chrono::duration<double>(Clock::now() - started).count();
  const auto& proc = session.processor();
  fmt::print(stderr, "frames in {} out {}, malformed {}, wall {:.3f} s, {:.0f} frames/s, worst record {:.3g} ms, lag {:.3g} s\n",
             proc.frames_in(), proc.frames_out(), report.trials.back().malformed, elapsed,
             elapsed > 0.0 ? static_cast<double>(proc.frames_in()) / elapsed : 0.0, worst * 1e3,
             proc.latency_seconds());

  if (has_outputs(outputs)) write_outputs(report, outputs);
  else if (!frames_out || frames_out != &std::cout) std::cout << render_text(report_to_json(report));
  return exit_code;
}

// ---------------------------------------------------------------------------
// stats

struct StatsFlags {
  std::vector<std::string> inputs;
  std::string factor = "label";
  std::string separator = "/";
  std::string measure = "max";
  std::string sphericity = "none";
  std::string correction = "none";
  double alpha = 0.05;
  std::vector<std::string> indexes;
};

/// Long table: subject,condition,value or subject,condition,index,joint,value
/// (a max/rms pair may replace value).
std::vector<StatsRecord> records_from_csv(const fs::path& path, bool use_rms) {
  std::istringstream in(model::read_text_file(path));
  std::string line;
  std::vector<std::string> header;
  std::vector<StatsRecord> out;
  std::size_t number = 0;
  auto split = [](const std::string& s) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ss(s);
    while (std::getline(ss, cell, ',')) {
      const auto b = cell.find_first_not_of(" \t\r");
      const auto e = cell.find_last_not_of(" \t\r");
      cells.push_back(b == std::string::npos ? "" : cell.substr(b, e - b + 1));
    }
    return cells;
  };
  std::map<std::string, std::size_t> col;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty() || line[0] == '#' || line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = split(line);
    if (header.empty()) {
      header = cells;
      for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
      for (const char* need : {"subject", "condition"})
        if (!col.count(need)) throw ValidationError(fmt::format("{}: header needs a '{}' column", path.string(), need));
      continue;
    }
    if (cells.size() != header.size())
      throw ValidationError(fmt::format("{}:{}: expected {} fields, got {}", path.string(), number, header.size(), cells.size()));
    StatsRecord r;
    r.subject = cells[col["subject"]];
    r.label = cells[col["condition"]];
    r.index = col.count("index") ? cells[col["index"]] : "value";
    r.joint = col.count("joint") ? cells[col["joint"]] : "-";
    const char* value_col = col.count("value") ? "value" : (use_rms ? "rms" : "max");
    if (!col.count(value_col))
      throw ValidationError(fmt::format("{}: header needs a 'value', 'max' or 'rms' column", path.string()));
    r.value = table_number(cells[col[value_col]], path);
    out.push_back(std::move(r));
  }
  if (header.empty()) throw ValidationError(path.string() + ": table is empty");
  return out;
}

std::vector<StatsRecord> records_from_report(const fs::path& path, bool use_rms) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(model::read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  if (j.value("format", std::string()) != "ergo-report/1") throw ValidationError(path.string() + ": not an ergo report");
  std::vector<StatsRecord> out;
  for (const auto& t : j.at("trials")) {
    for (const auto& w : t.at("windows")) {
      for (const auto& [index, joints] : w.at("indexes").items()) {
        for (auto jn : kJointNames) {
          const std::string name(jn);
          if (!joints.contains(name)) continue;
          const bool body = index == "w7";  // one value for the whole body
          out.push_back({t.at("subject").get<std::string>(), w.at("label").get<std::string>(), index,
                         body ? "body" : name, joints[name].at(use_rms ? "rms" : "max").get<double>()});
          if (body) break;
        }
      }
    }
  }
  return out;
}

int run_stats(const CommonFlags& c, const StatsFlags& f) {
  StatsSpec spec;
  spec.enabled = true;
  if (f.factor == "label") spec.factor = ConditionFactor::Label;
  else if (f.factor == "prefix") spec.factor = ConditionFactor::Prefix;
  else throw ValidationError("--factor must be 'label' or 'prefix'");
  if (f.separator.size() != 1) throw ValidationError("--separator must be one character");
  spec.separator = f.separator[0];
  if (f.measure != "max" && f.measure != "rms") throw ValidationError("--measure must be 'max' or 'rms'");
  spec.use_rms = f.measure == "rms";
  if (!(f.alpha > 0.0 && f.alpha < 1.0)) throw ValidationError("--alpha must lie in (0, 1)");
  spec.anova.alpha = f.alpha;
  if (f.sphericity == "none") spec.anova.sphericity = stats::SphericityCorrection::None;
  else if (f.sphericity == "greenhouse-geisser") spec.anova.sphericity = stats::SphericityCorrection::GreenhouseGeisser;
  else throw ValidationError("--sphericity must be 'none' or 'greenhouse-geisser'");
  if (f.correction == "none") spec.correction = stats::MultipleComparison::None;
  else if (f.correction == "bonferroni") spec.correction = stats::MultipleComparison::Bonferroni;
  else if (f.correction == "holm") spec.correction = stats::MultipleComparison::Holm;
  else throw ValidationError("--correction must be 'none', 'bonferroni' or 'holm'");

  std::vector<StatsRecord> records;
  for (const auto& in : f.inputs) {
    const fs::path p(in);
    auto r = p.extension() == ".json" ? records_from_report(p, spec.use_rms) : records_from_csv(p, spec.use_rms);
    records.insert(records.end(), r.begin(), r.end());
  }
  if (!f.indexes.empty()) {
    std::erase_if(records, [&](const StatsRecord& r) {
      return std::find(f.indexes.begin(), f.indexes.end(), r.index) == f.indexes.end();
    });
  }
  if (records.empty()) throw ValidationError("no observations to analyse");

  const auto entries = compute_stats(records, spec);
  const std::string js = stats_to_json(entries);
  if (!c.out.empty()) {
    write_text_file(fs::path(c.out) / "stats.json", js);
    write_text_file(fs::path(c.out) / "stats.txt", render_stats_text(js));
  } else {
    std::cout << render_stats_text(js);
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// report

int run_report(const CommonFlags& c, const std::string& input, const std::string& format) {
  const std::string js = model::read_text_file(input);
  if (!c.out.empty()) {
    write_text_file(fs::path(c.out) / "report.txt", render_text(js));
    write_text_file(fs::path(c.out) / "polar.csv", render_polar_csv(js));
    return kExitOk;
  }
  if (format == "text") std::cout << render_text(js);
  else if (format == "polar") std::cout << render_polar_csv(js);
  else throw ValidationError("--format must be 'text' or 'polar'");
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Ergonomic risk indexes from whole-body kinematics and dynamics"};
  app.set_version_flag("--version", std::string(ERGO_VERSION));
  app.require_subcommand(1);

  CommonFlags common;
  SessionFlags session;
  CalibrateFlags cal;
  StreamFlags stream;
  StatsFlags st;
  std::string report_input, report_format = "text";
  bool with_stats = false;

  auto* calibrate = app.add_subcommand("calibrate", "Fit a subject profile from calibration trials");
  add_common(calibrate, common);
  calibrate->add_option("--id", cal.id, "Subject identifier");
  calibrate->add_option("--mass", cal.mass, "Body mass [kg]");
  calibrate->add_option("--height", cal.height, "Stature [m]");
  calibrate->add_option("--gender", cal.gender, "Gender label");
  calibrate->add_option("--model", cal.model, "Model file (default: scaled from the built-in table)");
  calibrate->add_option("--limits", cal.limits, "Joint limits file (default: built-in literature table)");
  calibrate->add_option("--static", cal.static_trial, "Static-pose trial for the SESC fit");
  calibrate->add_option("--dynamic", cal.dynamic_trial, "Maximal-motion trial for speed and CoM ranges");
  calibrate->add_option("--force", cal.force_trial, "Maximal-exertion trial with hand wrench");
  calibrate->add_option("--met", cal.met, "Endurance table: joint load[N m] endurance[s]");
  calibrate->add_option("--torque-exp", cal.torque_exp, "Experimental torque maxima: joint value[N m]");
  calibrate->add_option("--mvc", cal.mvc, "Raw sEMG recording of maximal contractions");
  calibrate->add_option("--heading", cal.heading, "Sagittal plane heading [rad]");
  calibrate->add_option("--static-speed", cal.static_speed, "Static-pose speed bound [rad/s]");
  calibrate->add_option("--static-duration", cal.static_duration, "Minimum static-pose duration [s]");
  calibrate->add_option("--torque-band", cal.band, "Relative band for accepting experimental torque maxima");
  calibrate->add_option("--recovery-ratio", cal.recovery_ratio, "Recovery rate as a fraction of the fatigue rate");
  calibrate->add_option("--threshold-fraction", cal.threshold_fraction, "Fatigue threshold as a fraction of the torque maximum");

  auto add_session = [&](CLI::App* sub) {
    add_common(sub, common);
    sub->add_option("--frames", session.frames, "Frame file");
    sub->add_option("--emg", session.emg, "Raw sEMG file");
    sub->add_option("--subject", session.subject, "Subject label in the report");
    sub->add_option("--window", session.windows, "Action window 'start:end:label' (repeatable)");
    sub->add_option("--tool-mass", session.tool_mass, "Tool mass for light-tool mode [kg]");
    sub->add_option("--heading", session.heading, "Sagittal plane heading [rad]")->each([&](const std::string&) {
      session.heading_set = true;
    });
  };
  auto* analyze = app.add_subcommand("analyze", "Batch session over recorded files");
  add_session(analyze);
  analyze->add_flag("--stats", with_stats, "Compute statistics across trials");

  auto* streamcmd = app.add_subcommand("stream", "Live session from stdin or a TCP socket");
  add_session(streamcmd);
  streamcmd->add_option("--listen", stream.listen_port, "TCP port to accept one client on")->check(CLI::Range(1, 65535));
  streamcmd->add_option("--frames-out", stream.frames_out, "Per-frame index CSV ('-' for stdout)");
  streamcmd->add_option("--trial", stream.trial, "Trial of the configuration to run");

  auto* statscmd = app.add_subcommand("stats", "Repeated-measures ANOVA and paired t tests");
  add_common(statscmd, common);
  statscmd->add_option("inputs", st.inputs, "Long CSV tables or stored reports")->required();
  statscmd->add_option("--factor", st.factor, "Condition from the full label or its prefix");
  statscmd->add_option("--separator", st.separator, "Prefix separator");
  statscmd->add_option("--measure", st.measure, "Window aggregate: max or rms");
  statscmd->add_option("--alpha", st.alpha, "Significance level");
  statscmd->add_option("--sphericity", st.sphericity, "none or greenhouse-geisser");
  statscmd->add_option("--correction", st.correction, "Post-hoc correction: none, bonferroni or holm");
  statscmd->add_option("--index", st.indexes, "Restrict to these indexes (repeatable)");

  auto* reportcmd = app.add_subcommand("report", "Re-render a stored report");
  add_common(reportcmd, common);
  reportcmd->add_option("input", report_input, "report.json")->required();
  reportcmd->add_option("--format", report_format, "text or polar");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (*calibrate) return run_calibrate(common, cal);
    if (*analyze) return run_analyze(common, session, with_stats);
    if (*streamcmd) return run_stream(common, session, stream);
    if (*statscmd) return run_stats(common, st);
    if (*reportcmd) return run_report(common, report_input, report_format);
  } catch (const ValidationError& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitValidation;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitRuntime;
  }
  return kExitRuntime;
}
