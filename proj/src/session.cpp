#include "ergo/session.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <fmt/format.h>
#include <json.hpp>
#include <openssl/evp.h>

#include "text_format.hpp"

namespace ergo::pipeline {

using nlohmann::json;
using indexes::IndexId;

// ---------------------------------------------------------------------------
// Hashing

Sha256::Sha256() : ctx_(EVP_MD_CTX_new()) {
  if (!ctx_ || EVP_DigestInit_ex(static_cast<EVP_MD_CTX*>(ctx_), EVP_sha256(), nullptr) != 1)
    throw RuntimeError("cannot initialise SHA-256");
}

Sha256::~Sha256() { EVP_MD_CTX_free(static_cast<EVP_MD_CTX*>(ctx_)); }

void Sha256::update(std::string_view bytes) {
  EVP_DigestUpdate(static_cast<EVP_MD_CTX*>(ctx_), bytes.data(), bytes.size());
}

std::string Sha256::hex() {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int n = 0;
  EVP_DigestFinal_ex(static_cast<EVP_MD_CTX*>(ctx_), md, &n);
  std::string out;
  for (unsigned int i = 0; i < n; ++i) out += fmt::format("{:02x}", md[i]);
  return out;
}

std::string sha256_hex(std::string_view bytes) {
  Sha256 h;
  h.update(bytes);
  return h.hex();
}

// ---------------------------------------------------------------------------
// Configuration

namespace {

void reject_unknown(const json& o, std::initializer_list<std::string_view> known, const std::string& where) {
  for (const auto& [key, _] : o.items())
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw ValidationError("unknown " + where + " field '" + key + "'");
}

IndexId parse_index(const std::string& s) {
  for (int i = 0; i < indexes::kNumIndexes; ++i)
    if (indexes::kIndexLabels[static_cast<std::size_t>(i)] == s) return indexes::index_at(i);
  throw ValidationError("unknown index '" + s + "' (expected w1..w8)");
}

std::string_view correction_name(stats::MultipleComparison c) {
  switch (c) {
    case stats::MultipleComparison::None: return "none";
    case stats::MultipleComparison::Bonferroni: return "bonferroni";
    case stats::MultipleComparison::Holm: return "holm";
  }
  return "none";
}

}  // namespace

std::filesystem::path SessionConfig::resolve(const std::filesystem::path& p) const {
  if (p.empty() || p == "-" || p.is_absolute() || base_dir.empty()) return p;
  return base_dir / p;
}

ProcessorOptions SessionConfig::processor_options(const TrialSpec& trial) const {
  ProcessorOptions o;
  o.mode = mode;
  o.rate = rate;
  o.thresholds = thresholds;
  o.projection.heading = heading;
  o.tool_mass = trial.tool_mass.value_or(tool_mass);
  o.differentiator = differentiator;
  o.load.static_speed = static_speed;
  return o;
}

SessionConfig SessionConfig::from_json(std::string_view text, const std::filesystem::path& base_dir) {
  json o;
  try {
    o = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("session config is not valid JSON: ") + e.what());
  }
  if (!o.is_object()) throw ValidationError("session config must be a JSON object");
  reject_unknown(o,
                 {"format", "mode", "rate", "thresholds", "heading", "tool_mass", "differentiator", "max_gap_samples",
                  "static_speed", "trials", "stats", "outputs"},
                 "session");
  if (o.value("format", std::string()) != "ergo-session/1")
    throw ValidationError("session config format must be 'ergo-session/1'");

  SessionConfig c;
  c.base_dir = base_dir;
  try {
    if (o.contains("mode")) c.mode = parse_task_mode(o["mode"].get<std::string>());
    c.rate = o.value("rate", c.rate);
    if (o.contains("thresholds")) {
      const auto& t = o["thresholds"];
      reject_unknown(t, {"yellow", "red"}, "thresholds");
      c.thresholds.yellow = t.value("yellow", c.thresholds.yellow);
      c.thresholds.red = t.value("red", c.thresholds.red);
    }
    c.heading = o.value("heading", 0.0);
    c.tool_mass = o.value("tool_mass", 0.0);
    if (o.contains("differentiator")) {
      const auto& d = o["differentiator"];
      reject_unknown(d, {"window", "order"}, "differentiator");
      c.differentiator.window = d.value("window", c.differentiator.window);
      c.differentiator.order = d.value("order", c.differentiator.order);
    }
    c.max_gap_samples = o.value("max_gap_samples", c.max_gap_samples);
    c.static_speed = o.value("static_speed", c.static_speed);

    for (const auto& t : o.at("trials")) {
      reject_unknown(t, {"subject", "profile", "frames", "emg", "tool_mass", "windows"}, "trial");
      TrialSpec tr;
      tr.subject = t.value("subject", std::string());
      tr.profile = t.at("profile").get<std::string>();
      tr.frames = t.at("frames").get<std::string>();
      if (t.contains("emg")) tr.emg = t["emg"].get<std::string>();
      if (t.contains("tool_mass")) tr.tool_mass = t["tool_mass"].get<double>();
      for (const auto& w : t.value("windows", json::array())) {
        reject_unknown(w, {"start", "end", "label"}, "window");
        tr.windows.push_back({w.at("start").get<double>(), w.at("end").get<double>(), w.at("label").get<std::string>()});
      }
      c.trials.push_back(std::move(tr));
    }

    if (o.contains("stats")) {
      const auto& s = o["stats"];
      reject_unknown(s, {"factor", "separator", "indexes", "measure", "alpha", "sphericity", "correction"}, "stats");
      c.stats.enabled = true;
      const auto factor = s.value("factor", std::string("label"));
      if (factor == "label") c.stats.factor = ConditionFactor::Label;
      else if (factor == "prefix") c.stats.factor = ConditionFactor::Prefix;
      else throw ValidationError("stats factor must be 'label' or 'prefix'");
      const auto sep = s.value("separator", std::string("/"));
      if (sep.size() != 1) throw ValidationError("stats separator must be one character");
      c.stats.separator = sep[0];
      for (const auto& i : s.value("indexes", json::array())) c.stats.indexes.push_back(parse_index(i.get<std::string>()));
      const auto measure = s.value("measure", std::string("max"));
      if (measure != "max" && measure != "rms") throw ValidationError("stats measure must be 'max' or 'rms'");
      c.stats.use_rms = measure == "rms";
      c.stats.anova.alpha = s.value("alpha", 0.05);
      const auto sph = s.value("sphericity", std::string("none"));
      if (sph == "none") c.stats.anova.sphericity = stats::SphericityCorrection::None;
      else if (sph == "greenhouse-geisser") c.stats.anova.sphericity = stats::SphericityCorrection::GreenhouseGeisser;
      else throw ValidationError("stats sphericity must be 'none' or 'greenhouse-geisser'");
      const auto corr = s.value("correction", std::string("none"));
      if (corr == "none") c.stats.correction = stats::MultipleComparison::None;
      else if (corr == "bonferroni") c.stats.correction = stats::MultipleComparison::Bonferroni;
      else if (corr == "holm") c.stats.correction = stats::MultipleComparison::Holm;
      else throw ValidationError("stats correction must be 'none', 'bonferroni' or 'holm'");
    }

    if (o.contains("outputs")) {
      const auto& out = o["outputs"];
      reject_unknown(out, {"report", "text", "polar"}, "outputs");
      if (out.contains("report")) c.outputs.report = out["report"].get<std::string>();
      if (out.contains("text")) c.outputs.text = out["text"].get<std::string>();
      if (out.contains("polar")) c.outputs.polar = out["polar"].get<std::string>();
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed session config: ") + e.what());
  }
  return c;
}

SessionConfig SessionConfig::load(const std::filesystem::path& path) {
  try {
    return from_json(model::read_text_file(path), path.parent_path());
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

std::string SessionConfig::canonical_json() const {
  json o;
  o["format"] = "ergo-session/1";
  o["mode"] = std::string(to_string(mode));
  o["rate"] = rate;
  o["thresholds"] = {{"yellow", thresholds.yellow}, {"red", thresholds.red}};
  o["heading"] = heading;
  o["tool_mass"] = tool_mass;
  o["differentiator"] = {{"window", differentiator.window}, {"order", differentiator.order}};
  o["max_gap_samples"] = max_gap_samples;
  o["static_speed"] = static_speed;
  json trials_json = json::array();
  for (const auto& t : trials) {
    json tj{{"subject", t.subject}, {"profile", t.profile.generic_string()}, {"frames", t.frames.generic_string()}};
    if (t.emg) tj["emg"] = t.emg->generic_string();
    if (t.tool_mass) tj["tool_mass"] = *t.tool_mass;
    json ws = json::array();
    for (const auto& w : t.windows) ws.push_back({{"start", w.start}, {"end", w.end}, {"label", w.label}});
    tj["windows"] = std::move(ws);
    trials_json.push_back(std::move(tj));
  }
  o["trials"] = std::move(trials_json);
  if (stats.enabled) {
    json idx = json::array();
    for (auto i : stats.indexes) idx.push_back(std::string(indexes::kIndexLabels[static_cast<std::size_t>(indexes::to_int(i))]));
    o["stats"] = {{"factor", stats.factor == ConditionFactor::Label ? "label" : "prefix"},
                  {"separator", std::string(1, stats.separator)},
                  {"indexes", idx},
                  {"measure", stats.use_rms ? "rms" : "max"},
                  {"alpha", stats.anova.alpha},
                  {"sphericity", stats.anova.sphericity == stats::SphericityCorrection::None ? "none" : "greenhouse-geisser"},
                  {"correction", std::string(correction_name(stats.correction))}};
  }
  return o.dump();
}

void SessionConfig::validate(bool check_files) const {
  if (!(rate > 0.0) || !std::isfinite(rate)) throw ValidationError("pipeline rate must be positive");
  thresholds.validate();
  differentiator.validate();
  if (!std::isfinite(heading)) throw ValidationError("heading must be finite");
  if (!(tool_mass >= 0.0)) throw ValidationError("tool mass must be nonnegative");
  if (!(static_speed > 0.0)) throw ValidationError("static speed must be positive");
  if (trials.empty()) throw ValidationError("session has no trials");
  if (!(stats.anova.alpha > 0.0 && stats.anova.alpha < 1.0)) throw ValidationError("alpha must lie in (0, 1)");
  for (const auto& t : trials) {
    const std::string name = t.subject.empty() ? t.frames.string() : t.subject;
    indexes::validate_windows(t.windows);
    if (t.tool_mass && !(*t.tool_mass >= 0.0)) throw ValidationError("trial " + name + ": tool mass must be nonnegative");
    if (!check_files) continue;
    auto exists = [&](const std::filesystem::path& p, const char* what) {
      if (p == "-") return;
      if (!std::filesystem::is_regular_file(resolve(p)))
        throw ValidationError(fmt::format("trial {}: {} file '{}' does not exist", name, what, resolve(p).string()));
    };
    exists(t.profile, "profile");
    exists(t.frames, "frames");
    if (t.emg) exists(*t.emg, "EMG");
  }
}

// ---------------------------------------------------------------------------
// sEMG

EmgTrack EmgTrack::from_raw(std::vector<double> time, const std::vector<MuscleVector>& raw, const MuscleVector& mvc,
                            const signal::EmgSpec& spec) {
  if (time.size() != raw.size()) throw ValidationError("EMG time and sample counts differ");
  if (time.size() < 2) throw ValidationError("EMG recording needs at least 2 samples");
  const double span = time.back() - time.front();
  const double dt = span / static_cast<double>(time.size() - 1);
  if (!(dt > 0.0)) throw ValidationError("EMG timestamps must increase");
  for (std::size_t k = 1; k < time.size(); ++k)
    if (std::abs(time[k] - time[k - 1] - dt) > 0.01 * dt)
      throw ValidationError(fmt::format("EMG sampling is not uniform near t = {} s", time[k]));
  signal::EmgSpec s = spec;
  s.band.sample_rate = 1.0 / dt;
  EmgTrack track;
  track.activation_ = signal::process_emg(raw, mvc, s);
  track.time_ = std::move(time);
  return track;
}

EmgTrack EmgTrack::from_raw_file(const std::filesystem::path& path, const MuscleVector& mvc,
                                 const signal::EmgSpec& spec) {
  const std::string text = model::read_text_file(path);
  std::vector<double> time;
  std::vector<MuscleVector> raw;
  std::size_t number = 0;
  bool header = false;
  std::size_t pos = 0;
  try {
    while (pos < text.size()) {
      auto end = text.find('\n', pos);
      if (end == std::string::npos) end = text.size();
      const auto line = detail::trim(std::string_view(text).substr(pos, end - pos));
      pos = end + 1;
      ++number;
      if (line.empty() || line.front() == '#') continue;
      const auto cells = detail::split(line, ',');
      if (!header) {
        std::string expected = "t";
        for (auto m : kMuscleNames) expected += "," + std::string(m);
        std::string got;
        for (std::size_t i = 0; i < cells.size(); ++i) got += (i ? "," : "") + std::string(detail::trim(cells[i]));
        if (got != expected)
          throw ValidationError(fmt::format("line {}: EMG header must be '{}'", number, expected));
        header = true;
        continue;
      }
      if (cells.size() != kNumMuscles + 1)
        throw ValidationError(fmt::format("line {}: expected {} fields, got {}", number, kNumMuscles + 1, cells.size()));
      time.push_back(detail::parse_double(detail::trim(cells[0]), number, "timestamp"));
      MuscleVector v;
      for (int m = 0; m < kNumMuscles; ++m)
        v[m] = detail::parse_double(detail::trim(cells[static_cast<std::size_t>(m + 1)]), number, "EMG sample");
      raw.push_back(v);
    }
    if (!header) throw ValidationError("EMG file is empty");
    return from_raw(std::move(time), raw, mvc, spec);
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

MuscleVector EmgTrack::at(double t) const {
  if (t <= time_.front()) return activation_.front();
  if (t >= time_.back()) return activation_.back();
  const auto it = std::upper_bound(time_.begin(), time_.end(), t);
  const auto k = static_cast<std::size_t>(it - time_.begin());
  const double w = (t - time_[k - 1]) / (time_[k] - time_[k - 1]);
  return activation_[k - 1] + w * (activation_[k] - activation_[k - 1]);
}

// ---------------------------------------------------------------------------
// Per-frame processing

TrialProcessor::TrialProcessor(const SubjectProfile& profile, ProcessorOptions options,
                               std::vector<indexes::ActionWindow> windows, std::shared_ptr<const EmgTrack> emg)
    : profile_(profile),
      options_(options),
      emg_(std::move(emg)),
      diff_(options.differentiator, options.rate, kNumJoints + 3) {
  profile_.validate();
  profile_.require(options_.mode);
  options_.thresholds.validate();
  if (options_.mode == TaskMode::LightTool && !(options_.tool_mass >= 0.0))
    throw ValidationError("tool mass must be nonnegative");
  indexes::validate_windows(windows);
  for (auto& w : windows) windows_.emplace_back(std::move(w));
}

void TrialProcessor::check_schema(const FrameSchema& schema) const {
  std::vector<std::string> missing;
  if (options_.mode == TaskMode::LoadEstimation) {
    if (!schema.has(Group::Cop)) missing.emplace_back("cop_x, cop_y");
    if (!schema.has(Group::Grf)) missing.emplace_back("grf_x, grf_y, grf_z");
  }
  if (options_.mode == TaskMode::MeasuredWrench && !schema.has(Group::Wrench))
    missing.emplace_back("ft_fx .. ft_tz");
  if (!missing.empty())
    throw ValidationError(fmt::format("{} sessions need channels: {}", to_string(options_.mode), fmt::join(missing, "; ")));
}

std::vector<FrameResult> TrialProcessor::push(const KinodynamicFrame& frame) {
  if (!waiting_.empty() && !(frame.time > waiting_.back().time))
    throw ValidationError(fmt::format("frame timestamps must increase (t = {} s)", frame.time));
  ++frames_in_;
  waiting_.push_back(frame);
  Eigen::VectorXd x(kNumJoints + 3);
  x.head<kNumJoints>() = frame.q;
  x.tail<3>() = frame.base ? *frame.base : Vec3(0.0, profile_.body->base_height, 0.0);
  std::vector<FrameResult> out;
  emit(diff_.push(x), out);
  return out;
}

std::vector<FrameResult> TrialProcessor::finish() {
  std::vector<FrameResult> out;
  emit(diff_.flush(), out);
  return out;
}

void TrialProcessor::emit(std::vector<signal::DerivativeSample>&& samples, std::vector<FrameResult>& out) {
  for (auto& s : samples) {
    const KinodynamicFrame frame = std::move(waiting_.front());
    waiting_.pop_front();
    model::JointConfiguration cfg;
    cfg.q = s.value.head<kNumJoints>();
    cfg.qd = s.rate.head<kNumJoints>();
    cfg.qdd = s.accel.head<kNumJoints>();
    cfg.base.position = s.value.segment<2>(kNumJoints);
    cfg.base.pitch = s.value[kNumJoints + 2];
    cfg.base.velocity = s.rate.segment<2>(kNumJoints);
    cfg.base.pitch_rate = s.rate[kNumJoints + 2];
    cfg.base.acceleration = s.accel.segment<2>(kNumJoints);
    cfg.base.pitch_acc = s.accel[kNumJoints + 2];
    out.push_back(compute(frame, cfg));
  }
}

FrameResult TrialProcessor::compute(const KinodynamicFrame& frame, const model::JointConfiguration& cfg) {
  const auto& p = profile_;
  const auto& body = p.body->model;
  FrameResult r;
  auto& v = r.indexes;
  v.timestamp = frame.time;

  const JointVector q = cfg.q, qd = cfg.qd, qdd = cfg.qdd;
  v.displacement = indexes::joint_displacement(q, *p.q_max, *p.q_min);
  v.velocity = indexes::joint_velocity_index(qd, *p.qd_max);
  v.acceleration = indexes::joint_acceleration_index(qdd, *p.qdd_max);
  v.com_energy = indexes::com_energy_index(model::sesc_com(body, *p.sesc, cfg).y(), p.neutral->com_z, *p.com_range);

  std::optional<dynamics::ExternalWrench> load;
  std::optional<dynamics::ExternalWrench> full;
  switch (options_.mode) {
    case TaskMode::LoadEstimation: {
      if (!frame.cop || !frame.grf)
        throw ValidationError(fmt::format("frame at t = {} s lacks the CoP or GRF channels", frame.time));
      const auto est = dynamics::estimate_external_vertical_force(
          body, *p.sesc, cfg, options_.projection.cop(*frame.cop), options_.projection.force(*frame.grf), options_.load);
      if (est.valid) load = dynamics::ExternalWrench::at_tip(body, Vec2(0.0, -est.vertical_force));
      break;
    }
    case TaskMode::MeasuredWrench:
      if (!frame.wrench) throw ValidationError(fmt::format("frame at t = {} s lacks the hand wrench", frame.time));
      full = calibration::hand_wrench(body, *frame.wrench, options_.projection);
      load = dynamics::ExternalWrench::at_tip(body, Vec2(0.0, full->force.y()));
      break;
    case TaskMode::LightTool:
      load = dynamics::ExternalWrench::at_tip(body, Vec2(0.0, -options_.tool_mass * kGravity));
      break;
  }

  const double dt = last_time_ ? frame.time - *last_time_ : 0.0;
  last_time_ = frame.time;
  if (load) {
    last_dtau_ = dynamics::overloading_torque(body, cfg, *load);
    v.torque = indexes::overloading_torque_index(last_dtau_, *p.torque_max);
    v.power = indexes::overloading_power_index(*v.velocity, *v.torque);
  } else {
    // No support force: the load is unobservable, so the fatigue state is
    // advanced with the last observed torque and w4/w6 stay missing.
    r.dynamics_valid = false;
    ++invalid_;
  }
  fatigue_ = indexes::update_fatigue(fatigue_, last_dtau_, dt, p.fatigue->params);
  v.fatigue = indexes::fatigue_index(fatigue_.torque, p.fatigue->fatigue_max);
  r.overloading_torque = last_dtau_;
  r.fatigue_torque = fatigue_.torque;

  if (full) {
    const JointVector fc = dynamics::compressive_forces(body, cfg, *full);
    v.compressive = indexes::compressive_force_index(fc, *p.compressive_max);
  }

  if (frame.emg) r.emg = frame.emg;
  else if (emg_) r.emg = emg_->at(frame.time);
  r.risk = indexes::categorize(v, options_.thresholds);

  while (next_window_ < windows_.size() && frame.time >= windows_[next_window_].window().end) ++next_window_;
  if (next_window_ < windows_.size() && frame.time >= windows_[next_window_].window().start)
    windows_[next_window_].add(v, r.emg ? &*r.emg : nullptr);
  ++frames_out_;
  return r;
}

std::vector<indexes::ActionAggregate> TrialProcessor::aggregates() const {
  std::vector<indexes::ActionAggregate> out;
  for (const auto& w : windows_)
    if (w.frames() > 0) out.push_back(w.finish());
  return out;
}

std::vector<std::string> TrialProcessor::empty_windows() const {
  std::vector<std::string> out;
  for (const auto& w : windows_)
    if (w.frames() == 0) out.push_back(w.window().label);
  return out;
}

// ---------------------------------------------------------------------------
// Trial sessions

TrialSession::TrialSession(const SessionConfig& config, const TrialSpec& trial, bool strict)
    : trial_(trial),
      profile_(load_profile(config.resolve(trial.profile))),
      ingestor_(ResampleOptions{config.rate, config.max_gap_samples}, strict) {
  profile_.require(config.mode, trial.emg.has_value());
  std::shared_ptr<const EmgTrack> emg;
  if (trial.emg) emg = std::make_shared<EmgTrack>(EmgTrack::from_raw_file(config.resolve(*trial.emg), *profile_.mvc));
  processor_ = std::make_unique<TrialProcessor>(profile_, config.processor_options(trial), trial.windows, emg);
}

std::vector<FrameResult> TrialSession::push_line(std::string_view line) {
  hash_.update(line);
  hash_.update("\n");
  const auto frames = ingestor_.push_line(line);
  if (!schema_checked_ && ingestor_.has_schema()) {
    processor_->check_schema(ingestor_.schema());
    schema_checked_ = true;
  }
  std::vector<FrameResult> out;
  for (const auto& f : frames) {
    auto r = processor_->push(f);
    out.insert(out.end(), std::make_move_iterator(r.begin()), std::make_move_iterator(r.end()));
  }
  return out;
}

TrialReport TrialSession::make_report() {
  TrialReport r;
  r.subject = trial_.subject.empty() ? profile_.id : trial_.subject;
  r.profile_id = profile_.id;
  r.input_sha256 = hash_.hex();
  r.rows = ingestor_.rows();
  r.frames = processor_->frames_out();
  r.malformed = ingestor_.malformed();
  r.invalid_dynamics = processor_->invalid_dynamics();
  r.gaps = ingestor_.gaps();
  r.aggregates = processor_->aggregates();
  r.empty_windows = processor_->empty_windows();
  return r;
}

TrialReport TrialSession::finish(std::vector<FrameResult>* tail) {
  std::vector<FrameResult> rest;
  for (const auto& f : ingestor_.finish()) {
    auto r = processor_->push(f);
    rest.insert(rest.end(), r.begin(), r.end());
  }
  auto r = processor_->finish();
  rest.insert(rest.end(), r.begin(), r.end());
  if (tail) *tail = std::move(rest);
  return make_report();
}

TrialReport TrialSession::abort(const std::string& reason) {
  try {
    processor_->finish();
  } catch (const Error&) {
    // Too few frames to close the differentiator window; report what exists.
  }
  TrialReport r = make_report();
  r.aborted = true;
  r.abort_reason = reason;
  return r;
}

// ---------------------------------------------------------------------------
// Statistics

std::string condition_of(const std::string& label, const StatsSpec& spec) {
  if (spec.factor == ConditionFactor::Label) return label;
  const auto pos = label.find(spec.separator);
  return pos == std::string::npos ? label : label.substr(0, pos);
}

namespace {

int joint_rank(const std::string& joint) {
  for (int j = 0; j < kNumJoints; ++j)
    if (kJointNames[static_cast<std::size_t>(j)] == joint) return j;
  return kNumJoints;
}

StatsEntry analyse_table(std::string index, std::string joint, const std::vector<std::string>& subjects,
                         const std::vector<std::string>& conditions,
                         const std::map<std::pair<std::string, std::string>, std::vector<double>>& cells,
                         const StatsSpec& spec) {
  StatsEntry e;
  e.index = std::move(index);
  e.joint = std::move(joint);
  for (const auto& c : conditions) {
    bool any = false;
    for (const auto& s : subjects) any = any || cells.count({s, c}) > 0;
    if (any) e.conditions.push_back(c);
  }
  for (const auto& s : subjects) {
    bool complete = true;
    for (const auto& c : e.conditions) complete = complete && cells.count({s, c}) > 0;
    (complete ? e.subjects : e.excluded_subjects).push_back(s);
  }
  stats::RepeatedMeasuresTable table;
  table.subjects = e.subjects;
  table.conditions = e.conditions;
  table.values.resize(static_cast<Eigen::Index>(e.subjects.size()), static_cast<Eigen::Index>(e.conditions.size()));
  for (std::size_t si = 0; si < e.subjects.size(); ++si) {
    for (std::size_t ci = 0; ci < e.conditions.size(); ++ci) {
      const auto& vals = cells.at({e.subjects[si], e.conditions[ci]});
      double sum = 0.0;
      for (double x : vals) sum += x;
      table.values(static_cast<Eigen::Index>(si), static_cast<Eigen::Index>(ci)) = sum / static_cast<double>(vals.size());
    }
  }
  try {
    e.anova = stats::rm_anova(table, spec.anova);
  } catch (const ValidationError& err) {
    e.error = err.what();
    return e;
  }
  std::vector<std::size_t> ok;
  std::vector<double> raw_p;
  for (Eigen::Index a = 0; a < table.values.cols(); ++a) {
    for (Eigen::Index b = a + 1; b < table.values.cols(); ++b) {
      PosthocEntry pe;
      pe.first = e.conditions[static_cast<std::size_t>(a)];
      pe.second = e.conditions[static_cast<std::size_t>(b)];
      try {
        stats::PairwiseResult pr;
        pr.first = static_cast<int>(a);
        pr.second = static_cast<int>(b);
        pr.test = stats::paired_t(table.values.col(a), table.values.col(b), spec.anova.alpha);
        pr.p_adjusted = pr.test.p;
        pe.result = pr;
        ok.push_back(e.posthoc.size());
        raw_p.push_back(pr.test.p);
      } catch (const ValidationError& err) {
        pe.error = err.what();
      }
      e.posthoc.push_back(std::move(pe));
    }
  }
  const auto adjusted = stats::adjust_p_values(raw_p, spec.correction);
  for (std::size_t k = 0; k < ok.size(); ++k) {
    auto& pr = *e.posthoc[ok[k]].result;
    pr.p_adjusted = adjusted[k];
    if (spec.correction != stats::MultipleComparison::None) pr.test.significant = adjusted[k] < spec.anova.alpha;
  }
  return e;
}

}  // namespace

std::vector<StatsEntry> compute_stats(const std::vector<StatsRecord>& records, const StatsSpec& spec) {
  std::vector<std::string> conditions, subjects;
  std::vector<std::pair<std::string, std::string>> keys;
  auto note = [](auto& list, const auto& x) {
    if (std::find(list.begin(), list.end(), x) == list.end()) list.push_back(x);
  };
  std::map<std::pair<std::string, std::string>, std::map<std::pair<std::string, std::string>, std::vector<double>>> groups;
  for (const auto& r : records) {
    if (!std::isfinite(r.value))
      throw ValidationError(fmt::format("non-finite value for subject {} ({}, {})", r.subject, r.index, r.joint));
    const auto cond = condition_of(r.label, spec);
    note(subjects, r.subject);
    note(conditions, cond);
    note(keys, std::pair{r.index, r.joint});
    groups[{r.index, r.joint}][{r.subject, cond}].push_back(r.value);
  }
  std::stable_sort(keys.begin(), keys.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first < b.first;
    return joint_rank(a.second) < joint_rank(b.second);
  });
  std::vector<StatsEntry> out;
  for (const auto& k : keys) out.push_back(analyse_table(k.first, k.second, subjects, conditions, groups.at(k), spec));
  return out;
}

std::vector<StatsEntry> compute_stats(const std::vector<TrialReport>& trials, const StatsSpec& spec) {
  std::vector<IndexId> ids = spec.indexes;
  if (ids.empty())
    for (int i = 0; i < indexes::kNumIndexes; ++i) ids.push_back(indexes::index_at(i));
  std::vector<StatsRecord> records;
  for (const auto& t : trials) {
    for (const auto& a : t.aggregates) {
      for (IndexId id : ids) {
        const auto ii = static_cast<std::size_t>(indexes::to_int(id));
        const int joints = id == IndexId::ComEnergy ? 1 : kNumJoints;
        for (int j = 0; j < joints; ++j) {
          const auto& st = a.stats[ii][static_cast<std::size_t>(j)];
          if (!st.available()) continue;
          records.push_back({t.subject, a.window.label, std::string(indexes::kIndexLabels[ii]),
                             id == IndexId::ComEnergy ? "body" : std::string(kJointNames[static_cast<std::size_t>(j)]),
                             spec.use_rms ? st.rms : st.max});
        }
      }
    }
  }
  return compute_stats(records, spec);
}

// ---------------------------------------------------------------------------

SessionReport run_session(const SessionConfig& config) {
  config.validate();
  SessionReport report;
  report.config_sha256 = sha256_hex(config.canonical_json());
  report.software_version = ERGO_VERSION;
  report.mode = config.mode;
  report.rate = config.rate;
  report.thresholds = config.thresholds;

  // Every profile is loaded and checked before any frame is processed.
  std::vector<std::unique_ptr<TrialSession>> sessions;
  for (const auto& t : config.trials) sessions.push_back(std::make_unique<TrialSession>(config, t, true));

  for (std::size_t i = 0; i < sessions.size(); ++i) {
    const auto path = config.resolve(config.trials[i].frames);
    const std::string text = model::read_text_file(path);
    try {
      std::size_t pos = 0;
      while (pos < text.size()) {
        auto end = text.find('\n', pos);
        if (end == std::string::npos) end = text.size();
        sessions[i]->push_line(std::string_view(text).substr(pos, end - pos));
        pos = end + 1;
      }
      report.trials.push_back(sessions[i]->finish());
    } catch (const ValidationError& e) {
      throw ValidationError(path.string() + ": " + e.what());
    }
  }
  if (config.stats.enabled) report.stats = compute_stats(report.trials, config.stats);
  return report;
}

}  // namespace ergo::pipeline
