#include "synth.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <stdexcept>

#include <fmt/format.h>

#include "ergo/calibration.hpp"

namespace synth {

using namespace ergo;
namespace fs = std::filesystem;

model::ModelDocument body(double mass, double height) {
  return model::scaled_model(model::BsipTable::defaults(), mass, height, "synthetic");
}

JointVector standing() {
  JointVector q = JointVector::Zero();
  q[index_of(Joint::Shoulder)] = -M_PI;
  return q;
}

JointVector arms_forward() {
  JointVector q = JointVector::Zero();
  q[index_of(Joint::Shoulder)] = -M_PI / 2;
  return q;
}

model::JointConfiguration at_rest(const model::ModelDocument& doc, const JointVector& q) {
  model::BaseMotion base;
  base.position = Vec2(0.0, doc.base_height);
  return model::JointConfiguration::at_rest(q, base);
}

dynamics::ExternalWrench carried(const model::ModelDocument& doc, double mass) {
  return dynamics::ExternalWrench::at_tip(doc.model, Vec2(0.0, -mass * kGravity));
}

SubjectProfile profile(const model::ModelDocument& doc, const std::string& id) {
  SubjectProfile p;
  p.id = id;
  p.mass = doc.subject_mass;
  p.height = 1.75;
  p.gender = "unspecified";
  p.body = doc;
  p.sesc = model::sesc_from_bsip(doc.model);
  p.neutral = calibration::register_neutral(doc.model, *p.sesc, at_rest(doc, standing()));
  const auto& lim = model::JointLimits::defaults();
  p.q_min = lim.q_min;
  p.q_max = lim.q_max;
  p.qd_max = lim.qd_max;
  p.qdd_max = 4.0 * lim.qd_max;
  p.torque_max = lim.torque_max;
  FatigueCalibration f;
  f.params.fatigue_rate = JointVector::Constant(0.02);
  f.params.recovery_rate = JointVector::Constant(0.008);
  f.params.threshold = 0.1 * lim.torque_max;
  f.fatigue_max = 0.3 * lim.torque_max;
  p.fatigue = f;
  p.com_range = 0.5;

  // Compressive capacity from a maximal axial push with the arms forward.
  const auto push = dynamics::ExternalWrench::at_tip(doc.model, Vec2(-400.0, 0.0));
  JointVector fc = dynamics::compressive_forces(doc.model, at_rest(doc, arms_forward()), push);
  p.compressive_max = fc.cwiseMax(JointVector::Constant(50.0));
  p.mvc = MuscleVector::Ones();
  return p;
}

// ---------------------------------------------------------------------------

void PostureTrack::add(double time, const JointVector& q) {
  if (!keys_.empty() && !(time > keys_.back().first)) throw std::invalid_argument("key times must increase");
  keys_.emplace_back(time, q);
}

model::JointConfiguration PostureTrack::at(double t, const model::ModelDocument& doc) const {
  auto cfg = at_rest(doc, keys_.front().second);
  if (t <= keys_.front().first) return cfg;
  if (t >= keys_.back().first) {
    cfg.q = keys_.back().second;
    return cfg;
  }
  std::size_t k = 1;
  while (keys_[k].first < t) ++k;
  const auto& [t0, q0] = keys_[k - 1];
  const auto& [t1, q1] = keys_[k];
  const double T = t1 - t0, s = (t - t0) / T;
  const double p = s * s * s * (10 - 15 * s + 6 * s * s);
  const double dp = 30 * s * s * (1 - 2 * s + s * s);
  const double ddp = 60 * s - 180 * s * s + 120 * s * s * s;
  const JointVector d = q1 - q0;
  cfg.q = q0 + d * p;
  cfg.qd = d * (dp / T);
  cfg.qdd = d * (ddp / (T * T));
  return cfg;
}

// ---------------------------------------------------------------------------

std::vector<KinodynamicFrame> record(const model::ModelDocument& doc,
                                     const std::function<model::JointConfiguration(double)>& motion,
                                     const LoadFn& load, double duration, const RecordOptions& options) {
  std::vector<KinodynamicFrame> out;
  const auto n = static_cast<std::size_t>(std::llround(duration * options.rate));
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double t = static_cast<double>(k) / options.rate;
    const auto cfg = motion(t);
    const auto w = load ? load(t) : std::nullopt;
    KinodynamicFrame f;
    f.time = t;
    f.q = cfg.q;
    if (options.base) f.base = Vec3(cfg.base.position.x(), cfg.base.position.y(), cfg.base.pitch);
    if (options.ground) {
      const auto id = dynamics::inverse_dynamics(doc.model, cfg, w);
      f.cop = Eigen::Vector2d(id.ground_cop.x(), 0.0);
      f.grf = Vec3(id.ground_force.x(), 0.0, id.ground_force.y());
    }
    if (options.wrench) {
      Vec6 v = Vec6::Zero();
      if (w) {
        v[0] = w->force.x();
        v[2] = w->force.y();
        v[4] = w->torque;
      }
      f.wrench = v;
    }
    out.push_back(std::move(f));
  }
  return out;
}

pipeline::FrameSchema schema_for(const RecordOptions& options) {
  using G = pipeline::Group;
  if (options.base && options.ground && options.wrench) return pipeline::FrameSchema::with_groups({G::Base, G::Cop, G::Grf, G::Wrench});
  if (options.base && options.ground) return pipeline::FrameSchema::with_groups({G::Base, G::Cop, G::Grf});
  if (options.base && options.wrench) return pipeline::FrameSchema::with_groups({G::Base, G::Wrench});
  if (options.ground && options.wrench) return pipeline::FrameSchema::with_groups({G::Cop, G::Grf, G::Wrench});
  if (options.ground) return pipeline::FrameSchema::with_groups({G::Cop, G::Grf});
  if (options.wrench) return pipeline::FrameSchema::with_groups({G::Wrench});
  if (options.base) return pipeline::FrameSchema::with_groups({G::Base});
  return pipeline::FrameSchema::with_groups({});
}

std::string to_csv(const std::vector<KinodynamicFrame>& frames, const RecordOptions& options) {
  return pipeline::format_frames(schema_for(options), frames);
}

// ---------------------------------------------------------------------------

TempDir::TempDir() {
  std::string pattern = (fs::temp_directory_path() / "ergo-test-XXXXXX").string();
  if (!::mkdtemp(pattern.data())) throw std::runtime_error("mkdtemp failed");
  path_ = pattern;
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

fs::path TempDir::write(const std::string& name, const std::string& content) const {
  const auto p = path_ / name;
  fs::create_directories(p.parent_path());
  std::ofstream(p, std::ios::binary) << content;
  return p;
}

// ---------------------------------------------------------------------------

namespace {

JointVector make_q(double ankle, double knee, double hip, double back, double shoulder, double elbow, double wrist) {
  JointVector q;
  q << ankle, knee, hip, back, shoulder, elbow, wrist;
  return q;
}

JointVector jitter(const JointVector& q, std::mt19937& rng, double sd) {
  std::normal_distribution<double> n(0.0, sd);
  JointVector out = q;
  for (int j = 0; j < kNumJoints; ++j) out[j] += n(rng);
  return out;
}

}  // namespace

LiftTrial lift_trial(const model::ModelDocument& doc, std::mt19937& rng, double rate) {
  const JointVector pickup = jitter(make_q(0.1, 0.6, 0.9, 0.3, -M_PI + 0.9, 0.2, 0.0), rng, 0.05);
  const JointVector shelf[3] = {
      jitter(make_q(0.0, 0.0, 0.0, 0.1, -M_PI + 0.6, 1.2, 0.1), rng, 0.05),
      jitter(make_q(0.0, 0.0, 0.0, 0.1, -M_PI / 2, 0.3, 0.1), rng, 0.05),
      jitter(make_q(0.0, 0.0, 0.0, 0.1, -0.6, 0.3, 0.1), rng, 0.05),
  };
  constexpr double kWindow = 4.0;
  PostureTrack track;
  LiftTrial trial;
  double t = 0.0;
  for (int m = 0; m < 3; ++m) {
    for (int h = 0; h < 3; ++h) {
      track.add(t, pickup);
      track.add(t + 0.5, pickup);
      track.add(t + 2.0, shelf[h]);
      track.add(t + 2.5, shelf[h]);
      track.add(t + 3.99, pickup);
      trial.windows.push_back({t, t + kWindow, fmt::format("{:.1f}kg/V{}", kBoxMasses[m], h + 1)});
      t += kWindow;
    }
  }
  const double total = t;
  auto load = [&doc](double time) -> std::optional<dynamics::ExternalWrench> {
    const int w = std::min(8, static_cast<int>(time / kWindow));
    return carried(doc, kBoxMasses[w / 3]);
  };
  trial.frames = record(doc, [&](double time) { return track.at(time, doc); }, load, total, {rate, true, false, true});
  return trial;
}

std::vector<KinodynamicFrame> drill_trial(const model::ModelDocument& doc, double push, double duration, double rate) {
  JointVector pose = arms_forward();
  pose[index_of(Joint::Back)] = 0.1;
  pose[index_of(Joint::Elbow)] = 0.1;
  auto motion = [&](double t) {
    JointVector q = pose;
    q[index_of(Joint::Shoulder)] += 0.02 * std::sin(2 * M_PI * 0.5 * t);
    q[index_of(Joint::Elbow)] += 0.02 * std::sin(2 * M_PI * 0.5 * t);
    auto cfg = at_rest(doc, q);
    const double w = 2 * M_PI * 0.5;
    cfg.qd = JointVector::Zero();
    cfg.qdd = JointVector::Zero();
    for (int j : {index_of(Joint::Shoulder), index_of(Joint::Elbow)}) {
      cfg.qd[j] = 0.02 * w * std::cos(w * t);
      cfg.qdd[j] = -0.02 * w * w * std::sin(w * t);
    }
    return cfg;
  };
  auto load = [&](double t) -> std::optional<dynamics::ExternalWrench> {
    const double ramp = std::min(1.0, t / 0.5);
    return dynamics::ExternalWrench::at_tip(doc.model, Vec2(-push * ramp, -0.1 * push * ramp));
  };
  return record(doc, motion, load, duration, {rate, true, true, true});
}

std::vector<Pose> random_poses(const model::ModelDocument& doc, int count, std::mt19937& rng, double cop_noise) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 1.0);
  auto range = [&](double lo, double hi) { return lo + (hi - lo) * u(rng); };
  std::vector<Pose> out;
  for (int i = 0; i < count; ++i) {
    const JointVector q = make_q(range(-0.3, 0.3), range(0.0, 1.2), range(-0.2, 1.5), range(-0.2, 1.0),
                                 range(-M_PI, -0.3), range(0.0, 2.0), range(-0.6, 0.6));
    Pose p{at_rest(doc, q), Vec2::Zero()};
    p.cop = Vec2(model::whole_body_com(doc.model, p.cfg).x() + cop_noise * noise(rng), 0.0);
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace synth
