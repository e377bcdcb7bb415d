#include "ergo/model.hpp"

#include <cmath>
#include <sstream>

namespace ergo::model {

namespace {

void check_segment(const Segment& s) {
  if (!(s.length > 0.0) || !std::isfinite(s.length))
    throw ValidationError("segment '" + s.name + "': length must be positive");
  if (!(s.mass >= 0.0) || !std::isfinite(s.mass))
    throw ValidationError("segment '" + s.name + "': mass must be nonnegative");
  if (!(s.inertia >= 0.0) || !std::isfinite(s.inertia))
    throw ValidationError("segment '" + s.name + "': inertia must be nonnegative");
  if (!s.com_offset.allFinite() || s.com_offset.norm() > s.length * (1.0 + 1e-12))
    throw ValidationError("segment '" + s.name + "': CoM offset must lie within the segment length");
}

void check_vector(const Eigen::VectorXd& v, int n, const char* what) {
  if (v.size() != n) {
    std::ostringstream os;
    os << what << " has " << v.size() << " entries, model has " << n << " joints";
    throw ValidationError(os.str());
  }
  if (!v.allFinite()) throw ValidationError(std::string(what) + " contains non-finite values");
}

}  // namespace

JointConfiguration JointConfiguration::zero(int num_joints) {
  JointConfiguration cfg;
  cfg.q = Eigen::VectorXd::Zero(num_joints);
  cfg.qd = Eigen::VectorXd::Zero(num_joints);
  cfg.qdd = Eigen::VectorXd::Zero(num_joints);
  return cfg;
}

JointConfiguration JointConfiguration::at_rest(const Eigen::VectorXd& q, const BaseMotion& base) {
  JointConfiguration cfg = zero(static_cast<int>(q.size()));
  cfg.q = q;
  cfg.base = base;
  return cfg;
}

HumanModel::HumanModel(std::optional<Segment> base_segment, std::vector<Segment> segments,
                       std::vector<JointDef> joints)
    : base_segment_(std::move(base_segment)), segments_(std::move(segments)), joints_(std::move(joints)) {
  if (segments_.empty()) throw ValidationError("model has no segments");
  if (segments_.size() != joints_.size())
    throw ValidationError("model needs exactly one joint per driven segment");
  for (const auto& j : joints_) {
    if (j.sign != 1.0 && j.sign != -1.0)
      throw ValidationError("joint '" + j.name + "': sign must be +1 or -1");
  }
  if (base_segment_) {
    check_segment(*base_segment_);
    total_mass_ += base_segment_->mass;
  }
  for (const auto& s : segments_) {
    check_segment(s);
    total_mass_ += s.mass;
  }
}

void HumanModel::require_full_body() const {
  if (!is_full_body()) {
    std::ostringstream os;
    os << "full-body model requires " << kNumJoints << " joints, got " << num_joints();
    throw ValidationError(os.str());
  }
}

void HumanModel::check(const JointConfiguration& cfg) const {
  const int n = num_joints();
  check_vector(cfg.q, n, "q");
  check_vector(cfg.qd, n, "qd");
  check_vector(cfg.qdd, n, "qdd");
  const auto& b = cfg.base;
  if (!b.position.allFinite() || !b.velocity.allFinite() || !b.acceleration.allFinite() ||
      !std::isfinite(b.pitch) || !std::isfinite(b.pitch_rate) || !std::isfinite(b.pitch_acc))
    throw ValidationError("base motion contains non-finite values");
}

Vec2 axis_of(double angle) { return {std::sin(angle), std::cos(angle)}; }
Vec2 normal_of(double angle) { return {std::cos(angle), -std::sin(angle)}; }

Vec2 SegmentFrame::axis() const { return axis_of(angle); }
Vec2 SegmentFrame::normal() const { return normal_of(angle); }
Vec2 SegmentFrame::point(const Vec2& local) const {
  return origin + local.x() * axis() + local.y() * normal();
}

std::vector<SegmentFrame> forward_kinematics(const HumanModel& model, const JointConfiguration& cfg) {
  model.check(cfg);
  std::vector<SegmentFrame> frames(model.segments().size());
  Vec2 origin = cfg.base.position;
  double angle = cfg.base.pitch;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    angle += model.joints()[i].sign * cfg.q[static_cast<Eigen::Index>(i)];
    frames[i].origin = origin;
    frames[i].angle = angle;
    origin = origin + model.segments()[i].length * frames[i].axis();
  }
  return frames;
}

ChainState chain_state(const HumanModel& model, const JointConfiguration& cfg) {
  ChainState st;
  st.frames = forward_kinematics(model, cfg);
  const std::size_t n = st.frames.size();
  st.origin_vel.resize(n);
  st.origin_acc.resize(n);
  st.omega.resize(n);
  st.alpha.resize(n);
  st.com.resize(n);
  st.com_vel.resize(n);
  st.com_acc.resize(n);

  const auto& b = cfg.base;
  st.base.origin = b.position;
  st.base.angle = b.pitch;
  if (const auto& foot = model.base_segment()) {
    const Vec2 r = st.base.point(foot->com_offset) - b.position;
    st.base_com = b.position + r;
    st.base_com_vel = b.velocity + spin(b.pitch_rate, r);
    st.base_com_acc = b.acceleration + spin(b.pitch_acc, r) - b.pitch_rate * b.pitch_rate * r;
  }

  Vec2 v = b.velocity, a = b.acceleration;
  double w = b.pitch_rate, al = b.pitch_acc;
  for (std::size_t i = 0; i < n; ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    const double s = model.joints()[i].sign;
    w += s * cfg.qd[k];
    al += s * cfg.qdd[k];
    st.origin_vel[i] = v;
    st.origin_acc[i] = a;
    st.omega[i] = w;
    st.alpha[i] = al;

    const Segment& seg = model.segments()[i];
    const Vec2 rc = st.frames[i].point(seg.com_offset) - st.frames[i].origin;
    st.com[i] = st.frames[i].origin + rc;
    st.com_vel[i] = v + spin(w, rc);
    st.com_acc[i] = a + spin(al, rc) - w * w * rc;

    const Vec2 rd = seg.length * st.frames[i].axis();
    v = v + spin(w, rd);
    a = a + spin(al, rd) - w * w * rd;
  }
  return st;
}

Vec2 chain_tip(const HumanModel& model, const JointConfiguration& cfg) {
  const auto frames = forward_kinematics(model, cfg);
  return frames.back().origin + model.segments().back().length * frames.back().axis();
}

Eigen::Matrix<double, 2, Eigen::Dynamic> point_jacobian(const HumanModel& model,
                                                        const JointConfiguration& cfg,
                                                        const Vec2& local_point) {
  const auto frames = forward_kinematics(model, cfg);
  const Vec2 p = frames.back().point(local_point);
  Eigen::Matrix<double, 2, Eigen::Dynamic> J(2, model.num_joints());
  for (int k = 0; k < model.num_joints(); ++k) {
    J.col(k) = model.joints()[static_cast<std::size_t>(k)].sign * spin(1.0, p - frames[static_cast<std::size_t>(k)].origin);
  }
  return J;
}

Vec2 whole_body_com(const HumanModel& model, const JointConfiguration& cfg) {
  return com_motion(model, cfg).position;
}

ComMotion com_motion(const HumanModel& model, const JointConfiguration& cfg) {
  const double M = model.total_mass();
  if (!(M > 0.0)) throw ValidationError("whole-body CoM undefined for a massless model");
  const ChainState st = chain_state(model, cfg);

  ComMotion out;
  const auto& foot = model.base_segment();
  if (foot) {
    out.position += foot->mass * st.base_com;
    out.velocity += foot->mass * st.base_com_vel;
    out.acceleration += foot->mass * st.base_com_acc;
  }
  for (std::size_t i = 0; i < st.frames.size(); ++i) {
    const double m = model.segments()[i].mass;
    out.position += m * st.com[i];
    out.velocity += m * st.com_vel[i];
    out.acceleration += m * st.com_acc[i];
  }
  out.position /= M;
  out.velocity /= M;
  out.acceleration /= M;

  // dH/dt about the CoM = sum I alpha + m (c - C) x (a - A); the A term sums to zero.
  double dH = 0.0;
  if (foot) {
    dH += foot->inertia * cfg.base.pitch_acc +
          foot->mass * cross(st.base_com - out.position, st.base_com_acc - out.acceleration);
  }
  for (std::size_t i = 0; i < st.frames.size(); ++i) {
    const Segment& seg = model.segments()[i];
    dH += seg.inertia * st.alpha[i] +
          seg.mass * cross(st.com[i] - out.position, st.com_acc[i] - out.acceleration);
  }
  out.momentum_rate = dH;
  return out;
}

// ---------------------------------------------------------------------------

SescParameters::SescParameters(Eigen::VectorXd values) : values_(std::move(values)) {
  if (values_.size() < 4 || values_.size() % 2 != 0)
    throw ValidationError("SESC parameter vector must have 2n+2 entries");
  if (!values_.allFinite()) throw ValidationError("SESC parameters must be finite");
}

SescParameters SescParameters::zeros(int num_segments) {
  return SescParameters(Eigen::VectorXd::Zero(size_for(num_segments)));
}

SescParameters SescParameters::operator+(const SescParameters& o) const {
  return SescParameters(values_ + o.values_);
}

SescParameters SescParameters::operator*(double s) const { return SescParameters(values_ * s); }

namespace {

void check_sesc(const HumanModel& model, const SescParameters& params) {
  if (params.num_segments() != model.num_joints()) {
    std::ostringstream os;
    os << "SESC parameters sized for " << params.num_segments() << " segments, model has "
       << model.num_joints();
    throw ValidationError(os.str());
  }
}

}  // namespace

Eigen::VectorXd sesc_angles(const JointConfiguration& cfg, const std::vector<JointDef>& joints) {
  const auto n = static_cast<Eigen::Index>(joints.size());
  Eigen::VectorXd phi(n + 1);
  double angle = cfg.base.pitch;
  for (Eigen::Index i = 0; i < n; ++i) {
    angle += joints[static_cast<std::size_t>(i)].sign * cfg.q[i];
    phi[i] = angle;
  }
  phi[n] = cfg.base.pitch;
  return phi;
}

Eigen::Matrix<double, 2, Eigen::Dynamic> sesc_regressor(const HumanModel& model,
                                                       const JointConfiguration& cfg) {
  model.check(cfg);
  const Eigen::VectorXd phi = sesc_angles(cfg, model.joints());
  Eigen::Matrix<double, 2, Eigen::Dynamic> Phi(2, 2 * phi.size());
  for (Eigen::Index j = 0; j < phi.size(); ++j) {
    Phi.col(2 * j) = axis_of(phi[j]);
    Phi.col(2 * j + 1) = normal_of(phi[j]);
  }
  return Phi;
}

Vec2 sesc_com(const HumanModel& model, const SescParameters& params, const JointConfiguration& cfg) {
  check_sesc(model, params);
  return cfg.base.position + sesc_regressor(model, cfg) * params.values();
}

ComMotion sesc_com_motion(const HumanModel& model, const SescParameters& params,
                          const JointConfiguration& cfg) {
  check_sesc(model, params);
  model.check(cfg);
  const Eigen::VectorXd phi = sesc_angles(cfg, model.joints());
  const auto n = static_cast<Eigen::Index>(model.num_joints());
  Eigen::VectorXd rate(n + 1), acc(n + 1);
  double w = cfg.base.pitch_rate, al = cfg.base.pitch_acc;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double s = model.joints()[static_cast<std::size_t>(i)].sign;
    w += s * cfg.qd[i];
    al += s * cfg.qdd[i];
    rate[i] = w;
    acc[i] = al;
  }
  rate[n] = cfg.base.pitch_rate;
  acc[n] = cfg.base.pitch_acc;

  ComMotion out;
  out.position = cfg.base.position;
  out.velocity = cfg.base.velocity;
  out.acceleration = cfg.base.acceleration;
  for (Eigen::Index j = 0; j <= n; ++j) {
    // r = a*axis + b*normal is a body-fixed vector rotating with phi_j.
    const Vec2 r = params.values()[2 * j] * axis_of(phi[j]) + params.values()[2 * j + 1] * normal_of(phi[j]);
    out.position += r;
    out.velocity += spin(rate[j], r);
    out.acceleration += spin(acc[j], r) - rate[j] * rate[j] * r;
  }
  return out;
}

SescParameters sesc_from_bsip(const HumanModel& model) {
  const double M = model.total_mass();
  if (!(M > 0.0)) throw ValidationError("SESC conversion needs a positive total mass");
  const auto& segs = model.segments();
  const std::size_t n = segs.size();
  Eigen::VectorXd p(SescParameters::size_for(static_cast<int>(n)));
  double distal_mass = 0.0;
  for (std::size_t i = n; i-- > 0;) {
    const auto k = static_cast<Eigen::Index>(i);
    p[2 * k] = (segs[i].mass * segs[i].com_offset.x() + segs[i].length * distal_mass) / M;
    p[2 * k + 1] = segs[i].mass * segs[i].com_offset.y() / M;
    distal_mass += segs[i].mass;
  }
  const auto& foot = model.base_segment();
  p[2 * static_cast<Eigen::Index>(n)] = foot ? foot->mass * foot->com_offset.x() / M : 0.0;
  p[2 * static_cast<Eigen::Index>(n) + 1] = foot ? foot->mass * foot->com_offset.y() / M : 0.0;
  return SescParameters(std::move(p));
}

// ---------------------------------------------------------------------------

Vec2 estimate_cop_static(const HumanModel& model, const JointConfiguration& cfg) {
  return {whole_body_com(model, cfg).x(), 0.0};
}

Vec2 estimate_cop_static(const HumanModel& model, const SescParameters& params,
                         const JointConfiguration& cfg) {
  return {sesc_com(model, params, cfg).x(), 0.0};
}

CopEstimate estimate_cop_dynamic(const HumanModel& model, const JointConfiguration& cfg, double eps) {
  const ComMotion c = com_motion(model, cfg);
  const double M = model.total_mass();
  const double support = M * (kGravity + c.acceleration.y());
  CopEstimate out;
  if (!(support > eps * M * kGravity)) {
    out.valid = false;
    out.point = {c.position.x(), 0.0};
    return out;
  }
  const double x = c.position.x() -
                   (c.momentum_rate + M * c.position.y() * c.acceleration.x()) / support;
  out.point = {x, 0.0};
  return out;
}

}  // namespace ergo::model
