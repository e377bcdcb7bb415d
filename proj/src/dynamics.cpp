#include "ergo/dynamics.hpp"

#include <cmath>
#include <limits>

namespace ergo::dynamics {

using model::cross;

ExternalWrench ExternalWrench::at_tip(const HumanModel& model, const Vec2& force, double torque) {
  return ExternalWrench{{model.segments().back().length, 0.0}, force, torque};
}

InverseDynamicsResult inverse_dynamics(const HumanModel& model, const JointConfiguration& cfg,
                                       const std::optional<ExternalWrench>& external,
                                       const std::optional<Vec2>& measured_grf, double gravity) {
  const model::ChainState st = model::chain_state(model, cfg);
  const auto n = st.frames.size();
  const Vec2 g(0.0, -gravity);

  InverseDynamicsResult out;
  out.torques.resize(static_cast<Eigen::Index>(n));
  out.joint_forces.resize(n);
  out.joint_moments.resize(n);

  // Force and moment the distal neighbour receives from segment i (i.e. the
  // quantities of joint i+1), carried down the chain.
  Vec2 f_next(0, 0);
  double m_next = 0.0;
  Vec2 o_next(0, 0);
  for (std::size_t i = n; i-- > 0;) {
    const auto& seg = model.segments()[i];
    const Vec2 o = st.frames[i].origin;
    const Vec2 rc = st.com[i] - o;

    Vec2 f = seg.mass * (st.com_acc[i] - g) + f_next;
    double m = seg.inertia * st.alpha[i] + cross(rc, seg.mass * (st.com_acc[i] - g)) + m_next;
    if (i + 1 < n) m += cross(o_next - o, f_next);
    if (i + 1 == n && external) {
      const Vec2 p = st.frames[i].point(external->point);
      f -= external->force;
      m -= cross(p - o, external->force) + external->torque;
    }
    out.joint_forces[i] = f;
    out.joint_moments[i] = m;
    out.torques[static_cast<Eigen::Index>(i)] = model.joints()[i].sign * m;
    f_next = f;
    m_next = m;
    o_next = o;
  }

  // Feet: rigid with the base and in contact with the ground.
  const Vec2 base = cfg.base.position;
  Vec2 G = f_next;
  double MG = m_next + cross(o_next - base, f_next);
  if (const auto& foot = model.base_segment()) {
    const Vec2 rc = st.base_com - base;
    G += foot->mass * (st.base_com_acc - g);
    MG += foot->inertia * cfg.base.pitch_acc + cross(rc, foot->mass * (st.base_com_acc - g));
  }
  out.ground_force = G;
  out.ground_moment = MG;
  // (p - base) x G = MG with p = (x, 0).
  if (std::abs(G.y()) > 0.0) {
    out.ground_cop = {base.x() - (MG + base.y() * G.x()) / G.y(), 0.0};
  } else {
    out.ground_cop = {std::numeric_limits<double>::quiet_NaN(), 0.0};
  }

  if (measured_grf) {
    const model::ComMotion c = model::com_motion(model, cfg);
    const double M = model.total_mass();
    Vec2 hand = external ? external->force : Vec2(0, 0);
    out.force_residual = *measured_grf + M * g + hand - M * c.acceleration;
  }
  return out;
}

Eigen::VectorXd overloading_torque(const HumanModel& model, const JointConfiguration& cfg,
                                   const ExternalWrench& external) {
  const auto J = model::point_jacobian(model, cfg, external.point);
  Eigen::VectorXd dtau = -(J.transpose() * external.force);
  for (int k = 0; k < model.num_joints(); ++k)
    dtau[k] -= model.joints()[static_cast<std::size_t>(k)].sign * external.torque;
  return dtau;
}

Eigen::VectorXd overloading_torque_by_difference(const HumanModel& model, const JointConfiguration& cfg,
                                                 const ExternalWrench& external) {
  const auto with = inverse_dynamics(model, cfg, external);
  const auto without = inverse_dynamics(model, cfg);
  return with.torques - without.torques;
}

Eigen::VectorXd compressive_forces(const HumanModel& model, const JointConfiguration& cfg,
                                   const InverseDynamicsResult& id) {
  const auto frames = model::forward_kinematics(model, cfg);
  Eigen::VectorXd fc(model.num_joints());
  for (std::size_t i = 0; i < frames.size(); ++i)
    fc[static_cast<Eigen::Index>(i)] = std::max(0.0, id.joint_forces[i].dot(frames[i].axis()));
  return fc;
}

Eigen::VectorXd compressive_forces(const HumanModel& model, const JointConfiguration& cfg,
                                   const ExternalWrench& external, const std::optional<Vec2>& measured_grf) {
  return compressive_forces(model, cfg, inverse_dynamics(model, cfg, external, measured_grf));
}

ExternalLoadEstimate estimate_external_vertical_force(const HumanModel& model, const SescParameters& sesc,
                                                      const JointConfiguration& cfg, const Vec2& measured_cop,
                                                      const Vec2& measured_grf,
                                                      const LoadEstimatorOptions& options) {
  const model::ComMotion c = model::sesc_com_motion(model, sesc, cfg);
  const double M = model.total_mass();
  ExternalLoadEstimate out;
  const double support = M * (kGravity + c.acceleration.y());
  // Free fall, or no measured support (the feet left the plate).
  const double floor = options.invalid_eps * M * kGravity;
  if (!(support > floor) || !(measured_grf.y() > floor) || !measured_cop.allFinite() || !measured_grf.allFinite()) {
    out.valid = false;
    out.load_x = std::numeric_limits<double>::quiet_NaN();
    return out;
  }
  out.vertical_force = measured_grf.y() - support;

  const bool quasi_static = cfg.qd.size() == 0 || cfg.qd.cwiseAbs().maxCoeff() < options.static_speed;
  if (quasi_static) {
    out.estimated_cop = {c.position.x(), 0.0};
  } else {
    // Dynamic CoP: CoM motion from the SESC, angular-momentum rate from the BSIPs.
    const double dH = model::com_motion(model, cfg).momentum_rate;
    out.estimated_cop = {c.position.x() - (dH + M * c.position.y() * c.acceleration.x()) / support, 0.0};
  }
  out.cop_residual = measured_cop - out.estimated_cop;

  // Static moment balance: (M g + f) x_meas = M g x_est + f x_load.
  if (std::abs(out.vertical_force) > 1e-6 * M * kGravity) {
    out.load_x = out.estimated_cop.x() + out.cop_residual.x() * measured_grf.y() / out.vertical_force;
  } else {
    out.load_x = std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

}  // namespace ergo::dynamics
