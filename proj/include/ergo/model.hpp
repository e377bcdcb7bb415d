#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "ergo/types.hpp"

// Sagittal-plane human model.
//
// Coordinates are (x, z): x points forward, z points up, the ground is z = 0.
// A segment at absolute angle phi has its longitudinal axis along
// (sin phi, cos phi) and its forward normal along (cos phi, -sin phi), so
// phi = 0 is upright and positive phi is a positive rotation about the
// lateral y axis. Planar moments are y components: r x f = r_z f_x - r_x f_z.
namespace ergo::model {

struct Segment {
  std::string name;
  double length = 0.0;     // [m]
  double mass = 0.0;       // [kg]
  Vec2 com_offset{0, 0};   // (along axis, along forward normal) from the segment origin [m]
  double inertia = 0.0;    // about the segment CoM [kg m^2]
};

struct JointDef {
  std::string name;
  /// +1 when a positive joint angle rotates the distal segment about +y.
  double sign = 1.0;
};

/// Sagittal subset of the floating base: 2 translations + pitch. The
/// remaining three virtual DoFs of the 3D base are held at zero.
struct BaseMotion {
  Vec2 position{0, 0};
  double pitch = 0.0;
  Vec2 velocity{0, 0};
  double pitch_rate = 0.0;
  Vec2 acceleration{0, 0};
  double pitch_acc = 0.0;
};

struct JointConfiguration {
  Eigen::VectorXd q;
  Eigen::VectorXd qd;
  Eigen::VectorXd qdd;
  BaseMotion base;

  static JointConfiguration zero(int num_joints);
  static JointConfiguration at_rest(const Eigen::VectorXd& q, const BaseMotion& base = {});
};

/// Floating-base serial chain. The base frame sits at the first joint; an
/// optional base segment (the feet) moves rigidly with it. Segment i is
/// distal to joint i, and joint i+1 sits at the distal end of segment i.
class HumanModel {
 public:
  HumanModel(std::optional<Segment> base_segment, std::vector<Segment> segments,
             std::vector<JointDef> joints);

  int num_joints() const { return static_cast<int>(joints_.size()); }
  const std::vector<Segment>& segments() const { return segments_; }
  const std::vector<JointDef>& joints() const { return joints_; }
  const std::optional<Segment>& base_segment() const { return base_segment_; }
  double total_mass() const { return total_mass_; }

  bool is_full_body() const { return num_joints() == kNumJoints; }
  /// Throws unless the chain exposes the seven reported joints.
  void require_full_body() const;
  /// Throws when cfg does not match this chain.
  void check(const JointConfiguration& cfg) const;

 private:
  std::optional<Segment> base_segment_;
  std::vector<Segment> segments_;
  std::vector<JointDef> joints_;
  double total_mass_ = 0.0;
};

struct SegmentFrame {
  Vec2 origin;
  double angle = 0.0;

  Vec2 axis() const;
  Vec2 normal() const;
  /// World position of a point given in (axis, normal) coordinates.
  Vec2 point(const Vec2& local) const;
};

/// Positions, velocities and accelerations of every segment of the chain.
struct ChainState {
  SegmentFrame base;
  std::vector<SegmentFrame> frames;
  std::vector<Vec2> origin_vel, origin_acc;
  std::vector<double> omega, alpha;
  std::vector<Vec2> com, com_vel, com_acc;
  Vec2 base_com{0, 0}, base_com_vel{0, 0}, base_com_acc{0, 0};
};

Vec2 axis_of(double angle);
Vec2 normal_of(double angle);
/// y component of the planar cross product.
inline double cross(const Vec2& r, const Vec2& f) { return r.y() * f.x() - r.x() * f.y(); }
/// omega x r for an angular velocity about +y.
inline Vec2 spin(double omega, const Vec2& r) { return omega * Vec2(r.y(), -r.x()); }

std::vector<SegmentFrame> forward_kinematics(const HumanModel& model, const JointConfiguration& cfg);
ChainState chain_state(const HumanModel& model, const JointConfiguration& cfg);

/// Distal end of the last segment.
Vec2 chain_tip(const HumanModel& model, const JointConfiguration& cfg);

/// 2 x n Jacobian of a point fixed on the last segment (local coordinates).
Eigen::Matrix<double, 2, Eigen::Dynamic> point_jacobian(const HumanModel& model,
                                                        const JointConfiguration& cfg,
                                                        const Vec2& local_point);

Vec2 whole_body_com(const HumanModel& model, const JointConfiguration& cfg);

struct ComMotion {
  Vec2 position{0, 0};
  Vec2 velocity{0, 0};
  Vec2 acceleration{0, 0};
  /// Rate of sagittal angular momentum about the CoM [N m].
  double momentum_rate = 0.0;
};

ComMotion com_motion(const HumanModel& model, const JointConfiguration& cfg);

// ---------------------------------------------------------------------------
// Statically equivalent serial chain

/// Coefficients of the statically equivalent serial chain:
///   C_M = x_base + sum_j (a_j * axis(phi_j) + b_j * normal(phi_j)) + R(pitch) * c
/// with one (a_j, b_j) pair per joint-driven segment and a constant offset c
/// expressed in the base frame as (up, forward), stored last.
class SescParameters {
 public:
  SescParameters() = default;
  explicit SescParameters(Eigen::VectorXd values);

  static SescParameters zeros(int num_segments);
  static int size_for(int num_segments) { return 2 * num_segments + 2; }

  int num_segments() const { return static_cast<int>(values_.size() / 2) - 1; }
  const Eigen::VectorXd& values() const { return values_; }
  Vec2 pair(int segment) const { return values_.segment<2>(2 * segment); }
  /// Constant offset in base coordinates (up, forward).
  Vec2 offset() const { return values_.tail<2>(); }

  SescParameters operator+(const SescParameters& o) const;
  SescParameters operator*(double s) const;

 private:
  Eigen::VectorXd values_;
};

/// Absolute angles of every SESC column pair: joint segments, then the base.
Eigen::VectorXd sesc_angles(const JointConfiguration& cfg, const std::vector<JointDef>& joints);

/// Regressor Phi with C_M - x_base = Phi * params (2 x (2n+2)).
Eigen::Matrix<double, 2, Eigen::Dynamic> sesc_regressor(const HumanModel& model,
                                                       const JointConfiguration& cfg);

Vec2 sesc_com(const HumanModel& model, const SescParameters& params, const JointConfiguration& cfg);
/// Analytic time derivatives of sesc_com.
ComMotion sesc_com_motion(const HumanModel& model, const SescParameters& params,
                          const JointConfiguration& cfg);

/// Closed-form SESC coefficients implied by the model's BSIPs.
SescParameters sesc_from_bsip(const HumanModel& model);

// ---------------------------------------------------------------------------
// Centre of pressure

/// Quasi-static CoP: the CoM projected onto the ground line.
Vec2 estimate_cop_static(const HumanModel& model, const JointConfiguration& cfg);
Vec2 estimate_cop_static(const HumanModel& model, const SescParameters& params,
                         const JointConfiguration& cfg);

struct CopEstimate {
  Vec2 point{0, 0};
  bool valid = true;
};

/// Dynamic CoP from CoM acceleration and angular-momentum rate:
///   x_P = x_C - (dH + M z_C ddx_C) / (M (g + ddz_C)).
/// Flags the sample invalid when the vertical support force drops below eps.
CopEstimate estimate_cop_dynamic(const HumanModel& model, const JointConfiguration& cfg,
                                 double eps = 1e-6);

}  // namespace ergo::model
