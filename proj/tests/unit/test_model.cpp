#include <doctest.h>

#include <cmath>
#include <random>

#include "ergo/model.hpp"
#include "ergo/model_io.hpp"
#include "synth.hpp"

using namespace ergo;
using namespace ergo::model;

namespace {

JointConfiguration random_cfg(const ModelDocument& doc, std::mt19937& rng, bool moving) {
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  JointConfiguration c = JointConfiguration::zero(doc.model.num_joints());
  for (int j = 0; j < c.q.size(); ++j) {
    c.q[j] = u(rng);
    if (moving) {
      c.qd[j] = u(rng);
      c.qdd[j] = u(rng);
    }
  }
  c.base.position = Vec2(0.1 * u(rng), doc.base_height + 0.05 * u(rng));
  c.base.pitch = 0.1 * u(rng);
  if (moving) {
    c.base.velocity = Vec2(u(rng), u(rng));
    c.base.acceleration = Vec2(u(rng), u(rng));
    c.base.pitch_rate = u(rng);
    c.base.pitch_acc = u(rng);
  }
  return c;
}

HumanModel rod(double length, double mass, double com, double inertia) {
  return HumanModel(std::nullopt, {Segment{"rod", length, mass, Vec2(com, 0.0), inertia}}, {JointDef{"pivot", 1.0}});
}

}  // namespace

TEST_CASE("zero pose stacks every segment vertically") {
  const auto doc = synth::body();
  auto cfg = synth::at_rest(doc, JointVector::Zero());
  double total = 0.0;
  for (const auto& s : doc.model.segments()) total += s.length;
  const Vec2 tip = chain_tip(doc.model, cfg);
  CHECK(tip.x() == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(tip.y() == doctest::Approx(doc.base_height + total).epsilon(1e-12));
}

TEST_CASE("two-link chain matches planar trigonometry") {
  HumanModel m(std::nullopt, {Segment{"upper", 0.4, 1.0, Vec2(0.2, 0), 0.01}, Segment{"lower", 0.3, 1.0, Vec2(0.15, 0), 0.01}},
               {JointDef{"a", 1.0}, JointDef{"b", 1.0}});
  Eigen::VectorXd q(2);
  q << M_PI / 2, 0.0;
  Vec2 tip = chain_tip(m, JointConfiguration::at_rest(q));
  CHECK(tip.x() == doctest::Approx(0.7));
  CHECK(std::abs(tip.y()) < 1e-12);
  q << M_PI / 2, -M_PI / 2;
  tip = chain_tip(m, JointConfiguration::at_rest(q));
  CHECK(tip.x() == doctest::Approx(0.4));
  CHECK(tip.y() == doctest::Approx(0.3));
}

TEST_CASE("forward kinematics keeps the chain connected") {
  const auto doc = synth::body();
  std::mt19937 rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    const auto cfg = random_cfg(doc, rng, false);
    const auto frames = forward_kinematics(doc.model, cfg);
    for (std::size_t i = 0; i + 1 < frames.size(); ++i) {
      const Vec2 end = frames[i].origin + doc.model.segments()[i].length * frames[i].axis();
      CHECK((end - frames[i + 1].origin).norm() < 1e-12);
    }
  }
}

TEST_CASE("joint i only moves segments distal to it") {
  const auto doc = synth::body();
  std::mt19937 rng(2);
  auto cfg = random_cfg(doc, rng, false);
  const auto before = forward_kinematics(doc.model, cfg);
  cfg.q[4] += 0.3;
  const auto after = forward_kinematics(doc.model, cfg);
  for (int i = 0; i < 4; ++i) CHECK(before[static_cast<std::size_t>(i)].angle == after[static_cast<std::size_t>(i)].angle);
  CHECK(before[4].angle != after[4].angle);
}

TEST_CASE("whole-body CoM equals brute-force summation") {
  const auto doc = synth::body();
  std::mt19937 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const auto cfg = random_cfg(doc, rng, false);
    const auto frames = forward_kinematics(doc.model, cfg);
    Vec2 sum = Vec2::Zero();
    double mass = 0.0;
    const auto& foot = *doc.model.base_segment();
    SegmentFrame base{cfg.base.position, cfg.base.pitch};
    sum += foot.mass * base.point(foot.com_offset);
    mass += foot.mass;
    for (std::size_t i = 0; i < frames.size(); ++i) {
      const auto& s = doc.model.segments()[i];
      sum += s.mass * frames[i].point(s.com_offset);
      mass += s.mass;
    }
    CHECK((whole_body_com(doc.model, cfg) - sum / mass).norm() < 1e-12);
  }
}

TEST_CASE("CoM of simple chains") {
  const HumanModel single = rod(1.0, 3.0, 0.4, 0.1);
  Eigen::VectorXd q(1);
  q << 0.3;
  const auto c = whole_body_com(single, JointConfiguration::at_rest(q));
  CHECK(c.x() == doctest::Approx(0.4 * std::sin(0.3)));
  CHECK(c.y() == doctest::Approx(0.4 * std::cos(0.3)));

  HumanModel two(std::nullopt, {Segment{"a", 1.0, 2.0, Vec2(0.5, 0), 0.1}, Segment{"b", 1.0, 2.0, Vec2(0.5, 0), 0.1}},
                 {JointDef{"a", 1.0}, JointDef{"b", 1.0}});
  Eigen::VectorXd q2(2);
  q2 << 0.2, 0.7;
  const auto cfg = JointConfiguration::at_rest(q2);
  const auto f = forward_kinematics(two, cfg);
  const Vec2 mid = 0.5 * (f[0].point(Vec2(0.5, 0)) + f[1].point(Vec2(0.5, 0)));
  CHECK((whole_body_com(two, cfg) - mid).norm() < 1e-12);

  HumanModel massless(std::nullopt, {Segment{"a", 1.0, 0.0, Vec2(0.5, 0), 0.0}}, {JointDef{"a", 1.0}});
  CHECK_THROWS_AS(whole_body_com(massless, JointConfiguration::at_rest(q)), ValidationError);
}

TEST_CASE("SESC from BSIPs reproduces the CoM on random poses") {
  const auto doc = synth::body(68.0, 1.66);
  const auto p = sesc_from_bsip(doc.model);
  CHECK(p.values().size() == SescParameters::size_for(7));
  std::mt19937 rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const auto cfg = random_cfg(doc, rng, false);
    CHECK((sesc_com(doc.model, p, cfg) - whole_body_com(doc.model, cfg)).norm() < 1e-9);
  }
}

TEST_CASE("SESC CoM derivatives match the BSIP CoM motion") {
  const auto doc = synth::body();
  const auto p = sesc_from_bsip(doc.model);
  std::mt19937 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const auto cfg = random_cfg(doc, rng, true);
    const auto a = sesc_com_motion(doc.model, p, cfg);
    const auto b = com_motion(doc.model, cfg);
    CHECK((a.position - b.position).norm() < 1e-9);
    CHECK((a.velocity - b.velocity).norm() < 1e-9);
    CHECK((a.acceleration - b.acceleration).norm() < 1e-9);
  }
}

TEST_CASE("SESC CoM is linear in the parameters") {
  const auto doc = synth::body();
  std::mt19937 rng(6);
  std::normal_distribution<double> n(0.0, 0.1);
  const auto cfg = random_cfg(doc, rng, false);
  Eigen::VectorXd a(16), b(16);
  for (int i = 0; i < 16; ++i) {
    a[i] = n(rng);
    b[i] = n(rng);
  }
  const SescParameters pa(a), pb(b);
  const Vec2 base = cfg.base.position;
  const Vec2 lhs = sesc_com(doc.model, pa * 2.0 + pb * -0.5, cfg) - base;
  const Vec2 rhs = 2.0 * (sesc_com(doc.model, pa, cfg) - base) - 0.5 * (sesc_com(doc.model, pb, cfg) - base);
  CHECK((lhs - rhs).norm() < 1e-12);

  // Zero chain coefficients leave only the base offset.
  Eigen::VectorXd off = Eigen::VectorXd::Zero(16);
  off[14] = 0.05;  // up
  off[15] = 0.02;  // forward
  auto flat = cfg;
  flat.base.pitch = 0.0;
  const Vec2 c = sesc_com(doc.model, SescParameters(off), flat);
  CHECK(c.x() == doctest::Approx(base.x() + 0.02));
  CHECK(c.y() == doctest::Approx(base.y() + 0.05));
  CHECK_THROWS_AS(sesc_com(doc.model, SescParameters(Eigen::VectorXd::Zero(6)), cfg), ValidationError);
}

TEST_CASE("static CoP lies under the CoM") {
  const auto doc = synth::body();
  const auto upright = synth::at_rest(doc, synth::standing());
  const Vec2 cop = estimate_cop_static(doc.model, upright);
  CHECK(cop.x() == doctest::Approx(whole_body_com(doc.model, upright).x()));
  CHECK(cop.y() == 0.0);

  JointVector bent = synth::standing();
  bent[index_of(Joint::Back)] = 0.8;
  const auto flexed = synth::at_rest(doc, bent);
  const double shift = whole_body_com(doc.model, flexed).x() - whole_body_com(doc.model, upright).x();
  CHECK(shift > 0.0);
  CHECK(estimate_cop_static(doc.model, flexed).x() - cop.x() == doctest::Approx(shift));

  const auto dyn = estimate_cop_dynamic(doc.model, flexed);
  CHECK(dyn.valid);
  CHECK(dyn.point.x() == doctest::Approx(estimate_cop_static(doc.model, flexed).x()).epsilon(1e-12));
}

TEST_CASE("dynamic CoP under pure horizontal acceleration") {
  const auto doc = synth::body();
  auto cfg = synth::at_rest(doc, synth::standing());
  cfg.base.acceleration = Vec2(1.5, 0.0);
  const Vec2 c = whole_body_com(doc.model, cfg);
  const auto cop = estimate_cop_dynamic(doc.model, cfg);
  REQUIRE(cop.valid);
  CHECK(cop.point.x() == doctest::Approx(c.x() - c.y() * 1.5 / kGravity).epsilon(1e-12));
}

TEST_CASE("dynamic CoP approaches the static one as rates vanish") {
  const auto doc = synth::body();
  std::mt19937 rng(7);
  const auto moving = random_cfg(doc, rng, true);
  auto still = moving;
  still.qd.setZero();
  still.qdd.setZero();
  still.base.velocity.setZero();
  still.base.acceleration.setZero();
  still.base.pitch_rate = still.base.pitch_acc = 0.0;
  const double x0 = estimate_cop_static(doc.model, still).x();
  double last = INFINITY;
  for (double s : {1.0, 0.1, 0.01, 0.001}) {
    auto c = moving;
    c.qd *= s;
    c.qdd *= s;
    c.base.velocity *= s;
    c.base.acceleration *= s;
    c.base.pitch_rate *= s;
    c.base.pitch_acc *= s;
    const double err = std::abs(estimate_cop_dynamic(doc.model, c).point.x() - x0);
    CHECK(err <= last + 1e-15);
    last = err;
  }
  CHECK(last < 1e-3);
}

TEST_CASE("free fall flags the dynamic CoP invalid") {
  const auto doc = synth::body();
  auto cfg = synth::at_rest(doc, synth::standing());
  cfg.base.acceleration = Vec2(0.0, -kGravity);
  CHECK_FALSE(estimate_cop_dynamic(doc.model, cfg).valid);
}

TEST_CASE("dynamic CoP matches a forward-dynamics pendulum") {
  // Rod pinned at the origin, driven by a ground torque; RK4 integration.
  const double L = 1.0, m = 10.0, c = 0.55, I = 0.9;
  const HumanModel pend = rod(L, m, c, I);
  const double J = I + m * c * c;
  auto torque = [](double t, double phi, double w) { return -700.0 * phi - 80.0 * w + 20.0 * std::sin(3.0 * t); };
  auto accel = [&](double t, double phi, double w) { return (m * kGravity * c * std::sin(phi) + torque(t, phi, w)) / J; };
  double phi = 0.2, w = 0.0, t = 0.0;
  const double h = 1e-4;
  double worst = 0.0;
  for (int k = 0; k < 20000; ++k) {
    if (k % 500 == 0) {
      const double al = accel(t, phi, w);
      Eigen::VectorXd q(1), qd(1), qdd(1);
      q << phi;
      qd << w;
      qdd << al;
      JointConfiguration cfg{q, qd, qdd, {}};
      const Vec2 a_com = c * Vec2(al * std::cos(phi) - w * w * std::sin(phi), -al * std::sin(phi) - w * w * std::cos(phi));
      const Vec2 grf = m * (a_com + Vec2(0.0, kGravity));
      // Ground reaction: force grf and moment tau about the pivot, so the CoP x is -tau / grf_z.
      const double cop_oracle = -torque(t, phi, w) / grf.y();
      const auto est = estimate_cop_dynamic(pend, cfg);
      REQUIRE(est.valid);
      worst = std::max(worst, std::abs(est.point.x() - cop_oracle));
    }
    const double k1p = w, k1w = accel(t, phi, w);
    const double k2p = w + 0.5 * h * k1w, k2w = accel(t + h / 2, phi + 0.5 * h * k1p, w + 0.5 * h * k1w);
    const double k3p = w + 0.5 * h * k2w, k3w = accel(t + h / 2, phi + 0.5 * h * k2p, w + 0.5 * h * k2w);
    const double k4p = w + h * k3w, k4w = accel(t + h, phi + h * k3p, w + h * k3w);
    phi += h / 6 * (k1p + 2 * k2p + 2 * k3p + k4p);
    w += h / 6 * (k1w + 2 * k2w + 2 * k3w + k4w);
    t += h;
  }
  CHECK(worst < 1e-3);
}

TEST_CASE("configuration checks") {
  const auto doc = synth::body();
  JointConfiguration bad = JointConfiguration::zero(6);
  CHECK_THROWS_AS(forward_kinematics(doc.model, bad), ValidationError);
  auto nan = synth::at_rest(doc, synth::standing());
  nan.q[2] = NAN;
  CHECK_THROWS_AS(forward_kinematics(doc.model, nan), ValidationError);
  CHECK_THROWS_AS(HumanModel(std::nullopt, {Segment{"a", 0.0, 1.0, Vec2(0, 0), 0.0}}, {JointDef{"a", 1.0}}), ValidationError);
  CHECK_THROWS_AS(HumanModel(std::nullopt, {Segment{"a", 1.0, 1.0, Vec2(2.0, 0), 0.0}}, {JointDef{"a", 1.0}}), ValidationError);
}

TEST_CASE("scaled model sums to the subject mass and round-trips through text") {
  const auto doc = synth::body(82.5, 1.81);
  CHECK(doc.model.total_mass() == doctest::Approx(82.5).epsilon(1e-9));
  const auto back = parse_model(format_model(doc));
  CHECK(back.name == doc.name);
  CHECK(back.base_height == doc.base_height);
  CHECK(back.model.total_mass() == doc.model.total_mass());
  REQUIRE(back.model.segments().size() == doc.model.segments().size());
  for (std::size_t i = 0; i < back.model.segments().size(); ++i) {
    const auto& a = back.model.segments()[i];
    const auto& b = doc.model.segments()[i];
    CHECK(a.length == b.length);
    CHECK(a.mass == b.mass);
    CHECK(a.com_offset == b.com_offset);
    CHECK(a.inertia == b.inertia);
    CHECK(back.model.joints()[i].sign == doc.model.joints()[i].sign);
  }
  CHECK(format_model(back) == format_model(doc));
}

TEST_CASE("BSIP and limit tables reject malformed input") {
  CHECK_THROWS_AS(BsipTable::parse(""), ValidationError);
  CHECK_THROWS_AS(BsipTable::parse("format = ergo-bsip/1\nsegment shank ankle +1 0.1\n"), ValidationError);
  CHECK_THROWS_AS(parse_model("format = nonsense\n"), ValidationError);
  const auto& lim = JointLimits::defaults();
  for (int j = 0; j < kNumJoints; ++j) {
    CHECK(lim.q_max[j] > lim.q_min[j]);
    CHECK(lim.qd_max[j] > 0.0);
    CHECK(lim.torque_max[j] > 0.0);
  }
}
