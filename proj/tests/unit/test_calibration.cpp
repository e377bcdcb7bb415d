#include <doctest.h>

#include <cmath>
#include <random>

#include "ergo/calibration.hpp"
#include "synth.hpp"

using namespace ergo;
using namespace ergo::calibration;

namespace {

std::vector<StaticPose> to_static(const std::vector<synth::Pose>& poses) {
  std::vector<StaticPose> out;
  for (const auto& p : poses) out.push_back({p.cfg, p.cop});
  return out;
}

}  // namespace

TEST_CASE("SESC fit recovers the BSIP-derived parameters from noiseless poses") {
  const auto doc = synth::body();
  std::mt19937 rng(21);
  const auto poses = to_static(synth::random_poses(doc, 30, rng));
  const auto fit = fit_sesc(doc.model, poses);
  const auto truth = model::sesc_from_bsip(doc.model);
  CHECK(fit.vertical_offset_fixed);
  CHECK((fit.params.values() - truth.values()).cwiseAbs().maxCoeff() < 1e-8);
  CHECK(fit.residual_rms < 1e-10);

  const auto held_out = synth::random_poses(doc, 50, rng);
  for (const auto& p : held_out)
    CHECK((model::sesc_com(doc.model, fit.params, p.cfg) - model::whole_body_com(doc.model, p.cfg)).norm() < 1e-6);
}

TEST_CASE("SESC fit is a local least-squares optimum under CoP noise") {
  const auto doc = synth::body();
  std::mt19937 rng(22);
  const auto poses = to_static(synth::random_poses(doc, 40, rng, 0.002));
  const auto fit = fit_sesc(doc.model, poses);
  auto rms = [&](const Eigen::VectorXd& p) {
    double ss = 0.0;
    for (const auto& pose : poses) {
      const double pred = model::sesc_com(doc.model, model::SescParameters(p), pose.cfg).x();
      ss += std::pow(pred - pose.cop.x(), 2);
    }
    return std::sqrt(ss / static_cast<double>(poses.size()));
  };
  CHECK(rms(fit.params.values()) == doctest::Approx(fit.residual_rms).epsilon(1e-9));
  const int up = static_cast<int>(fit.params.values().size()) - 2;
  for (int k = 0; k < fit.params.values().size(); ++k) {
    if (k == up) continue;
    for (double d : {-1e-3, 1e-3}) {
      Eigen::VectorXd p = fit.params.values();
      p[k] += d;
      CHECK(rms(p) >= fit.residual_rms);
    }
  }
}

TEST_CASE("SESC fit errors") {
  const auto doc = synth::body();
  std::mt19937 rng(23);
  const auto few = to_static(synth::random_poses(doc, 5, rng));
  CHECK_THROWS_AS(fit_sesc(doc.model, few), ValidationError);

  const auto one = to_static(synth::random_poses(doc, 1, rng));
  std::vector<StaticPose> same(30, one.front());
  CHECK_THROWS_WITH_AS(fit_sesc(doc.model, same), doctest::Contains("rank deficient"), ValidationError);

  auto bad = to_static(synth::random_poses(doc, 30, rng));
  bad[3].cop.x() = NAN;
  CHECK_THROWS_AS(fit_sesc(doc.model, bad), ValidationError);
}

TEST_CASE("parameter names follow storage order") {
  const auto doc = synth::body();
  const auto names = sesc_parameter_names(doc.model);
  const auto n = doc.model.segments().size();
  REQUIRE(names.size() == 2 * n + 2);
  CHECK(names.front() == doc.model.segments().front().name + ".axis");
  CHECK(names[2 * n] == "offset.up");
  CHECK(names[2 * n + 1] == "offset.forward");
}

TEST_CASE("static-pose detection finds held postures") {
  const auto doc = synth::body();
  synth::PostureTrack track;
  track.add(0.0, synth::standing());
  track.add(2.0, synth::standing());
  track.add(3.0, synth::arms_forward());
  track.add(5.0, synth::arms_forward());
  track.add(5.2, synth::standing());  // too short to close a run after it
  const auto frames = synth::record(doc, [&](double t) { return track.at(t, doc); }, nullptr, 6.0);
  const auto poses = detect_static_poses(frames, 60.0, doc.base_height);
  REQUIRE(poses.size() == 3);
  CHECK((poses[1].cfg.q - synth::arms_forward()).cwiseAbs().maxCoeff() < 1e-9);
  CHECK(std::abs(poses[1].cop.x() - model::whole_body_com(doc.model, synth::at_rest(doc, synth::arms_forward())).x()) < 1e-9);
  // Half a differentiator window is trimmed from each end.
  CHECK(poses[0].start == doctest::Approx(5.0 / 60.0));

  StaticPoseOptions strict;
  strict.min_duration = 1.5;
  CHECK(detect_static_poses(frames, 60.0, doc.base_height, {}, strict).size() == 2);
  strict.max_speed = 0.0;
  CHECK_THROWS_AS(detect_static_poses(frames, 60.0, doc.base_height, {}, strict), ValidationError);
}

TEST_CASE("kinematic maxima of a sinusoid") {
  const auto doc = synth::body();
  const auto sesc = model::sesc_from_bsip(doc.model);
  const double A = 0.4, f = 0.5, w = 2 * M_PI * f;
  auto motion = [&](double t) {
    JointVector q = synth::standing();
    q[index_of(Joint::Knee)] = A * std::sin(w * t);
    q[index_of(Joint::Elbow)] = 0.5 * A * std::sin(w * t);
    return synth::at_rest(doc, q);
  };
  const auto frames = synth::record(doc, motion, nullptr, 10.0, {60.0, false, false, false});
  const auto states = trial_configurations(frames, 60.0, doc.base_height);
  const double c0 = model::sesc_com(doc.model, sesc, synth::at_rest(doc, synth::standing())).y();
  const auto km = extract_kinematic_maxima(doc.model, sesc, c0, states);
  CHECK(km.qd_max[index_of(Joint::Knee)] == doctest::Approx(w * A).epsilon(0.02));
  CHECK(km.qdd_max[index_of(Joint::Knee)] == doctest::Approx(w * w * A).epsilon(0.02));
  CHECK(km.qd_max[index_of(Joint::Elbow)] == doctest::Approx(0.5 * w * A).epsilon(0.02));
  CHECK(km.com_range > 0.0);
  CHECK(km.unexcited.size() == 5);

  double brute = 0.0;
  for (const auto& s : states) brute = std::max(brute, std::abs(s.qd[index_of(Joint::Knee)]));
  CHECK(km.qd_max[index_of(Joint::Knee)] == brute);

  const std::vector<model::JointConfiguration> still(10, synth::at_rest(doc, synth::standing()));
  CHECK(extract_kinematic_maxima(doc.model, sesc, c0, still).unexcited.size() == 7);
  CHECK_THROWS_AS(extract_kinematic_maxima(doc.model, sesc, c0, {}), ValidationError);
}

TEST_CASE("torque maxima resolution") {
  JointVector e = JointVector::Constant(100.0), l = JointVector::Constant(110.0);
  e[1] = 200.0;
  e[2] = 50.0;
  const auto r = resolve_torque_maxima(e, l);
  CHECK(r[0] == 100.0);
  CHECK(r[1] == 110.0);
  CHECK(r[2] == 50.0);
  for (int j = 0; j < kNumJoints; ++j) CHECK(r[j] <= std::max(e[j], l[j]));
  CHECK_THROWS_AS(resolve_torque_maxima(JointVector::Zero(), l), ValidationError);
  CHECK_THROWS_AS(resolve_torque_maxima(e, l, -0.1), ValidationError);
}

TEST_CASE("MET curve fit recovers the generating parameters") {
  const double lambda = 0.05, u = 20.0;
  std::vector<MetObservation> obs;
  for (double L : {25.0, 30.0, 40.0, 60.0, 90.0}) obs.push_back({L, -std::log(1.0 - u / L) / lambda});
  const auto fit = fit_met_curve(obs);
  CHECK(fit.fatigue_rate == doctest::Approx(lambda).epsilon(1e-6));
  CHECK(fit.fatigue_max == doctest::Approx(u).epsilon(1e-6));
  CHECK(fit.residual_rms < 1e-6);

  // A constant load that exhausts the subject after T reaches fatigue_max at T.
  indexes::FatigueParams p{JointVector::Constant(fit.fatigue_rate), JointVector::Constant(0.01), JointVector::Zero()};
  const auto s = indexes::update_fatigue({}, JointVector::Constant(40.0), obs[2].endurance, p);
  CHECK(s.torque[0] == doctest::Approx(u).epsilon(1e-6));

  CHECK_THROWS_AS(fit_met_curve(std::vector<MetObservation>{{30.0, 10.0}}), ValidationError);
  CHECK_THROWS_AS(fit_met_curve(std::vector<MetObservation>{{30.0, 10.0}, {30.0, 12.0}}), ValidationError);
  CHECK_THROWS_AS(fit_met_curve(std::vector<MetObservation>{{30.0, 10.0}, {-1.0, 12.0}}), ValidationError);
}

TEST_CASE("fatigue parameters per joint") {
  std::array<std::vector<MetObservation>, kNumJoints> obs;
  for (int j = 0; j < kNumJoints; ++j) {
    const double lambda = 0.01 * (j + 1), u = 10.0 + j;
    for (double L : {1.3 * u, 1.8 * u, 3.0 * u}) obs[static_cast<std::size_t>(j)].push_back({L, -std::log(1.0 - u / L) / lambda});
  }
  const JointVector tmax = JointVector::Constant(150.0);
  const auto fit = fit_fatigue_params(obs, tmax);
  for (int j = 0; j < kNumJoints; ++j) {
    CHECK(fit.calibration.params.fatigue_rate[j] == doctest::Approx(0.01 * (j + 1)).epsilon(1e-6));
    CHECK(fit.calibration.params.recovery_rate[j] == doctest::Approx(0.4 * 0.01 * (j + 1)).epsilon(1e-6));
    CHECK(fit.calibration.params.threshold[j] == doctest::Approx(15.0));
    CHECK(fit.calibration.fatigue_max[j] == doctest::Approx(10.0 + j).epsilon(1e-6));
  }
  obs[3].resize(1);
  CHECK_THROWS_WITH_AS(fit_fatigue_params(obs, tmax), doctest::Contains("back"), ValidationError);
}

TEST_CASE("force maxima from a maximal push") {
  const auto doc = synth::body();
  const double F = 300.0;
  const std::vector<model::JointConfiguration> states(5, synth::at_rest(doc, synth::arms_forward()));
  std::vector<dynamics::ExternalWrench> wrenches;
  for (int k = 0; k < 5; ++k) wrenches.push_back(dynamics::ExternalWrench::at_tip(doc.model, Vec2(-F * (k + 1) / 5.0, 0.0)));
  const auto fc = extract_force_maxima(doc.model, states, wrenches);
  for (auto j : {Joint::Shoulder, Joint::Elbow, Joint::Wrist}) CHECK(fc[index_of(j)] == doctest::Approx(F).epsilon(1e-12));

  JointVector brute = JointVector::Zero();
  for (std::size_t k = 0; k < states.size(); ++k)
    brute = brute.cwiseMax(JointVector(dynamics::compressive_forces(doc.model, states[k], wrenches[k])));
  CHECK(brute == fc);

  const std::vector<dynamics::ExternalWrench> zero(5);
  CHECK_THROWS_WITH_AS(extract_force_maxima(doc.model, states, zero), doctest::Contains("all samples are zero"),
                       ValidationError);
  CHECK_THROWS_AS(extract_force_maxima(doc.model, states, std::span<const dynamics::ExternalWrench>{}), ValidationError);
}

TEST_CASE("force maxima from frames need the wrench channel") {
  const auto doc = synth::body();
  const auto frames = synth::drill_trial(doc, 200.0, 2.0);
  const auto fc = extract_force_maxima(doc.model, frames, 60.0, doc.base_height);
  CHECK(fc[index_of(Joint::Wrist)] > 150.0);
  auto stripped = frames;
  stripped[4].wrench.reset();
  CHECK_THROWS_AS(extract_force_maxima(doc.model, stripped, 60.0, doc.base_height), ValidationError);
}

TEST_CASE("neutral registration uses the SESC CoM height") {
  const auto doc = synth::body();
  const auto sesc = model::sesc_from_bsip(doc.model);
  const auto cfg = synth::at_rest(doc, synth::standing());
  const auto n = register_neutral(doc.model, sesc, cfg);
  CHECK(n.com_z == doctest::Approx(model::whole_body_com(doc.model, cfg).y()).epsilon(1e-12));
  CHECK(n.q == synth::standing());
}
