#include "ergo/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/SVD>
#include <boost/math/tools/minima.hpp>
#include <fmt/format.h>
#include <fmt/ranges.h>

namespace ergo::calibration {

std::vector<JointConfiguration> trial_configurations(std::span<const KinodynamicFrame> frames,
                                                     double sample_rate, double base_height,
                                                     const signal::DifferentiatorSpec& spec) {
  if (frames.empty()) throw ValidationError("calibration trial is empty");
  constexpr int kChannels = kNumJoints + 3;
  signal::StreamingDifferentiator diff(spec, sample_rate, kChannels);
  std::vector<JointConfiguration> out(frames.size());

  auto store = [&](const std::vector<signal::DerivativeSample>& samples) {
    for (const auto& s : samples) {
      JointConfiguration& c = out[s.index];
      c.q = s.value.head<kNumJoints>();
      c.qd = s.rate.head<kNumJoints>();
      c.qdd = s.accel.head<kNumJoints>();
      c.base.position = s.value.segment<2>(kNumJoints);
      c.base.pitch = s.value[kNumJoints + 2];
      c.base.velocity = s.rate.segment<2>(kNumJoints);
      c.base.pitch_rate = s.rate[kNumJoints + 2];
      c.base.acceleration = s.accel.segment<2>(kNumJoints);
      c.base.pitch_acc = s.accel[kNumJoints + 2];
    }
  };

  Eigen::VectorXd x(kChannels);
  for (const auto& f : frames) {
    x.head<kNumJoints>() = f.q;
    x.tail<3>() = f.base ? *f.base : Vec3(0.0, base_height, 0.0);
    store(diff.push(x));
  }
  store(diff.flush());
  return out;
}

dynamics::ExternalWrench hand_wrench(const HumanModel& model, const Vec6& wrench,
                                     const SagittalProjection& projection) {
  return dynamics::ExternalWrench::at_tip(model, projection.force(wrench.head<3>()),
                                          projection.moment(wrench.tail<3>()));
}

// ---------------------------------------------------------------------------

std::vector<StaticPose> detect_static_poses(std::span<const KinodynamicFrame> frames, double sample_rate,
                                            double base_height, const SagittalProjection& projection,
                                            const StaticPoseOptions& options,
                                            const signal::DifferentiatorSpec& spec) {
  if (!(options.max_speed > 0.0) || !(options.min_duration > 0.0))
    throw ValidationError("static-pose detector needs a positive speed bound and duration");
  const auto states = trial_configurations(frames, sample_rate, base_height, spec);
  std::vector<StaticPose> poses;

  const auto trim = static_cast<std::size_t>(spec.lag());
  auto close_run = [&](std::size_t begin, std::size_t end) {
    if (static_cast<double>(end - begin) / sample_rate < options.min_duration - 1e-9) return;
    // The ends of a run are still settling: slow, but not yet unaccelerated.
    if (end - begin > 4 * trim) {
      begin += trim;
      end -= trim;
    }
    const auto n = end - begin;
    Eigen::VectorXd q = Eigen::VectorXd::Zero(kNumJoints);
    Vec3 base = Vec3::Zero();
    Vec2 cop = Vec2::Zero();
    for (std::size_t k = begin; k < end; ++k) {
      if (!frames[k].cop)
        throw ValidationError(fmt::format("static pose at t = {} s has no CoP sample", frames[k].time));
      q += states[k].q;
      base += Vec3(states[k].base.position.x(), states[k].base.position.y(), states[k].base.pitch);
      cop += projection.cop(*frames[k].cop);
    }
    const double inv = 1.0 / static_cast<double>(n);
    model::BaseMotion bm;
    bm.position = base.head<2>() * inv;
    bm.pitch = base.z() * inv;
    poses.push_back({JointConfiguration::at_rest(q * inv, bm), cop * inv, frames[begin].time,
                     frames[end - 1].time});
  };

  std::size_t run_start = 0;
  bool in_run = false;
  for (std::size_t k = 0; k < states.size(); ++k) {
    const bool still = states[k].qd.cwiseAbs().maxCoeff() < options.max_speed;
    if (still && !in_run) {
      run_start = k;
      in_run = true;
    } else if (!still && in_run) {
      close_run(run_start, k);
      in_run = false;
    }
  }
  if (in_run) close_run(run_start, states.size());
  return poses;
}

std::vector<std::string> sesc_parameter_names(const HumanModel& model) {
  std::vector<std::string> names;
  for (const auto& s : model.segments()) {
    names.push_back(s.name + ".axis");
    names.push_back(s.name + ".normal");
  }
  names.emplace_back("offset.up");
  names.emplace_back("offset.forward");
  return names;
}

namespace {

struct Solve {
  Eigen::VectorXd x;
  double condition = 0.0;
  std::vector<int> weak;  // columns taking part in unobservable directions
};

Solve scaled_least_squares(const Eigen::MatrixXd& A, const Eigen::VectorXd& y, double max_condition) {
  const auto P = A.cols();
  Eigen::VectorXd scale = A.colwise().norm().transpose();
  for (Eigen::Index c = 0; c < P; ++c)
    if (!(scale[c] > 0.0)) scale[c] = 1.0;
  const Eigen::MatrixXd As = A * scale.cwiseInverse().asDiagonal();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(As, Eigen::ComputeThinU | Eigen::ComputeFullV);
  const Eigen::VectorXd& sigma = svd.singularValues();

  // Rows short of columns leave singular values that are implicitly zero.
  Eigen::VectorXd full = Eigen::VectorXd::Zero(P);
  full.head(sigma.size()) = sigma;
  Solve s;
  const double top = full[0];
  s.condition = full[P - 1] > 0.0 ? top / full[P - 1] : std::numeric_limits<double>::infinity();
  if (s.condition > max_condition || !(top > 0.0)) {
    std::vector<bool> flagged(static_cast<std::size_t>(P), false);
    for (Eigen::Index k = 0; k < P; ++k) {
      if (full[k] * max_condition >= top && top > 0.0) continue;
      for (Eigen::Index c = 0; c < P; ++c)
        if (std::abs(svd.matrixV()(c, k)) >= 0.1) flagged[static_cast<std::size_t>(c)] = true;
    }
    for (Eigen::Index c = 0; c < P; ++c)
      if (flagged[static_cast<std::size_t>(c)]) s.weak.push_back(static_cast<int>(c));
    return s;
  }
  s.x = svd.solve(y).cwiseQuotient(scale);
  return s;
}

}  // namespace

SescFit fit_sesc(const HumanModel& model, std::span<const StaticPose> poses, const SescFitOptions& options) {
  const int P = SescParameters::size_for(model.num_joints());
  if (2 * static_cast<int>(poses.size()) < P)
    throw ValidationError(fmt::format("SESC fit needs at least {} static poses, got {}", (P + 1) / 2, poses.size()));
  if (!(options.max_condition > 1.0)) throw ValidationError("SESC condition bound must exceed 1");

  const auto N = static_cast<Eigen::Index>(poses.size());
  Eigen::MatrixXd A(N, P);
  Eigen::VectorXd y(N);
  for (Eigen::Index i = 0; i < N; ++i) {
    const auto& pose = poses[static_cast<std::size_t>(i)];
    model.check(pose.cfg);
    A.row(i) = model::sesc_regressor(model, pose.cfg).row(0);
    y[i] = pose.cop.x() - pose.cfg.base.position.x();
  }
  if (!A.allFinite() || !y.allFinite()) throw ValidationError("SESC poses contain non-finite values");

  const auto names = sesc_parameter_names(model);
  SescFit fit;
  Solve s = scaled_least_squares(A, y, options.max_condition);
  Eigen::VectorXd params;
  if (s.weak.empty()) {
    params = s.x;
  } else {
    // Without pitch excitation the vertical offset never reaches the CoP;
    // take it from the prior and retry on the remaining columns.
    const int up = P - 2;
    const double prior = options.vertical_offset.value_or(model::sesc_from_bsip(model).offset()[0]);
    Eigen::MatrixXd Ar(N, P - 1);
    Ar << A.leftCols(up), A.rightCols(1);
    const Solve r = scaled_least_squares(Ar, y - A.col(up) * prior, options.max_condition);
    if (!r.weak.empty()) {
      std::vector<std::string> weak;
      for (int c : r.weak) weak.push_back(names[static_cast<std::size_t>(c < up ? c : c + 1)]);
      throw ValidationError(fmt::format(
          "SESC regressor is rank deficient (condition {:.3g}); poses do not excite: {}", r.condition,
          fmt::join(weak, ", ")));
    }
    params.resize(P);
    params << r.x.head(up), prior, r.x.tail(1);
    s.condition = r.condition;
    fit.vertical_offset_fixed = true;
  }
  fit.params = SescParameters(params);
  fit.condition = s.condition;
  fit.residual_rms = std::sqrt((A * params - y).squaredNorm() / static_cast<double>(N));
  return fit;
}

NeutralPosture register_neutral(const HumanModel& model, const SescParameters& sesc,
                                const JointConfiguration& cfg) {
  if (cfg.q.size() != kNumJoints) throw ValidationError("neutral posture needs 7 joint angles");
  return NeutralPosture{cfg.q, model::sesc_com(model, sesc, cfg).y()};
}

// ---------------------------------------------------------------------------

KinematicMaxima extract_kinematic_maxima(const HumanModel& model, const SescParameters& sesc,
                                         double neutral_com_z, std::span<const JointConfiguration> states,
                                         double excitation_speed) {
  model.require_full_body();
  if (states.empty()) throw ValidationError("kinematic calibration trial is empty");
  KinematicMaxima out;
  for (const auto& c : states) {
    out.qd_max = out.qd_max.cwiseMax(c.qd.cwiseAbs());
    out.qdd_max = out.qdd_max.cwiseMax(c.qdd.cwiseAbs());
    out.com_range = std::max(out.com_range, std::abs(model::sesc_com(model, sesc, c).y() - neutral_com_z));
  }
  for (int j = 0; j < kNumJoints; ++j)
    if (out.qd_max[j] < excitation_speed) out.unexcited.emplace_back(kJointNames[static_cast<std::size_t>(j)]);
  return out;
}

JointVector resolve_torque_maxima(const JointVector& experimental, const JointVector& literature, double band) {
  if (!(band >= 0.0)) throw ValidationError("torque comparability band must be nonnegative");
  JointVector out;
  for (int j = 0; j < kNumJoints; ++j) {
    const double e = experimental[j], l = literature[j];
    if (!(e > 0.0) || !(l > 0.0))
      throw ValidationError(fmt::format("torque maxima for joint {} must be positive",
                                        kJointNames[static_cast<std::size_t>(j)]));
    out[j] = std::abs(e - l) <= band * l ? e : std::min(e, l);
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

struct MetProblem {
  std::vector<double> load, time;

  double g(std::size_t i, double u) const { return -std::log1p(-u / load[i]); }

  // Best time scale 1/lambda for a given threshold, and the squared error.
  std::pair<double, double> profile(double u) const {
    double tg = 0.0, gg = 0.0;
    for (std::size_t i = 0; i < load.size(); ++i) {
      const double gi = g(i, u);
      tg += time[i] * gi;
      gg += gi * gi;
    }
    const double s = tg / gg;
    double sse = 0.0;
    for (std::size_t i = 0; i < load.size(); ++i) sse += std::pow(time[i] - s * g(i, u), 2);
    return {s, sse};
  }
};

}  // namespace

MetFit fit_met_curve(std::span<const MetObservation> observations) {
  if (observations.size() < 2) throw ValidationError("MET fit needs at least 2 observations");
  MetProblem pb;
  for (const auto& o : observations) {
    if (!(o.load > 0.0) || !(o.endurance > 0.0) || !std::isfinite(o.load) || !std::isfinite(o.endurance))
      throw ValidationError("MET observations need positive load and endurance time");
    pb.load.push_back(o.load);
    pb.time.push_back(o.endurance);
  }
  const double lmin = *std::min_element(pb.load.begin(), pb.load.end());
  const double lmax = *std::max_element(pb.load.begin(), pb.load.end());
  if (!(lmax > lmin * (1.0 + 1e-12))) throw ValidationError("MET fit needs at least 2 distinct load levels");

  // Coarse scan of the threshold over (0, lmin), denser near lmin where
  // endurance times diverge, then Brent inside the best bracket.
  std::vector<double> grid;
  for (int k = 1; k < 200; ++k) grid.push_back(lmin * k / 200.0);
  for (int m = 3; m <= 12; ++m) grid.push_back(lmin * (1.0 - std::pow(10.0, -m)));
  std::sort(grid.begin(), grid.end());
  std::size_t best = 0;
  double best_sse = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double sse = pb.profile(grid[k]).second;
    if (sse < best_sse) {
      best_sse = sse;
      best = k;
    }
  }
  const double lo = best == 0 ? grid[0] * 1e-6 : grid[best - 1];
  const double hi = best + 1 == grid.size() ? lmin * (1.0 - 1e-15) : grid[best + 1];
  auto brent = boost::math::tools::brent_find_minima([&](double u) { return pb.profile(u).second; }, lo, hi,
                                                     std::numeric_limits<double>::digits / 2);
  double u = brent.first;
  double s = pb.profile(u).first;

  // Gauss-Newton polish on (threshold, time scale).
  auto sse_at = [&](double uu, double ss) {
    double e = 0.0;
    for (std::size_t i = 0; i < pb.load.size(); ++i) e += std::pow(pb.time[i] - ss * pb.g(i, uu), 2);
    return e;
  };
  double cur = sse_at(u, s);
  for (int it = 0; it < 50; ++it) {
    Eigen::MatrixXd J(static_cast<Eigen::Index>(pb.load.size()), 2);
    Eigen::VectorXd r(J.rows());
    for (std::size_t i = 0; i < pb.load.size(); ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      r[ii] = pb.time[i] - s * pb.g(i, u);
      J(ii, 0) = s / (pb.load[i] - u);
      J(ii, 1) = pb.g(i, u);
    }
    const Eigen::Vector2d step = J.colPivHouseholderQr().solve(r);
    double t = 1.0;
    bool improved = false;
    while (t > 1e-8) {
      const double nu = u + t * step[0], ns = s + t * step[1];
      if (nu > 0.0 && nu < lmin && ns > 0.0) {
        const double e = sse_at(nu, ns);
        if (e < cur) {
          u = nu;
          s = ns;
          cur = e;
          improved = true;
          break;
        }
      }
      t *= 0.5;
    }
    if (!improved || step.norm() < 1e-15 * (u + s)) break;
  }
  if (!(s > 0.0) || !std::isfinite(s)) throw RuntimeError("MET fit did not converge");
  return MetFit{1.0 / s, u, std::sqrt(cur / static_cast<double>(pb.load.size()))};
}

FatigueFit fit_fatigue_params(const std::array<std::vector<MetObservation>, kNumJoints>& observations,
                              const JointVector& torque_max, const FatigueFitOptions& options) {
  if (!(options.recovery_ratio > 0.0)) throw ValidationError("recovery ratio must be positive");
  if (!(options.threshold_fraction >= 0.0)) throw ValidationError("threshold fraction must be nonnegative");
  FatigueFit out;
  auto& p = out.calibration.params;
  for (int j = 0; j < kNumJoints; ++j) {
    const auto name = kJointNames[static_cast<std::size_t>(j)];
    if (!(torque_max[j] > 0.0))
      throw ValidationError(fmt::format("torque maximum for joint {} must be positive", name));
    MetFit f;
    try {
      f = fit_met_curve(observations[static_cast<std::size_t>(j)]);
    } catch (const ValidationError& e) {
      throw ValidationError(fmt::format("joint {}: {}", name, e.what()));
    }
    p.fatigue_rate[j] = f.fatigue_rate;
    p.recovery_rate[j] = options.recovery_ratio * f.fatigue_rate;
    p.threshold[j] = options.threshold_fraction * torque_max[j];
    out.calibration.fatigue_max[j] = f.fatigue_max;
    out.residual_rms[j] = f.residual_rms;
  }
  return out;
}

// ---------------------------------------------------------------------------

JointVector extract_force_maxima(const HumanModel& model, std::span<const JointConfiguration> states,
                                 std::span<const dynamics::ExternalWrench> wrenches) {
  model.require_full_body();
  if (wrenches.empty()) throw ValidationError("force calibration trial has no wrench channel");
  if (wrenches.size() != states.size())
    throw ValidationError("force calibration trial has mismatched wrench and pose counts");
  if (std::all_of(wrenches.begin(), wrenches.end(), [](const auto& w) { return w.is_zero(); }))
    throw ValidationError("force calibration trial records no exerted wrench (all samples are zero)");
  JointVector out = JointVector::Zero();
  for (std::size_t k = 0; k < states.size(); ++k)
    out = out.cwiseMax(JointVector(dynamics::compressive_forces(model, states[k], wrenches[k])));
  std::vector<std::string> zero;
  for (int j = 0; j < kNumJoints; ++j)
    if (!(out[j] > 0.0)) zero.emplace_back(kJointNames[static_cast<std::size_t>(j)]);
  if (!zero.empty())
    throw ValidationError(fmt::format("force calibration trial never compresses joints: {}", fmt::join(zero, ", ")));
  return out;
}

JointVector extract_force_maxima(const HumanModel& model, std::span<const KinodynamicFrame> frames,
                                 double sample_rate, double base_height, const SagittalProjection& projection,
                                 const signal::DifferentiatorSpec& spec) {
  std::vector<dynamics::ExternalWrench> wrenches;
  for (const auto& f : frames) {
    if (!f.wrench)
      throw ValidationError(fmt::format("force calibration frame at t = {} s lacks the wrench channel", f.time));
    wrenches.push_back(hand_wrench(model, *f.wrench, projection));
  }
  const auto states = trial_configurations(frames, sample_rate, base_height, spec);
  return extract_force_maxima(model, states, wrenches);
}

}  // namespace ergo::calibration
