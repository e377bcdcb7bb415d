#include "ergo/indexes.hpp"

#include <cmath>
#include <sstream>

namespace ergo::indexes {

bool IndexVector::available(IndexId id) const {
  switch (id) {
    case IndexId::JointDisplacement: return displacement.has_value();
    case IndexId::JointVelocity: return velocity.has_value();
    case IndexId::JointAcceleration: return acceleration.has_value();
    case IndexId::OverloadingTorque: return torque.has_value();
    case IndexId::OverloadingFatigue: return fatigue.has_value();
    case IndexId::OverloadingPower: return power.has_value();
    case IndexId::ComEnergy: return com_energy.has_value();
    case IndexId::CompressiveForce: return compressive.has_value();
  }
  return false;
}

std::optional<double> IndexVector::value(IndexId id, int joint) const {
  const std::optional<JointVector>* v = nullptr;
  switch (id) {
    case IndexId::JointDisplacement: v = &displacement; break;
    case IndexId::JointVelocity: v = &velocity; break;
    case IndexId::JointAcceleration: v = &acceleration; break;
    case IndexId::OverloadingTorque: v = &torque; break;
    case IndexId::OverloadingFatigue: v = &fatigue; break;
    case IndexId::OverloadingPower: v = &power; break;
    case IndexId::ComEnergy: return com_energy;
    case IndexId::CompressiveForce: v = &compressive; break;
  }
  if (!v || !v->has_value()) return std::nullopt;
  return (**v)[joint];
}

namespace {

void require_positive(const JointVector& m, const char* what) {
  for (int j = 0; j < kNumJoints; ++j) {
    if (!(m[j] > 0.0) || !std::isfinite(m[j])) {
      std::ostringstream os;
      os << what << " for joint " << kJointNames[static_cast<std::size_t>(j)] << " must be positive";
      throw ValidationError(os.str());
    }
  }
}

JointVector ratio(const JointVector& v, const JointVector& max, const char* what) {
  require_positive(max, what);
  return v.cwiseAbs().cwiseQuotient(max);
}

}  // namespace

JointVector joint_displacement(const JointVector& q, const JointVector& q_max, const JointVector& q_min) {
  require_positive(q_max - q_min, "joint range");
  return q.cwiseAbs().cwiseQuotient(q_max - q_min);
}

JointVector joint_velocity_index(const JointVector& qd, const JointVector& qd_max) {
  return ratio(qd, qd_max, "maximum joint velocity");
}

JointVector joint_acceleration_index(const JointVector& qdd, const JointVector& qdd_max) {
  return ratio(qdd, qdd_max, "maximum joint acceleration");
}

JointVector overloading_torque_index(const JointVector& dtau, const JointVector& dtau_max) {
  return ratio(dtau, dtau_max, "maximum overloading torque");
}

JointVector fatigue_index(const JointVector& fatigue_torque, const JointVector& fatigue_max) {
  return ratio(fatigue_torque, fatigue_max, "maximum fatigue torque");
}

JointVector overloading_power_index(const JointVector& w2, const JointVector& w4) {
  return w2.cwiseProduct(w4);
}

double com_energy_index(double com_z, double neutral_com_z, double com_range) {
  if (!(com_range > 0.0)) throw ValidationError("maximum CoM height change must be positive");
  if (!std::isfinite(neutral_com_z)) throw ValidationError("neutral posture CoM is not registered");
  return std::abs(com_z - neutral_com_z) / com_range;
}

JointVector compressive_force_index(const JointVector& fc, const JointVector& fc_max) {
  return ratio(fc, fc_max, "maximum compressive force");
}

// ---------------------------------------------------------------------------

void FatigueParams::validate() const {
  require_positive(fatigue_rate, "fatigue rate");
  require_positive(recovery_rate, "recovery rate");
  for (int j = 0; j < kNumJoints; ++j)
    if (!(threshold[j] >= 0.0)) throw ValidationError("fatigue threshold must be nonnegative");
}

FatigueState update_fatigue(const FatigueState& state, const JointVector& dtau, double dt,
                            const FatigueParams& params) {
  if (!(dt >= 0.0) || !std::isfinite(dt)) throw ValidationError("fatigue update needs dt >= 0");
  FatigueState next = state;
  next.time = state.time + dt;
  for (int j = 0; j < kNumJoints; ++j) {
    const double load = std::abs(dtau[j]);
    const auto k = static_cast<std::size_t>(j);
    if (load >= params.threshold[j]) {
      next.phase[k] = FatiguePhase::Fatiguing;
      next.torque[j] = load + (state.torque[j] - load) * std::exp(-params.fatigue_rate[j] * dt);
    } else {
      next.phase[k] = FatiguePhase::Recovering;
      next.torque[j] = state.torque[j] * std::exp(-params.recovery_rate[j] * dt);
    }
    next.torque[j] = std::max(next.torque[j], 0.0);
  }
  return next;
}

// ---------------------------------------------------------------------------

std::string_view to_string(Risk r) {
  switch (r) {
    case Risk::Green: return "green";
    case Risk::Yellow: return "yellow";
    case Risk::Red: return "red";
  }
  return "?";
}

void Thresholds::validate() const {
  if (!(0.0 < yellow && yellow < red && red < 1.0))
    throw ValidationError("risk thresholds must satisfy 0 < yellow < red < 1");
}

Risk categorize(double value, const Thresholds& t) {
  if (value < t.yellow) return Risk::Green;
  if (value < t.red) return Risk::Yellow;
  return Risk::Red;
}

RiskCategory categorize(const IndexVector& v, const Thresholds& t) {
  t.validate();
  RiskCategory out{};
  for (int i = 0; i < kNumIndexes; ++i) {
    for (int j = 0; j < kNumJoints; ++j) {
      if (const auto x = v.value(index_at(i), j)) out[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = categorize(*x, t);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

WindowAccumulator::WindowAccumulator(ActionWindow window) : window_(std::move(window)) {}

void WindowAccumulator::add(const IndexVector& v, const MuscleVector* emg) {
  ++frames_;
  for (int i = 0; i < kNumIndexes; ++i) {
    const auto ii = static_cast<std::size_t>(i);
    for (int j = 0; j < kNumJoints; ++j) {
      const auto jj = static_cast<std::size_t>(j);
      const auto x = v.value(index_at(i), j);
      if (!x) continue;
      Stat& s = stats_[ii][jj];
      if (s.count == 0 || *x > s.max) {
        s.max = *x;
        s.argmax_time = v.timestamp;
        if (emg) s.emg_at_max = *emg;
        else s.emg_at_max.reset();
      }
      ++s.count;
      sumsq_[ii][jj] += *x * *x;
    }
  }
}

ActionAggregate WindowAccumulator::finish() const {
  if (frames_ == 0) throw ValidationError("action window '" + window_.label + "' contains no samples");
  ActionAggregate out;
  out.window = window_;
  out.frames = frames_;
  out.stats = stats_;
  for (std::size_t i = 0; i < stats_.size(); ++i) {
    for (std::size_t j = 0; j < stats_[i].size(); ++j) {
      Stat& s = out.stats[i][j];
      if (s.count > 0) s.rms = std::sqrt(sumsq_[i][j] / static_cast<double>(s.count));
    }
  }
  return out;
}

void validate_windows(std::span<const ActionWindow> windows) {
  for (std::size_t k = 0; k < windows.size(); ++k) {
    const auto& w = windows[k];
    if (!(w.end > w.start))
      throw ValidationError("action window '" + w.label + "' must end after it starts");
    if (k > 0 && w.start < windows[k - 1].end)
      throw ValidationError("action window '" + w.label + "' overlaps or precedes '" + windows[k - 1].label + "'");
  }
}

std::vector<ActionAggregate> aggregate(std::span<const IndexVector> stream,
                                       std::span<const ActionWindow> windows) {
  validate_windows(windows);
  for (const auto& w : windows) {
    // end is exclusive, so a window may extend past the last sample.
    if (stream.empty() || w.start < stream.front().timestamp - 1e-9 || w.start > stream.back().timestamp)
      throw ValidationError("action window '" + w.label + "' lies outside the stream");
  }
  std::vector<ActionAggregate> out;
  std::size_t k = 0;
  for (const auto& w : windows) {
    WindowAccumulator acc(w);
    while (k < stream.size() && stream[k].timestamp < w.start) ++k;
    while (k < stream.size() && stream[k].timestamp < w.end) acc.add(stream[k++]);
    out.push_back(acc.finish());
  }
  return out;
}

}  // namespace ergo::indexes
