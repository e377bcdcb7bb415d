#include "ergo/profile.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <fmt/format.h>
#include <fmt/ranges.h>
#include <json.hpp>

namespace ergo {

using nlohmann::json;

std::string_view to_string(TaskMode mode) {
  switch (mode) {
    case TaskMode::LoadEstimation: return "load-estimation";
    case TaskMode::MeasuredWrench: return "measured-wrench";
    case TaskMode::LightTool: return "light-tool";
  }
  return "?";
}

TaskMode parse_task_mode(std::string_view text) {
  if (text == "load-estimation") return TaskMode::LoadEstimation;
  if (text == "measured-wrench") return TaskMode::MeasuredWrench;
  if (text == "light-tool") return TaskMode::LightTool;
  throw ValidationError("unknown task mode '" + std::string(text) +
                        "' (expected load-estimation, measured-wrench or light-tool)");
}

std::vector<std::string> SubjectProfile::missing_fields(TaskMode mode, bool needs_mvc) const {
  std::vector<std::string> missing;
  auto need = [&](bool present, const char* name) {
    if (!present) missing.emplace_back(name);
  };
  need(body.has_value(), "model");
  need(sesc.has_value(), "sesc");
  need(neutral.has_value(), "neutral");
  need(q_min.has_value(), "q_min");
  need(q_max.has_value(), "q_max");
  need(qd_max.has_value(), "qd_max");
  need(qdd_max.has_value(), "qdd_max");
  need(com_range.has_value(), "com_range");
  need(torque_max.has_value(), "torque_max");
  need(fatigue.has_value(), "fatigue");
  if (mode == TaskMode::MeasuredWrench) need(compressive_max.has_value(), "compressive_max");
  if (needs_mvc) need(mvc.has_value(), "mvc");
  return missing;
}

void SubjectProfile::require(TaskMode mode, bool needs_mvc) const {
  const auto missing = missing_fields(mode, needs_mvc);
  if (missing.empty()) return;
  throw ValidationError(fmt::format("profile '{}' lacks fields required by {} sessions: {}", id,
                                    to_string(mode), fmt::join(missing, ", ")));
}

namespace {

void check_positive(const JointVector& v, const char* name) {
  for (int j = 0; j < kNumJoints; ++j)
    if (!(v[j] > 0.0) || !std::isfinite(v[j]))
      throw ValidationError(fmt::format("profile {} for joint {} must be positive", name,
                                        kJointNames[static_cast<std::size_t>(j)]));
}

}  // namespace

void SubjectProfile::validate() const {
  if (!(mass > 0.0) || !std::isfinite(mass)) throw ValidationError("profile mass must be positive");
  if (!(height > 0.0) || !std::isfinite(height)) throw ValidationError("profile height must be positive");
  if (body) {
    body->model.require_full_body();
    if (std::abs(body->model.total_mass() - mass) > 1e-9 * mass)
      throw ValidationError(
          fmt::format("profile model mass {} kg differs from subject mass {} kg", body->model.total_mass(), mass));
    if (sesc && sesc->num_segments() != body->model.num_joints())
      throw ValidationError("profile SESC parameter count does not match the model");
  }
  if (q_min && q_max) {
    for (int j = 0; j < kNumJoints; ++j)
      if (!((*q_max)[j] > (*q_min)[j]))
        throw ValidationError(fmt::format("profile q_max must exceed q_min at joint {}",
                                          kJointNames[static_cast<std::size_t>(j)]));
  }
  if (qd_max) check_positive(*qd_max, "qd_max");
  if (qdd_max) check_positive(*qdd_max, "qdd_max");
  if (torque_max) check_positive(*torque_max, "torque_max");
  if (compressive_max) check_positive(*compressive_max, "compressive_max");
  if (fatigue) {
    fatigue->params.validate();
    check_positive(fatigue->fatigue_max, "fatigue max");
  }
  if (com_range && !(*com_range > 0.0)) throw ValidationError("profile com_range must be positive");
  if (mvc) {
    for (int m = 0; m < kNumMuscles; ++m)
      if (!((*mvc)[m] > 0.0))
        throw ValidationError(fmt::format("profile MVC for muscle {} must be positive",
                                          kMuscleNames[static_cast<std::size_t>(m)]));
  }
}

// ---------------------------------------------------------------------------
// JSON

namespace {

json joint_json(const JointVector& v) {
  json o = json::object();
  for (int j = 0; j < kNumJoints; ++j) o[std::string(kJointNames[static_cast<std::size_t>(j)])] = v[j];
  return o;
}

JointVector joint_from(const json& o, const std::string& field) {
  if (!o.is_object()) throw ValidationError("profile field '" + field + "' must be an object keyed by joint");
  JointVector v;
  for (int j = 0; j < kNumJoints; ++j) {
    const std::string name(kJointNames[static_cast<std::size_t>(j)]);
    if (!o.contains(name) || !o[name].is_number())
      throw ValidationError("profile field '" + field + "' lacks joint '" + name + "'");
    v[j] = o[name].get<double>();
  }
  if (o.size() != kNumJoints) throw ValidationError("profile field '" + field + "' has unknown joints");
  return v;
}

json segment_json(const model::Segment& s) {
  return json{{"name", s.name},
              {"length", s.length},
              {"mass", s.mass},
              {"com", {s.com_offset.x(), s.com_offset.y()}},
              {"inertia", s.inertia}};
}

model::Segment segment_from(const json& o) {
  model::Segment s;
  s.name = o.at("name").get<std::string>();
  s.length = o.at("length").get<double>();
  s.mass = o.at("mass").get<double>();
  const auto& c = o.at("com");
  if (!c.is_array() || c.size() != 2) throw ValidationError("segment com must be [axis, normal]");
  s.com_offset = {c[0].get<double>(), c[1].get<double>()};
  s.inertia = o.at("inertia").get<double>();
  return s;
}

json model_json(const model::ModelDocument& doc) {
  json segs = json::array();
  for (std::size_t i = 0; i < doc.model.segments().size(); ++i) {
    json s = segment_json(doc.model.segments()[i]);
    s["joint"] = doc.model.joints()[i].name;
    s["sign"] = static_cast<int>(doc.model.joints()[i].sign);
    segs.push_back(std::move(s));
  }
  json o{{"name", doc.name},
         {"subject_mass", doc.subject_mass},
         {"base_height", doc.base_height},
         {"segments", std::move(segs)}};
  o["base"] = doc.model.base_segment() ? segment_json(*doc.model.base_segment()) : json(nullptr);
  return o;
}

model::ModelDocument model_from(const json& o) {
  std::optional<model::Segment> base;
  if (o.contains("base") && !o["base"].is_null()) base = segment_from(o["base"]);
  std::vector<model::Segment> segments;
  std::vector<model::JointDef> joints;
  for (const auto& s : o.at("segments")) {
    segments.push_back(segment_from(s));
    joints.push_back({s.at("joint").get<std::string>(), s.at("sign").get<double>()});
  }
  return model::ModelDocument{o.at("name").get<std::string>(), o.at("subject_mass").get<double>(),
                              o.at("base_height").get<double>(),
                              model::HumanModel(base, std::move(segments), std::move(joints))};
}

}  // namespace

std::string profile_to_json(const SubjectProfile& p) {
  json o = json::object();
  o["format"] = "ergo-profile/1";
  o["id"] = p.id;
  o["mass"] = p.mass;
  o["height"] = p.height;
  o["gender"] = p.gender;
  if (p.body) o["model"] = model_json(*p.body);
  if (p.sesc) {
    json a = json::array();
    for (Eigen::Index i = 0; i < p.sesc->values().size(); ++i) a.push_back(p.sesc->values()[i]);
    o["sesc"] = std::move(a);
  }
  if (p.neutral) o["neutral"] = json{{"q", joint_json(p.neutral->q)}, {"com_z", p.neutral->com_z}};
  if (p.q_min) o["q_min"] = joint_json(*p.q_min);
  if (p.q_max) o["q_max"] = joint_json(*p.q_max);
  if (p.qd_max) o["qd_max"] = joint_json(*p.qd_max);
  if (p.qdd_max) o["qdd_max"] = joint_json(*p.qdd_max);
  if (p.torque_max) o["torque_max"] = joint_json(*p.torque_max);
  if (p.fatigue) {
    o["fatigue"] = json{{"fatigue_rate", joint_json(p.fatigue->params.fatigue_rate)},
                        {"recovery_rate", joint_json(p.fatigue->params.recovery_rate)},
                        {"threshold", joint_json(p.fatigue->params.threshold)},
                        {"max", joint_json(p.fatigue->fatigue_max)}};
  }
  if (p.com_range) o["com_range"] = *p.com_range;
  if (p.compressive_max) o["compressive_max"] = joint_json(*p.compressive_max);
  if (p.mvc) {
    json m = json::object();
    for (int i = 0; i < kNumMuscles; ++i) m[std::string(kMuscleNames[static_cast<std::size_t>(i)])] = (*p.mvc)[i];
    o["mvc"] = std::move(m);
  }
  return o.dump(2) + "\n";
}

SubjectProfile profile_from_json(std::string_view text) {
  json o;
  try {
    o = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("profile is not valid JSON: ") + e.what());
  }
  if (!o.is_object()) throw ValidationError("profile must be a JSON object");
  if (o.value("format", std::string()) != "ergo-profile/1")
    throw ValidationError("profile format must be 'ergo-profile/1'");

  static const std::vector<std::string> known = {
      "format", "id",        "mass",    "height",          "gender",   "model",     "sesc",
      "neutral", "q_min",    "q_max",   "qd_max",          "qdd_max",  "torque_max", "fatigue",
      "com_range", "compressive_max", "mvc"};
  for (const auto& [key, _] : o.items())
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw ValidationError("unknown profile field '" + key + "'");

  SubjectProfile p;
  try {
    p.id = o.at("id").get<std::string>();
    p.mass = o.at("mass").get<double>();
    p.height = o.at("height").get<double>();
    p.gender = o.value("gender", std::string());
    if (o.contains("model")) p.body = model_from(o["model"]);
    if (o.contains("sesc")) {
      const auto& a = o["sesc"];
      Eigen::VectorXd v(static_cast<Eigen::Index>(a.size()));
      for (std::size_t i = 0; i < a.size(); ++i) v[static_cast<Eigen::Index>(i)] = a[i].get<double>();
      if (v.size() < 4 || v.size() % 2 != 0) throw ValidationError("profile sesc has an invalid length");
      p.sesc = model::SescParameters(v);
    }
    if (o.contains("neutral"))
      p.neutral = NeutralPosture{joint_from(o["neutral"].at("q"), "neutral.q"),
                                 o["neutral"].at("com_z").get<double>()};
    auto joints = [&](const char* key, std::optional<JointVector>& dst) {
      if (o.contains(key)) dst = joint_from(o[key], key);
    };
    joints("q_min", p.q_min);
    joints("q_max", p.q_max);
    joints("qd_max", p.qd_max);
    joints("qdd_max", p.qdd_max);
    joints("torque_max", p.torque_max);
    joints("compressive_max", p.compressive_max);
    if (o.contains("fatigue")) {
      const auto& f = o["fatigue"];
      FatigueCalibration fc;
      fc.params.fatigue_rate = joint_from(f.at("fatigue_rate"), "fatigue.fatigue_rate");
      fc.params.recovery_rate = joint_from(f.at("recovery_rate"), "fatigue.recovery_rate");
      fc.params.threshold = joint_from(f.at("threshold"), "fatigue.threshold");
      fc.fatigue_max = joint_from(f.at("max"), "fatigue.max");
      p.fatigue = fc;
    }
    if (o.contains("com_range")) p.com_range = o["com_range"].get<double>();
    if (o.contains("mvc")) {
      const auto& m = o["mvc"];
      MuscleVector v;
      for (int i = 0; i < kNumMuscles; ++i) {
        const std::string name(kMuscleNames[static_cast<std::size_t>(i)]);
        if (!m.contains(name)) throw ValidationError("profile mvc lacks muscle '" + name + "'");
        v[i] = m[name].get<double>();
      }
      p.mvc = v;
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed profile: ") + e.what());
  }
  p.validate();
  return p;
}

void save_profile(const SubjectProfile& profile, const std::filesystem::path& path) {
  profile.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RuntimeError("cannot write '" + path.string() + "'");
  out << profile_to_json(profile);
  if (!out) throw RuntimeError("failed writing '" + path.string() + "'");
}

SubjectProfile load_profile(const std::filesystem::path& path) {
  try {
    return profile_from_json(model::read_text_file(path));
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

}  // namespace ergo
