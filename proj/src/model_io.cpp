#include "ergo/model_io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "embedded_data.hpp"
#include "text_format.hpp"

namespace ergo::model {

using detail::parse_double;

namespace {

std::string at_line(std::size_t line, std::string_view msg) {
  return "line " + std::to_string(line) + ": " + std::string(msg);
}

double parse_sign(std::string_view s, std::size_t line) {
  const double v = parse_double(s, line, "joint sign");
  if (v != 1.0 && v != -1.0) throw ValidationError(at_line(line, "joint sign must be +1 or -1"));
  return v;
}

void expect_format(std::string_view value, std::string_view expected, std::size_t line) {
  if (value != expected)
    throw ValidationError(at_line(line, "unsupported format '" + std::string(value) + "', expected '" +
                                            std::string(expected) + "'"));
}

}  // namespace

BsipTable BsipTable::parse(std::string_view text) {
  BsipTable table;
  bool have_format = false;
  for (const auto& line : detail::parse_lines(text)) {
    if (line.is_pair()) {
      if (line.key == "format") {
        expect_format(line.value, "ergo-bsip/1", line.number);
        have_format = true;
      } else if (line.key == "base_height") {
        table.base_height_fraction = parse_double(line.value, line.number, "base_height");
      } else {
        throw ValidationError(at_line(line.number, "unknown key '" + std::string(line.key) + "'"));
      }
      continue;
    }
    const auto& f = line.fields;
    if (f.size() != 9) throw ValidationError(at_line(line.number, "BSIP row needs 9 fields"));
    BsipRow row;
    row.name = std::string(f[1]);
    row.joint = f[2] == "-" ? std::string() : std::string(f[2]);
    row.sign = parse_sign(f[3], line.number);
    row.mass_fraction = parse_double(f[4], line.number, "mass fraction");
    row.length_fraction = parse_double(f[5], line.number, "length fraction");
    row.com_axis_fraction = parse_double(f[6], line.number, "CoM fraction");
    row.com_normal_fraction = parse_double(f[7], line.number, "CoM fraction");
    row.gyration_fraction = parse_double(f[8], line.number, "gyration fraction");
    if (f[0] == "base") {
      if (table.base) throw ValidationError(at_line(line.number, "duplicate base row"));
      table.base = row;
    } else if (f[0] == "segment") {
      if (row.joint.empty()) throw ValidationError(at_line(line.number, "segment row needs a joint"));
      table.segments.push_back(row);
    } else {
      throw ValidationError(at_line(line.number, "unknown row kind '" + std::string(f[0]) + "'"));
    }
  }
  if (!have_format) throw ValidationError("BSIP table has no format line");
  if (table.segments.empty()) throw ValidationError("BSIP table has no segments");
  double total = table.base ? table.base->mass_fraction : 0.0;
  for (const auto& r : table.segments) total += r.mass_fraction;
  if (std::abs(total - 1.0) > 1e-9)
    throw ValidationError(fmt::format("BSIP mass fractions sum to {}, expected 1", total));
  return table;
}

const BsipTable& BsipTable::defaults() {
  static const BsipTable table = parse(data::kBsipDefault);
  return table;
}

namespace {

Segment scale_row(const BsipRow& r, double mass, double height) {
  Segment s;
  s.name = r.name;
  s.mass = r.mass_fraction * mass;
  s.length = r.length_fraction * height;
  s.com_offset = {r.com_axis_fraction * s.length, r.com_normal_fraction * s.length};
  const double rho = r.gyration_fraction * s.length;
  s.inertia = s.mass * rho * rho;
  return s;
}

}  // namespace

ModelDocument scaled_model(const BsipTable& table, double mass, double height, std::string name) {
  if (!(mass > 0.0) || !(height > 0.0))
    throw ValidationError("subject mass and height must be positive");
  std::optional<Segment> base;
  if (table.base) base = scale_row(*table.base, mass, height);
  std::vector<Segment> segments;
  std::vector<JointDef> joints;
  for (const auto& r : table.segments) {
    segments.push_back(scale_row(r, mass, height));
    joints.push_back({r.joint, r.sign});
  }
  // Normalise so the segment masses sum to the subject mass exactly.
  HumanModel model(base, segments, joints);
  const double scale = mass / model.total_mass();
  if (base) {
    base->mass *= scale;
    base->inertia *= scale;
  }
  for (auto& s : segments) {
    s.mass *= scale;
    s.inertia *= scale;
  }
  return ModelDocument{std::move(name), mass, table.base_height_fraction * height,
                       HumanModel(base, std::move(segments), std::move(joints))};
}

ModelDocument parse_model(std::string_view text) {
  std::string name = "model";
  std::optional<double> subject_mass;
  double base_height = 0.0;
  bool have_format = false;
  std::optional<Segment> base;
  std::vector<Segment> segments;
  std::vector<JointDef> joints;

  auto parse_segment = [](const std::vector<std::string_view>& f, std::size_t first, std::size_t line) {
    Segment s;
    s.name = std::string(f[1]);
    s.length = parse_double(f[first], line, "length");
    s.mass = parse_double(f[first + 1], line, "mass");
    s.com_offset = {parse_double(f[first + 2], line, "CoM offset"), parse_double(f[first + 3], line, "CoM offset")};
    s.inertia = parse_double(f[first + 4], line, "inertia");
    return s;
  };

  for (const auto& line : detail::parse_lines(text)) {
    if (line.is_pair()) {
      if (line.key == "format") {
        expect_format(line.value, "ergo-model/1", line.number);
        have_format = true;
      } else if (line.key == "name") {
        name = std::string(line.value);
      } else if (line.key == "subject_mass") {
        subject_mass = parse_double(line.value, line.number, "subject_mass");
      } else if (line.key == "base_height") {
        base_height = parse_double(line.value, line.number, "base_height");
      } else {
        throw ValidationError(at_line(line.number, "unknown key '" + std::string(line.key) + "'"));
      }
      continue;
    }
    const auto& f = line.fields;
    if (f[0] == "base") {
      if (f.size() != 7) throw ValidationError(at_line(line.number, "base row needs 7 fields"));
      if (base) throw ValidationError(at_line(line.number, "duplicate base row"));
      base = parse_segment(f, 2, line.number);
    } else if (f[0] == "segment") {
      if (f.size() != 9) throw ValidationError(at_line(line.number, "segment row needs 9 fields"));
      joints.push_back({std::string(f[2]), parse_sign(f[3], line.number)});
      segments.push_back(parse_segment(f, 4, line.number));
    } else {
      throw ValidationError(at_line(line.number, "unknown row kind '" + std::string(f[0]) + "'"));
    }
  }
  if (!have_format) throw ValidationError("model file has no format line");
  HumanModel model(base, std::move(segments), std::move(joints));
  const double mass = subject_mass.value_or(model.total_mass());
  if (std::abs(model.total_mass() - mass) > 1e-9 * mass)
    throw ValidationError(fmt::format("segment masses sum to {} kg but subject_mass is {} kg",
                                      model.total_mass(), mass));
  return ModelDocument{std::move(name), mass, base_height, std::move(model)};
}

std::string format_model(const ModelDocument& doc) {
  std::string out;
  out += "format = ergo-model/1\n";
  out += fmt::format("name = {}\n", doc.name);
  out += fmt::format("subject_mass = {}\n", doc.subject_mass);
  out += fmt::format("base_height = {}\n", doc.base_height);
  out += "# kind name [joint sign] length mass com_axis com_normal inertia\n";
  if (const auto& b = doc.model.base_segment()) {
    out += fmt::format("base {} {} {} {} {} {}\n", b->name, b->length, b->mass, b->com_offset.x(),
                       b->com_offset.y(), b->inertia);
  }
  for (std::size_t i = 0; i < doc.model.segments().size(); ++i) {
    const auto& s = doc.model.segments()[i];
    const auto& j = doc.model.joints()[i];
    out += fmt::format("segment {} {} {} {} {} {} {} {}\n", s.name, j.name, j.sign > 0 ? "+1" : "-1",
                       s.length, s.mass, s.com_offset.x(), s.com_offset.y(), s.inertia);
  }
  return out;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ModelDocument load_model(const std::filesystem::path& path) {
  try {
    return parse_model(read_text_file(path));
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

JointLimits JointLimits::parse(std::string_view text) {
  JointLimits lim;
  bool have_format = false;
  std::array<bool, kNumJoints> seen{};
  for (const auto& line : detail::parse_lines(text)) {
    if (line.is_pair()) {
      if (line.key != "format")
        throw ValidationError(at_line(line.number, "unknown key '" + std::string(line.key) + "'"));
      expect_format(line.value, "ergo-limits/1", line.number);
      have_format = true;
      continue;
    }
    const auto& f = line.fields;
    if (f.size() != 5) throw ValidationError(at_line(line.number, "limit row needs 5 fields"));
    int j = -1;
    for (int k = 0; k < kNumJoints; ++k)
      if (kJointNames[static_cast<std::size_t>(k)] == f[0]) j = k;
    if (j < 0) throw ValidationError(at_line(line.number, "unknown joint '" + std::string(f[0]) + "'"));
    lim.q_min[j] = parse_double(f[1], line.number, "q_min");
    lim.q_max[j] = parse_double(f[2], line.number, "q_max");
    lim.qd_max[j] = parse_double(f[3], line.number, "qd_max");
    lim.torque_max[j] = parse_double(f[4], line.number, "tau_max");
    seen[static_cast<std::size_t>(j)] = true;
  }
  if (!have_format) throw ValidationError("limits file has no format line");
  for (int k = 0; k < kNumJoints; ++k)
    if (!seen[static_cast<std::size_t>(k)])
      throw ValidationError("limits file misses joint '" + std::string(kJointNames[static_cast<std::size_t>(k)]) + "'");
  return lim;
}

const JointLimits& JointLimits::defaults() {
  static const JointLimits lim = parse(data::kJointLimits);
  return lim;
}

}  // namespace ergo::model
