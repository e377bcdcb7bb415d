#include "ergo/report.hpp"

#include <cmath>
#include <fstream>

#include <fmt/format.h>
#include <json.hpp>

namespace ergo::pipeline {

using nlohmann::json;

namespace {

json number(double x) {
  if (std::isfinite(x)) return x;
  if (std::isnan(x)) return "nan";
  return x > 0 ? "inf" : "-inf";
}

double as_number(const json& j) {
  if (j.is_number()) return j.get<double>();
  const auto s = j.get<std::string>();
  if (s == "inf") return INFINITY;
  if (s == "-inf") return -INFINITY;
  return NAN;
}

json test_json(const stats::TestResult& t) {
  return json{{"statistic", number(t.statistic)}, {"df1", t.df1}, {"df2", t.df2},
              {"p", t.p},  {"p_exact", t.p_exact}, {"significant", t.significant}, {"alpha", t.alpha}};
}

json stats_entries_json(const std::vector<StatsEntry>& entries) {
  json out = json::array();
  for (const auto& e : entries) {
    json j{{"index", e.index}, {"joint", e.joint}, {"conditions", e.conditions}, {"subjects", e.subjects},
           {"excluded_subjects", e.excluded_subjects}};
    if (e.anova) j["anova"] = test_json(*e.anova);
    if (!e.error.empty()) j["error"] = e.error;
    json ph = json::array();
    for (const auto& p : e.posthoc) {
      json pj{{"first", p.first}, {"second", p.second}};
      if (p.result) {
        pj["test"] = test_json(p.result->test);
        pj["p_adjusted"] = p.result->p_adjusted;
      }
      if (!p.error.empty()) pj["error"] = p.error;
      ph.push_back(std::move(pj));
    }
    j["posthoc"] = std::move(ph);
    out.push_back(std::move(j));
  }
  return out;
}

json parse_report(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("report is not valid JSON: ") + e.what());
  }
  if (!j.is_object() || j.value("format", std::string()) != "ergo-report/1")
    throw ValidationError("not an ergo-report/1 document");
  return j;
}

std::string fmt_num(double x) { return fmt::format("{:.4f}", x); }

std::string fmt_p(const json& t) {
  const double p = t.at("p").get<double>();
  std::string s = t.at("p_exact").get<bool>() ? fmt::format("{:.4g}", p) : "< 1e-300";
  if (t.at("significant").get<bool>()) s += " *";
  return s;
}

void render_stats(std::string& out, const json& stats) {
  for (const auto& e : stats) {
    out += fmt::format("  {} {}: ", e.at("index").get<std::string>(), e.at("joint").get<std::string>());
    if (e.contains("anova")) {
      const auto& a = e["anova"];
      out += fmt::format("F({:.4g}, {:.4g}) = {:.4g}, p = {}", a.at("df1").get<double>(), a.at("df2").get<double>(),
                         as_number(a.at("statistic")), fmt_p(a));
    } else {
      out += "not computed (" + e.value("error", std::string("no data")) + ")";
    }
    out += fmt::format("  [{} subjects", e.at("subjects").size());
    if (!e.at("excluded_subjects").empty()) out += fmt::format(", {} excluded", e.at("excluded_subjects").size());
    out += "]\n";
    for (const auto& p : e.at("posthoc")) {
      out += fmt::format("    {} vs {}: ", p.at("first").get<std::string>(), p.at("second").get<std::string>());
      if (p.contains("test")) {
        const auto& t = p["test"];
        out += fmt::format("t({:.4g}) = {:.4g}, p = {}, p_adj = {:.4g}\n", t.at("df1").get<double>(),
                           as_number(t.at("statistic")), fmt_p(t), p.at("p_adjusted").get<double>());
      } else {
        out += "not computed (" + p.value("error", std::string()) + ")\n";
      }
    }
  }
}

}  // namespace

std::string report_to_json(const SessionReport& report) {
  json root;
  root["format"] = "ergo-report/1";
  json profiles = json::array(), inputs = json::array();
  for (const auto& t : report.trials) {
    profiles.push_back(t.profile_id);
    inputs.push_back(t.input_sha256);
  }
  root["provenance"] = {{"config_sha256", report.config_sha256},
                        {"software_version", report.software_version},
                        {"profile_ids", profiles},
                        {"input_sha256", inputs}};
  root["session"] = {{"mode", std::string(to_string(report.mode))},
                     {"rate", report.rate},
                     {"thresholds", {{"yellow", report.thresholds.yellow}, {"red", report.thresholds.red}}}};

  json trials = json::array();
  for (const auto& t : report.trials) {
    json tj{{"subject", t.subject},       {"profile_id", t.profile_id}, {"input_sha256", t.input_sha256},
            {"rows", t.rows},             {"frames", t.frames},         {"malformed", t.malformed},
            {"invalid_dynamics", t.invalid_dynamics}, {"aborted", t.aborted}, {"empty_windows", t.empty_windows}};
    if (t.aborted) tj["abort_reason"] = t.abort_reason;
    json gaps = json::array();
    for (const auto& g : t.gaps)
      gaps.push_back({{"channel", g.channel}, {"start", g.start}, {"end", g.end}, {"samples", g.samples}});
    tj["gaps"] = std::move(gaps);
    json windows = json::array();
    for (const auto& a : t.aggregates) {
      json wj{{"label", a.window.label}, {"start", a.window.start}, {"end", a.window.end}, {"frames", a.frames}};
      json idx = json::object();
      for (int i = 0; i < indexes::kNumIndexes; ++i) {
        json joints = json::object();
        for (int j = 0; j < kNumJoints; ++j) {
          const auto& st = a.stats[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
          if (!st.available()) continue;
          json sj{{"max", st.max},
                  {"rms", st.rms},
                  {"count", st.count},
                  {"argmax_time", st.argmax_time},
                  {"risk", std::string(indexes::to_string(indexes::categorize(st.max, report.thresholds)))}};
          if (st.emg_at_max) {
            json m = json::object();
            for (int k = 0; k < kNumMuscles; ++k) m[std::string(kMuscleNames[static_cast<std::size_t>(k)])] = (*st.emg_at_max)[k];
            sj["emg_at_max"] = std::move(m);
          }
          joints[std::string(kJointNames[static_cast<std::size_t>(j)])] = std::move(sj);
        }
        if (!joints.empty()) idx[std::string(indexes::kIndexLabels[static_cast<std::size_t>(i)])] = std::move(joints);
      }
      wj["indexes"] = std::move(idx);
      windows.push_back(std::move(wj));
    }
    tj["windows"] = std::move(windows);
    trials.push_back(std::move(tj));
  }
  root["trials"] = std::move(trials);
  root["stats"] = stats_entries_json(report.stats);
  return root.dump(2) + "\n";
}

std::string render_text(std::string_view report_json) {
  const json r = parse_report(report_json);
  std::string out;
  const auto& prov = r.at("provenance");
  const auto& sess = r.at("session");
  out += "Ergonomic index report\n";
  out += fmt::format("software {}  config sha256 {}\n", prov.at("software_version").get<std::string>(),
                     prov.at("config_sha256").get<std::string>());
  out += fmt::format("mode {}  rate {} Hz  thresholds yellow {:.4g} red {:.4g}\n",
                     sess.at("mode").get<std::string>(), sess.at("rate").get<double>(),
                     sess.at("thresholds").at("yellow").get<double>(), sess.at("thresholds").at("red").get<double>());

  for (const auto& t : r.at("trials")) {
    out += fmt::format("\nTrial {} (profile {})\n", t.at("subject").get<std::string>(),
                       t.at("profile_id").get<std::string>());
    out += fmt::format("  input sha256 {}\n", t.at("input_sha256").get<std::string>());
    out += fmt::format("  rows {}  frames {}  malformed {}  invalid dynamics {}\n", t.at("rows").get<std::size_t>(),
                       t.at("frames").get<std::size_t>(), t.at("malformed").get<std::size_t>(),
                       t.at("invalid_dynamics").get<std::size_t>());
    if (t.at("aborted").get<bool>()) out += "  ABORTED: " + t.at("abort_reason").get<std::string>() + "\n";
    for (const auto& g : t.at("gaps"))
      out += fmt::format("  gap in {}: {} s to {} s ({} samples)\n", g.at("channel").get<std::string>(),
                         g.at("start").get<double>(), g.at("end").get<double>(), g.at("samples").get<std::size_t>());
    for (const auto& w : t.at("empty_windows")) out += "  window '" + w.get<std::string>() + "' received no frames\n";

    for (const auto& w : t.at("windows")) {
      out += fmt::format("\n  Window '{}' [{}, {}) s, {} frames\n", w.at("label").get<std::string>(),
                         w.at("start").get<double>(), w.at("end").get<double>(), w.at("frames").get<std::size_t>());
      out += fmt::format("    {:<8}", "");
      for (auto j : kJointNames) out += fmt::format("{:>14}", j);
      out += "\n";
      for (const auto& [label, joints] : w.at("indexes").items()) {
        for (const char* what : {"max", "rms"}) {
          out += fmt::format("    {:<8}", label + " " + what);
          for (auto j : kJointNames) {
            const std::string name(j);
            if (!joints.contains(name)) {
              out += fmt::format("{:>14}", "-");
              continue;
            }
            const auto& s = joints[name];
            std::string cell = fmt_num(s.at(what).get<double>());
            if (std::string(what) == "max") cell += " " + s.at("risk").get<std::string>().substr(0, 1);
            else cell += "  ";
            out += fmt::format("{:>14}", cell);
          }
          out += "\n";
        }
      }
    }
  }
  if (!r.at("stats").empty()) {
    out += "\nStatistics\n";
    render_stats(out, r.at("stats"));
  }
  return out;
}

std::string render_polar_csv(std::string_view report_json) {
  const json r = parse_report(report_json);
  std::string out = "subject,condition,window_start,window_end,index,joint,max,rms\n";
  for (const auto& t : r.at("trials")) {
    const auto subject = t.at("subject").get<std::string>();
    for (const auto& w : t.at("windows")) {
      for (const auto& [label, joints] : w.at("indexes").items()) {
        for (auto j : kJointNames) {
          const std::string name(j);
          if (!joints.contains(name)) continue;
          out += fmt::format("{},{},{},{},{},{},{},{}\n", subject, w.at("label").get<std::string>(),
                             w.at("start").get<double>(), w.at("end").get<double>(), label, name,
                             joints[name].at("max").get<double>(), joints[name].at("rms").get<double>());
        }
      }
    }
  }
  return out;
}

void write_text_file(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RuntimeError("cannot write '" + path.string() + "'");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw RuntimeError("failed writing '" + path.string() + "'");
}

void write_outputs(const SessionReport& report, const OutputSpec& outputs) {
  const std::string js = report_to_json(report);
  if (outputs.report) write_text_file(*outputs.report, js);
  if (outputs.text) write_text_file(*outputs.text, render_text(js));
  if (outputs.polar) write_text_file(*outputs.polar, render_polar_csv(js));
}

std::string stats_to_json(const std::vector<StatsEntry>& entries) {
  json root{{"format", "ergo-stats/1"}, {"stats", stats_entries_json(entries)}};
  return root.dump(2) + "\n";
}

std::string render_stats_text(std::string_view stats_json) {
  const json r = json::parse(stats_json);
  std::string out = "Statistics\n";
  render_stats(out, r.at("stats"));
  return out;
}

std::string frame_csv_header() {
  std::string out = "t";
  for (auto i : indexes::kIndexLabels)
    for (auto j : kJointNames) out += fmt::format(",{}_{}", i, j);
  return out + ",dynamics_valid";
}

std::string frame_csv_line(const FrameResult& r) {
  std::string out = fmt::format("{}", r.indexes.timestamp);
  for (int i = 0; i < indexes::kNumIndexes; ++i) {
    for (int j = 0; j < kNumJoints; ++j) {
      out += ',';
      if (const auto v = r.indexes.value(indexes::index_at(i), j)) out += fmt::format("{}", *v);
    }
  }
  out += r.dynamics_valid ? ",1" : ",0";
  return out;
}

}  // namespace ergo::pipeline
