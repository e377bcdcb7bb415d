#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "ergo/profile.hpp"
#include "synth.hpp"

#ifndef ERGO_CLI_PATH
#error "ERGO_CLI_PATH must point at the CLI executable"
#endif

using namespace ergo;
namespace fs = std::filesystem;

namespace {

struct Fixture {
  synth::TempDir dir;
  model::ModelDocument doc = synth::body();
  std::string trial_csv;

  Fixture() {
    save_profile(synth::profile(doc, "S01"), dir.path() / "profile.json");
    synth::PostureTrack track;
    track.add(0.0, synth::standing());
    track.add(1.0, synth::arms_forward());
    track.add(2.5, synth::arms_forward());
    track.add(3.5, synth::standing());
    const auto frames = synth::record(doc, [&](double t) { return track.at(t, doc); },
                                      [&](double) { return synth::carried(doc, 5.0); }, 4.0);
    trial_csv = synth::to_csv(frames);
    dir.write("trial.csv", trial_csv);
  }

  std::string p(const std::string& name) const { return (dir.path() / name).string(); }

  /// Runs the CLI in the scratch directory; stdout and stderr are captured.
  int run(const std::string& args, const std::string& stdin_file = "") const {
    std::string cmd = fmt::format("cd '{}' && '{}' {} >'{}' 2>'{}'", dir.path().string(), ERGO_CLI_PATH, args,
                                  p("stdout.txt"), p("stderr.txt"));
    if (!stdin_file.empty()) cmd += fmt::format(" <'{}'", stdin_file);
    const int status = std::system(cmd.c_str());
    REQUIRE(WIFEXITED(status));
    return WEXITSTATUS(status);
  }

  std::string read(const std::string& name) const {
    std::ifstream in(dir.path() / name, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
  }
};

}  // namespace

TEST_CASE("help and argument errors") {
  Fixture f;
  CHECK(f.run("--help") == 0);
  CHECK(f.read("stdout.txt").find("calibrate") != std::string::npos);
  CHECK(f.run("") == 1);
  CHECK(f.run("frobnicate") == 1);
  CHECK(f.run("analyze --rate notanumber") == 1);
  CHECK(f.run("stream --listen 70000") == 1);
}

TEST_CASE("analyze writes reports and exits 0") {
  Fixture f;
  CHECK(f.run("analyze --profile profile.json --frames trial.csv --window 0:2:reach --window 2:4:hold --out out") == 0);
  const auto j = nlohmann::json::parse(f.read("out/report.json"));
  CHECK(j["trials"][0]["windows"].size() == 2);
  CHECK(j["provenance"]["profile_ids"][0] == "S01");
  CHECK(f.read("out/report.txt").find("hold") != std::string::npos);
  CHECK(f.read("out/polar.csv").rfind("subject,condition,", 0) == 0);

  // Same inputs, same bytes.
  CHECK(f.run("analyze --profile profile.json --frames trial.csv --window 0:2:reach --window 2:4:hold --out out2") == 0);
  CHECK(f.read("out2/report.json") == f.read("out/report.json"));

  // Without --out the text report goes to stdout.
  CHECK(f.run("analyze --profile profile.json --frames trial.csv --thresholds 0.2,0.5") == 0);
  CHECK(f.read("stdout.txt").find("all") != std::string::npos);
}

TEST_CASE("validation errors exit 1") {
  Fixture f;
  CHECK(f.run("analyze --profile missing.json --frames trial.csv") == 1);
  CHECK(f.run("analyze --profile profile.json --frames missing.csv") == 1);
  CHECK(f.run("analyze --profile profile.json --frames trial.csv --thresholds 0.8,0.2") == 1);
  CHECK(f.run("analyze --profile profile.json --frames trial.csv --mode dancing") == 1);
  CHECK(f.run("analyze --profile profile.json --frames trial.csv --window 3:1:bad") == 1);
  // The trial has no hand wrench.
  CHECK(f.run("analyze --profile profile.json --frames trial.csv --mode measured-wrench") == 1);
  CHECK(f.read("stderr.txt").find("ft_fx") != std::string::npos);

  f.dir.write("broken.csv", f.trial_csv + "99,1,2\n");
  CHECK(f.run("analyze --profile profile.json --frames broken.csv") == 1);
  CHECK(f.read("stderr.txt").find("line ") != std::string::npos);
  CHECK(f.run("calibrate --id X --mass 70 --height 1.7") == 1);
}

TEST_CASE("runtime errors exit 2") {
  Fixture f;
  f.dir.write("blocker", "a file where a directory is expected");
  CHECK(f.run("analyze --profile profile.json --frames trial.csv --out blocker/sub") == 2);

  // A stream that restarts produces a partial report and exit 2.
  const auto lines = f.trial_csv;
  const auto second_header = lines.substr(0, lines.find('\n') + 1);
  f.dir.write("restart.csv", lines + second_header + lines.substr(second_header.size()));
  CHECK(f.run("stream --profile profile.json --out partial", f.p("restart.csv")) == 2);
  const auto j = nlohmann::json::parse(f.read("partial/report.json"));
  CHECK(j["trials"][0]["aborted"] == true);
  CHECK(j["trials"][0]["frames"].get<int>() > 0);
}

TEST_CASE("stream matches analyze on identical bytes") {
  Fixture f;
  CHECK(f.run("analyze --profile profile.json --frames trial.csv --window 0:2:a --window 2:4:b --out batch") == 0);
  CHECK(f.run("stream --profile profile.json --window 0:2:a --window 2:4:b --frames-out frames.csv --out live",
              f.p("trial.csv")) == 0);
  auto a = nlohmann::json::parse(f.read("batch/report.json"));
  auto b = nlohmann::json::parse(f.read("live/report.json"));
  CHECK(a["trials"] == b["trials"]);
  const auto frames = f.read("frames.csv");
  CHECK(std::count(frames.begin(), frames.end(), '\n') == 1 + 240);
  CHECK(f.read("stderr.txt").find("frames/s") != std::string::npos);

  // Malformed records are skipped in stream mode.
  f.dir.write("noisy.csv", f.trial_csv + "garbage\n");
  CHECK(f.run("stream --profile profile.json --out noisy", f.p("noisy.csv")) == 0);
  CHECK(nlohmann::json::parse(f.read("noisy/report.json"))["trials"][0]["malformed"] == 1);
}

TEST_CASE("config-driven analyze with statistics") {
  Fixture f;
  nlohmann::json cfg = {{"format", "ergo-session/1"}, {"mode", "load-estimation"}, {"rate", 60}};
  cfg["trials"] = nlohmann::json::array();
  for (int s = 0; s < 3; ++s) {
    std::mt19937 rng(100 + s);
    const auto trial = synth::lift_trial(f.doc, rng);
    f.dir.write(fmt::format("lift{}.csv", s), synth::to_csv(trial.frames));
    nlohmann::json windows = nlohmann::json::array();
    for (const auto& w : trial.windows) windows.push_back({{"start", w.start}, {"end", w.end}, {"label", w.label}});
    cfg["trials"].push_back({{"subject", fmt::format("S{}", s)}, {"profile", "profile.json"},
                             {"frames", fmt::format("lift{}.csv", s)}, {"windows", windows}});
  }
  cfg["stats"] = {{"factor", "prefix"}, {"indexes", {"w4"}}};
  cfg["outputs"] = {{"report", "res/report.json"}, {"text", "res/report.txt"}};
  f.dir.write("session.json", cfg.dump(2));
  CHECK(f.run("analyze --config session.json") == 0);
  const auto j = nlohmann::json::parse(f.read("res/report.json"));
  REQUIRE(j["stats"].size() == 7);
  CHECK(j["stats"][0]["conditions"].size() == 3);
  CHECK(j["stats"][0]["subjects"].size() == 3);

  // Re-rendering the stored report reproduces the text.
  CHECK(f.run("report res/report.json --format text") == 0);
  CHECK(f.read("stdout.txt") == f.read("res/report.txt"));
  CHECK(f.run("report res/report.json --format polar") == 0);
  CHECK(f.read("stdout.txt").rfind("subject,condition,", 0) == 0);
  CHECK(f.run("report res/report.json --format pdf") == 1);

  // The stats command accepts stored reports and long tables.
  CHECK(f.run("stats res/report.json --factor prefix --index w4 --out st") == 0);
  const auto s = nlohmann::json::parse(f.read("st/stats.json"));
  CHECK(s["format"] == "ergo-stats/1");
  CHECK(s["stats"].size() == 7);
  f.dir.write("long.csv",
              "subject,condition,value\nA,x,1\nA,y,2\nA,z,3.5\nB,x,2\nB,y,2.5\nB,z,4\nC,x,0.5\nC,y,2\nC,z,2.5\n");
  CHECK(f.run("stats long.csv --correction holm") == 0);
  CHECK(f.read("stdout.txt").find("F(") != std::string::npos);
  f.dir.write("bad.csv", "subject,condition,value\nA,x,abc\n");
  CHECK(f.run("stats bad.csv") == 1);
}

TEST_CASE("calibrate builds a profile from trials and tables") {
  Fixture f;
  std::mt19937 rng(7);
  synth::PostureTrack track;
  double t = 0.0;
  for (const auto& pose : synth::random_poses(f.doc, 40, rng)) {
    track.add(t, pose.cfg.q);
    track.add(t + 1.5, pose.cfg.q);
    t += 2.5;
  }
  const auto static_frames = synth::record(f.doc, [&](double s) { return track.at(s, f.doc); }, nullptr, t);
  f.dir.write("static.csv", synth::to_csv(static_frames));

  auto motion = [&](double s) {
    JointVector q = synth::standing();
    for (int j = 0; j < kNumJoints; ++j) q[j] += 0.3 * std::sin((1.0 + 0.2 * j) * s);
    auto c = synth::at_rest(f.doc, q);
    for (int j = 0; j < kNumJoints; ++j) {
      const double w = 1.0 + 0.2 * j;
      c.qd[j] = 0.3 * w * std::cos(w * s);
      c.qdd[j] = -0.3 * w * w * std::sin(w * s);
    }
    return c;
  };
  f.dir.write("dynamic.csv", synth::to_csv(synth::record(f.doc, motion, nullptr, 10.0)));
  const synth::RecordOptions ft{60.0, true, true, true};
  f.dir.write("force.csv", synth::to_csv(synth::drill_trial(f.doc, 250.0, 2.0), ft));

  std::string met = "# joint load endurance\n";
  for (int j = 0; j < kNumJoints; ++j)
    for (double L : {30.0, 45.0, 70.0})
      met += fmt::format("{} {} {}\n", kJointNames[static_cast<std::size_t>(j)], L, -std::log(1.0 - 20.0 / L) / 0.04);
  f.dir.write("met.txt", met);

  CHECK(f.run("calibrate --id S42 --mass 75 --height 1.75 --static static.csv --dynamic dynamic.csv --force force.csv "
              "--met met.txt --out new.json --mode measured-wrench") == 0);
  const auto p = load_profile(f.dir.path() / "new.json");
  CHECK(p.id == "S42");
  REQUIRE(p.sesc.has_value());
  const auto truth = model::sesc_from_bsip(f.doc.model);
  double ss = 0.0;
  const auto held_out = synth::random_poses(f.doc, 50, rng);
  for (const auto& pose : held_out)
    ss += (model::sesc_com(f.doc.model, *p.sesc, pose.cfg) - model::whole_body_com(f.doc.model, pose.cfg)).squaredNorm();
  CHECK(std::sqrt(ss / 50.0) < 5e-3);
  REQUIRE(p.fatigue.has_value());
  CHECK(p.fatigue->params.fatigue_rate[0] == doctest::Approx(0.04).epsilon(1e-6));
  CHECK(p.missing_fields(TaskMode::MeasuredWrench).empty());
  CHECK(f.read("stderr.txt").find("static poses") != std::string::npos);

  // A partial calibration still writes the profile but warns about gaps.
  CHECK(f.run("calibrate --id S43 --mass 75 --height 1.75 --out partial.json") == 0);
  CHECK(f.read("stderr.txt").find("missing") != std::string::npos);
  f.dir.write("badmet.txt", "elbow 30\n");
  CHECK(f.run("calibrate --id S44 --mass 75 --height 1.75 --met badmet.txt --out x.json") == 1);
}
