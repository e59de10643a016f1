#include <gtest/gtest.h>

#include <sys/wait.h>

#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "spdcsim/config.hpp"
#include "spdcsim/pipeline.hpp"

using namespace spdcsim;
namespace fs = std::filesystem;

namespace {

const fs::path kCli = SPDCSIM_CLI_PATH;
const fs::path kConfigs = SPDCSIM_CONFIG_DIR;

struct Run {
  int code = -1;
  std::string output;
};

Run run(const std::string& args) {
  const std::string cmd = "\"" + kCli.string() + "\" " + args + " 2>&1";
  Run r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  std::array<char, 4096> buf{};
  while (std::fgets(buf.data(), static_cast<int>(buf.size()), pipe)) r.output += buf.data();
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

fs::path fresh_dir(const std::string& name) {
  const auto d = fs::temp_directory_path() / ("spdcsim_test_cli_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

fs::path write_config(const fs::path& dir, const std::string& name, const std::string& text) {
  const auto p = dir / name;
  std::ofstream(p) << text;
  return p;
}

std::string config_arg(const std::string& name) { return "--config \"" + (kConfigs / name).string() + "\""; }

std::size_t count(const std::string& text, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos + 1)) ++n;
  return n;
}

// Amplitude rows of a state report.
std::vector<std::string> amplitude_rows(const std::string& report) {
  std::vector<std::string> rows;
  std::istringstream is(report);
  std::string line;
  bool in = false;
  while (std::getline(is, line)) {
    if (line == "[amplitudes]") { in = true; continue; }
    if (line == "[diagnostics]") break;
    if (in && line != "label,re,im") rows.push_back(line);
  }
  return rows;
}

const std::vector<std::string> kAllConfigs = {"fig3e.json", "fig3f.json", "fig4d.json",
                                              "fig4e.json", "fig4f.json", "fig5-sweep.json"};

} // namespace

TEST(Config, ShippedConfigsParse) {
  for (const auto& name : kAllConfigs) EXPECT_NO_THROW(load_config(kConfigs / name)) << name;
}

TEST(Config, DumpReparsesToEquivalentConfig) {
  for (const auto& name : kAllConfigs) {
    const auto cfg = load_config(kConfigs / name);
    const auto again = parse_config_text(dump_config(cfg).dump(2));
    EXPECT_TRUE(again == cfg) << name;
  }
}

TEST(Config, ErrorsNameTheField) {
  auto message = [](const std::string& text) {
    try {
      parse_config_text(text);
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  EXPECT_NE(message(R"({"mask":{"preset":"pair","bogus":1},"process":{"kind":"type_II"}})").find("mask.bogus"),
            std::string::npos);
  EXPECT_NE(message(R"({"mask":{"preset":"hexagon"},"process":{"kind":"type_II"}})").find("mask.preset"),
            std::string::npos);
  EXPECT_NE(message(R"({"mask":{"preset":"pair"},"process":{"kind":"type_I"}})").find("process.kind"),
            std::string::npos);
  EXPECT_NE(message(R"({"mask":{"preset":"pair"},"process":{}})").find("process.kind"), std::string::npos);
  EXPECT_NE(message(R"({"mask":{"preset":"pair","apertures":[[0,0]]},"process":{"kind":"type_II"}})").find("mask"),
            std::string::npos);
  EXPECT_NE(message(R"({"mask":{"preset":"pair","diameter_mm":"two"},"process":{"kind":"type_II"}})")
                .find("mask.diameter_mm"),
            std::string::npos);
  EXPECT_NE(message("{not json").find("config"), std::string::npos);
  EXPECT_NE(message(R"({"mask":{"preset":"pair"},"process":{"kind":"type_II"},"extra":{}})").find("extra"),
            std::string::npos);
}

TEST(Pipeline, SweepRotatesThePattern) {
  auto cfg = load_config(kConfigs / "fig5-sweep.json");
  cfg.render.inset_px = 0;
  cfg.render.width = 200;
  cfg.render.height = 200;
  cfg.render.pitch_mm = 0.25;
  const auto scenarios = expand_scenarios(cfg);
  ASSERT_EQ(scenarios.size(), 4u);
  const auto base = render_scenario(cfg, scenarios[0]);
  const double peak = base.max();
  const auto& grid = base.grid();
  for (std::size_t i = 1; i < scenarios.size(); ++i) {
    const double theta = cfg.sweep->rotations_rad[i] - cfg.sweep->rotations_rad[0];
    const auto img = render_scenario(cfg, scenarios[i]);
    std::size_t match = 0;
    std::size_t total = 0;
    for (std::size_t row = 0; row < grid.height; ++row) {
      for (std::size_t col = 0; col < grid.width; ++col) {
        const Vec2 src = rotate_about(grid.position(col, row), {}, -theta);
        // skip pixels whose source falls off the baseline grid
        const Vec2 lo = grid.position(0, grid.height - 1);
        const Vec2 hi = grid.position(grid.width - 1, 0);
        if (src.x < lo.x || src.x > hi.x || src.y < lo.y || src.y > hi.y) continue;
        ++total;
        if (std::abs(img.at(col, row) - base.sample(src)) <= 0.02 * peak) ++match;
      }
    }
    ASSERT_GT(total, 0u);
    EXPECT_GE(static_cast<double>(match) / static_cast<double>(total), 0.99) << "scenario " << i;
  }
}

TEST(Cli, RingsSummaries) {
  const auto dir = fresh_dir("rings");
  auto r = run("rings " + config_arg("fig3e.json") + " --out-dir \"" + dir.string() + "\"");
  EXPECT_EQ(r.code, 0) << r.output;
  EXPECT_NE(r.output.find("2 rings, 1 TwoPoints overlap, 2 slots"), std::string::npos) << r.output;
  EXPECT_TRUE(fs::exists(dir / "topology.csv"));

  const auto single = write_config(dir, "single.json", R"({"mask":{"preset":"single"},"process":{"kind":"repeated_type_I"}})");
  r = run("rings --config \"" + single.string() + "\" --out-dir \"" + dir.string() + "\"");
  EXPECT_EQ(r.code, 0) << r.output;
  EXPECT_NE(r.output.find("1 ring, 0 overlaps"), std::string::npos) << r.output;

  r = run("rings " + config_arg("fig4f.json") + " --out-dir \"" + dir.string() + "\"");
  EXPECT_EQ(r.code, 0) << r.output;
  EXPECT_EQ(count(r.output, "FullRing composite"), 1u) << r.output;
  EXPECT_NE(r.output.find("1 FullRing overlap"), std::string::npos) << r.output;
}

TEST(Cli, StateReports) {
  struct Case {
    std::string config;
    std::size_t labels;
    std::string amplitude;
  };
  for (const auto& c : {Case{"fig3e.json", 8, "0.353553391"}, Case{"fig4e.json", 5, "0.447213595"},
                        Case{"fig4d.json", 2, "0.707106781"}}) {
    const auto dir = fresh_dir("state");
    const auto r = run("state " + config_arg(c.config) + " --out-dir \"" + dir.string() + "\"");
    ASSERT_EQ(r.code, 0) << c.config << '\n' << r.output;
    const auto rows = amplitude_rows(slurp(dir / "state.txt"));
    ASSERT_EQ(rows.size(), c.labels) << c.config;
    for (const auto& row : rows) EXPECT_NE(row.find("," + c.amplitude + ",0"), std::string::npos) << row;
  }
}

TEST(Cli, ExitCodes) {
  const auto dir = fresh_dir("codes");
  // unsatisfiable topology
  auto r = run("state " + config_arg("fig3f.json") + " --out-dir \"" + dir.string() + "\"");
  EXPECT_EQ(r.code, 4) << r.output;
  EXPECT_NE(r.output.find("unsatisfiable"), std::string::npos);

  // config parse errors
  const auto bad = write_config(dir, "bad.json", R"({"mask":{"preset":"pair","wrong":1},"process":{"kind":"type_II"}})");
  r = run("rings --config \"" + bad.string() + "\"");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find("mask.wrong"), std::string::npos) << r.output;
  r = run("rings --config \"" + (dir / "missing.json").string() + "\"");
  EXPECT_EQ(r.code, 2);
  r = run("rings");
  EXPECT_EQ(r.code, 2);
  r = run("frobnicate --config x");
  EXPECT_EQ(r.code, 2);

  // physics validation
  const auto phys = write_config(dir, "phys.json",
                                 R"({"mask":{"preset":"single"},"process":{"kind":"repeated_type_I","downconverted_wavelength_nm":810}})");
  r = run("rings --config \"" + phys.string() + "\" --out-dir \"" + dir.string() + "\"");
  EXPECT_EQ(r.code, 3) << r.output;

  // I/O: output directory is a regular file
  const auto blocker = dir / "blocker";
  std::ofstream(blocker) << "x";
  r = run("rings " + config_arg("fig3e.json") + " --out-dir \"" + blocker.string() + "\"");
  EXPECT_EQ(r.code, 5) << r.output;
}

TEST(Cli, DumpConfigRoundTrip) {
  for (const auto& name : kAllConfigs) {
    const auto r = run("state " + config_arg(name) + " --dump-config");
    ASSERT_EQ(r.code, 0) << r.output;
    EXPECT_TRUE(parse_config_text(r.output) == load_config(kConfigs / name)) << name;
  }
}

TEST(Cli, ReportIsByteIdenticalAcrossRuns) {
  for (const std::string name : {"fig4e.json", "fig5-sweep.json"}) {
    const auto a = fresh_dir("det_a");
    const auto b = fresh_dir("det_b");
    ASSERT_EQ(run("report " + config_arg(name) + " --seed 9 --out-dir \"" + a.string() + "\"").code, 0);
    ASSERT_EQ(run("report " + config_arg(name) + " --seed 9 --out-dir \"" + b.string() + "\"").code, 0);
    std::size_t files = 0;
    for (const auto& e : fs::directory_iterator(a)) {
      ++files;
      EXPECT_EQ(slurp(e.path()), slurp(b / e.path().filename())) << e.path();
    }
    EXPECT_GE(files, 6u);  // csv, report, two images, two sidecars
  }
}

TEST(Cli, SweepWritesOneSetPerRotation) {
  const auto dir = fresh_dir("sweep");
  const auto r = run("report " + config_arg("fig5-sweep.json") + " --out-dir \"" + dir.string() + "\"");
  ASSERT_EQ(r.code, 0) << r.output;
  for (int i = 0; i < 4; ++i) {
    const std::string s = "_rot" + std::to_string(i);
    EXPECT_TRUE(fs::exists(dir / ("topology" + s + ".csv")));
    EXPECT_TRUE(fs::exists(dir / ("state" + s + ".txt")));
    EXPECT_TRUE(fs::exists(dir / ("pattern" + s + ".pgm")));
    EXPECT_TRUE(fs::exists(dir / ("pump" + s + ".pgm.meta")));
  }
}

TEST(Cli, ReportOnUnsatisfiableStillRenders) {
  const auto dir = fresh_dir("fig3f");
  const auto r = run("report " + config_arg("fig3f.json") + " --out-dir \"" + dir.string() + "\"");
  EXPECT_EQ(r.code, 4);
  EXPECT_TRUE(fs::exists(dir / "pattern.pgm"));
  EXPECT_TRUE(fs::exists(dir / "topology.csv"));
}
