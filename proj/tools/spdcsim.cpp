// spdcsim: masked-pump SPDC simulator command line.
//
//   spdcsim rings  --config configs/fig3e.json --out-dir out
//   spdcsim state  --config configs/fig4e.json --out-dir out
//   spdcsim render --config configs/fig4f.json --out-dir out --seed 7
//   spdcsim report --config configs/fig5-sweep.json --out-dir out
//   spdcsim state  --config configs/fig3e.json --dump-config

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "spdcsim/config.hpp"
#include "spdcsim/pipeline.hpp"

int main(int argc, char** argv) {
  using spdcsim::Command;
  using spdcsim::ExitCode;

  CLI::App app{"Masked-pump spontaneous parametric down-conversion simulator"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;
  bool dump = false;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "Run configuration (JSON)")->required();
    sub->add_option("--out-dir", out_dir, "Directory for output files");
    sub->add_option("--seed", seed, "Noise seed, overrides render.seed");
    sub->add_flag("--dump-config", dump, "Print the fully expanded configuration and exit");
  };
  auto* rings = app.add_subcommand("rings", "Classify ring overlaps and write the topology CSV");
  auto* state = app.add_subcommand("state", "Build the overlap polarization state and write the state report");
  auto* render = app.add_subcommand("render", "Render the far-field pattern and pump inset");
  auto* report = app.add_subcommand("report", "Run rings, state and render");
  for (auto* sub : {rings, state, render, report}) add_common(sub);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(ExitCode::config_error);
  }

  spdcsim::RunConfig cfg;
  try {
    cfg = spdcsim::load_config(config_path);
  } catch (const spdcsim::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(ExitCode::config_error);
  }
  if (seed) cfg.render.seed = *seed;

  if (dump) {
    std::cout << spdcsim::dump_config(cfg).dump(2) << '\n';
    return 0;
  }

  Command cmd = Command::report;
  if (rings->parsed()) cmd = Command::rings;
  if (state->parsed()) cmd = Command::state;
  if (render->parsed()) cmd = Command::render;

  const auto result = spdcsim::run_command(cmd, cfg, out_dir, std::cout);
  if (result.code != ExitCode::ok) std::cerr << "error: " << result.message << '\n';
  return static_cast<int>(result.code);
}
