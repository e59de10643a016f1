#ifndef SPDCSIM_PIPELINE_HPP
#define SPDCSIM_PIPELINE_HPP

// config -> geometry -> builder -> report/render, as driven by the CLI.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "spdcsim/builder.hpp"
#include "spdcsim/config.hpp"
#include "spdcsim/geometry.hpp"
#include "spdcsim/qstate.hpp"
#include "spdcsim/render.hpp"
#include "spdcsim/source.hpp"

namespace spdcsim {

enum class ExitCode : int {
  ok = 0,
  config_error = 2,
  physics_error = 3,
  unsatisfiable_topology = 4,
  io_error = 5,
};

// One concrete mask/process pair; a sweep expands into several.
struct Scenario {
  std::string suffix;  // appended to output file stems; empty without a sweep
  MaskConfig mask;
  ProcessParams process;
};

inline MaskConfig build_mask_from(const MaskSection& m) {
  if (m.preset) return build_mask(*m.preset, m.diameter_mm, m.spacing_mm, m.rotation_rad);
  MaskConfig mask = custom_mask(m.apertures, m.diameter_mm);
  return rotate_mask(mask, m.rotation_rad);
}

inline std::vector<Scenario> expand_scenarios(const RunConfig& cfg) {
  const MaskConfig base = build_mask_from(cfg.mask);
  validate(cfg.process);
  if (!cfg.sweep) return {{"", base, cfg.process}};
  std::vector<Scenario> out;
  for (std::size_t i = 0; i < cfg.sweep->rotations_rad.size(); ++i) {
    const double angle = cfg.sweep->rotations_rad[i];
    Scenario s{"_rot" + std::to_string(i), rotate_mask(base, angle), cfg.process};
    if (cfg.sweep->rotate_crystal) s.process.crystal_axis_angle_rad += angle;
    out.push_back(std::move(s));
  }
  return out;
}

inline std::filesystem::path output_path(const std::filesystem::path& out_dir, const std::string& name,
                                         const std::string& suffix) {
  std::filesystem::path p(name);
  const std::string stem = p.stem().string() + suffix + p.extension().string();
  return out_dir / p.parent_path() / stem;
}

inline std::string plural(std::size_t n, const std::string& word) {
  return std::to_string(n) + " " + word + (n == 1 ? "" : "s");
}

// e.g. "2 rings, 1 TwoPoints overlap, 2 slots"
inline std::string summarize(const RingSet& set, const RingTopology& topo) {
  std::string s = plural(set.rings.size(), "ring");
  std::size_t overlaps = 0;
  for (OverlapKind k : {OverlapKind::TwoPoints, OverlapKind::Tangent, OverlapKind::FullRing, OverlapKind::Contained}) {
    const std::size_t n = topo.count(k);
    if (n == 0) continue;
    s += ", " + std::to_string(n) + " " + std::string(to_string(k)) + (n == 1 ? " overlap" : " overlaps");
    overlaps += n;
  }
  if (overlaps == 0) return s + ", 0 overlaps";
  s += ", " + plural(topo.slots.size(), "slot");
  for (const auto& c : topo.composites) {
    s += "\n" + std::string("FullRing composite of ") + plural(c.members.size(), "ring") + " at (" +
         format_number(c.center.x, 9) + ", " + format_number(c.center.y, 9) + "), radius " +
         format_number(c.radius, 9) + ", label " + std::string(to_string(c.label));
  }
  return s;
}

struct Geometry {
  RingSet rings;
  RingTopology topology;
};

inline Geometry run_geometry(const Scenario& sc, double tol) {
  Geometry g;
  g.rings = farfield_rings(sc.mask, sc.process);
  g.topology = overlap_topology(g.rings, tol);
  return g;
}

inline StateReportOptions report_options(const RunConfig& cfg, std::size_t photons) {
  StateReportOptions opt;
  opt.phase = cfg.analysis.phase_rad;
  opt.weighting = cfg.analysis.weighting;
  for (const auto& side : cfg.analysis.bipartitions) {
    std::vector<std::size_t> zero_based;
    for (std::size_t i : side) zero_based.push_back(i - 1);
    try {
      opt.cuts.emplace_back(zero_based, photons);
    } catch (const InputError& e) {
      throw ConfigError(std::string("analysis.bipartitions: ") + e.what());
    }
  }
  if (cfg.analysis.pairing) {
    const auto& q = *cfg.analysis.pairing;
    Pairing p{{q[0] - 1, q[1] - 1}, {q[2] - 1, q[3] - 1}};
    try {
      p.validate();
    } catch (const InputError& e) {
      throw ConfigError(std::string("analysis.pairing: ") + e.what());
    }
    opt.bell_pairing = p;
  }
  return opt;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os << text;
  if (!os) throw IoError("failed writing " + path.string());
}

// ---------------------------------------------------------------------------
// Subcommands. Each throws on failure; run_command maps exceptions to exit codes.

inline void cmd_rings(const RunConfig& cfg, const std::filesystem::path& out_dir, std::ostream& out) {
  for (const auto& sc : expand_scenarios(cfg)) {
    const auto g = run_geometry(sc, cfg.analysis.tolerance_mm);
    for (const auto& w : sc.mask.warnings) out << "warning: " << w << '\n';
    std::ostringstream csv;
    write_topology_csv(csv, g.rings, g.topology);
    const auto path = output_path(out_dir, cfg.output.topology_csv, sc.suffix);
    write_text(path, csv.str());
    if (!sc.suffix.empty()) out << "[" << sc.suffix.substr(1) << "] ";
    out << summarize(g.rings, g.topology) << '\n';
  }
}

inline MultiPhotonKet scenario_state(const RunConfig& cfg, const Scenario& sc, OverlapTopology* topo_out = nullptr) {
  const auto g = run_geometry(sc, cfg.analysis.tolerance_mm);
  auto topo = photon_topology(g.rings, g.topology);
  const auto outcomes = enumerate_outcomes(topo);
  auto state = build_overlap_state(outcomes, cfg.analysis.phase_rad, cfg.analysis.weighting);
  if (topo_out) *topo_out = std::move(topo);
  return state;
}

inline void cmd_state(const RunConfig& cfg, const std::filesystem::path& out_dir, std::ostream& out) {
  for (const auto& sc : expand_scenarios(cfg)) {
    OverlapTopology topo;
    const auto state = scenario_state(cfg, sc, &topo);
    std::ostringstream report;
    write_state_report(report, topo, sc.process, state, report_options(cfg, state.photons()));
    write_text(output_path(out_dir, cfg.output.state_report, sc.suffix), report.str());
    if (!sc.suffix.empty()) out << "[" << sc.suffix.substr(1) << "] ";
    out << to_string(state) << '\n';
  }
}

inline IntensityImage render_scenario(const RunConfig& cfg, const Scenario& sc, IntensityImage* pump_out = nullptr) {
  const auto& r = cfg.render;
  const auto rings = farfield_rings(sc.mask, sc.process);
  const double sigma = r.profile_width_mm.value_or(sc.process.ring_radius_mm() / 20.0);
  std::vector<double> scales = r.intensity_scale;
  if (scales.empty()) scales.assign(sc.mask.apertures.size(), sc.process.kind == ProcessKind::type_II ? 0.5 : 1.0);
  auto img = render_rings(rings, sigma, scales, ImageGrid::centered(r.width, r.height, r.pitch_mm, r.center_mm),
                          r.threads);
  if (r.noise_amplitude > 0.0) add_uniform_noise(img, r.noise_amplitude, r.seed.value_or(0));

  // pump inset: square field around the mask with a margin of one aperture diameter
  double extent = 0.0;
  const Vec2 c = sc.mask.centroid();
  for (const auto& a : sc.mask.apertures) extent = std::max(extent, distance(a, c));
  extent += sc.mask.aperture_diameter_mm;
  const std::size_t inset_px = r.inset_px > 0 ? r.inset_px : 128;
  const auto pump = render_pump(sc.mask, r.pump_waist_mm,
                                ImageGrid::centered(inset_px, inset_px, 2.0 * extent / static_cast<double>(inset_px), c),
                                r.threads);
  if (r.inset_px > 0) composite_inset(img, pump, r.inset_corner);
  if (pump_out) *pump_out = pump;
  return img;
}

inline void cmd_render(const RunConfig& cfg, const std::filesystem::path& out_dir, std::ostream& out) {
  for (const auto& sc : expand_scenarios(cfg)) {
    IntensityImage pump(ImageGrid{1, 1, 1.0, {}});
    const auto img = render_scenario(cfg, sc, &pump);
    const auto pattern_path = output_path(out_dir, cfg.output.pattern_image, sc.suffix);
    const auto pump_path = output_path(out_dir, cfg.output.pump_image, sc.suffix);
    if (pattern_path.has_parent_path()) std::filesystem::create_directories(pattern_path.parent_path());
    write_image(img, pattern_path, cfg.render.format, cfg.render.depth, cfg.render.seed);
    write_image(pump, pump_path, cfg.render.format, cfg.render.depth, cfg.render.seed);
    out << "wrote " << pattern_path.string() << " and " << pump_path.string() << '\n';
  }
}

enum class Command { rings, state, render, report };

struct CommandResult {
  ExitCode code = ExitCode::ok;
  std::string message;
};

// Runs one subcommand, mapping failures onto distinct exit codes. `report`
// runs rings, state and render; an unsatisfiable state still renders.
inline CommandResult run_command(Command cmd, const RunConfig& cfg, const std::filesystem::path& out_dir,
                                 std::ostream& out) {
  auto guarded = [&](auto&& fn) -> CommandResult {
    try {
      fn();
      return {};
    } catch (const ConfigError& e) {
      return {ExitCode::config_error, e.what()};
    } catch (const PhysicsError& e) {
      return {ExitCode::physics_error, e.what()};
    } catch (const UnsatisfiableTopologyError& e) {
      return {ExitCode::unsatisfiable_topology, std::string("unsatisfiable topology: ") + e.what()};
    } catch (const IoError& e) {
      return {ExitCode::io_error, e.what()};
    } catch (const std::filesystem::filesystem_error& e) {
      return {ExitCode::io_error, e.what()};
    } catch (const InputError& e) {
      return {ExitCode::config_error, e.what()};
    } catch (const DimensionError& e) {
      return {ExitCode::config_error, e.what()};
    }
  };
  switch (cmd) {
    case Command::rings: return guarded([&] { cmd_rings(cfg, out_dir, out); });
    case Command::state: return guarded([&] { cmd_state(cfg, out_dir, out); });
    case Command::render: return guarded([&] { cmd_render(cfg, out_dir, out); });
    case Command::report: {
      if (auto r = guarded([&] { cmd_rings(cfg, out_dir, out); }); r.code != ExitCode::ok) return r;
      const auto state = guarded([&] { cmd_state(cfg, out_dir, out); });
      if (state.code != ExitCode::ok && state.code != ExitCode::unsatisfiable_topology) return state;
      if (auto r = guarded([&] { cmd_render(cfg, out_dir, out); }); r.code != ExitCode::ok) return r;
      return state;
    }
  }
  return {ExitCode::config_error, "unknown command"};
}

} // namespace spdcsim

#endif // SPDCSIM_PIPELINE_HPP
