#ifndef SPDCSIM_CONFIG_HPP
#define SPDCSIM_CONFIG_HPP

// Run configuration: a JSON document with mask / process / analysis /
// render / output sections and an optional rotation sweep.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "spdcsim/builder.hpp"
#include "spdcsim/geometry.hpp"
#include "spdcsim/render.hpp"
#include "spdcsim/source.hpp"

namespace spdcsim {

// Malformed config document; the message names the offending field.
class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct MaskSection {
  // exactly one of preset / apertures
  std::optional<MaskArrangement> preset = MaskArrangement::single;
  std::vector<Vec2> apertures;
  double diameter_mm = 2.0;
  double spacing_mm = 1.5;
  double rotation_rad = 0.0;

  bool operator==(const MaskSection&) const = default;
};

struct AnalysisSection {
  double phase_rad = 0.0;
  Weighting weighting = Weighting::dedup_equal;
  // side A of each reported cut, 1-based photon indices; empty = defaults
  std::vector<std::vector<std::size_t>> bipartitions;
  // 1-based ((a,b),(c,d)) for four-photon Bell-product coefficients
  std::optional<std::array<std::size_t, 4>> pairing;
  double tolerance_mm = kGeomTol;

  bool operator==(const AnalysisSection&) const = default;
};

struct RenderSection {
  std::size_t width = 512;
  std::size_t height = 512;
  double pitch_mm = 0.1;
  Vec2 center_mm;
  std::optional<double> profile_width_mm;  // default: ring radius / 20
  std::vector<double> intensity_scale;     // per aperture; default 1 (type I) or 0.5 (type II)
  double pump_waist_mm = 0.8;
  std::size_t inset_px = 128;              // 0 disables the pump inset
  Corner inset_corner = Corner::top_right;
  ImageFormat format = ImageFormat::pgm;
  int depth = 8;
  double noise_amplitude = 0.0;
  std::optional<std::uint64_t> seed;
  unsigned threads = 0;                    // 0 = hardware concurrency

  bool operator==(const RenderSection&) const = default;
};

struct OutputSection {
  std::string topology_csv = "topology.csv";
  std::string state_report = "state.txt";
  std::string pattern_image = "pattern.pgm";
  std::string pump_image = "pump.pgm";

  bool operator==(const OutputSection&) const = default;
};

struct SweepSection {
  std::vector<double> rotations_rad;
  bool rotate_crystal = true;

  bool operator==(const SweepSection&) const = default;
};

struct RunConfig {
  MaskSection mask;
  ProcessParams process;
  AnalysisSection analysis;
  RenderSection render;
  OutputSection output;
  std::optional<SweepSection> sweep;

  bool operator==(const RunConfig&) const = default;
};

namespace detail {

using nlohmann::json;

template <typename Enum, std::size_t N>
Enum parse_enum(const json& j, const std::string& field, const std::array<std::pair<const char*, Enum>, N>& names) {
  if (!j.is_string()) throw ConfigError(field + ": expected a string");
  const auto s = j.get<std::string>();
  for (const auto& [name, value] : names) {
    if (s == name) return value;
  }
  std::string allowed;
  for (const auto& [name, value] : names) allowed += (allowed.empty() ? "" : ", ") + std::string(name);
  throw ConfigError(field + ": unknown value '" + s + "' (expected one of " + allowed + ")");
}

template <typename Enum, std::size_t N>
const char* enum_name(Enum v, const std::array<std::pair<const char*, Enum>, N>& names) {
  for (const auto& [name, value] : names) {
    if (value == v) return name;
  }
  return "?";
}

inline constexpr std::array<std::pair<const char*, MaskArrangement>, 4> kPresetNames{{
    {"single", MaskArrangement::single},
    {"pair", MaskArrangement::pair},
    {"triangle", MaskArrangement::triangle},
    {"grid2x2", MaskArrangement::grid2x2},
}};
inline constexpr std::array<std::pair<const char*, ProcessKind>, 2> kKindNames{{
    {"repeated_type_I", ProcessKind::repeated_type_I},
    {"type_II", ProcessKind::type_II},
}};
inline constexpr std::array<std::pair<const char*, Weighting>, 2> kWeightingNames{{
    {"dedup_equal", Weighting::dedup_equal},
    {"multiplicity", Weighting::multiplicity},
}};
inline constexpr std::array<std::pair<const char*, Corner>, 4> kCornerNames{{
    {"top_left", Corner::top_left},
    {"top_right", Corner::top_right},
    {"bottom_left", Corner::bottom_left},
    {"bottom_right", Corner::bottom_right},
}};
inline constexpr std::array<std::pair<const char*, ImageFormat>, 2> kFormatNames{{
    {"pgm", ImageFormat::pgm},
    {"png", ImageFormat::png},
}};

// Reads fields of one JSON object and rejects keys nobody asked for.
class Section {
public:
  Section(const json& parent, const std::string& name, bool required = false) : name_(name) {
    if (!parent.contains(name)) {
      if (required) throw ConfigError(name + ": missing section");
      return;
    }
    obj_ = &parent.at(name);
    if (!obj_->is_object()) throw ConfigError(name + ": expected an object");
  }

  [[nodiscard]] bool present() const { return obj_ != nullptr; }
  [[nodiscard]] bool has(const std::string& key) const { return obj_ && obj_->contains(key); }
  [[nodiscard]] std::string field(const std::string& key) const { return name_ + "." + key; }

  const json* get(const std::string& key) {
    seen_.insert(key);
    if (!obj_ || !obj_->contains(key)) return nullptr;
    const json& v = obj_->at(key);
    return v.is_null() ? nullptr : &v;
  }

  void number(const std::string& key, double& out) {
    if (const json* v = get(key)) {
      if (!v->is_number()) throw ConfigError(field(key) + ": expected a number");
      out = v->get<double>();
    }
  }

  void boolean(const std::string& key, bool& out) {
    if (const json* v = get(key)) {
      if (!v->is_boolean()) throw ConfigError(field(key) + ": expected true or false");
      out = v->get<bool>();
    }
  }

  template <typename T>
  void unsigned_integer(const std::string& key, T& out) {
    if (const json* v = get(key)) {
      if (!v->is_number_unsigned() && !(v->is_number_integer() && v->get<long long>() >= 0)) {
        throw ConfigError(field(key) + ": expected a nonnegative integer");
      }
      out = static_cast<T>(v->get<std::uint64_t>());
    }
  }

  void string(const std::string& key, std::string& out) {
    if (const json* v = get(key)) {
      if (!v->is_string()) throw ConfigError(field(key) + ": expected a string");
      out = v->get<std::string>();
    }
  }

  Vec2 vec2(const json& v, const std::string& where) const {
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
      throw ConfigError(where + ": expected [x, y]");
    }
    return {v[0].get<double>(), v[1].get<double>()};
  }

  void finish() const {
    if (!obj_) return;
    for (const auto& [key, value] : obj_->items()) {
      if (!seen_.contains(key)) throw ConfigError(field(key) + ": unknown field");
    }
  }

private:
  std::string name_;
  const json* obj_ = nullptr;
  std::set<std::string> seen_;
};

inline std::vector<std::size_t> index_list(const json& v, const std::string& where) {
  if (!v.is_array() || v.empty()) throw ConfigError(where + ": expected a nonempty list of photon indices");
  std::vector<std::size_t> out;
  for (const auto& e : v) {
    if (!e.is_number_integer() || e.get<long long>() < 1) {
      throw ConfigError(where + ": photon indices are 1-based positive integers");
    }
    out.push_back(e.get<std::size_t>());
  }
  return out;
}

} // namespace detail

inline RunConfig parse_config(const nlohmann::json& doc) {
  using detail::Section;
  if (!doc.is_object()) throw ConfigError("config: expected a JSON object");
  for (const auto& [key, value] : doc.items()) {
    static const std::set<std::string> known{"mask", "process", "analysis", "render", "output", "sweep"};
    if (!known.contains(key)) throw ConfigError(key + ": unknown section");
  }
  RunConfig cfg;

  Section mask(doc, "mask", true);
  const bool has_preset = mask.has("preset");
  const bool has_list = mask.has("apertures");
  if (has_preset == has_list) throw ConfigError("mask: specify exactly one of 'preset' or 'apertures'");
  if (const auto* p = mask.get("preset")) {
    cfg.mask.preset = detail::parse_enum(*p, mask.field("preset"), detail::kPresetNames);
  }
  if (const auto* a = mask.get("apertures")) {
    cfg.mask.preset.reset();
    if (!a->is_array() || a->empty()) throw ConfigError("mask.apertures: expected a nonempty list of [x, y]");
    for (std::size_t i = 0; i < a->size(); ++i) {
      cfg.mask.apertures.push_back(mask.vec2((*a)[i], "mask.apertures[" + std::to_string(i) + "]"));
    }
  }
  mask.number("diameter_mm", cfg.mask.diameter_mm);
  mask.number("spacing_mm", cfg.mask.spacing_mm);
  mask.number("rotation_rad", cfg.mask.rotation_rad);
  mask.finish();

  Section proc(doc, "process", true);
  if (const auto* k = proc.get("kind")) cfg.process.kind = detail::parse_enum(*k, proc.field("kind"), detail::kKindNames);
  else throw ConfigError("process.kind: missing field");
  proc.number("pump_wavelength_nm", cfg.process.pump_wavelength_nm);
  proc.number("downconverted_wavelength_nm", cfg.process.downconverted_wavelength_nm);
  proc.boolean("degenerate", cfg.process.degenerate);
  proc.number("cone_half_angle_rad", cfg.process.cone_half_angle_rad);
  proc.number("propagation_distance_mm", cfg.process.propagation_distance_mm);
  proc.number("walkoff_offset_mm", cfg.process.walkoff_offset_mm);
  proc.number("crystal_axis_angle_rad", cfg.process.crystal_axis_angle_rad);
  proc.number("magnification", cfg.process.magnification);
  proc.boolean("swap_polarization_labels", cfg.process.swap_type2_labels);
  proc.number("crystal_thickness_um", cfg.process.crystal_thickness_um);
  proc.finish();

  Section ana(doc, "analysis");
  ana.number("phase_rad", cfg.analysis.phase_rad);
  if (const auto* w = ana.get("weighting")) {
    cfg.analysis.weighting = detail::parse_enum(*w, ana.field("weighting"), detail::kWeightingNames);
  }
  if (const auto* b = ana.get("bipartitions")) {
    if (!b->is_array()) throw ConfigError("analysis.bipartitions: expected a list of index lists");
    for (std::size_t i = 0; i < b->size(); ++i) {
      cfg.analysis.bipartitions.push_back(
          detail::index_list((*b)[i], "analysis.bipartitions[" + std::to_string(i) + "]"));
    }
  }
  if (const auto* p = ana.get("pairing")) {
    if (!p->is_array() || p->size() != 2) throw ConfigError("analysis.pairing: expected [[a, b], [c, d]]");
    const auto first = detail::index_list((*p)[0], "analysis.pairing[0]");
    const auto second = detail::index_list((*p)[1], "analysis.pairing[1]");
    if (first.size() != 2 || second.size() != 2) throw ConfigError("analysis.pairing: expected [[a, b], [c, d]]");
    cfg.analysis.pairing = std::array<std::size_t, 4>{first[0], first[1], second[0], second[1]};
  }
  ana.number("tolerance_mm", cfg.analysis.tolerance_mm);
  ana.finish();
  cfg.process.phase_rad = cfg.analysis.phase_rad;

  Section ren(doc, "render");
  ren.unsigned_integer("width", cfg.render.width);
  ren.unsigned_integer("height", cfg.render.height);
  ren.number("pitch_mm", cfg.render.pitch_mm);
  if (const auto* c = ren.get("center_mm")) cfg.render.center_mm = ren.vec2(*c, "render.center_mm");
  if (const auto* pw = ren.get("profile_width_mm")) {
    if (!pw->is_number()) throw ConfigError("render.profile_width_mm: expected a number");
    cfg.render.profile_width_mm = pw->get<double>();
  }
  if (const auto* s = ren.get("intensity_scale")) {
    if (!s->is_array()) throw ConfigError("render.intensity_scale: expected a list of numbers");
    for (const auto& e : *s) {
      if (!e.is_number()) throw ConfigError("render.intensity_scale: expected a list of numbers");
      cfg.render.intensity_scale.push_back(e.get<double>());
    }
  }
  ren.number("pump_waist_mm", cfg.render.pump_waist_mm);
  ren.unsigned_integer("inset_px", cfg.render.inset_px);
  if (const auto* c = ren.get("inset_corner")) {
    cfg.render.inset_corner = detail::parse_enum(*c, ren.field("inset_corner"), detail::kCornerNames);
  }
  if (const auto* f = ren.get("format")) cfg.render.format = detail::parse_enum(*f, ren.field("format"), detail::kFormatNames);
  if (const auto* d = ren.get("depth")) {
    if (!d->is_number_integer() || (d->get<int>() != 8 && d->get<int>() != 16)) {
      throw ConfigError("render.depth: expected 8 or 16");
    }
    cfg.render.depth = d->get<int>();
  }
  ren.number("noise_amplitude", cfg.render.noise_amplitude);
  if (ren.has("seed") && ren.get("seed")) {
    std::uint64_t seed = 0;
    ren.unsigned_integer("seed", seed);
    cfg.render.seed = seed;
  }
  ren.unsigned_integer("threads", cfg.render.threads);
  ren.finish();

  Section out(doc, "output");
  out.string("topology_csv", cfg.output.topology_csv);
  out.string("state_report", cfg.output.state_report);
  out.string("pattern_image", cfg.output.pattern_image);
  out.string("pump_image", cfg.output.pump_image);
  out.finish();

  Section sw(doc, "sweep");
  if (sw.present()) {
    SweepSection s;
    if (const auto* r = sw.get("rotations_rad")) {
      if (!r->is_array() || r->empty()) throw ConfigError("sweep.rotations_rad: expected a nonempty list of numbers");
      for (const auto& e : *r) {
        if (!e.is_number()) throw ConfigError("sweep.rotations_rad: expected a nonempty list of numbers");
        s.rotations_rad.push_back(e.get<double>());
      }
    } else {
      throw ConfigError("sweep.rotations_rad: missing field");
    }
    sw.boolean("rotate_crystal", s.rotate_crystal);
    sw.finish();
    cfg.sweep = std::move(s);
  }
  return cfg;
}

inline RunConfig parse_config_text(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  return parse_config(doc);
}

inline RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("config: cannot read " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config_text(ss.str());
}

// Fully expanded document: every field, defaults included.
inline nlohmann::json dump_config(const RunConfig& cfg) {
  using nlohmann::json;
  json doc;
  json& m = doc["mask"];
  if (cfg.mask.preset) {
    m["preset"] = detail::enum_name(*cfg.mask.preset, detail::kPresetNames);
  } else {
    m["apertures"] = json::array();
    for (const auto& a : cfg.mask.apertures) m["apertures"].push_back({a.x, a.y});
  }
  m["diameter_mm"] = cfg.mask.diameter_mm;
  m["spacing_mm"] = cfg.mask.spacing_mm;
  m["rotation_rad"] = cfg.mask.rotation_rad;

  const auto& p = cfg.process;
  doc["process"] = {
      {"kind", detail::enum_name(p.kind, detail::kKindNames)},
      {"pump_wavelength_nm", p.pump_wavelength_nm},
      {"downconverted_wavelength_nm", p.downconverted_wavelength_nm},
      {"degenerate", p.degenerate},
      {"cone_half_angle_rad", p.cone_half_angle_rad},
      {"propagation_distance_mm", p.propagation_distance_mm},
      {"walkoff_offset_mm", p.walkoff_offset_mm},
      {"crystal_axis_angle_rad", p.crystal_axis_angle_rad},
      {"magnification", p.magnification},
      {"swap_polarization_labels", p.swap_type2_labels},
      {"crystal_thickness_um", p.crystal_thickness_um},
  };

  json& a = doc["analysis"];
  a["phase_rad"] = cfg.analysis.phase_rad;
  a["weighting"] = detail::enum_name(cfg.analysis.weighting, detail::kWeightingNames);
  a["bipartitions"] = cfg.analysis.bipartitions;
  if (cfg.analysis.pairing) {
    const auto& q = *cfg.analysis.pairing;
    a["pairing"] = json::array({json::array({q[0], q[1]}), json::array({q[2], q[3]})});
  } else {
    a["pairing"] = nullptr;
  }
  a["tolerance_mm"] = cfg.analysis.tolerance_mm;

  const auto& r = cfg.render;
  json& rj = doc["render"];
  rj["width"] = r.width;
  rj["height"] = r.height;
  rj["pitch_mm"] = r.pitch_mm;
  rj["center_mm"] = {r.center_mm.x, r.center_mm.y};
  rj["profile_width_mm"] = r.profile_width_mm ? json(*r.profile_width_mm) : json(nullptr);
  rj["intensity_scale"] = r.intensity_scale;
  rj["pump_waist_mm"] = r.pump_waist_mm;
  rj["inset_px"] = r.inset_px;
  rj["inset_corner"] = detail::enum_name(r.inset_corner, detail::kCornerNames);
  rj["format"] = detail::enum_name(r.format, detail::kFormatNames);
  rj["depth"] = r.depth;
  rj["noise_amplitude"] = r.noise_amplitude;
  rj["seed"] = r.seed ? json(*r.seed) : json(nullptr);
  rj["threads"] = r.threads;

  doc["output"] = {
      {"topology_csv", cfg.output.topology_csv},
      {"state_report", cfg.output.state_report},
      {"pattern_image", cfg.output.pattern_image},
      {"pump_image", cfg.output.pump_image},
  };
  if (cfg.sweep) {
    doc["sweep"] = {{"rotations_rad", cfg.sweep->rotations_rad}, {"rotate_crystal", cfg.sweep->rotate_crystal}};
  }
  return doc;
}

} // namespace spdcsim

#endif // SPDCSIM_CONFIG_HPP
