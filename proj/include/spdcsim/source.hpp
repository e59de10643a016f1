#ifndef SPDCSIM_SOURCE_HPP
#define SPDCSIM_SOURCE_HPP

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

#include "spdcsim/error.hpp"
#include "spdcsim/qstate.hpp"

namespace spdcsim {

enum class ProcessKind { repeated_type_I, type_II };

// Polarization carried by an emission ring; bit flags so labels can be unioned.
enum class PolLabel : std::uint8_t { None = 0, H = 1, V = 2, Both = 3 };

constexpr PolLabel operator|(PolLabel a, PolLabel b) {
  return static_cast<PolLabel>(static_cast<std::uint8_t>(a) | static_cast<std::uint8_t>(b));
}
constexpr bool admits(PolLabel set, PolLabel pol) {
  return (static_cast<std::uint8_t>(set) & static_cast<std::uint8_t>(pol)) == static_cast<std::uint8_t>(pol);
}

inline std::string_view to_string(PolLabel p) {
  switch (p) {
    case PolLabel::None: return "None";
    case PolLabel::H: return "H";
    case PolLabel::V: return "V";
    case PolLabel::Both: return "Both";
  }
  return "?";
}

enum class RingRole { typeI_single, typeII_ordinary, typeII_extraordinary };

inline std::string_view to_string(RingRole r) {
  switch (r) {
    case RingRole::typeI_single: return "typeI_single";
    case RingRole::typeII_ordinary: return "typeII_ordinary";
    case RingRole::typeII_extraordinary: return "typeII_extraordinary";
  }
  return "?";
}

inline std::string_view to_string(ProcessKind k) {
  return k == ProcessKind::repeated_type_I ? "repeated_type_I" : "type_II";
}

struct ProcessParams {
  ProcessKind kind = ProcessKind::repeated_type_I;
  double pump_wavelength_nm = 404.0;
  double downconverted_wavelength_nm = 808.0;
  bool degenerate = true;
  double cone_half_angle_rad = 3.0 * std::numbers::pi / 180.0;
  double propagation_distance_mm = 190.0;
  // Center offset between the H and V rings of one aperture (type II only).
  double walkoff_offset_mm = 0.0;
  // Direction of the walkoff offset in the detection plane, from +x.
  double crystal_axis_angle_rad = std::numbers::pi / 2;
  double phase_rad = 0.0;
  double magnification = 1.0;
  // Type II: put V on the ordinary (+walkoff) ring instead of H.
  bool swap_type2_labels = false;
  // Metadata only.
  double crystal_thickness_um = 500.0;

  bool operator==(const ProcessParams&) const = default;

  [[nodiscard]] double ring_radius_mm() const {
    return propagation_distance_mm * std::tan(cone_half_angle_rad);
  }
};

inline void validate(const ProcessParams& p) {
  if (!(p.pump_wavelength_nm > 0.0) || !(p.downconverted_wavelength_nm > 0.0)) {
    throw PhysicsError("wavelengths must be positive");
  }
  if (p.degenerate && std::abs(p.downconverted_wavelength_nm - 2.0 * p.pump_wavelength_nm) > 0.5) {
    throw PhysicsError("degenerate down-conversion requires downconverted_wavelength = 2 x pump_wavelength "
                       "(within 0.5 nm)");
  }
  if (!(p.cone_half_angle_rad > 0.0) || !(p.cone_half_angle_rad < std::numbers::pi / 2)) {
    throw PhysicsError("cone_half_angle must lie in (0, pi/2)");
  }
  if (!(p.propagation_distance_mm > 0.0)) throw PhysicsError("propagation_distance must be positive");
  if (!(p.magnification > 0.0)) throw PhysicsError("magnification must be positive");
  if (p.kind == ProcessKind::type_II && !(p.walkoff_offset_mm > 0.0)) {
    throw PhysicsError("type II requires a positive walkoff_offset");
  }
  if (!std::isfinite(p.phase_rad) || !std::isfinite(p.crystal_axis_angle_rad)) {
    throw PhysicsError("phase and crystal axis angle must be finite");
  }
}

// The Bell pair each sub-Gaussian pump produces: phi+ for repeated type I, psi+ for type II.
inline MultiPhotonKet pair_state(const ProcessParams& p) {
  return bell_state(p.kind == ProcessKind::repeated_type_I ? BellFamily::phi : BellFamily::psi,
                    BellSign::plus, p.phase_rad);
}

struct RingRoleLabel {
  RingRole role;
  PolLabel label;
};

// Ordinary ring sits at +walkoff/2, extraordinary at -walkoff/2.
inline std::vector<RingRoleLabel> ring_roles(const ProcessParams& p) {
  if (p.kind == ProcessKind::repeated_type_I) return {{RingRole::typeI_single, PolLabel::Both}};
  if (p.swap_type2_labels) {
    return {{RingRole::typeII_ordinary, PolLabel::V}, {RingRole::typeII_extraordinary, PolLabel::H}};
  }
  return {{RingRole::typeII_ordinary, PolLabel::H}, {RingRole::typeII_extraordinary, PolLabel::V}};
}

} // namespace spdcsim

#endif // SPDCSIM_SOURCE_HPP
