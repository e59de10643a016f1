#ifndef SPDCSIM_GEOMETRY_HPP
#define SPDCSIM_GEOMETRY_HPP

// Gaussian-mask layouts, far-field emission rings, and ring-ring overlap
// classification. Lengths are millimetres, angles radians.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "spdcsim/error.hpp"
#include "spdcsim/qstate.hpp"
#include "spdcsim/source.hpp"

namespace spdcsim {

inline constexpr double kGeomTol = 1e-6;

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend constexpr Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend constexpr Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend constexpr Vec2 operator*(double s, Vec2 v) { return {s * v.x, s * v.y}; }
  friend constexpr bool operator==(Vec2, Vec2) = default;
};

inline double norm(Vec2 v) { return std::hypot(v.x, v.y); }
inline double distance(Vec2 a, Vec2 b) { return norm(a - b); }

inline Vec2 rotate_about(Vec2 p, Vec2 pivot, double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  const Vec2 d = p - pivot;
  return pivot + Vec2{c * d.x - s * d.y, s * d.x + c * d.y};
}

inline Vec2 centroid(const std::vector<Vec2>& pts) {
  if (pts.empty()) return {};
  Vec2 s{};
  for (const auto& p : pts) s = s + p;
  return (1.0 / static_cast<double>(pts.size())) * s;
}

// ---------------------------------------------------------------------------
// Mask

enum class MaskArrangement { single, pair, triangle, grid2x2, custom };

inline std::string_view to_string(MaskArrangement a) {
  switch (a) {
    case MaskArrangement::single: return "single";
    case MaskArrangement::pair: return "pair";
    case MaskArrangement::triangle: return "triangle";
    case MaskArrangement::grid2x2: return "grid2x2";
    case MaskArrangement::custom: return "custom";
  }
  return "?";
}

struct MaskConfig {
  std::vector<Vec2> apertures;
  double aperture_diameter_mm = 2.0;
  double rotation_rad = 0.0;
  MaskArrangement arrangement = MaskArrangement::single;
  // Nearest-neighbour spacing for presets; 0 for single/custom.
  double spacing_mm = 0.0;
  std::vector<std::string> warnings;

  [[nodiscard]] Vec2 centroid() const { return spdcsim::centroid(apertures); }
};

namespace detail {

inline void check_mask(MaskConfig& m) {
  if (!(m.aperture_diameter_mm > 0.0)) throw PhysicsError("aperture diameter must be positive");
  if (m.apertures.empty()) throw PhysicsError("mask has no apertures");
  double nearest = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < m.apertures.size(); ++i) {
    for (std::size_t j = i + 1; j < m.apertures.size(); ++j) {
      const double d = distance(m.apertures[i], m.apertures[j]);
      if (d <= kGeomTol) throw PhysicsError("aperture centers must be pairwise distinct");
      nearest = std::min(nearest, d);
    }
  }
  m.warnings.clear();
  if (nearest < m.aperture_diameter_mm) {
    m.warnings.push_back("aperture spacing " + format_number(nearest, 9) + " mm is below the aperture diameter " +
                         format_number(m.aperture_diameter_mm, 9) + " mm; apertures would merge");
  }
}

} // namespace detail

inline MaskConfig build_mask(MaskArrangement preset, double diameter_mm, double spacing_mm,
                             double rotation_rad = 0.0) {
  if (preset == MaskArrangement::custom) throw InputError("custom masks are built from an aperture list");
  if (preset != MaskArrangement::single && !(spacing_mm > 0.0)) {
    throw PhysicsError("spacing must be positive for multi-aperture presets");
  }
  MaskConfig m;
  m.arrangement = preset;
  m.aperture_diameter_mm = diameter_mm;
  const double h = spacing_mm / 2.0;
  switch (preset) {
    case MaskArrangement::single:
      m.apertures = {{0.0, 0.0}};
      spacing_mm = 0.0;
      break;
    case MaskArrangement::pair:
      m.apertures = {{0.0, h}, {0.0, -h}};
      break;
    case MaskArrangement::triangle: {
      // vertex up, circumradius s/sqrt3
      const double r = spacing_mm / std::sqrt(3.0);
      for (int k = 0; k < 3; ++k) {
        const double a = std::numbers::pi / 2 + 2.0 * std::numbers::pi * k / 3.0;
        m.apertures.push_back({r * std::cos(a), r * std::sin(a)});
      }
      break;
    }
    case MaskArrangement::grid2x2:
      m.apertures = {{-h, h}, {h, h}, {-h, -h}, {h, -h}};
      break;
    case MaskArrangement::custom: break;
  }
  m.spacing_mm = spacing_mm;
  for (auto& p : m.apertures) p = rotate_about(p, {}, rotation_rad);
  m.rotation_rad = rotation_rad;
  detail::check_mask(m);
  return m;
}

inline MaskConfig custom_mask(std::vector<Vec2> apertures, double diameter_mm) {
  MaskConfig m;
  m.arrangement = MaskArrangement::custom;
  m.apertures = std::move(apertures);
  m.aperture_diameter_mm = diameter_mm;
  detail::check_mask(m);
  return m;
}

// Rotates every aperture about the mask centroid.
inline MaskConfig rotate_mask(const MaskConfig& mask, double angle) {
  MaskConfig out = mask;
  const Vec2 c = mask.centroid();
  for (auto& p : out.apertures) p = rotate_about(p, c, angle);
  out.rotation_rad += angle;
  return out;
}

// ---------------------------------------------------------------------------
// Far-field rings

struct Circle {
  Vec2 center;
  double radius = 0.0;
};

struct EmissionRing {
  Vec2 center;
  double radius = 0.0;
  PolLabel label = PolLabel::Both;
  std::size_t source_aperture = 0;
  RingRole role = RingRole::typeI_single;

  [[nodiscard]] Circle circle() const { return {center, radius}; }
};

struct RingSet {
  ProcessKind kind = ProcessKind::repeated_type_I;
  std::size_t aperture_count = 0;
  std::vector<EmissionRing> rings;
};

// Ring center = magnification x aperture center (+- walkoff/2 for type II),
// radius = distance x tan(half-angle).
inline RingSet farfield_rings(const MaskConfig& mask, const ProcessParams& process) {
  validate(process);
  const double radius = process.ring_radius_mm();
  const Vec2 axis{std::cos(process.crystal_axis_angle_rad), std::sin(process.crystal_axis_angle_rad)};
  const Vec2 half_walk = (process.walkoff_offset_mm / 2.0) * axis;
  RingSet out;
  out.kind = process.kind;
  out.aperture_count = mask.apertures.size();
  const auto roles = ring_roles(process);
  for (std::size_t a = 0; a < mask.apertures.size(); ++a) {
    const Vec2 base = process.magnification * mask.apertures[a];
    for (const auto& rl : roles) {
      Vec2 c = base;
      if (rl.role == RingRole::typeII_ordinary) c = base + half_walk;
      if (rl.role == RingRole::typeII_extraordinary) c = base - half_walk;
      out.rings.push_back({c, radius, rl.label, a, rl.role});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Circle-circle intersection

enum class OverlapKind { Disjoint, TwoPoints, Tangent, FullRing, Contained };

inline std::string_view to_string(OverlapKind k) {
  switch (k) {
    case OverlapKind::Disjoint: return "Disjoint";
    case OverlapKind::TwoPoints: return "TwoPoints";
    case OverlapKind::Tangent: return "Tangent";
    case OverlapKind::FullRing: return "FullRing";
    case OverlapKind::Contained: return "Contained";
  }
  return "?";
}

struct CircleIntersection {
  OverlapKind kind = OverlapKind::Disjoint;
  std::vector<Vec2> points;
};

// Classification with d = |ca - cb|, in this order:
//   d > ra+rb+tol                 Disjoint
//   |d - (ra+rb)| <= tol          Tangent (external)
//   d <= tol, |ra-rb| <= tol      FullRing
//   d <= tol                      Contained (concentric)
//   |d - |ra-rb|| <= tol          Tangent (internal)
//   d < |ra-rb| - tol             Contained
//   otherwise                     TwoPoints (radical line)
inline CircleIntersection intersect_circles(const Circle& a, const Circle& b, double tol = kGeomTol) {
  const Vec2 delta = b.center - a.center;
  const double d = norm(delta);
  const double sum = a.radius + b.radius;
  const double diff = std::abs(a.radius - b.radius);
  CircleIntersection out;

  if (d > sum + tol) return out;
  if (d <= tol) {
    out.kind = diff <= tol ? OverlapKind::FullRing : OverlapKind::Contained;
    return out;
  }
  const Vec2 u = (1.0 / d) * delta;
  if (std::abs(d - sum) <= tol) {
    out.kind = OverlapKind::Tangent;
    // average the estimates from both circles so (a,b) and (b,a) agree
    out.points = {0.5 * ((a.center + a.radius * u) + (b.center - b.radius * u))};
    return out;
  }
  if (std::abs(d - diff) <= tol) {
    out.kind = OverlapKind::Tangent;
    // the touching point lies on the far side of the smaller circle from the larger's center
    const bool a_larger = a.radius >= b.radius;
    const Vec2 pa = a_larger ? a.center + a.radius * u : a.center - a.radius * u;
    const Vec2 pb = a_larger ? b.center + b.radius * u : b.center - b.radius * u;
    out.points = {0.5 * (pa + pb)};
    return out;
  }
  if (d < diff - tol) {
    out.kind = OverlapKind::Contained;
    return out;
  }
  out.kind = OverlapKind::TwoPoints;
  const double along = (d * d + a.radius * a.radius - b.radius * b.radius) / (2.0 * d);
  const double h = std::sqrt(std::max(0.0, a.radius * a.radius - along * along));
  const Vec2 foot = a.center + along * u;
  const Vec2 perp{-u.y, u.x};
  out.points = {foot + h * perp, foot - h * perp};
  return out;
}

// ---------------------------------------------------------------------------
// Overlap topology

struct OverlapRecord {
  std::size_t ring_a = 0;
  std::size_t ring_b = 0;
  OverlapKind kind = OverlapKind::Disjoint;
  std::vector<Vec2> points;
};

// An intersection site: every ring passing through it, with its label.
struct Slot {
  Vec2 position;
  std::vector<std::size_t> rings;
  std::vector<PolLabel> labels;
};

// Coincident rings merged into one; label is the union of member labels.
struct CompositeRing {
  std::vector<std::size_t> members;
  Vec2 center;
  double radius = 0.0;
  PolLabel label = PolLabel::None;
};

struct RingTopology {
  std::vector<OverlapRecord> overlaps;
  std::vector<Slot> slots;
  std::vector<CompositeRing> composites;

  [[nodiscard]] std::size_t count(OverlapKind kind) const {
    return static_cast<std::size_t>(std::count_if(overlaps.begin(), overlaps.end(),
                                                  [kind](const OverlapRecord& r) { return r.kind == kind; }));
  }
};

namespace detail {

struct DisjointSet {
  std::vector<std::size_t> parent;
  explicit DisjointSet(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

// Descending y, ties (within tol) broken by ascending x.
inline void sort_spatially(std::vector<Slot>& slots, double tol) {
  std::sort(slots.begin(), slots.end(), [](const Slot& a, const Slot& b) {
    if (a.position.y != b.position.y) return a.position.y > b.position.y;
    return a.position.x < b.position.x;
  });
  std::size_t begin = 0;
  while (begin < slots.size()) {
    std::size_t end = begin + 1;
    while (end < slots.size() && slots[end - 1].position.y - slots[end].position.y <= tol) ++end;
    std::sort(slots.begin() + static_cast<std::ptrdiff_t>(begin), slots.begin() + static_cast<std::ptrdiff_t>(end),
              [](const Slot& a, const Slot& b) { return a.position.x < b.position.x; });
    begin = end;
  }
}

} // namespace detail

inline RingTopology overlap_topology(const RingSet& set, double tol = kGeomTol) {
  const auto& rings = set.rings;
  RingTopology topo;
  detail::DisjointSet groups(rings.size());

  for (std::size_t i = 0; i < rings.size(); ++i) {
    for (std::size_t j = i + 1; j < rings.size(); ++j) {
      auto hit = intersect_circles(rings[i].circle(), rings[j].circle(), tol);
      if (hit.kind == OverlapKind::FullRing) groups.unite(i, j);
      topo.overlaps.push_back({i, j, hit.kind, std::move(hit.points)});
    }
  }

  for (const auto& rec : topo.overlaps) {
    for (const Vec2& p : rec.points) {
      auto it = std::find_if(topo.slots.begin(), topo.slots.end(),
                             [&](const Slot& s) { return distance(s.position, p) <= tol; });
      if (it == topo.slots.end()) topo.slots.push_back({p, {}, {}});
    }
  }
  for (auto& slot : topo.slots) {
    for (std::size_t r = 0; r < rings.size(); ++r) {
      if (std::abs(distance(slot.position, rings[r].center) - rings[r].radius) <= tol) {
        slot.rings.push_back(r);
        slot.labels.push_back(rings[r].label);
      }
    }
  }
  detail::sort_spatially(topo.slots, tol);

  for (std::size_t root = 0; root < rings.size(); ++root) {
    if (groups.find(root) != root) continue;
    CompositeRing comp;
    std::vector<Vec2> centers;
    for (std::size_t r = 0; r < rings.size(); ++r) {
      if (groups.find(r) != root) continue;
      comp.members.push_back(r);
      comp.label = comp.label | rings[r].label;
      comp.radius += rings[r].radius;
      centers.push_back(rings[r].center);
    }
    if (comp.members.size() < 2) continue;
    comp.radius /= static_cast<double>(comp.members.size());
    comp.center = centroid(centers);
    topo.composites.push_back(std::move(comp));
  }
  return topo;
}

// One row per slot, then one row per FullRing composite.
inline void write_topology_csv(std::ostream& os, const RingSet& set, const RingTopology& topo) {
  // round-off residue below 1e-12 mm prints as 0
  auto coord = [](double v) { return format_number(std::abs(v) < 1e-12 ? 0.0 : v, 9); };
  auto join_ids = [](const std::vector<std::size_t>& ids) {
    std::string s;
    for (std::size_t i = 0; i < ids.size(); ++i) s += (i ? ";" : "") + std::to_string(ids[i]);
    return s;
  };
  os << "record,id,x_mm,y_mm,radius_mm,ring_ids,labels\n";
  for (std::size_t i = 0; i < topo.slots.size(); ++i) {
    const auto& s = topo.slots[i];
    std::string labels;
    for (std::size_t k = 0; k < s.labels.size(); ++k) labels += (k ? ";" : "") + std::string(to_string(s.labels[k]));
    os << "slot," << i << ',' << coord(s.position.x) << ',' << coord(s.position.y) << ",,"
       << join_ids(s.rings) << ',' << labels << '\n';
  }
  for (std::size_t i = 0; i < topo.composites.size(); ++i) {
    const auto& c = topo.composites[i];
    std::string labels;
    for (std::size_t k = 0; k < c.members.size(); ++k) {
      labels += (k ? ";" : "") + std::string(to_string(set.rings[c.members[k]].label));
    }
    os << "composite," << i << ',' << coord(c.center.x) << ',' << coord(c.center.y) << ','
       << format_number(c.radius, 9) << ',' << join_ids(c.members) << ',' << labels << '\n';
  }
}

} // namespace spdcsim

#endif // SPDCSIM_GEOMETRY_HPP
