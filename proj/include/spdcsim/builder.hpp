#ifndef SPDCSIM_BUILDER_HPP
#define SPDCSIM_BUILDER_HPP

// Joint polarization state at the overlap regions of a masked-pump pattern.
//
// Photon slots come from the geometric intersection sites. A process claims a
// site when every one of its rings passes through it (there its photons are
// indistinguishable in polarization); each claim adds one photon slot to the
// site. Every claiming process emits one pair, and a pair photon of
// polarization P may sit in any slot whose site lies on a ring of that
// process carrying P. Enumerating those assignments gives the outcome set.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <iterator>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "spdcsim/error.hpp"
#include "spdcsim/geometry.hpp"
#include "spdcsim/qstate.hpp"
#include "spdcsim/source.hpp"

namespace spdcsim {

// phi-type pairs are co-polarized, psi-type pairs cross-polarized.
enum class Correlation { equal, opposite };

struct PhotonSlot {
  Vec2 position;
  std::size_t site = 0;
  PolLabel admissible = PolLabel::None;
};

struct SlotReach {
  std::size_t slot = 0;
  PolLabel allowed = PolLabel::None;
};

// The pair one process contributes and where its photons may land.
struct PairConstraint {
  std::size_t process = 0;
  Correlation correlation = Correlation::equal;
  std::vector<SlotReach> scope;
};

struct OverlapTopology {
  std::vector<PhotonSlot> slots;
  std::vector<PairConstraint> constraints;

  [[nodiscard]] std::size_t photons() const noexcept { return slots.size(); }

  [[nodiscard]] std::string canonical() const {
    std::ostringstream os;
    for (const auto& s : slots) {
      os << "slot " << format_number(s.position.x, 9) << ' ' << format_number(s.position.y, 9) << ' ' << s.site
         << ' ' << to_string(s.admissible) << '\n';
    }
    for (const auto& c : constraints) {
      os << "pair " << c.process << ' ' << (c.correlation == Correlation::equal ? "equal" : "opposite");
      for (const auto& r : c.scope) os << ' ' << r.slot << ':' << to_string(r.allowed);
      os << '\n';
    }
    return os.str();
  }

  // FNV-1a over the canonical text.
  [[nodiscard]] std::uint64_t hash() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : canonical()) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    return h;
  }
};

inline Correlation correlation_of(ProcessKind kind) {
  return kind == ProcessKind::repeated_type_I ? Correlation::equal : Correlation::opposite;
}

inline OverlapTopology photon_topology(const RingSet& set, const RingTopology& geo) {
  const std::size_t processes = set.aperture_count;
  std::vector<std::vector<std::size_t>> rings_of(processes);
  for (std::size_t r = 0; r < set.rings.size(); ++r) rings_of[set.rings[r].source_aperture].push_back(r);

  auto on_site = [&](const Slot& site, std::size_t ring) {
    return std::find(site.rings.begin(), site.rings.end(), ring) != site.rings.end();
  };

  OverlapTopology out;
  std::vector<std::vector<std::size_t>> slots_at(geo.slots.size());
  std::vector<bool> contributes(processes, false);
  for (std::size_t s = 0; s < geo.slots.size(); ++s) {
    const Slot& site = geo.slots[s];
    PolLabel admissible = PolLabel::None;
    for (PolLabel l : site.labels) admissible = admissible | l;
    for (std::size_t p = 0; p < processes; ++p) {
      if (rings_of[p].empty()) continue;
      const bool claims = std::all_of(rings_of[p].begin(), rings_of[p].end(),
                                      [&](std::size_t r) { return on_site(site, r); });
      if (!claims) continue;
      contributes[p] = true;
      slots_at[s].push_back(out.slots.size());
      out.slots.push_back({site.position, s, admissible});
    }
  }

  for (std::size_t p = 0; p < processes; ++p) {
    if (!contributes[p]) continue;
    PairConstraint pc{p, correlation_of(set.kind), {}};
    for (std::size_t s = 0; s < geo.slots.size(); ++s) {
      PolLabel allowed = PolLabel::None;
      for (std::size_t r : rings_of[p]) {
        if (on_site(geo.slots[s], r)) allowed = allowed | set.rings[r].label;
      }
      if (allowed == PolLabel::None) continue;
      for (std::size_t slot : slots_at[s]) pc.scope.push_back({slot, allowed});
    }
    std::sort(pc.scope.begin(), pc.scope.end(), [](const SlotReach& a, const SlotReach& b) { return a.slot < b.slot; });
    out.constraints.push_back(std::move(pc));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Outcome enumeration

struct Outcome {
  std::string label;
  std::size_t multiplicity = 0;
  // phase order k -> number of assignments with that k
  std::map<unsigned, std::size_t> phase_orders;

  [[nodiscard]] unsigned min_phase_order() const { return phase_orders.begin()->first; }
};

struct OutcomeSet {
  std::size_t photons = 0;
  std::vector<Outcome> outcomes;  // sorted by basis index
  std::string diagnostic;         // why the set is empty, if it is

  [[nodiscard]] bool empty() const noexcept { return outcomes.empty(); }

  [[nodiscard]] std::vector<std::string> labels() const {
    std::vector<std::string> out;
    for (const auto& o : outcomes) out.push_back(o.label);
    return out;
  }
};

namespace detail {

class OutcomeEnumerator {
public:
  explicit OutcomeEnumerator(const OverlapTopology& t) : topo_(t), label_(t.photons(), '.') {}

  std::map<std::string, Outcome> run() {
    recurse(0, 0);
    return std::move(found_);
  }

private:
  void recurse(std::size_t pair, unsigned k) {
    if (pair == topo_.constraints.size()) {
      auto& o = found_[label_];
      o.label = label_;
      ++o.multiplicity;
      ++o.phase_orders[k];
      return;
    }
    const auto& pc = topo_.constraints[pair];
    const auto& scope = pc.scope;
    if (pc.correlation == Correlation::equal) {
      // HH carries no phase, VV carries e^{i phase}
      for (const auto& [pol, ch, dk] : {std::tuple{PolLabel::H, 'H', 0U}, std::tuple{PolLabel::V, 'V', 1U}}) {
        for (std::size_t i = 0; i < scope.size(); ++i) {
          if (!usable(scope[i], pol)) continue;
          for (std::size_t j = i + 1; j < scope.size(); ++j) {
            if (!usable(scope[j], pol)) continue;
            place(scope[i].slot, scope[j].slot, ch, ch);
            recurse(pair + 1, k + dk);
            place(scope[i].slot, scope[j].slot, '.', '.');
          }
        }
      }
    } else {
      // HV carries no phase, VH (V in the lower slot) carries e^{i phase}
      for (const auto& h : scope) {
        if (!usable(h, PolLabel::H)) continue;
        for (const auto& v : scope) {
          if (v.slot == h.slot || !usable(v, PolLabel::V)) continue;
          place(h.slot, v.slot, 'H', 'V');
          recurse(pair + 1, k + (v.slot < h.slot ? 1U : 0U));
          place(h.slot, v.slot, '.', '.');
        }
      }
    }
  }

  [[nodiscard]] bool usable(const SlotReach& r, PolLabel pol) const {
    return label_[r.slot] == '.' && admits(r.allowed, pol) && admits(topo_.slots[r.slot].admissible, pol);
  }

  void place(std::size_t a, std::size_t b, char ca, char cb) {
    label_[a] = ca;
    label_[b] = cb;
  }

  const OverlapTopology& topo_;
  std::string label_;
  std::map<std::string, Outcome> found_;
};

} // namespace detail

inline OutcomeSet enumerate_outcomes(const OverlapTopology& topo) {
  OutcomeSet out;
  out.photons = topo.photons();
  if (topo.slots.empty()) {
    out.diagnostic = "topology has no photon slots";
    return out;
  }
  const std::size_t emitted = 2 * topo.constraints.size();
  if (emitted != topo.photons()) {
    out.diagnostic = std::to_string(topo.constraints.size()) + " pairs emit " + std::to_string(emitted) +
                     " photons but the topology has " + std::to_string(topo.photons()) + " slots";
    return out;
  }
  if (topo.photons() > kMaxPhotons) {
    out.diagnostic = "too many photon slots";
    return out;
  }
  for (auto& [label, o] : detail::OutcomeEnumerator(topo).run()) out.outcomes.push_back(std::move(o));
  std::sort(out.outcomes.begin(), out.outcomes.end(),
            [](const Outcome& a, const Outcome& b) { return basis_index(a.label) < basis_index(b.label); });
  if (out.outcomes.empty()) out.diagnostic = "no photon assignment satisfies the pair constraints";
  return out;
}

enum class Weighting { dedup_equal, multiplicity };

inline std::string_view to_string(Weighting w) {
  return w == Weighting::dedup_equal ? "dedup_equal" : "multiplicity";
}

// dedup_equal: each distinct label with unit magnitude and phase e^{i k_min phase}.
// multiplicity: coherent sum of e^{i k phase} over all assignments of the label.
inline MultiPhotonKet build_overlap_state(const OutcomeSet& outcomes, double phase,
                                          Weighting weighting = Weighting::dedup_equal) {
  if (outcomes.empty()) {
    throw UnsatisfiableTopologyError(outcomes.diagnostic.empty() ? "empty outcome set" : outcomes.diagnostic);
  }
  std::vector<Complex> amps(dimension_for(outcomes.photons));
  for (const auto& o : outcomes.outcomes) {
    Complex a = 0.0;
    if (weighting == Weighting::dedup_equal) {
      a = std::polar(1.0, o.min_phase_order() * phase);
    } else {
      for (const auto& [k, count] : o.phase_orders) a += static_cast<double>(count) * std::polar(1.0, k * phase);
    }
    amps[basis_index(o.label)] = a;
  }
  return MultiPhotonKet::from_amplitudes(std::move(amps));
}

inline MultiPhotonKet build_overlap_state(const OverlapTopology& topo, double phase,
                                          Weighting weighting = Weighting::dedup_equal) {
  return build_overlap_state(enumerate_outcomes(topo), phase, weighting);
}

// Tensor product of each process's pair state, in order.
inline MultiPhotonKet product_reference(std::span<const ProcessParams> processes) {
  if (processes.empty()) throw InputError("product reference needs at least one process");
  MultiPhotonKet out = pair_state(processes.front());
  for (std::size_t i = 1; i < processes.size(); ++i) out = tensor(out, pair_state(processes[i]));
  return out;
}

struct StateComparison {
  std::vector<std::string> only_in_overlap;
  std::vector<std::string> only_in_product;
  double fidelity = 0.0;  // |<product|overlap>|^2
};

inline StateComparison compare_states(const MultiPhotonKet& overlap, const MultiPhotonKet& product) {
  if (overlap.photons() != product.photons()) throw DimensionError("overlap and product states differ in photon count");
  StateComparison out;
  const auto a = overlap.support();
  const auto b = product.support();
  std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out.only_in_overlap));
  std::set_difference(b.begin(), b.end(), a.begin(), a.end(), std::back_inserter(out.only_in_product));
  out.fidelity = std::norm(inner(product, overlap));
  return out;
}

// Overlap state vs. the plain product of one pair state per contributing process.
inline StateComparison compare_overlap_vs_product(const OverlapTopology& topo, const ProcessParams& process,
                                                  Weighting weighting = Weighting::dedup_equal) {
  const auto overlap = build_overlap_state(topo, process.phase_rad, weighting);
  const std::vector<ProcessParams> processes(topo.constraints.size(), process);
  return compare_states(overlap, product_reference(processes));
}

// ---------------------------------------------------------------------------
// State report

struct StateReportOptions {
  double phase = 0.0;
  Weighting weighting = Weighting::dedup_equal;
  std::vector<Bipartition> cuts;        // empty: every single-photon cut, plus halves for even n
  std::optional<Pairing> bell_pairing;  // 4-photon states only; default (1,2)(3,4)
};

inline std::vector<Bipartition> default_cuts(std::size_t photons) {
  std::vector<Bipartition> cuts;
  if (photons < 2) return cuts;
  for (std::size_t i = 0; i < photons; ++i) cuts.emplace_back(std::vector<std::size_t>{i}, photons);
  if (photons >= 4 && photons % 2 == 0) {
    std::vector<std::size_t> half(photons / 2);
    std::iota(half.begin(), half.end(), 0);
    cuts.emplace_back(half, photons);
  }
  return cuts;
}

inline void write_state_report(std::ostream& os, const OverlapTopology& topo, const ProcessParams& process,
                               const MultiPhotonKet& state, const StateReportOptions& opt) {
  char hash[32];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(topo.hash()));
  os << "# spdcsim state report\n";
  os << "topology_hash = " << hash << '\n';
  os << "process = " << to_string(process.kind) << '\n';
  os << "pair_sources = " << topo.constraints.size() << '\n';
  os << "photons = " << state.photons() << '\n';
  os << "phase_rad = " << format_number(opt.phase, 9) << '\n';
  os << "weighting = " << to_string(opt.weighting) << '\n';
  os << "[amplitudes]\n";
  os << "label,re,im\n";
  for (const auto& r : dump(state)) {
    os << r.label << ',' << format_number(r.re, 9) << ',' << format_number(r.im, 9) << '\n';
  }
  os << "[diagnostics]\n";
  os << "norm = " << format_number(state.norm(), 9) << '\n';
  const auto rho = density(state);
  const auto cuts = opt.cuts.empty() ? default_cuts(state.photons()) : opt.cuts;
  for (const auto& cut : cuts) {
    os << "negativity " << cut.to_string() << " = " << format_number(negativity(rho, cut), 9) << '\n';
  }
  if (state.photons() == 4) {
    const Pairing pairing = opt.bell_pairing.value_or(Pairing{{0, 1}, {2, 3}});
    const auto c = bell_product_decompose(state, pairing);
    os << "bell_pairing = (" << pairing.first[0] + 1 << ',' << pairing.first[1] + 1 << ")("
       << pairing.second[0] + 1 << ',' << pairing.second[1] + 1 << ")\n";
    for (std::size_t a = 0; a < 4; ++a) {
      for (std::size_t b = 0; b < 4; ++b) {
        const double re = std::abs(c[a][b].real()) <= kAmplitudeTol ? 0.0 : c[a][b].real();
        const double im = std::abs(c[a][b].imag()) <= kAmplitudeTol ? 0.0 : c[a][b].imag();
        os << "bell " << kBellNames[a] << ' ' << kBellNames[b] << " = " << format_number(re, 9) << ','
           << format_number(im, 9) << '\n';
      }
    }
  }
}

} // namespace spdcsim

#endif // SPDCSIM_BUILDER_HPP
