#ifndef SPDCSIM_QSTATE_HPP
#define SPDCSIM_QSTATE_HPP

// Polarization state algebra for n-photon kets over the {H, V} basis.
//
// Basis layout: index bit (n-1-i) holds photon i, H -> 0, V -> 1, so labels
// sort as binary numbers with photon 0 leftmost / most significant.
// Photon indices are 0-based throughout this header.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdio>
#include <initializer_list>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "spdcsim/error.hpp"

namespace spdcsim {

using Complex = std::complex<double>;

inline constexpr double kAmplitudeTol = 1e-12;
inline constexpr std::size_t kMaxPhotons = 24;

inline std::size_t basis_index(std::string_view label) {
  if (label.empty()) throw InputError("empty basis label");
  if (label.size() > kMaxPhotons) throw InputError("basis label too long: " + std::string(label));
  std::size_t index = 0;
  for (char c : label) {
    index <<= 1;
    if (c == 'V') {
      index |= 1;
    } else if (c != 'H') {
      throw InputError("invalid polarization character '" + std::string(1, c) + "' in label " +
                       std::string(label));
    }
  }
  return index;
}

inline std::string basis_label(std::size_t index, std::size_t photons) {
  std::string label(photons, 'H');
  for (std::size_t i = 0; i < photons; ++i) {
    if ((index >> (photons - 1 - i)) & 1U) label[i] = 'V';
  }
  return label;
}

inline std::size_t dimension_for(std::size_t photons) { return std::size_t{1} << photons; }

class MultiPhotonKet {
public:
  // Normalizes the given amplitudes. Length must be a power of two >= 2.
  static MultiPhotonKet from_amplitudes(std::vector<Complex> amplitudes) {
    const std::size_t n = photons_for_dimension(amplitudes.size());
    double norm2 = 0.0;
    for (const auto& a : amplitudes) norm2 += std::norm(a);
    const double norm = std::sqrt(norm2);
    if (!(norm > kAmplitudeTol)) throw DegenerateSuperpositionError("zero state vector");
    for (auto& a : amplitudes) a /= norm;
    return MultiPhotonKet(n, std::move(amplitudes));
  }

  static MultiPhotonKet from_label(std::string_view label) {
    const std::size_t index = basis_index(label);
    std::vector<Complex> amps(dimension_for(label.size()));
    amps[index] = 1.0;
    return MultiPhotonKet(label.size(), std::move(amps));
  }

  [[nodiscard]] std::size_t photons() const noexcept { return photons_; }
  [[nodiscard]] std::size_t dimension() const noexcept { return amplitudes_.size(); }
  [[nodiscard]] std::span<const Complex> amplitudes() const noexcept { return amplitudes_; }
  [[nodiscard]] Complex operator[](std::size_t index) const { return amplitudes_.at(index); }

  [[nodiscard]] Complex amplitude(std::string_view label) const {
    if (label.size() != photons_) throw DimensionError("label length does not match photon count");
    return amplitudes_[basis_index(label)];
  }

  [[nodiscard]] double norm() const {
    double s = 0.0;
    for (const auto& a : amplitudes_) s += std::norm(a);
    return std::sqrt(s);
  }

  // Labels whose amplitude magnitude exceeds `threshold`, in basis order.
  [[nodiscard]] std::vector<std::string> support(double threshold = kAmplitudeTol) const {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < amplitudes_.size(); ++i) {
      if (std::abs(amplitudes_[i]) > threshold) out.push_back(basis_label(i, photons_));
    }
    return out;
  }

  [[nodiscard]] Eigen::VectorXcd to_eigen() const {
    return Eigen::Map<const Eigen::VectorXcd>(amplitudes_.data(),
                                              static_cast<Eigen::Index>(amplitudes_.size()));
  }

private:
  MultiPhotonKet(std::size_t photons, std::vector<Complex> amplitudes)
      : photons_(photons), amplitudes_(std::move(amplitudes)) {}

  static std::size_t photons_for_dimension(std::size_t dim) {
    if (dim < 2 || (dim & (dim - 1)) != 0) {
      throw DimensionError("amplitude vector length " + std::to_string(dim) +
                           " is not a power of two >= 2");
    }
    std::size_t n = 0;
    while ((std::size_t{1} << n) < dim) ++n;
    if (n > kMaxPhotons) throw DimensionError("too many photons");
    return n;
  }

  std::size_t photons_;
  std::vector<Complex> amplitudes_;
};

inline MultiPhotonKet ket_from_label(std::string_view label) {
  return MultiPhotonKet::from_label(label);
}

enum class BellFamily { phi, psi };
enum class BellSign { plus, minus };

// phi: (|HH> +- e^{i phase}|VV>)/sqrt2, psi: (|HV> +- e^{i phase}|VH>)/sqrt2
inline MultiPhotonKet bell_state(BellFamily family, BellSign sign, double phase = 0.0) {
  const Complex rel = (sign == BellSign::plus ? 1.0 : -1.0) * std::polar(1.0, phase);
  std::vector<Complex> amps(4);
  if (family == BellFamily::phi) {
    amps[0b00] = 1.0;
    amps[0b11] = rel;
  } else {
    amps[0b01] = 1.0;
    amps[0b10] = rel;
  }
  return MultiPhotonKet::from_amplitudes(std::move(amps));
}

inline MultiPhotonKet tensor(const MultiPhotonKet& a, const MultiPhotonKet& b) {
  std::vector<Complex> amps(a.dimension() * b.dimension());
  for (std::size_t i = 0; i < a.dimension(); ++i) {
    for (std::size_t j = 0; j < b.dimension(); ++j) amps[i * b.dimension() + j] = a[i] * b[j];
  }
  return MultiPhotonKet::from_amplitudes(std::move(amps));
}

struct KetTerm {
  Complex coefficient;
  MultiPhotonKet ket;
};

inline MultiPhotonKet superpose(std::span<const KetTerm> terms) {
  if (terms.empty()) throw DegenerateSuperpositionError("empty superposition");
  const std::size_t n = terms.front().ket.photons();
  std::vector<Complex> amps(dimension_for(n));
  for (const auto& t : terms) {
    if (t.ket.photons() != n) throw DimensionError("superposed kets have different photon counts");
    for (std::size_t i = 0; i < amps.size(); ++i) amps[i] += t.coefficient * t.ket[i];
  }
  return MultiPhotonKet::from_amplitudes(std::move(amps));
}

inline MultiPhotonKet superpose(std::initializer_list<KetTerm> terms) {
  return superpose(std::span<const KetTerm>(terms.begin(), terms.size()));
}

// <a|b>, conjugate-linear in a.
inline Complex inner(const MultiPhotonKet& a, const MultiPhotonKet& b) {
  if (a.photons() != b.photons()) throw DimensionError("inner product of kets with different photon counts");
  Complex s = 0.0;
  for (std::size_t i = 0; i < a.dimension(); ++i) s += std::conj(a[i]) * b[i];
  return s;
}

// ---------------------------------------------------------------------------
// Bell-product basis

enum class BellIndex : std::size_t { phi_plus = 0, phi_minus = 1, psi_plus = 2, psi_minus = 3 };

inline constexpr std::array<std::string_view, 4> kBellNames = {"phi+", "phi-", "psi+", "psi-"};

inline MultiPhotonKet bell_basis_state(BellIndex which) {
  switch (which) {
    case BellIndex::phi_plus: return bell_state(BellFamily::phi, BellSign::plus);
    case BellIndex::phi_minus: return bell_state(BellFamily::phi, BellSign::minus);
    case BellIndex::psi_plus: return bell_state(BellFamily::psi, BellSign::plus);
    case BellIndex::psi_minus: return bell_state(BellFamily::psi, BellSign::minus);
  }
  throw InputError("invalid Bell index");
}

// Two photon pairs of a four-photon state, 0-based indices.
struct Pairing {
  std::array<std::size_t, 2> first;
  std::array<std::size_t, 2> second;

  void validate() const {
    std::array<bool, 4> seen{};
    for (std::size_t idx : {first[0], first[1], second[0], second[1]}) {
      if (idx >= 4 || seen[idx]) throw InputError("pairing is not a permutation of the four photons");
      seen[idx] = true;
    }
  }
};

// coefficients[a][b] multiplies B_a(first) (x) B_b(second); Bell basis at phase 0.
using BellProductCoefficients = std::array<std::array<Complex, 4>, 4>;

namespace detail {

// Amplitude on 4-photon basis index `full` of B_a(first) (x) B_b(second).
inline Complex bell_product_amplitude(std::size_t full, const Pairing& p,
                                      const std::array<MultiPhotonKet, 4>& bell, std::size_t a,
                                      std::size_t b) {
  auto bit = [full](std::size_t photon) { return (full >> (3 - photon)) & 1U; };
  const std::size_t ia = (bit(p.first[0]) << 1) | bit(p.first[1]);
  const std::size_t ib = (bit(p.second[0]) << 1) | bit(p.second[1]);
  return bell[a][ia] * bell[b][ib];
}

inline std::array<MultiPhotonKet, 4> bell_basis() {
  return {bell_basis_state(BellIndex::phi_plus), bell_basis_state(BellIndex::phi_minus),
          bell_basis_state(BellIndex::psi_plus), bell_basis_state(BellIndex::psi_minus)};
}

} // namespace detail

inline BellProductCoefficients bell_product_decompose(const MultiPhotonKet& state,
                                                      const Pairing& pairing) {
  if (state.photons() != 4) throw DimensionError("Bell-product decomposition needs a 4-photon state");
  pairing.validate();
  const auto bell = detail::bell_basis();
  BellProductCoefficients c{};
  for (std::size_t a = 0; a < 4; ++a) {
    for (std::size_t b = 0; b < 4; ++b) {
      Complex s = 0.0;
      for (std::size_t full = 0; full < 16; ++full) {
        s += std::conj(detail::bell_product_amplitude(full, pairing, bell, a, b)) * state[full];
      }
      c[a][b] = s;
    }
  }
  return c;
}

// Inverse of bell_product_decompose.
inline MultiPhotonKet bell_product_compose(const BellProductCoefficients& c, const Pairing& pairing) {
  pairing.validate();
  const auto bell = detail::bell_basis();
  std::vector<Complex> amps(16);
  for (std::size_t full = 0; full < 16; ++full) {
    for (std::size_t a = 0; a < 4; ++a) {
      for (std::size_t b = 0; b < 4; ++b) {
        amps[full] += c[a][b] * detail::bell_product_amplitude(full, pairing, bell, a, b);
      }
    }
  }
  return MultiPhotonKet::from_amplitudes(std::move(amps));
}

// ---------------------------------------------------------------------------
// Density operators

class DensityMatrix {
public:
  // Checks Hermiticity, unit trace and positivity (eigenvalues >= -1e-10).
  static DensityMatrix from_matrix(Eigen::MatrixXcd m) {
    const auto dim = static_cast<std::size_t>(m.rows());
    if (m.rows() != m.cols() || dim < 2 || (dim & (dim - 1)) != 0) {
      throw DimensionError("density matrix must be square with power-of-two dimension");
    }
    if ((m - m.adjoint()).cwiseAbs().maxCoeff() > kAmplitudeTol) throw InputError("matrix is not Hermitian");
    if (std::abs(m.trace() - Complex(1.0)) > kAmplitudeTol) throw InputError("trace is not 1");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(m, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -1e-10) throw InputError("matrix is not positive semidefinite");
    std::size_t n = 0;
    while ((std::size_t{1} << n) < dim) ++n;
    return DensityMatrix(n, std::move(m));
  }

  [[nodiscard]] std::size_t photons() const noexcept { return photons_; }
  [[nodiscard]] const Eigen::MatrixXcd& matrix() const noexcept { return m_; }
  [[nodiscard]] Complex trace() const { return m_.trace(); }

private:
  friend DensityMatrix density(const MultiPhotonKet&);
  friend DensityMatrix partial_trace(const DensityMatrix&, std::span<const std::size_t>);
  DensityMatrix(std::size_t n, Eigen::MatrixXcd m) : photons_(n), m_(std::move(m)) {}

  std::size_t photons_;
  Eigen::MatrixXcd m_;
};

inline DensityMatrix density(const MultiPhotonKet& state) {
  const Eigen::VectorXcd v = state.to_eigen();
  return DensityMatrix(state.photons(), v * v.adjoint());
}

namespace detail {

// Scatters the low bits of `packed` onto the photon positions in `photons`
// (photons[0] takes the most significant packed bit).
inline std::size_t scatter_bits(std::size_t packed, std::span<const std::size_t> photons,
                                std::size_t n) {
  std::size_t out = 0;
  const std::size_t k = photons.size();
  for (std::size_t i = 0; i < k; ++i) {
    if ((packed >> (k - 1 - i)) & 1U) out |= std::size_t{1} << (n - 1 - photons[i]);
  }
  return out;
}

inline std::vector<std::size_t> checked_subset(std::span<const std::size_t> photons, std::size_t n) {
  std::vector<std::size_t> s(photons.begin(), photons.end());
  std::sort(s.begin(), s.end());
  if (std::adjacent_find(s.begin(), s.end()) != s.end()) throw InputError("repeated photon index");
  for (std::size_t p : s) {
    if (p >= n) throw InputError("photon index " + std::to_string(p) + " out of range");
  }
  return s;
}

inline std::vector<std::size_t> complement(const std::vector<std::size_t>& s, std::size_t n) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::binary_search(s.begin(), s.end(), i)) out.push_back(i);
  }
  return out;
}

} // namespace detail

// Reduced state on `keep` (sorted ascending in the output ordering).
inline DensityMatrix partial_trace(const DensityMatrix& rho, std::span<const std::size_t> keep) {
  const std::size_t n = rho.photons();
  const auto kept = detail::checked_subset(keep, n);
  if (kept.empty() || kept.size() == n) throw InputError("keep set must be nonempty and proper");
  const auto traced = detail::complement(kept, n);
  const std::size_t dk = dimension_for(kept.size());
  const std::size_t dt = dimension_for(traced.size());
  Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(dk), static_cast<Eigen::Index>(dk));
  for (std::size_t r = 0; r < dk; ++r) {
    const std::size_t rb = detail::scatter_bits(r, kept, n);
    for (std::size_t c = 0; c < dk; ++c) {
      const std::size_t cb = detail::scatter_bits(c, kept, n);
      Complex s = 0.0;
      for (std::size_t t = 0; t < dt; ++t) {
        const std::size_t tb = detail::scatter_bits(t, traced, n);
        s += rho.matrix()(static_cast<Eigen::Index>(rb | tb), static_cast<Eigen::Index>(cb | tb));
      }
      out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = s;
    }
  }
  return DensityMatrix(kept.size(), std::move(out));
}

inline double purity(const DensityMatrix& rho) {
  // tr(rho^2) = sum |rho_ij|^2 for Hermitian rho
  return rho.matrix().cwiseAbs2().sum();
}

class Bipartition {
public:
  Bipartition(std::vector<std::size_t> side_a, std::size_t photons) : photons_(photons) {
    side_a_ = detail::checked_subset(side_a, photons);
    if (side_a_.empty() || side_a_.size() == photons) {
      throw InputError("bipartition sides must both be nonempty");
    }
    side_b_ = detail::complement(side_a_, photons);
  }

  [[nodiscard]] const std::vector<std::size_t>& side_a() const noexcept { return side_a_; }
  [[nodiscard]] const std::vector<std::size_t>& side_b() const noexcept { return side_b_; }
  [[nodiscard]] std::size_t photons() const noexcept { return photons_; }

  // e.g. "(1,2)|(3,4)" with 1-based indices
  [[nodiscard]] std::string to_string() const {
    auto side = [](const std::vector<std::size_t>& s) {
      std::string out = "(";
      for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += ',';
        out += std::to_string(s[i] + 1);
      }
      return out + ")";
    };
    return side(side_a_) + "|" + side(side_b_);
  }

private:
  std::size_t photons_;
  std::vector<std::size_t> side_a_;
  std::vector<std::size_t> side_b_;
};

// Transposes the side_b subsystem.
inline Eigen::MatrixXcd partial_transpose(const DensityMatrix& rho, const Bipartition& cut) {
  if (cut.photons() != rho.photons()) throw DimensionError("bipartition does not match photon count");
  const std::size_t n = rho.photons();
  std::size_t mask_b = 0;
  for (std::size_t p : cut.side_b()) mask_b |= std::size_t{1} << (n - 1 - p);
  const auto dim = rho.matrix().rows();
  Eigen::MatrixXcd out(dim, dim);
  for (Eigen::Index i = 0; i < dim; ++i) {
    for (Eigen::Index j = 0; j < dim; ++j) {
      const auto ui = static_cast<std::size_t>(i);
      const auto uj = static_cast<std::size_t>(j);
      const std::size_t ti = (ui & ~mask_b) | (uj & mask_b);
      const std::size_t tj = (uj & ~mask_b) | (ui & mask_b);
      out(static_cast<Eigen::Index>(ti), static_cast<Eigen::Index>(tj)) = rho.matrix()(i, j);
    }
  }
  return out;
}

inline double negativity(const DensityMatrix& rho, const Bipartition& cut) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(partial_transpose(rho, cut), Eigen::EigenvaluesOnly);
  double s = 0.0;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    if (es.eigenvalues()(i) < 0.0) s -= es.eigenvalues()(i);
  }
  return s;
}

inline double negativity(const MultiPhotonKet& state, const Bipartition& cut) {
  return negativity(density(state), cut);
}

// ---------------------------------------------------------------------------
// Text forms

inline std::string format_number(double x, int significant) {
  if (x == 0.0) x = 0.0; // drop negative zero
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", significant, x);
  return buf;
}

// "(0.353553+0i)|HHHH⟩ + (0.353553+0i)|HHVV⟩ + ..." over nonzero amplitudes.
inline std::string to_string(const MultiPhotonKet& state, int significant = 6) {
  std::string out;
  for (std::size_t i = 0; i < state.dimension(); ++i) {
    const Complex a = state[i];
    if (std::abs(a) <= kAmplitudeTol) continue;
    if (!out.empty()) out += " + ";
    const double im = std::abs(a.imag()) <= kAmplitudeTol ? 0.0 : a.imag();
    const double re = std::abs(a.real()) <= kAmplitudeTol ? 0.0 : a.real();
    out += "(" + format_number(re, significant) + (im < 0 ? "-" : "+") +
           format_number(std::abs(im), significant) + "i)|" + basis_label(i, state.photons()) + "⟩";
  }
  return out.empty() ? "0" : out;
}

struct AmplitudeRecord {
  std::string label;
  double re;
  double im;
};

// Machine-readable dump; amplitudes at or below `threshold` are omitted.
inline std::vector<AmplitudeRecord> dump(const MultiPhotonKet& state, double threshold = kAmplitudeTol) {
  std::vector<AmplitudeRecord> out;
  for (std::size_t i = 0; i < state.dimension(); ++i) {
    if (std::abs(state[i]) > threshold) {
      out.push_back({basis_label(i, state.photons()), state[i].real(), state[i].imag()});
    }
  }
  return out;
}

} // namespace spdcsim

#endif // SPDCSIM_QSTATE_HPP
