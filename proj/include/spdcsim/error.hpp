#ifndef SPDCSIM_ERROR_HPP
#define SPDCSIM_ERROR_HPP

#include <stdexcept>
#include <string>

namespace spdcsim {

// Malformed label, alphabet, index or pairing.
class InputError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

// Operands with mismatched photon counts.
class DimensionError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

// Linear combination that cancels to the zero vector.
class DegenerateSuperpositionError : public std::domain_error {
public:
  using std::domain_error::domain_error;
};

// Physically invalid parameters (nonpositive lengths, non-degenerate wavelengths, ...).
class PhysicsError : public std::domain_error {
public:
  using std::domain_error::domain_error;
};

// A topology for which no photon assignment exists.
class UnsatisfiableTopologyError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

} // namespace spdcsim

#endif // SPDCSIM_ERROR_HPP
