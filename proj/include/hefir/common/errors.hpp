#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace hefir {

// Base for every error the library raises. The CLI maps subclasses onto exit
// codes (see exit_code_for).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operation applied to a RingElem in the wrong (coefficient/NTT) domain.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Mismatched contexts, parameter fingerprints, CRT channels or moduli.
class ParameterError : public Error {
 public:
  using Error::Error;
};

// Plaintext or slot value out of range for its modulus.
class EncodingError : public Error {
 public:
  using Error::Error;
};

// A required key (e.g. relinearization key) is missing or malformed.
class KeyError : public Error {
 public:
  using Error::Error;
};

// Parameters that cannot support the requested feature (batching, presets).
class UnsupportedParameters : public ParameterError {
 public:
  using ParameterError::ParameterError;
};

// Capacity exceeded: batch > N, tracker bound >= T/2, block budget too small.
class CapacityError : public Error {
 public:
  using Error::Error;
};

// Signed value does not fit the centered range of a modulus.
class OverflowError : public CapacityError {
 public:
  using CapacityError::CapacityError;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

// A CRT bundle without every channel it declares.
class IncompleteResult : public Error {
 public:
  using Error::Error;
};

// Malformed or truncated serialized data; carries the failing byte offset.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::size_t offset)
      : Error(what + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}
  explicit FormatError(const std::string& what) : Error(what), offset_(0) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

// Post-hoc verification failure (decrypted result disagrees with the oracle).
class VerificationError : public Error {
 public:
  using Error::Error;
};

}  // namespace hefir
