#pragma once

#include <stdexcept>
#include <string>

namespace sdelab {

// Argument outside the domain where an operation is defined (times outside
// [0, T], nonpositive variances, empty grids).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Time arguments given in the wrong order (e.g. s <= t for a reverse step).
class OrderingError : public DomainError {
 public:
  using DomainError::DomainError;
};

// A conditional query whose label selects no dataset points.
class EmptyClassError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// The model cannot provide what was asked of it (e.g. conditional noise
// predictions from an unconditional model).
class CapabilityError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Cycle-SDE records that cannot be built or replayed as requested.
class RecordError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid latent manipulation (empty patches, points outside the image).
class EditError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed input files and configuration.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace sdelab
