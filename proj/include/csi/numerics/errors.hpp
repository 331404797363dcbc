#pragma once

#include <stdexcept>
#include <string>

namespace csi {

/// Raised when an operation's preconditions (shapes, ranges, lengths) do not hold.
class ContractViolation : public std::invalid_argument {
 public:
  explicit ContractViolation(const std::string& what) : std::invalid_argument(what) {}
};

/// Raised by a softmax whose every entry is excluded.
class EmptySupport : public std::domain_error {
 public:
  explicit EmptySupport(const std::string& what) : std::domain_error(what) {}
};

}  // namespace csi
