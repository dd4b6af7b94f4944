#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mdma {

/// Caller supplied something malformed: wrong shapes, bad indices, unparseable input.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A computation produced or would produce a non-finite or degenerate value.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite log-likelihood during training; carries the dataset row that caused it.
class NonFiniteLoss : public NumericalError {
 public:
  NonFiniteLoss(std::size_t row, const std::string& what)
      : NumericalError(what), row_(row) {}
  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

}  // namespace mdma
