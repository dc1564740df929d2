// Copyright 2026 The vmfkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace vmfkit {

// Error taxonomy maps onto the CLI exit codes:
//   ValidationError -> 1, NumericalError -> 2, IoError -> 3.

class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class DomainError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class DimensionMismatchError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input whose direction is numerically meaningless (norm below epsilon).
class DegenerateInputError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class DivergenceError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public IoError {
 public:
  using IoError::IoError;
};

class CheckpointError : public IoError {
 public:
  using IoError::IoError;
};

}  // namespace vmfkit
