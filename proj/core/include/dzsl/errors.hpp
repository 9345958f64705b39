// Copyright 2026 The dzsl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace dzsl {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Violated precondition on a caller-supplied value.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class RangeError : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

class DimensionError : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Malformed on-disk content (manifest, matrix header, checkpoint).
class FormatError : public IoError {
 public:
  using IoError::IoError;
};

class FrozenError : public Error {
 public:
  using Error::Error;
};

class NoPositiveError : public Error {
 public:
  using Error::Error;
};

class NonFiniteError : public Error {
 public:
  using Error::Error;
};

class TrainingDivergence : public Error {
 public:
  TrainingDivergence(std::string stage, std::int64_t iteration, const std::string& what)
      : Error(stage + ": non-finite value at iteration " + std::to_string(iteration) + ": " + what),
        stage_(std::move(stage)),
        iteration_(iteration) {}

  const std::string& stage() const noexcept { return stage_; }
  std::int64_t iteration() const noexcept { return iteration_; }

 private:
  std::string stage_;
  std::int64_t iteration_;
};

}  // namespace dzsl
