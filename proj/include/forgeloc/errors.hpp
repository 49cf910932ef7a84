// Copyright (c) 2026, The forgeloc Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace forgeloc {

// Error categories map one-to-one onto CLI exit codes (see tools/forgeloc.cpp).

class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class GenerationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when an external tool (the video encoder) is missing or fails.
class EnvironmentError : public std::runtime_error {
 public:
  EnvironmentError(const std::string& what, std::string diagnostics = {})
      : std::runtime_error(what), diagnostics_(std::move(diagnostics)) {}
  const std::string& diagnostics() const noexcept { return diagnostics_; }

 private:
  std::string diagnostics_;
};

/// Raised by metrics that are undefined for the given input (e.g. AP on a single class).
class UndefinedMetric : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

#define FORGELOC_REQUIRE(cond, msg)                 \
  do {                                              \
    if (!(cond)) throw ::forgeloc::InvalidArgument(msg); \
  } while (0)

}  // namespace forgeloc
