// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace evtk {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file (events, labels, tensor containers).
class FormatError : public Error {
public:
  using Error::Error;
};

/// Invalid configuration value or unknown configuration key.
class ConfigError : public Error {
public:
  using Error::Error;
};

/// Tensor shapes that cannot be combined by an operation.
class ShapeError : public Error {
public:
  using Error::Error;
};

/// Failure during training (non-finite loss, empty loss support, ...).
class TrainingError : public Error {
public:
  using Error::Error;
};

} // namespace evtk
