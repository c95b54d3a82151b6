#pragma once

#include <stdexcept>
#include <string>

namespace ppnet {

// Inconsistent shapes or channel layouts between cooperating objects.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A generative or layer parameter outside its admissible domain.
class ParameterError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad user-supplied data: wrong image dimensions, missing files, bad records.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed structured text (manifests, parameter files, settings).
class ParseError : public InputError {
 public:
  using InputError::InputError;
};

// Unsupported or truncated image data.
class DecodeError : public InputError {
 public:
  using InputError::InputError;
};

// Undefined numerical result, e.g. a correlation with zero variance.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ppnet
