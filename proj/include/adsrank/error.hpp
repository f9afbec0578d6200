#pragma once

#include <stdexcept>
#include <string>

namespace adsrank {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input text (embedding files, JSON documents, checkpoints).
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Input that is well-formed but structurally unusable (e.g. an empty file).
class FormatError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration or precondition (empty corpus, infeasible generator).
class ConfigError : public Error {
 public:
  using Error::Error;
};

class NotFoundError : public Error {
 public:
  using Error::Error;
};

class VersionError : public Error {
 public:
  using Error::Error;
};

class DivergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace adsrank
