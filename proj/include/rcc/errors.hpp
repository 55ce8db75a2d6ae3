#pragma once

#include <stdexcept>
#include <string>

namespace rcc {

// Base of every error raised by the library. Callers that only need to
// distinguish "our failure" from anything else catch this.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NoValidTiling : public Error {
 public:
  using Error::Error;
};

class StateSpaceTooLarge : public Error {
 public:
  using Error::Error;
};

class MomentMismatch : public Error {
 public:
  using Error::Error;
};

class HullBoundary : public Error {
 public:
  using Error::Error;
};

class TooManySymbols : public Error {
 public:
  using Error::Error;
};

class CorruptStream : public Error {
 public:
  using Error::Error;
};

class LayoutMismatch : public Error {
 public:
  using Error::Error;
};

// Malformed input files, bad spec keys, inconsistent shapes.
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace rcc
