#pragma once

#include <stdexcept>
#include <string>

namespace rsma {

// Every failure the library reports derives from rsma::Error so callers can
// catch the whole family in one place (the CLI does exactly that).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeMismatch : public Error {
 public:
  using Error::Error;
};

// Factorization pivot <= 0 or Hermitian check failed.
class NotHpdError : public Error {
 public:
  using Error::Error;
};

class SingularError : public Error {
 public:
  using Error::Error;
};

class NoConvergenceError : public Error {
 public:
  using Error::Error;
};

class ZeroChannelError : public Error {
 public:
  using Error::Error;
};

class ZeroDirectionError : public Error {
 public:
  using Error::Error;
};

class NotSisoError : public Error {
 public:
  using Error::Error;
};

class BufferTooSmallError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class CheckpointError : public Error {
 public:
  using Error::Error;
};

}  // namespace rsma
