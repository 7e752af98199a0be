#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace quadcode {

// Base for every error raised by the toolkit. Anything that is not an
// InputError indicates a bug or an environment failure.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Errors caused by user-supplied input: malformed files, bad flags, missing
// paths. The CLI maps these to exit code 2.
class InputError : public Error {
 public:
  using Error::Error;
};

// Input error tagged with a module-specific kind enum.
template <typename Kind>
class KindedError : public InputError {
 public:
  KindedError(Kind kind, std::string message)
      : InputError(std::move(message)), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

// File could not be opened, read or written.
class IoError : public InputError {
 public:
  using InputError::InputError;
};

}  // namespace quadcode
