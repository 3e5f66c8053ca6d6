#pragma once

#include <stdexcept>
#include <string>

namespace knnner {

// Validation errors are caused by inputs (bad files, bad flags); runtime
// errors by the environment (I/O failures). The C API and the CLI map them
// to distinct status codes.
enum class ErrorKind { Validation = 1, Runtime = 2 };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline Error validation_error(const std::string& message) {
  return Error(ErrorKind::Validation, message);
}

inline Error runtime_error(const std::string& message) {
  return Error(ErrorKind::Runtime, message);
}

}  // namespace knnner
