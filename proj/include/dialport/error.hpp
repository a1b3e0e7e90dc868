#pragma once

#include <stdexcept>
#include <string>

namespace dialport {

/// Root of every exception thrown by the library. `code()` is the stable,
/// machine-readable name used on the wire and in logs.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

#define DIALPORT_DEFINE_ERROR(Name)                                      \
  class Name : public ::dialport::Error {                                \
   public:                                                               \
    explicit Name(const std::string& message) : Error(#Name, message) {} \
  }

}  // namespace dialport
