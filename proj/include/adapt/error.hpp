#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace adapt {

// Runtime error with a stable machine-readable kind tag. The CLI prints
// "error: <kind>: <message>" on a single line and maps FileNotFound to
// exit code 2, everything else to 1.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

[[noreturn]] inline void fail(std::string kind, const std::string& message) {
  throw Error(std::move(kind), message);
}

}  // namespace adapt
