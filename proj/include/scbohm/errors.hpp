#pragma once

#include <stdexcept>
#include <string>

namespace scbohm {

// Each failure class maps onto a distinct process exit code in the CLI.
enum class ErrorKind {
  invalid_input = 2,   // malformed or inconsistent arguments
  configuration = 3,   // schema violation or physically invalid setup
  resource = 4,        // path/pair cap exceeded
  degenerate = 5,      // density without usable support
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }
  int exit_code() const noexcept { return static_cast<int>(kind_); }
  const char* kind_name() const noexcept;

 private:
  ErrorKind kind_;
};

struct InvalidInput : Error {
  explicit InvalidInput(const std::string& w) : Error(ErrorKind::invalid_input, w) {}
};
struct ConfigError : Error {
  explicit ConfigError(const std::string& w) : Error(ErrorKind::configuration, w) {}
};
struct ResourceError : Error {
  explicit ResourceError(const std::string& w) : Error(ErrorKind::resource, w) {}
};
struct DegenerateError : Error {
  explicit DegenerateError(const std::string& w) : Error(ErrorKind::degenerate, w) {}
};

inline const char* Error::kind_name() const noexcept {
  switch (kind_) {
    case ErrorKind::invalid_input: return "invalid_input";
    case ErrorKind::configuration: return "configuration";
    case ErrorKind::resource: return "resource";
    case ErrorKind::degenerate: return "degenerate";
  }
  return "unknown";
}

}  // namespace scbohm
