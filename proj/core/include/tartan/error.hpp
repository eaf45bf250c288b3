#pragma once

#include <stdexcept>
#include <string>

namespace tartan {

// Broad failure class; the CLI maps these onto process exit codes.
enum class ErrorKind {
  usage = 1,
  data = 2,
  numeric = 3,
};

// Every library failure carries a short machine-readable code
// ("numeric_overflow", "bad_checksum", ...) plus free-form detail.
class Error : public std::runtime_error {
 public:
  Error(std::string code, ErrorKind kind, const std::string& detail = {})
      : std::runtime_error(detail.empty() ? code : code + ": " + detail),
        code_(std::move(code)),
        kind_(kind) {}

  const std::string& code() const noexcept { return code_; }
  ErrorKind kind() const noexcept { return kind_; }

 private:
  std::string code_;
  ErrorKind kind_;
};

inline Error data_error(std::string code, const std::string& detail = {}) {
  return Error(std::move(code), ErrorKind::data, detail);
}

inline Error numeric_error(std::string code, const std::string& detail = {}) {
  return Error(std::move(code), ErrorKind::numeric, detail);
}

inline Error usage_error(std::string code, const std::string& detail = {}) {
  return Error(std::move(code), ErrorKind::usage, detail);
}

}  // namespace tartan
