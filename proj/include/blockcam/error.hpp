#pragma once

#include <stdexcept>
#include <string>

namespace blockcam {

/// Failure categories. Each maps to a distinct process exit code in the CLI.
enum class ErrorKind {
  usage,
  io,
  dimension,
  numerical,
  format,
  insufficient_data,
  verification,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// 0 is success; 1 is reserved for unexpected exceptions.
int exit_code(ErrorKind kind) noexcept;
const char* to_string(ErrorKind kind) noexcept;

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) fail(kind, what);
}

}  // namespace blockcam
