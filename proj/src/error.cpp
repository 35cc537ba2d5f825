#include "blockcam/error.hpp"

namespace blockcam {

int exit_code(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::usage: return 2;
    case ErrorKind::io: return 3;
    case ErrorKind::dimension: return 4;
    case ErrorKind::numerical: return 5;
    case ErrorKind::format: return 6;
    case ErrorKind::verification: return 7;
    case ErrorKind::insufficient_data: return 8;
  }
  return 1;
}

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::usage: return "usage error";
    case ErrorKind::io: return "I/O error";
    case ErrorKind::dimension: return "dimension error";
    case ErrorKind::numerical: return "numerical error";
    case ErrorKind::format: return "format error";
    case ErrorKind::verification: return "verification error";
    case ErrorKind::insufficient_data: return "insufficient data";
  }
  return "error";
}

}  // namespace blockcam
