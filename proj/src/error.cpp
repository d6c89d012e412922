#include "lowrank/error.hpp"

namespace lowrank {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::InvalidInput: return "invalid input";
    case ErrorKind::InvalidRank: return "invalid rank";
    case ErrorKind::Configuration: return "configuration error";
    case ErrorKind::Divergence: return "divergence";
    case ErrorKind::Domain: return "domain error";
    case ErrorKind::DegenerateStep: return "degenerate step";
    case ErrorKind::Format: return "format error";
    case ErrorKind::Parse: return "parse error";
    case ErrorKind::Io: return "i/o error";
  }
  return "unknown error";
}

}  // namespace lowrank
