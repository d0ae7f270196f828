#include "latprobe/error.hpp"

namespace latprobe {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::format: return "format error";
    case ErrorKind::shape: return "shape error";
    case ErrorKind::data: return "data error";
    case ErrorKind::schema: return "schema error";
    case ErrorKind::domain: return "domain error";
    case ErrorKind::infeasible: return "infeasible";
    case ErrorKind::empty: return "empty dataset";
    case ErrorKind::undefined: return "undefined";
    case ErrorKind::numeric: return "numeric error";
  }
  return "error";
}

}  // namespace latprobe
