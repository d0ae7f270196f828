#pragma once

#include <stdexcept>
#include <string>

namespace latprobe {

enum class ErrorKind {
  format,       // bad magic / version / malformed bytes
  shape,        // dimension or row-count mismatch
  data,         // non-finite values
  schema,       // TSV / JSON schema violation
  domain,       // argument outside the operation's domain
  infeasible,   // request cannot be satisfied (e.g. too few lemmas)
  empty,        // operation produced or received an empty dataset
  undefined,    // quantity undefined for this input (zero entropy, zero std, no coverage)
  numeric,      // divergence, singular matrix, non-finite activation
};

const char* to_string(ErrorKind kind) noexcept;

/// Every error raised by the library carries a kind so the CLI can map it to an exit code.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) throw Error(kind, what);
}

}  // namespace latprobe
