#pragma once

#include <stdexcept>
#include <string>

namespace gismo {

// Problems with input files or user-supplied values. The CLI maps these to
// exit code 2.
class FormatError : public std::runtime_error {
 public:
  explicit FormatError(const std::string& what) : std::runtime_error(what) {}
};

// Broken internal invariants. The CLI maps these to exit code 3.
class InternalError : public std::logic_error {
 public:
  explicit InternalError(const std::string& what) : std::logic_error(what) {}
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw FormatError(msg);
}

inline void check_invariant(bool cond, const std::string& msg) {
  if (!cond) throw InternalError(msg);
}

}  // namespace gismo
