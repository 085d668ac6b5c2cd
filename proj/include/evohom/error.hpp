#ifndef EVOHOM_ERROR_HPP
#define EVOHOM_ERROR_HPP

#include <stdexcept>
#include <string>

namespace evohom {

/// Base class of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid input: violated preconditions, malformed text, misaligned meshes.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Numerical failure: singular systems, divergent series.
class SolverError : public Error {
 public:
  using Error::Error;
};

namespace detail {

inline void require(bool cond, const std::string& what) {
  if (!cond) throw ValidationError(what);
}

}  // namespace detail

}  // namespace evohom

#endif  // EVOHOM_ERROR_HPP
