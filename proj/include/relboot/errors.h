#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace relboot {

// Malformed input record; line is 1-based, 0 when not line-oriented.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : std::runtime_error(line == 0 ? what
                                     : "line " + std::to_string(line) + ": " + what),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// A remote provider could not be reached or returned a non-2xx status.
class TransportError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A provider answered with a payload that violates the wire contract.
class ProtocolError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

class ProjectionError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace relboot
