#pragma once
// Error reporting shared by every module. A single exception type with a
// machine-readable code keeps CLI exit-code mapping trivial.

#include <cstddef>
#include <stdexcept>
#include <string>

namespace bbp {

enum class Errc {
  InvalidInput,      // bad arguments, dimension mismatch, malformed config
  ParseError,        // expression text rejected (position attached)
  DegenerateData,    // anchors/responses carry no usable signal after retries
  InsufficientData,  // too few valid rows to fit or test
  Unsupported,       // operation outside an engine's range (e.g. library arity > 2)
  Internal,          // invariant violation; indicates a bug
};

class Error : public std::runtime_error {
public:
  Error(Errc code, std::string message, std::size_t position = npos)
      : std::runtime_error(std::move(message)), code_(code), position_(position) {}

  Errc code() const noexcept { return code_; }

  // Byte offset into the offending text for ParseError, npos otherwise.
  std::size_t position() const noexcept { return position_; }
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

private:
  Errc code_;
  std::size_t position_;
};

}  // namespace bbp
