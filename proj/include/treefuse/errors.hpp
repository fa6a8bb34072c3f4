#pragma once

#include <stdexcept>
#include <string>

namespace treefuse {

// Exact enumerations are limited to 2^cap codewords; callers asking for
// more get this instead of an out-of-memory surprise.
class capacity_error : public std::runtime_error {
  public:
    explicit capacity_error(const std::string& what) : std::runtime_error(what) {}
};

// Quadrature / iteration failures that carry diagnostics.
class numerical_error : public std::runtime_error {
  public:
    explicit numerical_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace treefuse
