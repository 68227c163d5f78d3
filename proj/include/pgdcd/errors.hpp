#pragma once

#include <stdexcept>
#include <string>

namespace pgdcd {

enum class FormatErrc { Io, Truncated, Malformed, VersionMismatch, DimMismatch };

const char* to_string(FormatErrc code);

/// Failure while reading or writing one of the on-disk formats (model
/// weights, datasets, reports, trajectories).
class FormatError : public std::runtime_error {
 public:
  FormatError(FormatErrc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  FormatErrc code() const noexcept { return code_; }

 private:
  FormatErrc code_;
};

}  // namespace pgdcd
