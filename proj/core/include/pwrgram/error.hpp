#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace pwrgram {

enum class ErrorCode {
  coincident_sites,
  site_outside_box,
  topology_corruption,
  empty_input,
  non_finite_input,
  bad_magic,
  truncated_payload,
  io_failure,
  missing_geometry,
  size_mismatch,
  too_few_sites,
  invalid_argument,
  timeout,
};

const char* to_string(ErrorCode code);

// Single exception type for the library; `code()` lets callers dispatch.
// `index()` carries the offending site index (or byte offset for file
// readers) when one exists.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what,
        std::optional<std::size_t> index = std::nullopt)
      : std::runtime_error(what), code_(code), index_(index) {}

  ErrorCode code() const noexcept { return code_; }
  std::optional<std::size_t> index() const noexcept { return index_; }

 private:
  ErrorCode code_;
  std::optional<std::size_t> index_;
};

}  // namespace pwrgram
