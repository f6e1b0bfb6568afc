#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cps {

enum class ErrorKind {
  invalid_edge,
  unknown_schedule,
  domain,
  out_of_range,
  configuration,
  validation,
  assumption,
  invalid_query,
  insufficient_record,
  attack_infeasible,
  invalid_pair,
  fit_degenerate,
  io,
};

std::string_view to_string(ErrorKind kind);

// Single exception type for the library; callers branch on kind().
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace cps
