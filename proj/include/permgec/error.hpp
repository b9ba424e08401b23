#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace permgec {

enum class Errc {
  empty_input,
  invalid_permutation,
  dead_end,
  search_exhausted,
  length_exceeded,
  numerical_divergence,
  io_error,
  corpus_rejected,
  plan_error,
  config_error,
  format_error,
};

std::string_view errc_name(Errc code) noexcept;

// All library failures surface as this one exception type; callers switch on
// code() when they need to distinguish.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace permgec
