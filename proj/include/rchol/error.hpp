#pragma once

#include <stdexcept>
#include <string>

namespace rchol {

enum class errc {
  index_out_of_range,
  asymmetric,
  dimension_mismatch,
  zero_pivot,
  precondition,
  not_reducible,
  indefinite_preconditioner,
  io,
  format,
};

inline const char* to_string(errc code) {
  switch (code) {
    case errc::index_out_of_range: return "index out of range";
    case errc::asymmetric: return "asymmetric";
    case errc::dimension_mismatch: return "dimension mismatch";
    case errc::zero_pivot: return "zero pivot";
    case errc::precondition: return "precondition violated";
    case errc::not_reducible: return "not reducible";
    case errc::indefinite_preconditioner: return "indefinite preconditioner";
    case errc::io: return "i/o error";
    case errc::format: return "format error";
  }
  return "unknown";
}

/// Single exception type for the library; `code()` tells callers what failed.
class error : public std::runtime_error {
 public:
  error(errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  errc code() const noexcept { return code_; }

 private:
  errc code_;
};

}  // namespace rchol
