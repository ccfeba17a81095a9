#pragma once

#include <stdexcept>
#include <string>

namespace balent {

enum class errc {
  duplicate_id,
  invalid_sample,
  unresolvable,
  parse_error,
  io_error,
  insufficient_samples,
  domain_error,
  shape_error,
  empty_dataset,
  degenerate_weights,
  missing_class,
  invalid_input,
  invalid_weight,
  missing_entry,
  invalid_argument,
};

inline const char* errc_name(errc c) {
  switch (c) {
    case errc::duplicate_id: return "duplicate_id";
    case errc::invalid_sample: return "invalid_sample";
    case errc::unresolvable: return "unresolvable";
    case errc::parse_error: return "parse_error";
    case errc::io_error: return "io_error";
    case errc::insufficient_samples: return "insufficient_samples";
    case errc::domain_error: return "domain_error";
    case errc::shape_error: return "shape_error";
    case errc::empty_dataset: return "empty_dataset";
    case errc::degenerate_weights: return "degenerate_weights";
    case errc::missing_class: return "missing_class";
    case errc::invalid_input: return "invalid_input";
    case errc::invalid_weight: return "invalid_weight";
    case errc::missing_entry: return "missing_entry";
    case errc::invalid_argument: return "invalid_argument";
  }
  return "unknown";
}

// Typed error carried by every failure path in the library. The CLI maps
// any Error to exit code 1; usage errors are handled by the parser.
class Error : public std::runtime_error {
 public:
  Error(errc code, const std::string& message)
      : std::runtime_error(std::string(errc_name(code)) + ": " + message), code_(code) {}

  errc code() const noexcept { return code_; }

 private:
  errc code_;
};

}  // namespace balent
