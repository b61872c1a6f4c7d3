#pragma once

#include <stdexcept>
#include <string>

namespace mtforge {

// Error conditions surfaced across the library. The C API maps these onto
// mtf_code values, so additions here need a counterpart in mtforge.h.
enum class Errc {
  invalid_arg,
  io,
  parse,
  empty_corpus,
  input_contains_marker,
  dangling_marker,
  dangling_continuation,
  already_tagged,
  insufficient_mono,
  vocab_out_of_range,
  non_finite_loss,
  state_mismatch,
  length_mismatch,
  vocab_mismatch,
  stage_failure,
  digest_mismatch,
  lock_held,
  internal,
};

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Errc code() const { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void raise(Errc code, const std::string& what) { throw Error(code, what); }

}  // namespace mtforge
