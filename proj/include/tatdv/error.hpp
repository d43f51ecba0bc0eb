#pragma once

#include <stdexcept>
#include <string>

namespace tatdv {

enum class errc {
  config = 1,
  stage = 2,
  io = 3,
  invalid_argument = 4,
  internal = 5,
};

// All core failures are thrown as Error with a named-condition message,
// e.g. "MissingSlot: respondent r1 weekday lacks slot 17". The C layer
// maps `code` onto tatdv_status.
struct Error : std::runtime_error {
  errc code;
  Error(errc c, const std::string& msg) : std::runtime_error(msg), code(c) {}
};

[[noreturn]] inline void fail(errc c, const std::string& msg) { throw Error(c, msg); }

}  // namespace tatdv
