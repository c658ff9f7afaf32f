#pragma once

#include <stdexcept>
#include <string>

namespace calibloss {

// Raised for precondition violations and malformed input. Messages are
// user-facing: the CLI prints them verbatim.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace calibloss
