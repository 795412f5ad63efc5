#pragma once

#include <stdexcept>
#include <string>

namespace mmpc {

// Base for every error the library raises on bad input or bad files.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Dataset / checkpoint file problems.
class FormatError : public Error {
 public:
  using Error::Error;
};

class SingularChannelError : public Error {
 public:
  SingularChannelError() : Error("singular channel") {}
};

}  // namespace mmpc
