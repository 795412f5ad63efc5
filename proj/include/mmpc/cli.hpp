#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace mmpc {

inline constexpr const char* kToolVersion = "1.0.0";

// Runs one subcommand. Returns 0 on success, 1 on usage errors and 2 on
// runtime errors.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mmpc
