#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace rainsr {

// Exit codes: 0 success, 1 usage error, 2 runtime error.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace rainsr
