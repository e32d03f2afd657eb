#pragma once

#include <string>
#include <vector>

namespace wdro::cli {

/// Entry point of the wdrocert tool. Exit codes: 0 success, 1 usage error,
/// 2 validation or solver error.
int dispatch(int argc, char** argv);
int dispatch(const std::vector<std::string>& args);  // args exclude the program name

}  // namespace wdro::cli
