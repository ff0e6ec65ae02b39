#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace gridwatch::cfg {

// The deploy / execute / evaluate driver behind the gridwatch binary.
// Exit codes: 0 success, 2 invalid config or input, 3 simulation error,
// 4 degenerate dataset. Errors print a single "error: <code>: ..." line.
int cli_run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace gridwatch::cfg
