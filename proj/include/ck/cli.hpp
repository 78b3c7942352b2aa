// Command-line surface: schema/pack loading, ingestion, mining, concept
// discovery, prediction, scenario execution, exports and run manifests.
#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ck::cli {

// Exit codes: 0 success, 1 domain error (message names the error case),
// 2 usage error. Usage errors never touch the store.
int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ck::cli
