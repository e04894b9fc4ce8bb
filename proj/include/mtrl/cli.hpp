#pragma once
#include <iosfwd>
#include <string>
#include <vector>

namespace mtrl {

// Subcommands: make-toy, train, predict, eval, cv, new-task, prior-train.
// Returns 0 on success. Failures print one line `error: <Name>: <message>` to
// `err` and return 1 (2 for command-line usage errors).
int cli_main(int argc, char** argv, std::ostream& out, std::ostream& err);
int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mtrl
