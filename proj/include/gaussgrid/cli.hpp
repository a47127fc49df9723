#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace gaussgrid {

/// Entry point of the `gaussgrid` tool (subcommands grid, reverse, bench).
/// Returns the process exit code; diagnostics go to `err` as one line.
int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int cli_main(int argc, const char* const* argv);

}  // namespace gaussgrid
