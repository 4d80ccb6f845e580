#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace qsi::cli
{
enum ExitCode : int
{
    exit_ok = 0,
    exit_runtime = 1,
    exit_config = 2
};

/*!
 * Run the command line `args` (program name excluded).
 *
 * Subcommands: phaseshifts, veldist, fringes, campaign, fit. Output goes to
 * --out or to `out`; diagnostics go to `err`.
 */
int run(std::vector<std::string> const& args, std::ostream& out, std::ostream& err);
}  // namespace qsi::cli
