#pragma once

#include <ostream>

namespace askit::cli {

enum ExitCode : int {
    kOk = 0,
    kFailure = 1,
    kUsage = 2,
    kRetriesExhausted = 3,
    kFixtureMiss = 4,
    kToolchainUnavailable = 5,
};

struct Hooks {
    /// Install the socket filter for replay runs. Irreversible for the process,
    /// so in-process callers that still need networking turn it off.
    bool guard_network = true;
};

/// Entry point of the `askit` command. Machine output goes to `out`, diagnostics to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err, const Hooks& hooks = {});

} // namespace askit::cli
