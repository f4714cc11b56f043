#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace centaur::cli {

enum ExitCode : int { kOk = 0, kValidation = 1, kUsage = 2, kNumerical = 3 };

// Runs `centaur <args...>` in-process. args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

struct DeterminismOutcome {
    std::vector<std::string> failures;
    std::string summary;
};

// Runs every subcommand on small synthetic inputs under `root`, re-runs each
// one from its own manifest, and compares all artifacts byte for byte.
DeterminismOutcome determinism_check(const std::filesystem::path& root);

} // namespace centaur::cli
