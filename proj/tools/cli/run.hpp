#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "jobspec.hpp"

namespace dmf::cli {

enum ExitCode : int { exit_pass = 0, exit_usage = 1, exit_certificate = 2, exit_numeric_cap = 3 };

struct RunOptions {
    std::filesystem::path out_dir; ///< overrides the job's output_dir when non-empty
    int verbosity = 1;             ///< 0 silent, 1 summary, 2 every certificate
    std::ostream* log = nullptr;   ///< defaults to std::cerr
};

struct RunOutcome {
    int exit_code = exit_pass;
    std::string failing_kind;            ///< first certificate with pass = false
    std::string message;
    std::vector<std::string> artifacts;  ///< relative to the output directory, in write order
};

/// Runs one job. Writes status.json (and the command's artifacts) into the
/// output directory; never throws for job-level failures.
RunOutcome run(const JobSpec& job, const RunOptions& opts);

/// Loads the job file, then runs it. Usage errors while loading are
/// reported through the outcome as well.
RunOutcome run_file(const std::filesystem::path& job_path, const RunOptions& opts);

} // namespace dmf::cli
