#include <iostream>

#include <CLI11.hpp>

#include "run.hpp"

int main(int argc, char** argv)
{
    CLI::App app{"dmfact: batch factorizations, scale checks and crossed-product demos from JSON jobs"};
    std::string job;
    std::string out;
    int verbosity = 1;
    app.add_option("--job", job, "Job file (JSON)")->required()->check(CLI::ExistingFile);
    app.add_option("--out", out, "Output directory (overrides the job's output_dir)");
    app.add_option("--verbosity", verbosity, "0 silent, 1 summary, 2 every certificate")->check(CLI::Range(0, 2));
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return dmf::cli::exit_usage;
    }
    dmf::cli::RunOptions opts;
    opts.out_dir = out;
    opts.verbosity = verbosity;
    return dmf::cli::run_file(job, opts).exit_code;
}
