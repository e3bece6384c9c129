#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "dmf/grid.hpp"
#include "dmf/scales.hpp"

namespace dmf::cli {

/// Malformed job: `path` is a JSON pointer into the job file.
class UsageError : public std::runtime_error {
public:
    UsageError(std::string path, const std::string& message)
        : std::runtime_error(path + ": " + message), path_(std::move(path))
    {
    }
    const std::string& path() const { return path_; }

private:
    std::string path_;
};

enum class Command { factorize, mollify, check_scale, convolve_demo, crossed_factorize, counterexamples, report };

const char* to_string(Command c);
Command command_from_string(const std::string& s, const std::string& path);

struct JobSpec {
    Command command = Command::factorize;
    nlohmann::json inputs = nlohmann::json::object();
    nlohmann::json parameters = nlohmann::json::object();
    std::optional<nlohmann::json> grid;
    std::uint64_t seed = 0;
    std::string output_dir;
    std::filesystem::path base_dir; ///< relative input paths resolve against this
};

JobSpec parse_job(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
JobSpec load_job(const std::filesystem::path& path);

/// Typed access to one JSON object with pointer-style paths in errors.
class Fields {
public:
    Fields(const nlohmann::json& j, std::string path);

    bool has(const std::string& key) const;
    const nlohmann::json& raw(const std::string& key) const;
    std::string path(const std::string& key) const { return path_ + "/" + key; }
    const std::string& where() const { return path_; }

    double number(const std::string& key, double fallback) const;
    double positive(const std::string& key, double fallback) const;
    int integer(const std::string& key, int fallback, int min = 0) const;
    bool flag(const std::string& key, bool fallback) const;
    std::string text(const std::string& key, const std::string& fallback) const;
    std::vector<double> numbers(const std::string& key, std::vector<double> fallback) const;
    Fields object(const std::string& key) const;

private:
    const nlohmann::json* j_;
    std::string path_;
};

Grid parse_grid(const nlohmann::json& j, const std::string& path);

/// A function input: catalog name, {"catalog": name, ...}, {"closed_form": ...}
/// or {"file": path}. Files are restricted to `grid` when they cover it.
GridFunction resolve_function(const nlohmann::json& j, const Grid& grid, const std::string& path,
                              const std::filesystem::path& base_dir);

/// A scale input: catalog name, {"closed_form": ...} or {"file": path}.
Scale resolve_scale(const nlohmann::json& j, const Grid& grid, const std::string& path,
                    const std::filesystem::path& base_dir, ScaleKind kind = ScaleKind::on_space);

} // namespace dmf::cli
