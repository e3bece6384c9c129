#include "jobspec.hpp"

#include <cmath>
#include <fstream>

#include "dmf/closed_form.hpp"
#include "dmf/errors.hpp"
#include "dmf/grid_io.hpp"

namespace dmf::cli {

namespace {

struct CommandName {
    Command command;
    const char* name;
};

constexpr CommandName kCommands[] = {
    {Command::factorize, "factorize"},
    {Command::mollify, "mollify"},
    {Command::check_scale, "check-scale"},
    {Command::convolve_demo, "convolve-demo"},
    {Command::crossed_factorize, "crossed-factorize"},
    {Command::counterexamples, "counterexamples"},
    {Command::report, "report"},
};

const char* type_name(const nlohmann::json& j)
{
    return j.type_name();
}

std::filesystem::path resolve_path(const std::string& p, const std::filesystem::path& base)
{
    std::filesystem::path path(p);
    if (path.is_relative() && !base.empty()) {
        path = base / path;
    }
    return path;
}

GridFunction load_on(const nlohmann::json& j, const Grid& grid, const std::string& path,
                     const std::filesystem::path& base)
{
    if (!j.at("file").is_string()) {
        throw UsageError(path + "/file", "expected a path string");
    }
    const auto file = resolve_path(j.at("file").get<std::string>(), base);
    if (!std::filesystem::exists(file)) {
        throw UsageError(path + "/file", "no such file '" + file.string() + "'");
    }
    auto f = load_grid_function(file);
    if (f.grid() == grid) {
        return f;
    }
    if (f.grid().contains(grid)) {
        return restrict_to(f, grid);
    }
    throw UsageError(path + "/file", "grid " + f.grid().describe() + " does not cover the job grid " + grid.describe());
}

ClosedForm closed_form_at(const nlohmann::json& j, const std::string& path)
{
    try {
        return ClosedForm::from_json(j);
    } catch (const nlohmann::json::exception& e) {
        throw UsageError(path, std::string("bad closed form: ") + e.what());
    } catch (const DomainError& e) {
        throw UsageError(path, e.what());
    }
}

double radius2(std::span<const double> x)
{
    double s = 0.0;
    for (double v : x) {
        s += v * v;
    }
    return s;
}

} // namespace

const char* to_string(Command c)
{
    for (const auto& n : kCommands) {
        if (n.command == c) {
            return n.name;
        }
    }
    return "?";
}

Command command_from_string(const std::string& s, const std::string& path)
{
    for (const auto& n : kCommands) {
        if (s == n.name) {
            return n.command;
        }
    }
    std::string all;
    for (const auto& n : kCommands) {
        all += all.empty() ? "" : ", ";
        all += n.name;
    }
    throw UsageError(path, "unknown command '" + s + "' (expected one of " + all + ")");
}

// ---------------------------------------------------------------- fields

Fields::Fields(const nlohmann::json& j, std::string path) : j_(&j), path_(std::move(path))
{
    if (!j.is_object()) {
        throw UsageError(path_.empty() ? "/" : path_, std::string("expected an object, got ") + type_name(j));
    }
}

bool Fields::has(const std::string& key) const
{
    return j_->contains(key) && !j_->at(key).is_null();
}

const nlohmann::json& Fields::raw(const std::string& key) const
{
    if (!has(key)) {
        throw UsageError(path(key), "required field is missing");
    }
    return j_->at(key);
}

double Fields::number(const std::string& key, double fallback) const
{
    if (!has(key)) {
        return fallback;
    }
    const auto& v = j_->at(key);
    if (!v.is_number()) {
        throw UsageError(path(key), std::string("expected a number, got ") + type_name(v));
    }
    const double x = v.get<double>();
    if (!std::isfinite(x)) {
        throw UsageError(path(key), "must be finite");
    }
    return x;
}

double Fields::positive(const std::string& key, double fallback) const
{
    const double x = number(key, fallback);
    if (!(x > 0.0)) {
        throw UsageError(path(key), "must be positive");
    }
    return x;
}

int Fields::integer(const std::string& key, int fallback, int min) const
{
    if (!has(key)) {
        return fallback;
    }
    const auto& v = j_->at(key);
    if (!v.is_number_integer()) {
        throw UsageError(path(key), std::string("expected an integer, got ") + type_name(v));
    }
    const auto x = v.get<std::int64_t>();
    if (x < min || x > 1'000'000'000) {
        throw UsageError(path(key), "must be an integer >= " + std::to_string(min));
    }
    return static_cast<int>(x);
}

bool Fields::flag(const std::string& key, bool fallback) const
{
    if (!has(key)) {
        return fallback;
    }
    const auto& v = j_->at(key);
    if (!v.is_boolean()) {
        throw UsageError(path(key), std::string("expected a boolean, got ") + type_name(v));
    }
    return v.get<bool>();
}

std::string Fields::text(const std::string& key, const std::string& fallback) const
{
    if (!has(key)) {
        return fallback;
    }
    const auto& v = j_->at(key);
    if (!v.is_string()) {
        throw UsageError(path(key), std::string("expected a string, got ") + type_name(v));
    }
    return v.get<std::string>();
}

std::vector<double> Fields::numbers(const std::string& key, std::vector<double> fallback) const
{
    if (!has(key)) {
        return fallback;
    }
    const auto& v = j_->at(key);
    if (!v.is_array()) {
        throw UsageError(path(key), std::string("expected an array, got ") + type_name(v));
    }
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!v[i].is_number()) {
            throw UsageError(path(key) + "/" + std::to_string(i), "expected a number");
        }
        out.push_back(v[i].get<double>());
    }
    return out;
}

Fields Fields::object(const std::string& key) const
{
    static const nlohmann::json empty = nlohmann::json::object();
    return has(key) ? Fields(j_->at(key), path(key)) : Fields(empty, path(key));
}

// ---------------------------------------------------------------- job

JobSpec parse_job(const nlohmann::json& j, const std::filesystem::path& base_dir)
{
    Fields top(j, "");
    JobSpec spec;
    spec.base_dir = base_dir;
    spec.command = command_from_string(top.text("command", ""), "/command");
    if (top.has("inputs")) {
        spec.inputs = top.raw("inputs");
        Fields(spec.inputs, "/inputs");
    }
    if (top.has("parameters")) {
        spec.parameters = top.raw("parameters");
        Fields(spec.parameters, "/parameters");
    }
    if (top.has("grid")) {
        spec.grid = top.raw("grid");
        parse_grid(*spec.grid, "/grid");
    }
    if (top.has("seed")) {
        const auto& s = top.raw("seed");
        if (!s.is_number_unsigned()) {
            throw UsageError("/seed", "expected a nonnegative integer");
        }
        spec.seed = s.get<std::uint64_t>();
    }
    spec.output_dir = top.text("output_dir", "");
    for (const auto& [key, value] : j.items()) {
        static const char* known[] = {"command", "inputs", "parameters", "grid", "seed", "output_dir", "description"};
        if (std::find(std::begin(known), std::end(known), key) == std::end(known)) {
            throw UsageError("/" + key, "unknown field");
        }
    }
    return spec;
}

JobSpec load_job(const std::filesystem::path& path)
{
    std::ifstream is(path);
    if (!is) {
        throw UsageError("/", "cannot open job file '" + path.string() + "'");
    }
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(is);
    } catch (const nlohmann::json::parse_error& e) {
        throw UsageError("/", std::string("job file is not valid JSON: ") + e.what());
    }
    return parse_job(j, path.parent_path());
}

Grid parse_grid(const nlohmann::json& j, const std::string& path)
{
    Fields f(j, path);
    try {
        if (f.has("L")) {
            f.positive("L", 1.0);
            f.positive("h", 1.0);
            f.integer("dim", 1, 1);
        } else {
            for (const char* key : {"lo", "hi", "h"}) {
                f.numbers(key, {});
                if (!f.has(key)) {
                    throw UsageError(f.path(key), "required field is missing (or give L and h)");
                }
            }
        }
        return grid_from_json(j);
    } catch (const DomainError& e) {
        throw UsageError(path, e.what());
    } catch (const nlohmann::json::exception& e) {
        throw UsageError(path, e.what());
    }
}

GridFunction resolve_function(const nlohmann::json& j, const Grid& grid, const std::string& path,
                              const std::filesystem::path& base_dir)
{
    std::string name;
    double radius = 1.0;
    bool normalize = false;
    if (j.is_string()) {
        name = j.get<std::string>();
    } else if (j.is_object()) {
        if (j.contains("file")) {
            return load_on(j, grid, path, base_dir);
        }
        if (j.contains("closed_form")) {
            const auto cf = closed_form_at(j, path);
            return sample([&](std::span<const double> x) { return cf(x); }, grid);
        }
        Fields f(j, path);
        name = f.text("catalog", "");
        radius = f.positive("radius", 1.0);
        normalize = f.flag("normalize", false);
    } else {
        throw UsageError(path, "expected a catalog name or an object");
    }
    if (name == "gaussian") {
        return sample([](std::span<const double> x) { return std::exp(-radius2(x)); }, grid);
    }
    if (name == "x_gaussian") {
        return sample([](std::span<const double> x) { return x[0] * std::exp(-radius2(x)); }, grid);
    }
    if (name == "rational") {
        return sample([](std::span<const double> x) { return 1.0 / (1.0 + radius2(x)); }, grid);
    }
    if (name == "one") {
        return GridFunction::constant(grid, 1.0);
    }
    if (name == "delta") {
        std::vector<double> v(grid.size(), 0.0);
        const std::vector<double> origin(static_cast<std::size_t>(grid.dim()), 0.0);
        const auto at = grid.find(origin);
        if (!at) {
            throw UsageError(path, "delta needs the origin on the grid");
        }
        v[*at] = 1.0;
        return GridFunction(grid, std::move(v));
    }
    if (name == "bump") {
        if (normalize) {
            return make_bump(grid, radius);
        }
        return sample([radius](std::span<const double> x) { return bump_profile(std::sqrt(radius2(x)), radius); }, grid);
    }
    throw UsageError(path, "unknown function '" + name +
                               "' (catalog: gaussian, x_gaussian, rational, one, delta, bump)");
}

Scale resolve_scale(const nlohmann::json& j, const Grid& grid, const std::string& path,
                    const std::filesystem::path& base_dir, ScaleKind kind)
{
    try {
        if (j.is_string()) {
            const auto name = j.get<std::string>();
            std::optional<ClosedForm> cf;
            if (name == "one_plus_x2") {
                cf = ClosedForm::polynomial({1.0, 0.0, 1.0});
            } else if (name == "one_plus_abs") {
                cf = ClosedForm::one_plus_abs_pow(1.0);
            } else if (name == "one") {
                cf = ClosedForm::constant(1.0);
            } else if (name == "exp_abs") {
                cf = ClosedForm::exp_abs();
            } else if (name == "exp_exp_abs") {
                cf = ClosedForm::exp_exp_abs();
            } else if (name == "one_plus_abs_sin") {
                cf = ClosedForm::one_plus_abs_sin();
            } else {
                throw UsageError(path, "unknown scale '" + name +
                                           "' (catalog: one_plus_x2, one_plus_abs, one, exp_abs, exp_exp_abs, "
                                           "one_plus_abs_sin)");
            }
            return Scale::from_closed_form(*cf, grid, kind);
        }
        if (j.is_object() && j.contains("file")) {
            return Scale(load_on(j, grid, path, base_dir), kind);
        }
        if (j.is_object() && j.contains("closed_form")) {
            return Scale::from_closed_form(closed_form_at(j, path), grid, kind);
        }
    } catch (const DomainError& e) {
        throw UsageError(path, e.what());
    }
    throw UsageError(path, "expected a scale catalog name, {\"closed_form\": ...} or {\"file\": ...}");
}

} // namespace dmf::cli
