#include "dmf/certificate.hpp"

#include <cmath>

#include "dmf/errors.hpp"
#include "dmf/grid_io.hpp"

namespace dmf {

double Certificate::constant(const std::string& name) const
{
    const auto it = constants.find(name);
    if (it == constants.end()) {
        throw DomainError("certificate '" + kind + "' has no constant '" + name + "'");
    }
    return it->second;
}

void Certificate::observe(double residual, std::vector<double> point)
{
    if (witness.empty() || residual > worst_residual) {
        worst_residual = residual;
        witness = std::move(point);
    }
}

nlohmann::json to_json(const Certificate& c)
{
    nlohmann::json j;
    j["kind"] = c.kind;
    j["constants"] = c.constants;
    j["worst_residual"] = c.worst_residual;
    j["witness"] = c.witness;
    j["pass"] = c.pass;
    j["grid"] = c.grid ? grid_to_json(*c.grid) : nlohmann::json();
    j["notes"] = c.notes;
    if (!c.tables.empty()) {
        j["tables"] = c.tables;
    }
    return j;
}

Certificate certificate_from_json(const nlohmann::json& j)
{
    Certificate c;
    c.kind = j.at("kind").get<std::string>();
    c.constants = j.at("constants").get<std::map<std::string, double>>();
    c.worst_residual = j.at("worst_residual").get<double>();
    c.witness = j.at("witness").get<std::vector<double>>();
    c.pass = j.at("pass").get<bool>();
    if (!j.at("grid").is_null()) {
        c.grid = grid_from_json(j.at("grid"));
    }
    c.notes = j.value("notes", std::vector<std::string>{});
    if (j.contains("tables")) {
        c.tables = j.at("tables").get<std::map<std::string, std::vector<double>>>();
    }
    return c;
}

bool self_consistent(const Certificate& c)
{
    return std::isfinite(c.worst_residual) && c.pass == (c.worst_residual <= 0.0);
}

std::string derivative_constant_key(const MultiIndex& gamma)
{
    return "C" + gamma.label();
}

} // namespace dmf
