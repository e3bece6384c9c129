#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dmf/grid.hpp"

namespace dmf {

/// Relative slack applied to the right-hand side of every checked
/// inequality: lhs <= (1 + kRelativeSlack) * rhs counts as holding.
inline constexpr double kRelativeSlack = 1e-12;

/// Record of a numerically checked inequality.
///
/// Residuals follow the convention residual = lhs - rhs, so the inequality
/// holds at every checked point iff worst_residual <= 0, and `pass` is kept
/// equal to that predicate.
struct Certificate {
    std::string kind;
    std::map<std::string, double> constants;
    double worst_residual = 0.0;
    std::vector<double> witness;
    bool pass = false;
    std::optional<Grid> grid;
    std::vector<std::string> notes;
    std::map<std::string, std::vector<double>> tables;

    double constant(const std::string& name) const;
    bool has(const std::string& name) const { return constants.count(name) != 0; }

    /// Sets `pass` from worst_residual. Call after the residual is final.
    void finalize() { pass = worst_residual <= 0.0; }

    /// Folds one more checked point into the certificate.
    void observe(double residual, std::vector<double> point);
};

/// Residual of lhs <= rhs with the standard relative slack.
inline double slack_residual(double lhs, double rhs)
{
    return lhs - rhs - kRelativeSlack * (rhs < 0 ? -rhs : rhs);
}

nlohmann::json to_json(const Certificate& c);
Certificate certificate_from_json(const nlohmann::json& j);

/// True when a (possibly re-loaded) certificate is internally consistent:
/// pass agrees with the sign of worst_residual.
bool self_consistent(const Certificate& c);

/// Key under which derivative-bound certificates store C for a multi-index.
std::string derivative_constant_key(const MultiIndex& gamma);

} // namespace dmf
