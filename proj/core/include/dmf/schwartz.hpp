#pragma once

// Weighted sup-seminorms ||sigma^d X^gamma f||_inf, Schwartz seminorms on
// the line, the multiplier action of a differentiable scale, composition
// phi o sigma, and decay diagnostics.

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dmf/certificate.hpp"
#include "dmf/grid.hpp"
#include "dmf/scales.hpp"

namespace dmf {

struct SeminormIndex {
    int d = 0;
    MultiIndex gamma;

    std::string label() const; ///< e.g. "d=2,gamma=(1)"
};

/// sigma^p * f pointwise, restricted to f's grid. Powers that would overflow
/// are formed as exp(p log sigma + log|f|) with the sign of f.
GridFunction scale_power_times(const GridFunction& sigma, double p, const GridFunction& f);

/// sup |sigma^d X^gamma f| on the domain left after differentiation.
double seminorm_sigma(const GridFunction& f, const Scale& sigma, const SeminormIndex& idx);

/// sup |r^d phi^(k)(r)| for phi on a one-dimensional grid.
double seminorm_schwartz(const GridFunction& phi, int d, int k);

struct MultiplierResult {
    GridFunction product; ///< sigma * f
    Certificate certificate;
};

/// sigma * f with, for each requested index (l, gamma), the Leibniz bound
///   ||sigma^l X^gamma (sigma f)|| <= ||sigma^(l+1) X^gamma f||
///       + sum_{0 < beta <= gamma} binom(gamma, beta) C_beta ||sigma^(l+d) X^(gamma-beta) f||
/// where C_beta and d come from a passing derivative-bound certificate of sigma.
MultiplierResult multiplier_sigma(const GridFunction& f, const Scale& sigma, const std::vector<SeminormIndex>& indices,
                                  const Certificate& derivative_bound);

/// A function of one nonnegative variable used in phi o sigma.
class Profile {
public:
    using Fn = std::function<double(double)>;

    Profile(nlohmann::json descriptor, Fn value, std::optional<Fn> derivative = std::nullopt,
            std::optional<std::pair<double, double>> domain = std::nullopt, double interpolation_error = 0.0);

    static Profile constant(double c);
    static Profile gaussian();        ///< exp(-t^2)
    static Profile reciprocal();      ///< 1 / t
    static Profile rational(double p); ///< (1 + t^2)^(-p)
    /// Piecewise-linear interpolation of samples on a 1-d grid; the recorded
    /// interpolation error is max|second difference| / 8.
    static Profile samples(const GridFunction& values);
    static Profile product(const Profile& a, const Profile& b);
    static Profile sum(const Profile& a, const Profile& b);

    double operator()(double t) const { return value_(t); }
    bool has_derivative() const { return derivative_.has_value(); }
    double derivative(double t) const;
    const std::optional<std::pair<double, double>>& domain() const { return domain_; }
    double interpolation_error() const { return interpolation_error_; }
    const nlohmann::json& descriptor() const { return descriptor_; }

private:
    nlohmann::json descriptor_;
    Fn value_;
    std::optional<Fn> derivative_;
    std::optional<std::pair<double, double>> domain_;
    double interpolation_error_ = 0.0;
};

/// (phi o sigma)(m) = phi(sigma(m)).
GridFunction compose_scale(const Profile& phi, const Scale& sigma);

/// First-order chain rule X(phi o sigma) = (phi' o sigma) X sigma, checked
/// between finite differences: residual = |lhs - rhs| - tolerance, where the
/// default tolerance is 1e-6 * sup|lhs| + 1e-12.
Certificate chain_rule_certificate(const Profile& phi, const Scale& sigma,
                                   std::optional<double> tolerance = std::nullopt);

struct DecayEntry {
    int d = 0;
    MultiIndex gamma;
    double value = 0.0;      ///< sup |sigma^d X^gamma f|
    bool growing = false;    ///< boundary shell sup exceeds every inner-half shell sup
    std::vector<double> shell_sup;
};

enum class Verdict { consistent, inconsistent };

struct DecayReport {
    std::vector<DecayEntry> table;
    /// Per axis: fitted p in |f| ~ |x|^(-p) along the axis through the origin
    /// (outer half of the axis); nullopt when f vanishes there.
    std::vector<std::optional<double>> decay_exponent;
    Verdict verdict = Verdict::consistent;
    std::optional<std::pair<int, MultiIndex>> witness;
    Grid grid;
    std::vector<std::string> notes;

    const DecayEntry& entry(int d, const MultiIndex& gamma) const;
};

DecayReport decay_report(const GridFunction& f, const Scale& sigma, int d_max = 6, int l_max = 2);

nlohmann::json to_json(const DecayReport& r);
std::string to_csv(const DecayReport& r);
const char* to_string(Verdict v);

} // namespace dmf
