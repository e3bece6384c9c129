#pragma once

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace dmf {

/// A pointwise function with a JSON descriptor, used where a scale must be
/// re-evaluated off the lattice (shifts, compositions). Catalog members are
/// radial: they depend on r = |x| (Euclidean norm).
class ClosedForm {
public:
    using Eval = std::function<double(std::span<const double>)>;

    ClosedForm(nlohmann::json descriptor, Eval eval);

    static ClosedForm constant(double c);
    /// sum_k coefficients[k] * r^k.
    static ClosedForm polynomial(std::vector<double> coefficients);
    /// 1 + r^p.
    static ClosedForm one_plus_abs_pow(double p);
    /// exp(r).
    static ClosedForm exp_abs();
    /// exp(exp(r)); grows faster than any power of exp(r).
    static ClosedForm exp_exp_abs();
    /// 1 + |sin(r)|.
    static ClosedForm one_plus_abs_sin();

    /// Builds a catalog member from {"closed_form": name, ...parameters}.
    static ClosedForm from_json(const nlohmann::json& j);

    double operator()(std::span<const double> x) const { return eval_(x); }
    double operator()(double x) const { return eval_(std::span<const double>(&x, 1)); }
    const nlohmann::json& descriptor() const { return descriptor_; }

    /// x -> f(-x).
    ClosedForm reflected() const;

private:
    nlohmann::json descriptor_;
    Eval eval_;
};

double euclidean_norm(std::span<const double> x);

} // namespace dmf
