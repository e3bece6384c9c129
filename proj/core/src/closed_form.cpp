#include "dmf/closed_form.hpp"

#include <cmath>

#include "dmf/errors.hpp"

namespace dmf {

double euclidean_norm(std::span<const double> x)
{
    if (x.size() == 1) {
        return std::abs(x[0]);
    }
    double s = 0.0;
    for (double v : x) {
        s += v * v;
    }
    return std::sqrt(s);
}

ClosedForm::ClosedForm(nlohmann::json descriptor, Eval eval)
    : descriptor_(std::move(descriptor)), eval_(std::move(eval))
{
    if (!eval_) {
        throw DomainError("closed form: empty evaluator");
    }
}

ClosedForm ClosedForm::constant(double c)
{
    return ClosedForm({{"closed_form", "constant"}, {"value", c}}, [c](std::span<const double>) { return c; });
}

ClosedForm ClosedForm::polynomial(std::vector<double> coefficients)
{
    if (coefficients.empty()) {
        throw DomainError("closed form: polynomial needs at least one coefficient");
    }
    nlohmann::json d = {{"closed_form", "polynomial"}, {"coefficients", coefficients}};
    return ClosedForm(std::move(d), [c = std::move(coefficients)](std::span<const double> x) {
        // Even powers use r^2 = sum x_i^2 directly so 1 + x^2 is exact.
        double r2 = 0.0;
        for (double v : x) {
            r2 += v * v;
        }
        const double r = x.size() == 1 ? std::abs(x[0]) : std::sqrt(r2);
        double acc = 0.0;
        double even = 1.0; // r^(2j)
        for (std::size_t k = 0; k < c.size(); ++k) {
            if (k % 2 == 0) {
                acc += c[k] * even;
            } else {
                acc += c[k] * (r * even);
                even *= r2;
            }
        }
        return acc;
    });
}

ClosedForm ClosedForm::one_plus_abs_pow(double p)
{
    return ClosedForm({{"closed_form", "one_plus_abs_pow"}, {"p", p}},
                      [p](std::span<const double> x) { return 1.0 + std::pow(euclidean_norm(x), p); });
}

ClosedForm ClosedForm::exp_abs()
{
    return ClosedForm({{"closed_form", "exp_abs"}},
                      [](std::span<const double> x) { return std::exp(euclidean_norm(x)); });
}

ClosedForm ClosedForm::exp_exp_abs()
{
    return ClosedForm({{"closed_form", "exp_exp_abs"}},
                      [](std::span<const double> x) { return std::exp(std::exp(euclidean_norm(x))); });
}

ClosedForm ClosedForm::one_plus_abs_sin()
{
    return ClosedForm({{"closed_form", "one_plus_abs_sin"}},
                      [](std::span<const double> x) { return 1.0 + std::abs(std::sin(euclidean_norm(x))); });
}

ClosedForm ClosedForm::from_json(const nlohmann::json& j)
{
    const auto name = j.at("closed_form").get<std::string>();
    if (name == "constant") {
        return constant(j.value("value", 1.0));
    }
    if (name == "polynomial") {
        return polynomial(j.at("coefficients").get<std::vector<double>>());
    }
    if (name == "one_plus_abs_pow") {
        return one_plus_abs_pow(j.at("p").get<double>());
    }
    if (name == "exp_abs") {
        return exp_abs();
    }
    if (name == "exp_exp_abs") {
        return exp_exp_abs();
    }
    if (name == "one_plus_abs_sin") {
        return one_plus_abs_sin();
    }
    throw DomainError("closed form: unknown catalog entry '" + name + "'");
}

ClosedForm ClosedForm::reflected() const
{
    nlohmann::json d = {{"closed_form", "reflected"}, {"base", descriptor_}};
    return ClosedForm(std::move(d), [f = eval_](std::span<const double> x) {
        double buf[3];
        for (std::size_t i = 0; i < x.size(); ++i) {
            buf[i] = -x[i];
        }
        return f(std::span<const double>(buf, x.size()));
    });
}

} // namespace dmf
