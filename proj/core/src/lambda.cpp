#include "dmf/lambda.hpp"

#include <cmath>
#include <string>

#include "dmf/errors.hpp"

namespace dmf {

namespace {

double inv_lambda_sq(int k)
{
    return std::ldexp(1.0, -2 * k);
}

} // namespace

std::vector<double> alpha_coefficients(const std::vector<int>& exponents)
{
    std::vector<double> a{1.0};
    a.reserve(exponents.size() + 1);
    for (int k : exponents) {
        const double c = inv_lambda_sq(k);
        a.push_back(0.0);
        for (std::size_t n = a.size() - 1; n > 0; --n) {
            a[n] += c * a[n - 1];
        }
    }
    return a;
}

LambdaSequence LambdaSequence::from_exponents(std::vector<int> exponents)
{
    for (std::size_t j = 0; j < exponents.size(); ++j) {
        if (exponents[j] < 0) {
            throw DomainError("lambda: exponent " + std::to_string(exponents[j]) + " is negative");
        }
        if (j > 0 && exponents[j] <= exponents[j - 1]) {
            throw DomainError("lambda: exponents must be strictly increasing (index " + std::to_string(j) + ")");
        }
    }
    LambdaSequence l;
    l.alphas = alpha_coefficients(exponents);
    l.tail_mass = exponents.empty() ? 4.0 / 3.0 : inv_lambda_sq(exponents.back()) / 3.0;
    l.exponents = std::move(exponents);
    return l;
}

double LambdaSequence::lambda(std::size_t j) const
{
    return std::ldexp(1.0, exponents.at(j));
}

PhiValue eval_phi_lambda(const LambdaSequence& lambda, double x)
{
    const double x2 = x * x;
    PhiValue r;
    for (int k : lambda.exponents) {
        r.value *= 1.0 + x2 * inv_lambda_sq(k);
    }
    r.tail_factor = std::exp(x2 * lambda.tail_mass);
    return r;
}

double eval_chi_lambda(const LambdaSequence& lambda, double x)
{
    return 1.0 / eval_phi_lambda(lambda, x).value;
}

double eval_phi_series(const LambdaSequence& lambda, double x, std::size_t N)
{
    const double x2 = x * x;
    const std::size_t top = std::min(N, lambda.alphas.empty() ? 0 : lambda.alphas.size() - 1);
    double acc = lambda.alpha(top);
    for (std::size_t n = top; n > 0; --n) {
        acc = acc * x2 + lambda.alpha(n - 1);
    }
    return acc;
}

Profile chi_lambda_profile(const LambdaSequence& lambda)
{
    auto value = [lambda](double t) { return eval_chi_lambda(lambda, t); };
    // chi' = -chi * sum_j (2 t / lambda_j^2) / (1 + t^2 / lambda_j^2)
    auto deriv = [lambda](double t) {
        double s = 0.0;
        for (int k : lambda.exponents) {
            const double c = inv_lambda_sq(k);
            s += 2.0 * t * c / (1.0 + t * t * c);
        }
        return -eval_chi_lambda(lambda, t) * s;
    };
    return Profile({{"profile", "chi_lambda"}, {"exponents", lambda.exponents}}, std::move(value),
                   Profile::Fn(std::move(deriv)));
}

LambdaSequence select_lambda(const std::vector<double>& M, double epsilon, const SelectOptions& opts)
{
    if (!(epsilon > 0.0)) {
        throw DomainError("select_lambda: epsilon must be positive");
    }
    if (M.empty()) {
        throw DomainError("select_lambda: need M_0 .. M_{N_cap}");
    }
    if (opts.K < 0) {
        throw DomainError("select_lambda: K must be nonnegative");
    }
    for (std::size_t n = 0; n < M.size(); ++n) {
        if (!(M[n] >= 0.0) || !std::isfinite(M[n])) {
            throw DomainError("select_lambda: M_" + std::to_string(n) + " is not a finite nonnegative number");
        }
    }
    const std::size_t N_cap = M.size() - 1;
    std::vector<double> beta(M.size(), 0.0);
    std::vector<double> log_target(M.size(), 0.0);
    for (std::size_t n = 1; n <= N_cap; ++n) {
        const double nd = static_cast<double>(n);
        beta[n] = epsilon * std::ldexp(1.0, -static_cast<int>(n)) / (1.0 + M[n]);
        // Computed in logs so beta_n may sit far below the normal range.
        const double log_beta = std::log(epsilon) - nd * std::log(2.0) - std::log1p(M[n]);
        log_target[n] = std::min(log_beta, -2.0 * std::log(nd));
    }

    std::size_t violating = 1;
    for (int t = 0; t <= opts.offset_cap; ++t) {
        // S = sum_{j<K} 4^-(j+t), summed smallest first.
        double S = 0.0;
        for (int j = opts.K - 1; j >= 0; --j) {
            S += inv_lambda_sq(j + t);
        }
        bool ok = true;
        if (S > 0.0) {
            const double logS = std::log(S);
            for (std::size_t n = 1; n <= N_cap; ++n) {
                const double nd = static_cast<double>(n);
                if (nd * logS - std::lgamma(nd + 1.0) > log_target[n] - 1e-12) {
                    ok = false;
                    violating = n;
                    break;
                }
            }
        }
        if (!ok) {
            continue;
        }
        std::vector<int> exps(static_cast<std::size_t>(opts.K));
        for (int j = 0; j < opts.K; ++j) {
            exps[static_cast<std::size_t>(j)] = j + t;
        }
        auto l = LambdaSequence::from_exponents(std::move(exps));
        l.offset = t;
        l.betas = beta;
        // The stored coefficients themselves must meet the target.
        for (std::size_t n = 1; n <= N_cap && ok; ++n) {
            const double a = l.alpha(n);
            if (a > 0.0 && std::log(a) > log_target[n]) {
                ok = false;
                violating = n;
            }
        }
        if (ok) {
            return l;
        }
    }
    throw NumericCapError("select_lambda: offset cap " + std::to_string(opts.offset_cap) +
                          " exhausted; the bound fails at n = " + std::to_string(violating));
}

nlohmann::json to_json(const LambdaSequence& l)
{
    return {{"exponents", l.exponents},
            {"K", l.K()},
            {"offset", l.offset},
            {"alphas", l.alphas},
            {"betas", l.betas},
            {"tail_mass", l.tail_mass}};
}

} // namespace dmf
