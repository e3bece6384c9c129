#pragma once

// The product phi_lambda(x) = prod_j (1 + x^2 / lambda_j^2) over a truncated
// subsequence of powers of two, its reciprocal chi_lambda, the power-series
// coefficients alpha_n, and the greedy choice of lambda.

#include <vector>

#include <nlohmann/json.hpp>

#include "dmf/schwartz.hpp"

namespace dmf {

/// lambda_j = 2^exponents[j], j < K, with the coefficients of the truncated
/// product expansion sum_n alphas[n] x^(2n).
struct LambdaSequence {
    std::vector<int> exponents;
    std::vector<double> alphas;   ///< alpha_0 .. alpha_K
    double tail_mass = 0.0;       ///< bound on sum_{j >= K} lambda_j^-2
    int offset = 0;               ///< t in lambda_j = 2^(j + t) for greedy sequences
    std::vector<double> betas;    ///< beta_n targets used by select_lambda (beta_0 unused)

    /// Validates the exponents, fills alphas and tail_mass. The dropped
    /// factors are taken to continue as k_j = k_{K-1} + (j - K + 1), so
    /// tail_mass = 4^(-k_{K-1}) / 3 (or 4/3 when K = 0).
    static LambdaSequence from_exponents(std::vector<int> exponents);

    std::size_t K() const { return exponents.size(); }
    double lambda(std::size_t j) const;
    /// alpha_n, zero for n > K.
    double alpha(std::size_t n) const { return n < alphas.size() ? alphas[n] : 0.0; }
};

/// e_n(4^-k_0, ..., 4^-k_{K-1}) for n = 0..K, one factor at a time.
std::vector<double> alpha_coefficients(const std::vector<int>& exponents);

struct PhiValue {
    double value = 1.0;       ///< truncated product
    double tail_factor = 1.0; ///< exp(x^2 tail_mass) >= infinite / truncated
};

PhiValue eval_phi_lambda(const LambdaSequence& lambda, double x);
double eval_chi_lambda(const LambdaSequence& lambda, double x);
/// sum_{n <= N} alpha_n x^(2n) by Horner in x^2.
double eval_phi_series(const LambdaSequence& lambda, double x, std::size_t N);

/// chi_lambda as a profile for compose_scale, with its analytic derivative.
Profile chi_lambda_profile(const LambdaSequence& lambda);

struct SelectOptions {
    int K = 40;
    int offset_cap = 400;
};

/// Greedy rule: lambda_j = 2^(j + t) for the smallest t such that
/// S^n / n! <= min(beta_n, 1/n^2) for 1 <= n <= N_cap, where
/// S = sum_j lambda_j^-2 and beta_n = epsilon 2^-n / (1 + M_n).
/// M holds M_0 .. M_{N_cap}. Throws NumericCapError when no offset up to
/// offset_cap works, naming the violating n.
LambdaSequence select_lambda(const std::vector<double>& M, double epsilon, const SelectOptions& opts = {});

nlohmann::json to_json(const LambdaSequence& l);

} // namespace dmf
