#pragma once

// Factorization psi = theta * phi with theta = chi_lambda o sigma and
// phi = sum_{n <= N} alpha_n sigma^(2n) psi, the module version e = theta f,
// and the extension of a multiplier T to a module element via Te = (T theta) f.

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dmf/certificate.hpp"
#include "dmf/grid.hpp"
#include "dmf/lambda.hpp"
#include "dmf/scales.hpp"
#include "dmf/schwartz.hpp"

namespace dmf {

struct FactorizeOptions {
    double epsilon = 1e-8;
    int d_max = 4;
    int l_max = 2;
    int N_cap = 64;
    int K = 40;
    int offset_cap = 400;
    bool mollify = true;
    double bump_radius = 0.25;
    MollifyOptions mollify_options{};
};

/// Components of the bound on sup |theta phi - psi|.
struct ResidualBudget {
    double float_part = 0.0;   ///< rounding in the series, the product and the final multiply
    double series_tail = 0.0;  ///< certified sum_{n > N} alpha_n (majorant)
    double product_tail = 0.0; ///< truncated vs infinite product, relative to the K kept factors

    double total() const { return float_part + series_tail + product_tail; }
};

/// The scale actually used (mollified when requested) plus the certificates
/// that tie it back to the caller's scale.
struct SmoothedScale {
    Scale sigma;
    Certificate derivative_bound;
    std::optional<Certificate> upper; ///< smoothed <= C * original^d
    std::optional<Certificate> lower; ///< original <= C * smoothed^d
};

/// Mollifies (or keeps) sigma and certifies |X^gamma sigma| <= C sigma^d for |gamma| <= order.
SmoothedScale smooth_scale(const Scale& sigma, bool mollify, double bump_radius, int order,
                           const MollifyOptions& opts = {});

struct FactorizationResult {
    GridFunction theta;
    GridFunction phi;
    GridFunction psi; ///< the input, on the grid actually used
    LambdaSequence lambda;
    int N_series = 0;
    double residual = 0.0;   ///< sup |theta phi - psi|
    double tail_bound = 0.0; ///< sum_{N < n} alpha_n M_maj_n
    ResidualBudget budget;
    /// M_table[d][l][n] = max_{|gamma| <= l} ||sigma^((d+1)l + 2n) X^gamma psi||.
    std::vector<std::vector<std::vector<double>>> M_table;
    std::vector<double> M_select;   ///< max_{d,l} M_{d,l,n}, fed to select_lambda
    std::vector<double> M_majorant; ///< max_{d, l} (1 + 2n C*)^l M_{d,max(l,1),n}
    double C_star = 1.0;            ///< max(1, derivative-bound C)
    Certificate identity;           ///< theta * prod_j (1 + sigma^2/lambda_j^2) = 1
    Certificate residual_certificate;
    SmoothedScale scale;
    std::vector<std::string> notes;

    bool pass() const { return identity.pass && residual_certificate.pass; }
};

FactorizationResult factorize_function(const GridFunction& psi, const Scale& sigma, const FactorizeOptions& opts = {});

/// sum_{n <= N} alpha_n sigma^(2n) f with overflow-guarded powers.
GridFunction partial_series(const LambdaSequence& lambda, const GridFunction& sigma, const GridFunction& f,
                            std::size_t N);

/// Majorant of ||sigma^d X^gamma (sigma^(2n) psi)|| for |gamma| <= l, d <= d_max.
double series_term_majorant(const FactorizationResult& r, int d, int l, std::size_t n);

nlohmann::json to_json(const FactorizationResult& r);

/// Concrete carriers of a module over the weighted function algebra.
struct ModuleSpec {
    enum class Kind {
        self_action, ///< S^sigma grid functions acting on themselves
        c0_pointwise ///< sup-normed grid functions under pointwise action
    };
    Kind kind = Kind::self_action;
    std::vector<SeminormIndex> seminorms; ///< empty: all d <= d_max, |gamma| <= l_max (self) or sup only (c0)

    static ModuleSpec self(int dim, int d_max = 4, int l_max = 2);
    static ModuleSpec c0(int dim);
};

const char* to_string(ModuleSpec::Kind k);

struct SeminormResidual {
    SeminormIndex index;
    double residual = 0.0;
    double budget = 0.0;
};

struct ModuleFactorization {
    GridFunction theta;
    GridFunction f;
    GridFunction e; ///< the input, on the grid actually used
    LambdaSequence lambda;
    int N_series = 0;
    double residual = 0.0; ///< sup |theta f - e|
    ResidualBudget budget;
    std::vector<std::vector<double>> M_table; ///< M_table[m][n] = ||sigma^(2n) e||_m
    std::vector<double> M_max;
    std::vector<SeminormResidual> seminorm_residuals;
    Certificate certificate; ///< every seminorm residual within its budget
    SmoothedScale scale;
    std::vector<std::string> notes;
};

ModuleFactorization factorize_module_element(const GridFunction& e, const Scale& sigma, const ModuleSpec& module,
                                             const FactorizeOptions& opts = {});

nlohmann::json to_json(const ModuleFactorization& r);

/// A multiplier of the algebra: identity or multiplication by tau.
struct MultiplierSpec {
    enum class Kind { identity, pointwise };
    Kind kind = Kind::identity;
    std::optional<GridFunction> tau;
    std::string description = "identity";

    static MultiplierSpec identity();
    static MultiplierSpec pointwise(GridFunction tau, std::string description);
    /// sigma^p on sigma's grid.
    static MultiplierSpec scale_power(const Scale& sigma, int p);
};

struct ExtensionResult {
    GridFunction Te;
    ModuleFactorization factorization;
    double tau_max = 1.0;
    double budget = 0.0; ///< tau_max * factorization budget (sup norm)
};

/// Te = (T theta) f for the factorization e = theta f.
ExtensionResult extend_multiplier(const MultiplierSpec& T, const GridFunction& e, const Scale& sigma,
                                  const ModuleSpec& module, const FactorizeOptions& opts = {});

} // namespace dmf
