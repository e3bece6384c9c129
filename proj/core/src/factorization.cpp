#include "dmf/factorization.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <limits>
#include <map>

#include "dmf/errors.hpp"
#include "dmf/grid_io.hpp"

namespace dmf {

namespace {

constexpr double kLogOverflowGuard = 700.0;
constexpr double kIdentityTolerance = 1e-12;

GridFunction on_grid(const GridFunction& f, const Grid& grid, const char* what, std::vector<std::string>& notes)
{
    if (f.grid() == grid) {
        return f;
    }
    if (!f.grid().contains(grid)) {
        throw GridMismatch(std::string(what) + ": input on " + f.grid().describe() +
                           " does not cover the smoothed scale's grid " + grid.describe());
    }
    notes.push_back(std::string(what) + " restricted to " + grid.describe() +
                    " (the smoothed scale lives on a shrunk box)");
    return restrict_to(f, grid);
}

GridFunction derivative_or_self(const GridFunction& f, const MultiIndex& gamma)
{
    if (gamma.is_zero()) {
        return f;
    }
    return finite_diff(f, gamma, std::max(gamma.total(), kDefaultMaxDerivativeOrder));
}

double min_spacing(const Grid& g)
{
    double h = std::numeric_limits<double>::infinity();
    for (int a = 0; a < g.dim(); ++a) {
        h = std::min(h, g.axis(a).h);
    }
    return h;
}

double float_budget(int K, int N, double magnitude)
{
    return 4.0 * (K + N + 4) * DBL_EPSILON * magnitude;
}

// Smallest N with sum_{N < n <= top} alpha_n m[n] <= eps, summed from the top.
int choose_series_length(const LambdaSequence& lambda, const std::vector<double>& m, double eps, double& tail)
{
    const std::size_t top = std::min(m.size() - 1, lambda.K());
    std::vector<double> suffix(top + 2, 0.0);
    for (std::size_t n = top; n >= 1; --n) {
        suffix[n] = suffix[n + 1] + lambda.alpha(n) * m[n];
    }
    for (std::size_t N = 0; N <= top; ++N) {
        if (suffix[N + 1] <= eps) {
            tail = suffix[N + 1];
            return static_cast<int>(N);
        }
    }
    tail = 0.0;
    return static_cast<int>(top);
}

bool grows_toward_boundary(const GridFunction& g)
{
    const auto prof = shell_profile(g);
    std::vector<double> sups;
    for (std::size_t k = 0; k < prof.shells(); ++k) {
        if (prof.count[k] > 0) {
            sups.push_back(prof.max_abs[k]);
        }
    }
    if (sups.size() < 2) {
        return false;
    }
    double inner = 0.0;
    for (std::size_t k = 0; k <= (sups.size() - 1) / 2; ++k) {
        inner = std::max(inner, sups[k]);
    }
    return sups.back() > (1.0 + 1e-9) * inner;
}

Certificate identity_certificate(const LambdaSequence& lambda, const Scale& s, const GridFunction& theta)
{
    Certificate c;
    c.kind = "reciprocal_identity";
    c.grid = theta.grid();
    c.constants["tolerance"] = kIdentityTolerance;
    for (std::size_t i = 0; i < theta.size(); ++i) {
        const double P = eval_phi_lambda(lambda, s[i]).value;
        c.observe(std::abs(theta[i] * P - 1.0) - kIdentityTolerance, theta.grid().point(i));
    }
    c.finalize();
    return c;
}

double product_tail_bound(const GridFunction& product, const Scale& s, double tail_mass)
{
    // |chi_K - chi_inf| <= chi_K (1 - exp(-sigma^2 tail_mass)) <= chi_K sigma^2 tail_mass
    double b = 0.0;
    for (std::size_t i = 0; i < product.size(); ++i) {
        b = std::max(b, std::abs(product[i]) * s[i] * s[i] * tail_mass);
    }
    return b;
}

nlohmann::json optional_certificate(const std::optional<Certificate>& c)
{
    return c ? to_json(*c) : nlohmann::json(nullptr);
}

nlohmann::json budget_json(const ResidualBudget& b)
{
    return {{"float", b.float_part},
            {"series_tail", b.series_tail},
            {"product_tail", b.product_tail},
            {"total", b.total()}};
}

} // namespace

SmoothedScale smooth_scale(const Scale& sigma, bool mollify, double bump_radius, int order,
                           const MollifyOptions& opts)
{
    if (!mollify) {
        auto cert = derivative_bound_certificate(sigma, order, FitOptions{opts.d_max, opts.C_max});
        return SmoothedScale{sigma, std::move(cert), std::nullopt, std::nullopt};
    }
    std::vector<double> lo, hi, h;
    for (int a = 0; a < sigma.grid().dim(); ++a) {
        lo.push_back(-bump_radius);
        hi.push_back(bump_radius);
        h.push_back(sigma.grid().axis(a).h);
    }
    const Grid bump_grid = Grid::box(lo, hi, h);
    MollifyOptions mo = opts;
    mo.derivative_order = order;
    auto m = mollify_scale(sigma, make_bump(bump_grid, bump_radius), hi, mo);
    return SmoothedScale{std::move(m.sigma), std::move(m.derivative_bound), std::move(m.upper), std::move(m.lower)};
}

GridFunction partial_series(const LambdaSequence& lambda, const GridFunction& sigma, const GridFunction& f,
                            std::size_t N)
{
    if (!(sigma.grid() == f.grid())) {
        throw GridMismatch("partial series: scale and function grids differ");
    }
    std::vector<double> v(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) {
        const double x = f[i];
        if (x == 0.0) {
            v[i] = 0.0;
            continue;
        }
        const double ls = std::log(sigma[i]);
        double acc = 0.0;
        for (std::size_t n = 0; n <= N; ++n) {
            const double a = lambda.alpha(n);
            if (a == 0.0) {
                continue;
            }
            const double lg = 2.0 * static_cast<double>(n) * ls;
            double term;
            if (lg < kLogOverflowGuard) {
                term = a * std::pow(sigma[i], 2.0 * static_cast<double>(n)) * x;
            } else {
                term = std::copysign(std::exp(std::log(a) + lg + std::log(std::abs(x))), x);
            }
            acc += term;
        }
        if (!std::isfinite(acc)) {
            throw NumericCapError("partial series overflows at " + grid_point_string(f.grid(), i));
        }
        v[i] = acc;
    }
    return GridFunction(f.grid(), std::move(v), f.policy());
}

FactorizationResult factorize_function(const GridFunction& psi, const Scale& sigma, const FactorizeOptions& opts)
{
    if (!(opts.epsilon > 0.0)) {
        throw DomainError("factorize: epsilon must be positive");
    }
    if (opts.l_max < 1 || opts.d_max < 0) {
        throw DomainError("factorize: need l_max >= 1 and d_max >= 0");
    }
    if (opts.N_cap < opts.K) {
        throw DomainError("factorize: N_cap must be at least K so every nonzero alpha_n is certified");
    }
    auto sm = smooth_scale(sigma, opts.mollify, opts.bump_radius, opts.l_max, opts.mollify_options);
    if (!sm.derivative_bound.pass) {
        throw DomainError("factorize: the smoothed scale has no passing derivative-bound certificate");
    }
    const double ds = sm.derivative_bound.constant("d");
    if (ds > 2.0) {
        throw DomainError("factorize: derivative bound needs d <= 2 for the series majorant (got " +
                          std::to_string(static_cast<int>(ds)) + ")");
    }
    const Scale& s = sm.sigma;
    const Grid grid = s.grid();

    FactorizationResult r{GridFunction(), GridFunction(), GridFunction(), {}, 0, 0.0, 0.0, {}, {}, {}, {}, 1.0,
                          {}, {}, sm, {}};
    r.psi = on_grid(psi, grid, "psi", r.notes);

    const auto report = decay_report(r.psi, s, opts.d_max, opts.l_max);
    if (report.verdict == Verdict::inconsistent) {
        throw DomainError("factorize: psi fails the decay proxy at d=" + std::to_string(report.witness->first) +
                          ", gamma=" + report.witness->second.label());
    }
    r.C_star = std::max(1.0, sm.derivative_bound.constant("C"));

    // log-domain maxima of sigma^p |X^gamma psi| per (gamma, p)
    const auto gammas = multi_indices_up_to(grid.dim(), opts.l_max);
    struct Logs {
        std::vector<double> ls, ld;
        int total;
    };
    std::vector<Logs> logs;
    for (const auto& g : gammas) {
        const auto D = derivative_or_self(r.psi, g);
        const auto sr = restrict_to(s.function(), D.grid());
        Logs L{{}, {}, g.total()};
        for (std::size_t i = 0; i < D.size(); ++i) {
            if (D[i] != 0.0) {
                L.ls.push_back(std::log(sr[i]));
                L.ld.push_back(std::log(std::abs(D[i])));
            }
        }
        logs.push_back(std::move(L));
    }
    std::map<std::pair<std::size_t, int>, double> cache;
    auto max_log = [&](std::size_t gi, int p) {
        const auto key = std::make_pair(gi, p);
        if (auto it = cache.find(key); it != cache.end()) {
            return it->second;
        }
        double best = -std::numeric_limits<double>::infinity();
        const auto& L = logs[gi];
        for (std::size_t i = 0; i < L.ls.size(); ++i) {
            best = std::max(best, p * L.ls[i] + L.ld[i]);
        }
        cache.emplace(key, best);
        return best;
    };

    const auto Nn = static_cast<std::size_t>(opts.N_cap) + 1;
    r.M_table.assign(static_cast<std::size_t>(opts.d_max) + 1,
                     std::vector<std::vector<double>>(static_cast<std::size_t>(opts.l_max) + 1,
                                                      std::vector<double>(Nn, 0.0)));
    for (int d = 0; d <= opts.d_max; ++d) {
        for (int l = 0; l <= opts.l_max; ++l) {
            for (std::size_t n = 0; n < Nn; ++n) {
                const int p = (d + 1) * l + 2 * static_cast<int>(n);
                double best = -std::numeric_limits<double>::infinity();
                for (std::size_t gi = 0; gi < gammas.size(); ++gi) {
                    if (logs[gi].total <= l) {
                        best = std::max(best, max_log(gi, p));
                    }
                }
                const double M = best == -std::numeric_limits<double>::infinity() ? 0.0 : std::exp(best);
                if (!std::isfinite(M)) {
                    throw NumericCapError("factorize: M_{" + std::to_string(d) + "," + std::to_string(l) + "," +
                                          std::to_string(n) + "} overflows");
                }
                r.M_table[static_cast<std::size_t>(d)][static_cast<std::size_t>(l)][n] = M;
            }
        }
    }
    r.M_select.assign(Nn, 0.0);
    r.M_majorant.assign(Nn, 0.0);
    for (std::size_t n = 0; n < Nn; ++n) {
        for (int d = 0; d <= opts.d_max; ++d) {
            for (int l = 0; l <= opts.l_max; ++l) {
                const auto& row = r.M_table[static_cast<std::size_t>(d)];
                r.M_select[n] = std::max(r.M_select[n], row[static_cast<std::size_t>(l)][n]);
                r.M_majorant[n] = std::max(r.M_majorant[n], series_term_majorant(r, d, l, n));
            }
        }
        if (!std::isfinite(r.M_majorant[n])) {
            throw NumericCapError("factorize: series majorant overflows at n = " + std::to_string(n));
        }
    }

    r.lambda = select_lambda(r.M_select, opts.epsilon, SelectOptions{opts.K, opts.offset_cap});
    r.N_series = choose_series_length(r.lambda, r.M_majorant, opts.epsilon, r.tail_bound);

    r.phi = partial_series(r.lambda, s.function(), r.psi, static_cast<std::size_t>(r.N_series));
    r.theta = compose_scale(chi_lambda_profile(r.lambda), s);
    r.identity = identity_certificate(r.lambda, s, r.theta);

    const auto product = pointwise_mul(r.theta, r.phi);
    const auto diff = pointwise_sub(product, r.psi);
    r.residual = sup_norm(diff);
    r.budget.float_part = float_budget(opts.K, r.N_series, std::max(sup_norm(r.psi), sup_norm(product)));
    r.budget.series_tail = r.tail_bound;
    r.budget.product_tail = product_tail_bound(product, s, r.lambda.tail_mass);

    Certificate& c = r.residual_certificate;
    c.kind = "factorization_residual";
    c.grid = grid;
    for (std::size_t i = 0; i < diff.size(); ++i) {
        c.observe(slack_residual(std::abs(diff[i]), r.budget.total()), grid.point(i));
    }
    c.constants = {{"residual", r.residual},
                   {"budget", r.budget.total()},
                   {"float", r.budget.float_part},
                   {"series_tail", r.budget.series_tail},
                   {"product_tail", r.budget.product_tail},
                   {"epsilon", opts.epsilon},
                   {"N", r.N_series}};
    c.finalize();
    return r;
}

double series_term_majorant(const FactorizationResult& r, int d, int l, std::size_t n)
{
    const auto lm = static_cast<std::size_t>(std::max(l, 1));
    const double factor = std::pow(1.0 + 2.0 * static_cast<double>(n) * r.C_star, l);
    return factor * r.M_table.at(static_cast<std::size_t>(d)).at(lm).at(n);
}

nlohmann::json to_json(const FactorizationResult& r)
{
    nlohmann::json j;
    j["grid"] = grid_to_json(r.theta.grid());
    j["lambda"] = to_json(r.lambda);
    j["N_series"] = r.N_series;
    j["residual"] = r.residual;
    j["tail_bound"] = r.tail_bound;
    j["budget"] = budget_json(r.budget);
    j["C_star"] = r.C_star;
    j["M_select"] = r.M_select;
    j["M_majorant"] = r.M_majorant;
    j["M_table"] = r.M_table;
    j["certificates"] = {{"reciprocal_identity", to_json(r.identity)},
                         {"factorization_residual", to_json(r.residual_certificate)},
                         {"derivative_bound", to_json(r.scale.derivative_bound)},
                         {"mollify_upper", optional_certificate(r.scale.upper)},
                         {"mollify_lower", optional_certificate(r.scale.lower)}};
    j["scale"] = r.scale.sigma.closed_form() ? r.scale.sigma.closed_form()->descriptor() : nlohmann::json("grid");
    j["notes"] = r.notes;
    j["pass"] = r.pass();
    return j;
}

// ---------------------------------------------------------------- modules

ModuleSpec ModuleSpec::self(int dim, int d_max, int l_max)
{
    ModuleSpec m;
    m.kind = Kind::self_action;
    for (const auto& g : multi_indices_up_to(dim, l_max)) {
        for (int d = 0; d <= d_max; ++d) {
            m.seminorms.push_back({d, g});
        }
    }
    return m;
}

ModuleSpec ModuleSpec::c0(int dim)
{
    ModuleSpec m;
    m.kind = Kind::c0_pointwise;
    m.seminorms.push_back({0, MultiIndex::zero(dim)});
    return m;
}

const char* to_string(ModuleSpec::Kind k)
{
    return k == ModuleSpec::Kind::self_action ? "self_action" : "c0_pointwise";
}

ModuleFactorization factorize_module_element(const GridFunction& e, const Scale& sigma, const ModuleSpec& module,
                                             const FactorizeOptions& opts)
{
    if (!(opts.epsilon > 0.0)) {
        throw DomainError("module factorization: epsilon must be positive");
    }
    if (opts.N_cap < opts.K) {
        throw DomainError("module factorization: N_cap must be at least K");
    }
    const int dim = e.grid().dim();
    ModuleSpec spec = module;
    if (spec.seminorms.empty()) {
        spec = module.kind == ModuleSpec::Kind::self_action ? ModuleSpec::self(dim, opts.d_max, opts.l_max)
                                                            : ModuleSpec::c0(dim);
    }
    int order = 1;
    for (const auto& idx : spec.seminorms) {
        if (spec.kind == ModuleSpec::Kind::c0_pointwise && (idx.d != 0 || !idx.gamma.is_zero())) {
            throw DomainError("module factorization: the C_0 module carries the sup norm only");
        }
        order = std::max(order, idx.gamma.total());
    }
    auto sm = smooth_scale(sigma, opts.mollify, opts.bump_radius, order, opts.mollify_options);
    const Scale& s = sm.sigma;
    const Grid grid = s.grid();

    ModuleFactorization r{GridFunction(), GridFunction(), GridFunction(), {}, 0, 0.0, {}, {}, {}, {}, {}, sm, {}};
    r.e = on_grid(e, grid, "e", r.notes);

    const auto Nn = static_cast<std::size_t>(opts.N_cap) + 1;
    r.M_table.assign(spec.seminorms.size(), std::vector<double>(Nn, 0.0));
    r.M_max.assign(Nn, 0.0);
    for (std::size_t n = 0; n < Nn; ++n) {
        const auto g = scale_power_times(s.function(), 2.0 * static_cast<double>(n), r.e);
        for (std::size_t m = 0; m < spec.seminorms.size(); ++m) {
            const double v = seminorm_sigma(g, s, spec.seminorms[m]);
            if (!std::isfinite(v)) {
                throw NumericCapError("module factorization: M_{" + std::to_string(m) + "," + std::to_string(n) +
                                      "} overflows");
            }
            r.M_table[m][n] = v;
            r.M_max[n] = std::max(r.M_max[n], v);
        }
    }

    r.lambda = select_lambda(r.M_max, opts.epsilon, SelectOptions{opts.K, opts.offset_cap});
    double tail_max = 0.0;
    r.N_series = choose_series_length(r.lambda, r.M_max, opts.epsilon, tail_max);

    // sigma^(2n) e must stay in the module for the powers the series uses.
    for (int n = 1; n <= std::max(r.N_series, 1); ++n) {
        const auto g = scale_power_times(s.function(), 2.0 * n, r.e);
        if (grows_toward_boundary(g)) {
            throw DomainError("module factorization: seminorm M_{m," + std::to_string(n) +
                              "} diverges (sigma^" + std::to_string(2 * n) +
                              " e grows toward the boundary; the action leaves the " + to_string(spec.kind) +
                              " module)");
        }
    }

    r.f = partial_series(r.lambda, s.function(), r.e, static_cast<std::size_t>(r.N_series));
    r.theta = compose_scale(chi_lambda_profile(r.lambda), s);
    const auto product = pointwise_mul(r.theta, r.f);
    const auto diff = pointwise_sub(product, r.e);
    r.residual = sup_norm(diff);

    const double float_part = float_budget(opts.K, r.N_series, std::max(sup_norm(r.e), sup_norm(product)));
    const double product_tail = product_tail_bound(product, s, r.lambda.tail_mass);
    const double sigma_max = s.max_value();
    const double h = min_spacing(grid);

    Certificate& c = r.certificate;
    c.kind = "module_factorization";
    c.grid = grid;
    double sup_tail = tail_max;
    for (std::size_t m = 0; m < spec.seminorms.size(); ++m) {
        const auto& idx = spec.seminorms[m];
        double tail_m = 0.0;
        const std::size_t top = std::min(Nn - 1, r.lambda.K());
        for (std::size_t n = top; n > static_cast<std::size_t>(r.N_series); --n) {
            tail_m += r.lambda.alpha(n) * r.M_table[m][n];
        }
        double budget;
        const double weight = std::pow(sigma_max, idx.d);
        if (idx.gamma.is_zero()) {
            budget = tail_m + weight * (float_part + product_tail);
            if (idx.d == 0) {
                sup_tail = tail_m;
            }
        } else {
            // Leibniz over theta: sum_{beta <= gamma} binom ||X^beta theta|| * tail
            double theta_mass = 0.0;
            for (const auto& beta : multi_indices_up_to(dim, idx.gamma.total())) {
                bool below = true;
                double binom = 1.0;
                for (std::size_t a = 0; a < beta.orders.size(); ++a) {
                    below = below && beta.orders[a] <= idx.gamma.orders[a];
                    for (int k = 1; k <= beta.orders[a]; ++k) {
                        binom = binom * (idx.gamma.orders[a] - beta.orders[a] + k) / k;
                    }
                }
                if (below) {
                    theta_mass += binom * sup_norm(derivative_or_self(r.theta, beta));
                }
            }
            const double amp = std::pow(6.0 / h, idx.gamma.total());
            budget = theta_mass * tail_max + weight * amp * (float_part + product_tail);
        }
        const double res = seminorm_sigma(diff, s, idx);
        r.seminorm_residuals.push_back({idx, res, budget});
        c.observe(slack_residual(res, budget), {static_cast<double>(m)});
    }
    r.budget = ResidualBudget{float_part, sup_tail, product_tail};
    c.constants = {{"residual", r.residual},
                   {"budget", r.budget.total()},
                   {"epsilon", opts.epsilon},
                   {"N", r.N_series},
                   {"seminorms", static_cast<double>(spec.seminorms.size())}};
    c.notes.push_back("witness = position in the module's seminorm list");
    c.notes.push_back(std::string("module: ") + to_string(spec.kind));
    c.finalize();
    return r;
}

nlohmann::json to_json(const ModuleFactorization& r)
{
    nlohmann::json j;
    j["grid"] = grid_to_json(r.theta.grid());
    j["lambda"] = to_json(r.lambda);
    j["N_series"] = r.N_series;
    j["residual"] = r.residual;
    j["budget"] = budget_json(r.budget);
    j["M_max"] = r.M_max;
    nlohmann::json sr = nlohmann::json::array();
    for (const auto& s : r.seminorm_residuals) {
        sr.push_back({{"d", s.index.d}, {"gamma", s.index.gamma.orders}, {"residual", s.residual},
                      {"budget", s.budget}});
    }
    j["seminorm_residuals"] = std::move(sr);
    j["certificates"] = {{"module_factorization", to_json(r.certificate)},
                         {"derivative_bound", to_json(r.scale.derivative_bound)},
                         {"mollify_upper", optional_certificate(r.scale.upper)},
                         {"mollify_lower", optional_certificate(r.scale.lower)}};
    j["notes"] = r.notes;
    j["pass"] = r.certificate.pass;
    return j;
}

MultiplierSpec MultiplierSpec::identity()
{
    return MultiplierSpec{};
}

MultiplierSpec MultiplierSpec::pointwise(GridFunction tau, std::string description)
{
    MultiplierSpec m;
    m.kind = Kind::pointwise;
    m.tau = std::move(tau);
    m.description = std::move(description);
    return m;
}

MultiplierSpec MultiplierSpec::scale_power(const Scale& sigma, int p)
{
    return pointwise(map_values(sigma.function(), [p](double v) { return std::pow(v, p); }),
                     "sigma^" + std::to_string(p));
}

ExtensionResult extend_multiplier(const MultiplierSpec& T, const GridFunction& e, const Scale& sigma,
                                  const ModuleSpec& module, const FactorizeOptions& opts)
{
    auto fac = factorize_module_element(e, sigma, module, opts);
    const Grid& grid = fac.theta.grid();
    GridFunction t_theta = fac.theta;
    double tau_max = 1.0;
    if (T.kind == MultiplierSpec::Kind::pointwise) {
        if (!T.tau) {
            throw DomainError("extend_multiplier: pointwise multiplier without tau");
        }
        std::vector<std::string> notes;
        const auto tau = on_grid(*T.tau, grid, "tau", notes);
        tau_max = sup_norm(tau);
        t_theta = pointwise_mul(tau, fac.theta);
        fac.notes.insert(fac.notes.end(), notes.begin(), notes.end());
    }
    fac.notes.push_back("multiplier: " + T.description);
    auto Te = pointwise_mul(t_theta, fac.f);
    const double budget = tau_max * fac.budget.total();
    return ExtensionResult{std::move(Te), std::move(fac), tau_max, budget};
}

} // namespace dmf
