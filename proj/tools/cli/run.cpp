#include "run.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>

#include "dmf/certificate.hpp"
#include "dmf/counterexamples.hpp"
#include "dmf/crossed.hpp"
#include "dmf/errors.hpp"
#include "dmf/factorization.hpp"
#include "dmf/grid_io.hpp"
#include "dmf/scales.hpp"
#include "dmf/schwartz.hpp"

namespace dmf::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

/// Collects artifacts and certificates for one job.
class Output {
public:
    Output(fs::path dir, int verbosity, std::ostream& log) : dir_(std::move(dir)), verbosity_(verbosity), log_(log)
    {
        fs::create_directories(dir_);
    }

    void write_json(const std::string& name, const json& j)
    {
        std::ofstream os(dir_ / name, std::ios::binary);
        os << j.dump(2) << '\n';
        if (!os) {
            throw Error("cannot write " + (dir_ / name).string());
        }
        artifacts_.push_back(name);
    }

    void write_text(const std::string& name, const std::string& text)
    {
        std::ofstream os(dir_ / name, std::ios::binary);
        os << text;
        if (!os) {
            throw Error("cannot write " + (dir_ / name).string());
        }
        artifacts_.push_back(name);
    }

    void write_grid(const std::string& stem, const GridFunction& f, bool csv = true)
    {
        save_binary(dir_ / (stem + ".bin"), f);
        artifacts_.push_back(stem + ".bin");
        if (csv) {
            save_csv(dir_ / (stem + ".csv"), f);
            artifacts_.push_back(stem + ".csv");
        }
    }

    void write_crossed_element(const std::string& name, const CrossedElement& F, const ActionSpec& action)
    {
        write_crossed(dir_ / name, F, action);
        artifacts_.push_back(name + "/manifest.json");
    }

    void add(const std::string& label, const Certificate& c)
    {
        certificates_.emplace_back(label, c);
        if (verbosity_ >= 2) {
            log_ << "  " << (c.pass ? "pass " : "FAIL ") << label << " (" << c.kind
                 << ", worst residual " << c.worst_residual << ")\n";
        }
    }

    void note(const std::string& line)
    {
        if (verbosity_ >= 2) {
            log_ << "  " << line << '\n';
        }
    }

    json certificates_json() const
    {
        json arr = json::array();
        for (const auto& [label, c] : certificates_) {
            json j = to_json(c);
            j["label"] = label;
            arr.push_back(std::move(j));
        }
        return arr;
    }

    std::string first_failing() const
    {
        for (const auto& [label, c] : certificates_) {
            if (!c.pass) {
                return c.kind;
            }
        }
        return {};
    }

    const fs::path& dir() const { return dir_; }
    const std::vector<std::string>& artifacts() const { return artifacts_; }

private:
    fs::path dir_;
    int verbosity_;
    std::ostream& log_;
    std::vector<std::string> artifacts_;
    std::vector<std::pair<std::string, Certificate>> certificates_;
};

struct Context {
    const JobSpec& job;
    Output& out;
    Fields params;
    Fields inputs;

    Grid grid() const
    {
        if (!job.grid) {
            throw UsageError("/grid", "required field is missing");
        }
        return parse_grid(*job.grid, "/grid");
    }

    GridFunction function(const std::string& key, const Grid& g, const json& fallback = nullptr) const
    {
        const json& j = inputs.has(key) ? inputs.raw(key) : fallback;
        if (j.is_null()) {
            throw UsageError(inputs.path(key), "required field is missing");
        }
        return resolve_function(j, g, inputs.path(key), job.base_dir);
    }

    Scale scale(const std::string& key, const Grid& g, const json& fallback = nullptr,
                ScaleKind kind = ScaleKind::on_space) const
    {
        const json& j = inputs.has(key) ? inputs.raw(key) : fallback;
        if (j.is_null()) {
            throw UsageError(inputs.path(key), "required field is missing");
        }
        return resolve_scale(j, g, inputs.path(key), job.base_dir, kind);
    }
};

FactorizeOptions factorize_options(const Fields& p)
{
    FactorizeOptions o;
    o.epsilon = p.positive("epsilon", o.epsilon);
    o.d_max = p.integer("d_max", o.d_max, 0);
    o.l_max = p.integer("l_max", o.l_max, 1);
    o.K = p.integer("K", o.K, 1);
    o.N_cap = p.integer("N_cap", std::max(o.N_cap, o.K), 1);
    if (o.N_cap < o.K) {
        throw UsageError(p.path("N_cap"), "must be >= K");
    }
    o.offset_cap = p.integer("offset_cap", o.offset_cap, 0);
    o.mollify = p.flag("mollify", o.mollify);
    o.bump_radius = p.positive("bump_radius", o.bump_radius);
    o.mollify_options.d_max = p.integer("fit_d_max", o.mollify_options.d_max, 1);
    o.mollify_options.C_max = p.positive("C_max", o.mollify_options.C_max);
    return o;
}

ModuleSpec module_spec(const Fields& p, int dim, const FactorizeOptions& o)
{
    const auto kind = p.text("module", "self");
    if (kind == "self") {
        return ModuleSpec::self(dim, o.d_max, o.l_max);
    }
    if (kind == "c0") {
        return ModuleSpec::c0(dim);
    }
    throw UsageError(p.path("module"), "expected 'self' or 'c0'");
}

GroupWindow parse_window(const Fields& w)
{
    const auto group = w.text("group", "Z");
    try {
        if (group == "Z") {
            return GroupWindow::integers(w.integer("radius", 4, 0));
        }
        if (group == "R") {
            return GroupWindow::sampled_reals(w.positive("half_width", 1.0), w.positive("h", 1.0 / 32.0));
        }
    } catch (const DomainError& e) {
        throw UsageError(w.where(), e.what());
    }
    throw UsageError(w.path("group"), "expected 'Z' or 'R'");
}

std::string fmt(double v)
{
    return json(v).dump();
}

// ---------------------------------------------------------------- factorize

void run_factorize(Context& ctx)
{
    const Grid grid = ctx.grid();
    const auto opts = factorize_options(ctx.params);
    const auto sigma = ctx.scale("sigma", grid);
    const auto mode = ctx.params.text("mode", "function");
    if (mode == "function") {
        const auto psi = ctx.function("psi", grid);
        const auto r = factorize_function(psi, sigma, opts);
        ctx.out.write_grid("theta", r.theta);
        ctx.out.write_grid("phi", r.phi);
        ctx.out.write_grid("psi", r.psi);
        const int decay_d = ctx.params.integer("decay_d_max", 6, 0);
        const auto decay = decay_report(r.theta, r.scale.sigma, decay_d, 0);
        ctx.out.write_text("theta_decay.csv", to_csv(decay));
        ctx.out.add("reciprocal_identity", r.identity);
        ctx.out.add("factorization_residual", r.residual_certificate);
        ctx.out.add("derivative_bound", r.scale.derivative_bound);
        if (r.scale.upper) {
            ctx.out.add("mollify_upper", *r.scale.upper);
        }
        if (r.scale.lower) {
            ctx.out.add("mollify_lower", *r.scale.lower);
        }
        json j = to_json(r);
        j["theta_decay"] = to_json(decay);
        ctx.out.write_json("result.json", j);
        ctx.out.note("residual " + fmt(r.residual) + ", budget " + fmt(r.budget.total()));
        return;
    }
    if (mode != "module") {
        throw UsageError(ctx.params.path("mode"), "expected 'function' or 'module'");
    }
    const auto e = ctx.function("e", grid);
    const auto module = module_spec(ctx.params, grid.dim(), opts);
    const Fields mult = ctx.params.object("multiplier");
    std::optional<ExtensionResult> ext;
    if (mult.has("scale_power")) {
        ext = extend_multiplier(MultiplierSpec::scale_power(sigma, mult.integer("scale_power", 0, 0)), e, sigma,
                                module, opts);
    } else if (mult.has("tau")) {
        auto tau = resolve_function(mult.raw("tau"), grid, mult.path("tau"), ctx.job.base_dir);
        ext = extend_multiplier(MultiplierSpec::pointwise(std::move(tau), "tau"), e, sigma, module, opts);
    }
    const ModuleFactorization r = ext ? ext->factorization : factorize_module_element(e, sigma, module, opts);
    ctx.out.write_grid("theta", r.theta);
    ctx.out.write_grid("f", r.f);
    ctx.out.write_grid("e", r.e);
    ctx.out.add("module_factorization", r.certificate);
    ctx.out.add("derivative_bound", r.scale.derivative_bound);
    if (r.scale.upper) {
        ctx.out.add("mollify_upper", *r.scale.upper);
    }
    if (r.scale.lower) {
        ctx.out.add("mollify_lower", *r.scale.lower);
    }
    json j = to_json(r);
    j["module"] = to_string(module.kind);
    if (ext) {
        ctx.out.write_grid("Te", ext->Te);
        j["extension"] = {{"tau_max", ext->tau_max}, {"budget", ext->budget}};
    }
    ctx.out.write_json("result.json", j);
}

// ---------------------------------------------------------------- mollify

void run_mollify(Context& ctx)
{
    const Grid grid = ctx.grid();
    const auto sigma = ctx.scale("sigma", grid);
    MollifyOptions mo;
    mo.d_max = ctx.params.integer("d_max", mo.d_max, 1);
    mo.C_max = ctx.params.positive("C_max", mo.C_max);
    const int order = ctx.params.integer("derivative_order", mo.derivative_order, 1);
    const double radius = ctx.params.positive("bump_radius", 0.25);
    const auto s = smooth_scale(sigma, true, radius, order, mo);
    ctx.out.write_grid("sigma_tilde", s.sigma.function());
    ctx.out.add("mollify_upper", *s.upper);
    ctx.out.add("mollify_lower", *s.lower);
    ctx.out.add("derivative_bound", s.derivative_bound);
    double deviation = 0.0;
    for (std::size_t i = 0; i < s.sigma.function().size(); ++i) {
        const auto x = s.sigma.grid().point(i);
        deviation = std::max(deviation, std::abs(s.sigma[i] - sigma.evaluate(x)));
    }
    json j;
    j["grid"] = grid_to_json(s.sigma.grid());
    j["bump_radius"] = radius;
    j["scale"] = s.sigma.closed_form() ? s.sigma.closed_form()->descriptor() : json("grid");
    j["sup_deviation_from_input"] = deviation;
    j["certificates"] = {{"mollify_upper", to_json(*s.upper)},
                         {"mollify_lower", to_json(*s.lower)},
                         {"derivative_bound", to_json(s.derivative_bound)}};
    ctx.out.write_json("result.json", j);
}

// ---------------------------------------------------------------- check-scale

void run_check_scale(Context& ctx)
{
    const Grid grid = ctx.grid();
    const auto sigma = ctx.scale("sigma", grid);
    FitOptions fit;
    fit.d_max = ctx.params.integer("d_max", fit.d_max, 1);
    fit.C_max = ctx.params.positive("C_max", fit.C_max);
    std::vector<std::string> checks{"proper"};
    if (ctx.params.has("checks")) {
        const auto& c = ctx.params.raw("checks");
        if (!c.is_array()) {
            throw UsageError(ctx.params.path("checks"), "expected an array of check names");
        }
        checks.clear();
        for (std::size_t i = 0; i < c.size(); ++i) {
            if (!c[i].is_string()) {
                throw UsageError(ctx.params.path("checks") + "/" + std::to_string(i), "expected a string");
            }
            checks.push_back(c[i].get<std::string>());
        }
    }
    json results = json::object();
    for (std::size_t i = 0; i < checks.size(); ++i) {
        const auto& name = checks[i];
        const auto where = ctx.params.path("checks") + "/" + std::to_string(i);
        if (name == "proper") {
            ctx.out.add(name, check_proper(sigma));
        } else if (name == "domination" || name == "equivalence") {
            const auto gamma = ctx.scale("gamma", grid);
            if (name == "domination") {
                ctx.out.add(name, fit_domination(sigma, gamma, fit.d_max, fit.C_max));
            } else {
                auto [a, b] = equivalent(sigma, gamma, fit.d_max, fit.C_max);
                ctx.out.add("equivalence_sigma_dominates", a);
                ctx.out.add("equivalence_gamma_dominates", b);
            }
        } else if (name == "translational_equivalence") {
            const auto flat = ctx.params.numbers("shifts", {1.0, -1.0});
            std::vector<std::vector<double>> shifts;
            for (double s : flat) {
                std::vector<double> v(static_cast<std::size_t>(grid.dim()), 0.0);
                v[0] = s;
                shifts.push_back(std::move(v));
            }
            ctx.out.add(name, check_translational_equivalence(sigma, shifts, fit));
        } else if (name == "subpolynomial") {
            ctx.out.add(name, check_subpolynomial(sigma, {}, fit));
        } else if (name == "derivative_bound") {
            ctx.out.add(name, derivative_bound_certificate(sigma, ctx.params.integer("derivative_order", 2, 1), fit));
        } else if (name == "scaled_space") {
            const Grid gg = parse_grid(ctx.params.raw("group_grid"), ctx.params.path("group_grid"));
            const auto omega = ctx.scale("omega", gg, nullptr, ScaleKind::on_group);
            GroupAction action;
            action.kind = GroupAction::Kind::translation;
            action.unit.assign(static_cast<std::size_t>(grid.dim()), 0.0);
            action.unit[0] = ctx.params.number("unit", 1.0);
            ctx.out.add(name, check_scaled_space(sigma, omega, action, fit));
        } else {
            throw UsageError(where, "unknown check '" + name +
                                        "' (proper, domination, equivalence, translational_equivalence, "
                                        "subpolynomial, derivative_bound, scaled_space)");
        }
    }
    json j;
    j["grid"] = grid_to_json(grid);
    j["checks"] = checks;
    ctx.out.write_json("result.json", j);
}

// ---------------------------------------------------------------- crossed products

class RandomSlices {
public:
    explicit RandomSlices(std::uint64_t seed) : sampler_(seed) {}

    /// Random values on the points with |x| <= support, zero elsewhere.
    GridFunction function(const Grid& grid, double support)
    {
        const auto s = sampler_.next(grid.size());
        std::vector<double> v(grid.size(), 0.0);
        for (std::size_t i = 0; i < grid.size(); ++i) {
            const auto x = grid.point(i);
            if (euclidean_norm(x) <= support + 1e-12) {
                v[i] = s.values[i];
            }
        }
        return GridFunction(grid, std::move(v));
    }

    CrossedElement element(const GroupWindow& w, const Grid& grid, std::int64_t group_support, double support)
    {
        auto F = CrossedElement::zero(w, grid);
        for (std::size_t k = 0; k < w.size(); ++k) {
            if (std::abs(w.lattice(k)) <= group_support) {
                F.slices[k] = function(grid, support);
            }
        }
        return F;
    }

private:
    SequenceSampler sampler_;
};

double slice_distance(const CrossedElement& A, const CrossedElement& B)
{
    double d = 0.0;
    for (std::size_t k = 0; k < A.slices.size(); ++k) {
        d = std::max(d, sup_norm(pointwise_sub(A.slices[k], B.slices[k])));
    }
    return d;
}

Certificate tolerance_certificate(const std::string& kind, const std::vector<double>& residuals, double tol)
{
    Certificate c;
    c.kind = kind;
    double worst = 0.0;
    for (std::size_t i = 0; i < residuals.size(); ++i) {
        worst = std::max(worst, residuals[i]);
        c.observe(residuals[i] - tol, {static_cast<double>(i)});
    }
    if (residuals.empty()) {
        c.worst_residual = -tol;
    }
    c.constants = {{"tolerance", tol}, {"max_residual", worst}};
    c.notes.push_back("witness = trial index");
    c.finalize();
    return c;
}

void run_convolve_demo(Context& ctx)
{
    const Grid grid = ctx.grid();
    const Fields wf = ctx.params.object("window");
    const GroupWindow w = parse_window(wf);
    const int trials = ctx.params.integer("trials", 100, 0);
    const auto group_support = static_cast<std::int64_t>(ctx.params.integer("group_support", 1, 0));
    const double space_support = ctx.params.positive("space_support", 2.0);
    const double tol = ctx.params.positive("tolerance", 1e-9);
    const int dprime = ctx.params.integer("dprime_max", 3, 0);
    const int d_max = ctx.params.integer("continuity_d_max", 3, 0);
    const auto sigma = ctx.scale("sigma", grid, "one_plus_x2");
    const auto omega = ctx.scale("omega", w.grid(), "one_plus_abs", ScaleKind::on_group);
    const ActionSpec action = make_translation_action(sigma, omega, ctx.params.number("unit", 1.0), 0);
    ctx.out.add("scaled_space", *action.scaled_space);

    RandomSlices rng(ctx.job.seed);
    std::vector<double> assoc, module_compat;
    std::vector<GridFunction> samples;
    CrossedElement first_F1, first_F2;
    GridFunction first_e;
    for (int t = 0; t < trials; ++t) {
        auto F1 = rng.element(w, grid, group_support, space_support);
        auto F2 = rng.element(w, grid, group_support, space_support);
        auto F3 = rng.element(w, grid, group_support, space_support);
        const auto e = rng.function(grid, space_support);
        const auto left = convolve(convolve(F1, F2, action), F3, action);
        const auto right = convolve(F1, convolve(F2, F3, action), action);
        assoc.push_back(slice_distance(left, right));
        const auto lhs = act_on_module(convolve(F1, F2, action), e, action);
        const auto rhs = act_on_module(F1, act_on_module(F2, e, action), action);
        module_compat.push_back(sup_norm(pointwise_sub(lhs, rhs)));
        if (t < 8) {
            samples.push_back(e);
        }
        if (t == 0) {
            first_F1 = F1;
            first_F2 = F2;
            first_e = e;
        }
    }
    ctx.out.add("convolution_associativity", tolerance_certificate("convolution_associativity", assoc, tol));
    ctx.out.add("module_compatibility", tolerance_certificate("module_compatibility", module_compat, tol));

    json extra = json::object();
    if (trials > 0) {
        const auto a = rng.function(grid, space_support);
        Certificate cov;
        cov.kind = "covariance";
        for (std::size_t k = 0; k < w.size(); ++k) {
            const auto c = check_covariance(w, k, a, first_e, action);
            cov.observe(c.worst_residual, {w.point(k)});
        }
        cov.notes.push_back("witness = group element");
        cov.finalize();
        ctx.out.add("covariance", cov);
        ctx.out.add("temperedness", temperedness_certificate(action, sigma, omega, w, samples, dprime));
        ctx.out.add("module_estimate", module_estimate_certificate(first_F1, first_e, action, sigma, omega, dprime));
        const auto sub = check_subpolynomial(omega);
        ctx.out.add("omega_subpolynomial", sub);
        if (sub.pass) {
            ctx.out.add("convolution_continuity",
                        convolution_continuity_certificate(first_F1, first_F2, action, omega, sub, d_max));
        }
        auto product = convolve(first_F1, first_F2, action);
        product.omega = omega;
        ctx.out.write_crossed_element("F1_times_F2", product, action);
        extra["truncated_mass"] = product.truncated_mass;
    }

    std::string csv = "trial,associativity,module_compatibility\n";
    for (std::size_t i = 0; i < assoc.size(); ++i) {
        csv += std::to_string(i) + "," + fmt(assoc[i]) + "," + fmt(module_compat[i]) + "\n";
    }
    ctx.out.write_text("residuals.csv", csv);
    json j;
    j["grid"] = grid_to_json(grid);
    j["window"] = w.descriptor();
    j["action"] = action.descriptor();
    j["seed"] = ctx.job.seed;
    j["trials"] = trials;
    j["max_associativity_residual"] = assoc.empty() ? 0.0 : *std::max_element(assoc.begin(), assoc.end());
    j["max_module_residual"] =
        module_compat.empty() ? 0.0 : *std::max_element(module_compat.begin(), module_compat.end());
    j["demo"] = extra;
    ctx.out.write_json("report.json", j);
}

void run_crossed_factorize(Context& ctx)
{
    const Grid grid = ctx.grid();
    const GroupWindow w = parse_window(ctx.params.object("window"));
    auto opts = factorize_options(ctx.params);
    const auto sigma = ctx.scale("sigma", grid, "one_plus_x2");
    const auto omega = ctx.scale("omega", w.grid(), "one_plus_abs", ScaleKind::on_group);
    const auto e = ctx.function("e", grid, "x_gaussian");
    const json f_default = w.kind() == GroupWindow::Kind::z_window
                               ? json("delta")
                               : json{{"catalog", "bump"}, {"radius", 0.5 * static_cast<double>(w.radius()) * w.spacing()},
                                      {"normalize", true}};
    const auto f = ctx.function("f", w.grid(), f_default);
    const double tol = ctx.params.positive("tolerance", 1e-9);

    // e = theta f_e in the module; then a = theta, e~ = f_e.
    const auto mf = factorize_module_element(e, sigma, module_spec(ctx.params, grid.dim(), opts), opts);
    ctx.out.add("module_factorization", mf.certificate);
    const Grid& g2 = mf.theta.grid();
    const auto sigma2 = sigma.restricted(g2);
    const ActionSpec action = make_translation_action(sigma2, omega, ctx.params.number("unit", 1.0), 0);
    ctx.out.add("scaled_space", *action.scaled_space);
    const auto cf = factorize_crossed(mf.f, f, w, mf.theta, action, tol);
    ctx.out.add("crossed_factorization", cf.certificate);

    // Distance to the Garding smoothing of e itself, against the module budget.
    const auto smoothed = garding_smooth(f, w, mf.e, action);
    const auto be = act_on_module(cf.b, mf.f, action);
    const double to_e = sup_norm(pointwise_sub(be, smoothed));
    double f_mass = 0.0;
    for (std::size_t k = 0; k < w.size(); ++k) {
        f_mass += w.weight() * std::abs(f[k]);
    }

    json approx = json::array();
    if (w.kind() == GroupWindow::Kind::r_sampled) {
        const int levels = ctx.params.integer("approx_levels", 3, 1);
        const double r0 = ctx.params.positive("approx_r0", static_cast<double>(w.radius()) * w.spacing());
        const auto a = mf.theta;
        const auto ae = pointwise_mul(a, mf.e);
        std::vector<double> dist;
        for (int n = 0; n < levels; ++n) {
            const auto Psi = approx_identity(n, a, w, r0);
            const double d = sup_norm(pointwise_sub(act_on_module(Psi, mf.e, action), ae));
            dist.push_back(d);
            approx.push_back({{"n", n}, {"radius", std::ldexp(r0, -n)}, {"distance", d}});
        }
        Certificate c;
        c.kind = "approximate_identity";
        for (std::size_t n = 1; n < dist.size(); ++n) {
            c.observe(dist[n] - (1.0 - kRelativeSlack) * dist[n - 1], {static_cast<double>(n)});
        }
        if (dist.size() < 2) {
            c.worst_residual = -1.0;
        }
        c.notes.push_back("witness = shrink index n; requires d_n < (1 - 1e-12) d_(n-1)");
        c.finalize();
        ctx.out.add("approximate_identity", c);
    }

    auto b = cf.b;
    b.omega = omega;
    ctx.out.write_crossed_element("b", b, action);
    ctx.out.write_grid("a", mf.theta);
    ctx.out.write_grid("e_tilde", mf.f);
    json j;
    j["window"] = w.descriptor();
    j["grid"] = grid_to_json(g2);
    j["residual"] = cf.residual;
    j["distance_to_smoothed_e"] = to_e;
    j["smoothed_e_budget"] = f_mass * mf.budget.total();
    j["module_factorization"] = to_json(mf);
    j["approximate_identity"] = approx;
    ctx.out.write_json("report.json", j);
}

// ---------------------------------------------------------------- counterexamples

void run_counterexamples(Context& ctx)
{
    const int trials = ctx.params.integer("trials", 1000, 0);
    const int length = ctx.params.integer("length", 50, 0);
    std::vector<std::int64_t> windows;
    for (double v : ctx.params.numbers("windows", {100, 1000, 10000})) {
        if (!(v >= 1.0) || v != std::floor(v)) {
            throw UsageError(ctx.params.path("windows"), "windows must be positive integers");
        }
        windows.push_back(static_cast<std::int64_t>(v));
    }
    const auto R = ctx.params.numbers("R_values", {0.0, 1.0, 10.0, 100.0, 1000.0});
    for (std::size_t i = 0; i < R.size(); ++i) {
        if (!(R[i] >= 0.0)) {
            throw UsageError(ctx.params.path("R_values") + "/" + std::to_string(i), "must be nonnegative");
        }
    }
    const auto l1 = check_l1_counterexample(static_cast<std::size_t>(trials), static_cast<std::size_t>(length),
                                            ctx.job.seed, windows);
    const auto esc = multiplier_escape_demo(R);
    ctx.out.add("l_half_product", l1.product);
    ctx.out.add("l_half_sum", l1.sum);
    ctx.out.add("multiplier_escape", esc.certificate);
    std::string csv = "window,l1_partial_sum,half_partial_sum\n";
    for (const auto& row : l1.witness) {
        csv += std::to_string(row.window) + "," + fmt(row.l1) + "," + fmt(row.half) + "\n";
    }
    ctx.out.write_text("partial_sums.csv", csv);
    std::string csv2 = "R,inf_Tf,expected\n";
    for (const auto& row : esc.rows) {
        csv2 += fmt(row.R) + "," + fmt(row.inf_Tf) + "," + fmt(row.expected) + "\n";
    }
    ctx.out.write_text("escape.csv", csv2);
    ctx.out.write_json("report.json", {{"l1_counterexample", to_json(l1)}, {"multiplier_escape", to_json(esc)}});
}

// ---------------------------------------------------------------- report

void collect_certificates(const json& j, const std::string& where, std::vector<std::pair<std::string, Certificate>>& out)
{
    if (j.is_object()) {
        if (j.contains("kind") && j.contains("worst_residual") && j.contains("pass") && j.contains("constants")) {
            out.emplace_back(where, certificate_from_json(j));
            return;
        }
        for (const auto& [k, v] : j.items()) {
            collect_certificates(v, where + "/" + k, out);
        }
    } else if (j.is_array()) {
        for (std::size_t i = 0; i < j.size(); ++i) {
            collect_certificates(j[i], where + "/" + std::to_string(i), out);
        }
    }
}

void run_report(Context& ctx)
{
    std::vector<std::string> dirs;
    if (ctx.inputs.has("dirs")) {
        const auto& d = ctx.inputs.raw("dirs");
        if (!d.is_array() || d.empty()) {
            throw UsageError(ctx.inputs.path("dirs"), "expected a nonempty array of directories");
        }
        for (std::size_t i = 0; i < d.size(); ++i) {
            if (!d[i].is_string()) {
                throw UsageError(ctx.inputs.path("dirs") + "/" + std::to_string(i), "expected a string");
            }
            dirs.push_back(d[i].get<std::string>());
        }
    } else {
        dirs.push_back(ctx.inputs.text("dir", ""));
        if (dirs.back().empty()) {
            throw UsageError(ctx.inputs.path("dir"), "required field is missing (or give dirs)");
        }
    }
    json entries = json::array();
    Certificate loads;
    loads.kind = "artifact_reload";
    Certificate consistency;
    consistency.kind = "certificate_consistency";
    std::size_t n_files = 0;
    std::size_t n_certs = 0;
    for (std::size_t di = 0; di < dirs.size(); ++di) {
        fs::path root(dirs[di]);
        if (root.is_relative() && !ctx.job.base_dir.empty()) {
            root = ctx.job.base_dir / root;
        }
        if (!fs::is_directory(root)) {
            throw UsageError(ctx.inputs.path(ctx.inputs.has("dirs") ? "dirs/" + std::to_string(di) : "dir"),
                             "no such directory '" + root.string() + "'");
        }
        std::vector<fs::path> files;
        for (const auto& p : fs::recursive_directory_iterator(root)) {
            if (p.is_regular_file()) {
                files.push_back(p.path());
            }
        }
        std::sort(files.begin(), files.end());
        for (const auto& file : files) {
            const auto rel = dirs[di] + "/" + fs::relative(file, root).generic_string();
            const auto ext = file.extension().string();
            json entry = {{"file", rel}};
            try {
                // Grid CSVs are the ones written next to a binary twin.
                const bool grid_csv = ext == ".csv" && fs::exists(fs::path(file).replace_extension(".bin"));
                if (ext == ".bin" || grid_csv) {
                    const auto f = load_grid_function(file);
                    entry["type"] = "grid_function";
                    entry["points"] = f.size();
                } else if (file.filename() == "manifest.json") {
                    const auto F = read_crossed(file.parent_path());
                    entry["type"] = "crossed_element";
                    entry["slices"] = F.slices.size();
                } else if (ext == ".json") {
                    std::ifstream is(file);
                    const auto j = json::parse(is);
                    std::vector<std::pair<std::string, Certificate>> certs;
                    collect_certificates(j, "", certs);
                    entry["type"] = "json";
                    json cj = json::array();
                    for (const auto& [where, c] : certs) {
                        const bool ok = self_consistent(c);
                        consistency.observe(ok ? -1.0 : 1.0, {static_cast<double>(n_certs)});
                        ++n_certs;
                        cj.push_back({{"at", where}, {"kind", c.kind}, {"pass", c.pass}, {"consistent", ok}});
                        if (!c.pass) {
                            Certificate failed = c;
                            ctx.out.add(rel + where, failed);
                        }
                    }
                    entry["certificates"] = cj;
                } else {
                    entry["type"] = "table";
                }
                entry["loaded"] = true;
                loads.observe(-1.0, {static_cast<double>(n_files)});
            } catch (const std::exception& ex) {
                entry["loaded"] = false;
                entry["error"] = ex.what();
                loads.observe(1.0, {static_cast<double>(n_files)});
            }
            ++n_files;
            entries.push_back(std::move(entry));
        }
    }
    if (n_files == 0) {
        loads.worst_residual = 1.0;
        loads.notes.push_back("no artifacts found");
    }
    if (n_certs == 0) {
        consistency.worst_residual = -1.0;
    }
    loads.constants = {{"files", static_cast<double>(n_files)}};
    consistency.constants = {{"certificates", static_cast<double>(n_certs)}};
    loads.finalize();
    consistency.finalize();
    ctx.out.add("artifact_reload", loads);
    ctx.out.add("certificate_consistency", consistency);
    ctx.out.write_json("summary.json", {{"files", entries}, {"file_count", n_files}, {"certificate_count", n_certs}});
}

void dispatch(Context& ctx)
{
    switch (ctx.job.command) {
    case Command::factorize:
        return run_factorize(ctx);
    case Command::mollify:
        return run_mollify(ctx);
    case Command::check_scale:
        return run_check_scale(ctx);
    case Command::convolve_demo:
        return run_convolve_demo(ctx);
    case Command::crossed_factorize:
        return run_crossed_factorize(ctx);
    case Command::counterexamples:
        return run_counterexamples(ctx);
    case Command::report:
        return run_report(ctx);
    }
}

fs::path output_dir(const JobSpec& job, const RunOptions& opts)
{
    if (!opts.out_dir.empty()) {
        return opts.out_dir;
    }
    if (job.output_dir.empty()) {
        throw UsageError("/output_dir", "no output directory (give output_dir or --out)");
    }
    fs::path p(job.output_dir);
    return p.is_relative() && !job.base_dir.empty() ? job.base_dir / p : p;
}

} // namespace

RunOutcome run(const JobSpec& job, const RunOptions& opts)
{
    std::ostream& log = opts.log ? *opts.log : std::cerr;
    RunOutcome outcome;
    fs::path dir;
    try {
        dir = output_dir(job, opts);
    } catch (const UsageError& e) {
        outcome.exit_code = exit_usage;
        outcome.message = e.what();
        if (opts.verbosity >= 1) {
            log << "usage error: " << e.what() << '\n';
        }
        return outcome;
    }
    Output out(dir, opts.verbosity, log);
    json status;
    status["command"] = to_string(job.command);
    try {
        Context ctx{job, out, Fields(job.parameters, "/parameters"), Fields(job.inputs, "/inputs")};
        dispatch(ctx);
        outcome.failing_kind = out.first_failing();
        outcome.exit_code = outcome.failing_kind.empty() ? exit_pass : exit_certificate;
    } catch (const UsageError& e) {
        outcome.exit_code = exit_usage;
        outcome.message = e.what();
        status["field"] = e.path();
    } catch (const NumericCapError& e) {
        outcome.exit_code = exit_numeric_cap;
        outcome.message = e.what();
    } catch (const nlohmann::json::exception& e) {
        outcome.exit_code = exit_usage;
        outcome.message = std::string("malformed input: ") + e.what();
    } catch (const std::exception& e) {
        // A violated precondition inside the computation: record it as a failed certificate.
        Certificate c;
        c.kind = "precondition";
        c.worst_residual = 1.0;
        c.notes.push_back(e.what());
        c.finalize();
        out.add("precondition", c);
        outcome.exit_code = exit_certificate;
        outcome.failing_kind = c.kind;
        outcome.message = e.what();
    }
    status["exit_code"] = outcome.exit_code;
    status["failing_kind"] = outcome.failing_kind.empty() ? json(nullptr) : json(outcome.failing_kind);
    status["message"] = outcome.message;
    status["certificates"] = out.certificates_json();
    status["artifacts"] = out.artifacts();
    try {
        out.write_json("certificates.json", {{"certificates", status["certificates"]}});
        status["artifacts"] = out.artifacts();
        out.write_json("status.json", status);
    } catch (const std::exception& e) {
        log << "error: " << e.what() << '\n';
        if (outcome.exit_code == exit_pass) {
            outcome.exit_code = exit_certificate;
        }
    }
    outcome.artifacts = out.artifacts();
    if (opts.verbosity >= 1) {
        log << to_string(job.command) << ": ";
        switch (outcome.exit_code) {
        case exit_pass:
            log << "pass";
            break;
        case exit_certificate:
            log << "certificate failure (" << outcome.failing_kind << ")";
            break;
        case exit_usage:
            log << "usage error";
            break;
        default:
            log << "numeric cap exhausted";
        }
        if (!outcome.message.empty()) {
            log << ": " << outcome.message;
        }
        log << '\n';
    }
    return outcome;
}

RunOutcome run_file(const fs::path& job_path, const RunOptions& opts)
{
    try {
        return run(load_job(job_path), opts);
    } catch (const UsageError& e) {
        std::ostream& log = opts.log ? *opts.log : std::cerr;
        if (opts.verbosity >= 1) {
            log << "usage error: " << e.what() << '\n';
        }
        RunOutcome o;
        o.exit_code = exit_usage;
        o.message = e.what();
        return o;
    }
}

} // namespace dmf::cli
