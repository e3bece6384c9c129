#include "dmf/scales.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <sstream>

#include "dmf/errors.hpp"

namespace dmf {

namespace {

void require_same_grid(const Scale& a, const Scale& b, const char* what)
{
    if (!(a.grid() == b.grid())) {
        throw GridMismatch(std::string(what) + ": scales live on different grids (" + a.grid().describe() +
                           " vs " + b.grid().describe() + ")");
    }
}

// Samples of an inequality lhs <= C * b1^d * b2^l + D. Ratios are formed in
// the log domain so large powers never overflow during fitting.
struct Samples {
    std::vector<double> lhs;
    std::vector<double> b1;
    std::vector<double> b2; // empty when there is a single base
    std::function<std::vector<double>(std::size_t)> witness;

    std::size_t size() const { return lhs.size(); }
    double base2(std::size_t i) const { return b2.empty() ? 1.0 : b2[i]; }
};

double max_ratio(const Samples& s, int d, int l, double D)
{
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < s.size(); ++i) {
        const double excess = s.lhs[i] - D;
        if (excess <= 0.0) {
            continue;
        }
        double lg = std::log(excess) - d * std::log(s.b1[i]);
        if (!s.b2.empty()) {
            lg -= l * std::log(s.b2[i]);
        }
        best = std::max(best, lg);
    }
    return best == -std::numeric_limits<double>::infinity() ? 0.0 : std::exp(best);
}

void record_residuals(Certificate& c, const Samples& s, double C, int d, int l, double D)
{
    for (std::size_t i = 0; i < s.size(); ++i) {
        const double rhs = C * std::pow(s.b1[i], d) * std::pow(s.base2(i), l) + D;
        const double r = slack_residual(s.lhs[i], rhs);
        if (c.witness.empty() || r > c.worst_residual) {
            c.worst_residual = r;
            c.witness = s.witness(i);
        }
    }
}

// Smallest d in [d_lo, d_max] whose max ratio fits under the cap; on failure
// records C = C_max at d_max so the residual exposes the violation.
Certificate fit_single(std::string kind, const Samples& s, int d_lo, int d_max, double C_max, double D,
                       const Grid& grid)
{
    if (d_max < d_lo) {
        throw DomainError(kind + ": d_max must be at least " + std::to_string(d_lo));
    }
    Certificate c;
    c.kind = std::move(kind);
    c.grid = grid;
    c.constants["C_max"] = C_max;
    c.constants["D"] = D;
    int d_used = d_max;
    double C = C_max;
    bool fitted = false;
    for (int d = d_lo; d <= d_max; ++d) {
        const double r = max_ratio(s, d, 0, D);
        if (r <= C_max) {
            d_used = d;
            C = r;
            fitted = true;
            break;
        }
    }
    if (!fitted) {
        c.notes.push_back("required constant exceeds C_max for every d <= d_max");
    }
    c.constants["C"] = C;
    c.constants["d"] = d_used;
    if (s.size() == 0) {
        c.notes.push_back("no sample points");
    }
    record_residuals(c, s, C, d_used, 0, D);
    c.finalize();
    return c;
}

std::vector<double> trapezoid_weights(const Grid& grid)
{
    std::vector<double> w(grid.size(), 1.0);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        for (int a = 0; a < grid.dim(); ++a) {
            const Axis& ax = grid.axis(a);
            const auto k = grid.lattice_index(i, a);
            double wa = ax.h;
            if (ax.count > 1 && (k == ax.first || k == ax.last())) {
                wa *= 0.5;
            }
            w[i] *= wa;
        }
    }
    return w;
}

struct KernelTerm {
    std::vector<double> g;
    double weight;
};

std::vector<KernelTerm> kernel_terms(const GridFunction& kernel)
{
    const auto w = trapezoid_weights(kernel.grid());
    std::vector<KernelTerm> terms;
    for (std::size_t i = 0; i < kernel.size(); ++i) {
        if (kernel[i] != 0.0) {
            terms.push_back({kernel.grid().point(i), w[i] * kernel[i]});
        }
    }
    return terms;
}

double apply_terms(const std::vector<KernelTerm>& terms, const ClosedForm& base, std::span<const double> m)
{
    double acc = 0.0;
    double buf[kMaxDim];
    for (const auto& t : terms) {
        for (std::size_t a = 0; a < m.size(); ++a) {
            buf[a] = m[a] - t.g[a];
        }
        acc += t.weight * base(std::span<const double>(buf, m.size()));
    }
    return acc;
}

GridFunction validated_scale_values(GridFunction f)
{
    std::vector<double> v(f.values().begin(), f.values().end());
    bool clamped = false;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (v[i] < 1.0) {
            if (v[i] >= 1.0 - 1e-12) {
                v[i] = 1.0;
                clamped = true;
            } else {
                throw DomainError("scale: value " + std::to_string(v[i]) + " < 1 at " +
                                  point_string(f.grid().point(i)));
            }
        }
    }
    if (!clamped) {
        return f;
    }
    return GridFunction(f.grid(), std::move(v), f.policy());
}

} // namespace

// ---------------------------------------------------------------- Scale

Scale::Scale(GridFunction values, ScaleKind kind, std::optional<ClosedForm> closed_form)
    : values_(validated_scale_values(std::move(values))), kind_(kind), closed_form_(std::move(closed_form))
{
}

Scale Scale::from_closed_form(const ClosedForm& form, const Grid& grid, ScaleKind kind)
{
    return Scale(sample(PointFunction([&form](std::span<const double> x) { return form(x); }), grid), kind,
                 form);
}

double Scale::max_value() const
{
    return sup_norm(values_);
}

std::optional<double> Scale::try_evaluate(std::span<const double> x) const
{
    if (closed_form_) {
        return (*closed_form_)(x);
    }
    if (const auto idx = values_.grid().find(x)) {
        return values_[*idx];
    }
    return std::nullopt;
}

double Scale::evaluate(std::span<const double> x) const
{
    if (const auto v = try_evaluate(x)) {
        return *v;
    }
    throw DomainError("scale: " + point_string(x) + " is off-lattice or outside " + grid().describe() +
                      " and no closed form is available");
}

Scale Scale::restricted(const Grid& sub) const
{
    return Scale(restrict_to(values_, sub), kind_, closed_form_);
}

// ---------------------------------------------------------------- domination

Certificate fit_domination(const Scale& sigma, const Scale& gamma, int d_max, double C_max)
{
    require_same_grid(sigma, gamma, "fit_domination");
    if (d_max < 1) {
        throw DomainError("fit_domination: d_max must be >= 1");
    }
    Samples s;
    s.lhs.assign(gamma.function().values().begin(), gamma.function().values().end());
    s.b1.assign(sigma.function().values().begin(), sigma.function().values().end());
    const Grid& grid = sigma.grid();
    s.witness = [&grid](std::size_t i) { return grid.point(i); };
    return fit_single("domination", s, 1, d_max, C_max, 1.0, grid);
}

std::pair<Certificate, Certificate> equivalent(const Scale& sigma, const Scale& gamma, int d_max, double C_max)
{
    return {fit_domination(sigma, gamma, d_max, C_max), fit_domination(gamma, sigma, d_max, C_max)};
}

Certificate check_translational_equivalence(const Scale& sigma, const std::vector<std::vector<double>>& shifts,
                                            const FitOptions& opts)
{
    const Grid& grid = sigma.grid();
    const auto dim = static_cast<std::size_t>(grid.dim());
    for (const auto& h : shifts) {
        if (h.size() != dim) {
            throw DomainError("translational equivalence: shift " + point_string(h) + " has wrong dimension");
        }
        if (!sigma.resampleable()) {
            for (std::size_t a = 0; a < dim; ++a) {
                const double q = h[a] / grid.axis(static_cast<int>(a)).h;
                if (std::abs(q - std::round(q)) > 1e-9) {
                    throw DomainError("translational equivalence: shift " + point_string(h) +
                                      " is not lattice-aligned and the scale has no closed form");
                }
            }
        }
    }
    // sigma_h(m) = sigma(m - h); without a closed form only points whose
    // sources stay inside the box are checked.
    Samples s;
    std::vector<std::pair<std::size_t, std::size_t>> where;
    std::vector<double> m(dim), src(dim);
    std::size_t skipped = 0;
    for (std::size_t k = 0; k < shifts.size(); ++k) {
        for (std::size_t i = 0; i < grid.size(); ++i) {
            grid.point(i, m);
            for (std::size_t a = 0; a < dim; ++a) {
                src[a] = m[a] - shifts[k][a];
            }
            const auto v = sigma.try_evaluate(src);
            if (!v) {
                ++skipped;
                continue;
            }
            s.lhs.push_back(*v);
            s.b1.push_back(sigma[i]);
            where.emplace_back(k, i);
        }
    }
    if (!shifts.empty() && s.size() == 0) {
        throw DomainError("translational equivalence: every shifted source leaves " + grid.describe());
    }
    s.witness = [&](std::size_t j) {
        auto p = grid.point(where[j].second);
        const auto& h = shifts[where[j].first];
        p.insert(p.end(), h.begin(), h.end());
        return p;
    };
    auto c = fit_single("translational_equivalence", s, 1, opts.d_max, opts.C_max, 0.0, grid);
    c.constants["shifts"] = static_cast<double>(shifts.size());
    c.notes.push_back("witness = (m, h)");
    if (skipped > 0) {
        c.notes.push_back("restricted to points whose shifted source lies in the box (" + std::to_string(skipped) +
                          " samples skipped)");
    }
    return c;
}

Certificate check_subpolynomial(const Scale& omega, const PairSamples& pairs, const FitOptions& opts)
{
    const Grid& grid = omega.grid();
    const auto dim = static_cast<std::size_t>(grid.dim());
    Samples s;
    std::vector<std::pair<std::vector<double>, std::vector<double>>> where;
    std::vector<double> sum(dim);
    auto add = [&](const std::vector<double>& g, const std::vector<double>& h) {
        for (std::size_t a = 0; a < dim; ++a) {
            sum[a] = g[a] + h[a];
        }
        const auto lhs = omega.try_evaluate(sum);
        const auto wg = omega.try_evaluate(g);
        const auto wh = omega.try_evaluate(h);
        if (!lhs || !wg || !wh) {
            return false;
        }
        s.lhs.push_back(*lhs);
        s.b1.push_back(*wg * *wh);
        where.emplace_back(g, h);
        return true;
    };
    if (pairs.empty()) {
        std::vector<std::vector<double>> pts(grid.size());
        for (std::size_t i = 0; i < grid.size(); ++i) {
            pts[i] = grid.point(i);
        }
        for (std::size_t i = 0; i < pts.size(); ++i) {
            for (std::size_t j = 0; j < pts.size(); ++j) {
                for (std::size_t a = 0; a < dim; ++a) {
                    sum[a] = pts[i][a] + pts[j][a];
                }
                if (grid.find(sum)) {
                    add(pts[i], pts[j]);
                }
            }
        }
    } else {
        for (const auto& [g, h] : pairs) {
            if (g.size() != dim || h.size() != dim) {
                throw DomainError("subpolynomial: pair has wrong dimension");
            }
            if (!add(g, h)) {
                throw DomainError("subpolynomial: pair " + point_string(g) + ", " + point_string(h) +
                                  " leaves the box and the scale has no closed form");
            }
        }
    }
    s.witness = [&where](std::size_t j) {
        auto p = where[j].first;
        p.insert(p.end(), where[j].second.begin(), where[j].second.end());
        return p;
    };
    auto c = fit_single("subpolynomial", s, 1, opts.d_max, opts.C_max, 0.0, grid);
    c.constants["pairs"] = static_cast<double>(s.size());
    c.notes.push_back("witness = (g, h)");
    return c;
}

Scale reflect(const Scale& omega)
{
    const Grid& grid = omega.grid();
    if (!grid.symmetric_about_origin()) {
        throw DomainError("reflect: grid " + grid.describe() + " is not symmetric about the origin");
    }
    std::vector<double> v(grid.size());
    std::vector<double> x(static_cast<std::size_t>(grid.dim()));
    for (std::size_t i = 0; i < grid.size(); ++i) {
        grid.point(i, x);
        for (double& c : x) {
            c = -c;
        }
        v[i] = omega[*grid.find(x)];
    }
    std::optional<ClosedForm> cf;
    if (omega.closed_form()) {
        cf = omega.closed_form()->reflected();
    }
    return Scale(GridFunction(grid, std::move(v), omega.function().policy()), omega.kind(), std::move(cf));
}

// ---------------------------------------------------------------- scaled space

std::vector<double> GroupAction::apply(std::span<const double> g, std::span<const double> m) const
{
    std::vector<double> out(m.begin(), m.end());
    if (kind == Kind::trivial) {
        return out;
    }
    for (std::size_t a = 0; a < out.size(); ++a) {
        const double ga = g.size() == 1 ? g[0] : g[a];
        const double ua = unit.size() == 1 ? unit[0] : unit.at(a);
        out[a] += ga * ua;
    }
    return out;
}

namespace {

Samples scaled_space_samples(const Scale& sigma, const Scale& omega, const GroupAction& action, std::size_t stride,
                             std::vector<std::pair<std::size_t, std::size_t>>& where, std::size_t& skipped)
{
    if (stride == 0) {
        throw DomainError("scaled space: stride must be positive");
    }
    const Grid& mg = sigma.grid();
    const Grid& gg = omega.grid();
    if (action.kind == GroupAction::Kind::translation && gg.dim() != 1 && gg.dim() != mg.dim()) {
        throw DomainError("scaled space: group dimension must be 1 or match the space");
    }
    Samples s;
    skipped = 0;
    for (std::size_t gi = 0; gi < gg.size(); gi += stride) {
        const auto g = gg.point(gi);
        for (std::size_t mi = 0; mi < mg.size(); mi += stride) {
            const auto m = mg.point(mi);
            const auto gm = action.apply(g, m);
            const auto v = sigma.try_evaluate(gm);
            if (!v) {
                ++skipped;
                continue;
            }
            s.lhs.push_back(*v);
            s.b1.push_back(omega[gi]);
            s.b2.push_back(sigma[mi]);
            where.emplace_back(gi, mi);
        }
    }
    if (s.size() == 0) {
        throw DomainError("scaled space: every translated point leaves " + mg.describe());
    }
    return s;
}

} // namespace

Certificate check_scaled_space(const Scale& sigma, const Scale& omega, const GroupAction& action,
                               const FitOptions& opts, std::size_t stride)
{
    std::vector<std::pair<std::size_t, std::size_t>> where;
    std::size_t skipped = 0;
    auto s = scaled_space_samples(sigma, omega, action, stride, where, skipped);
    const Grid& mg = sigma.grid();
    const Grid& gg = omega.grid();
    s.witness = [&](std::size_t j) {
        auto p = gg.point(where[j].first);
        auto m = mg.point(where[j].second);
        p.insert(p.end(), m.begin(), m.end());
        return p;
    };

    Certificate c;
    c.kind = "scaled_space";
    c.grid = mg;
    c.constants["C_max"] = opts.C_max;
    // Smallest d + l first, then smallest C.
    int best_d = opts.d_max;
    int best_l = opts.d_max;
    double best_C = opts.C_max;
    bool fitted = false;
    for (int total = 2; total <= 2 * opts.d_max && !fitted; ++total) {
        for (int l = 1; l <= opts.d_max; ++l) {
            const int d = total - l;
            if (d < 1 || d > opts.d_max) {
                continue;
            }
            const double r = max_ratio(s, d, l, 0.0);
            if (r <= opts.C_max && (!fitted || r < best_C)) {
                best_C = r;
                best_d = d;
                best_l = l;
                fitted = true;
            }
        }
    }
    if (!fitted) {
        c.notes.push_back("required constant exceeds C_max for every d, l <= d_max");
    }
    c.constants["C"] = best_C;
    c.constants["d"] = best_d;
    c.constants["l"] = best_l;
    record_residuals(c, s, best_C, best_d, best_l, 0.0);
    c.notes.push_back("witness = (g, m)");
    if (skipped > 0) {
        c.notes.push_back(std::to_string(skipped) + " samples with g m outside the box skipped");
    }
    c.finalize();
    return c;
}

Certificate verify_scaled_space(const Scale& sigma, const Scale& omega, const GroupAction& action, double C, int d,
                                int l, std::size_t stride)
{
    std::vector<std::pair<std::size_t, std::size_t>> where;
    std::size_t skipped = 0;
    auto s = scaled_space_samples(sigma, omega, action, stride, where, skipped);
    const Grid& mg = sigma.grid();
    const Grid& gg = omega.grid();
    s.witness = [&](std::size_t j) {
        auto p = gg.point(where[j].first);
        auto m = mg.point(where[j].second);
        p.insert(p.end(), m.begin(), m.end());
        return p;
    };
    Certificate c;
    c.kind = "scaled_space";
    c.grid = mg;
    c.constants = {{"C", C}, {"d", d}, {"l", l}};
    record_residuals(c, s, C, d, l, 0.0);
    c.notes.push_back("witness = (g, m)");
    c.finalize();
    return c;
}

Certificate check_ad_bound(const Scale& omega)
{
    Certificate c;
    c.kind = "ad_bound";
    c.grid = omega.grid();
    c.constants = {{"C", 1.0}, {"d", 0.0}};
    c.worst_residual = 0.0;
    c.witness = std::vector<double>(static_cast<std::size_t>(omega.grid().dim()), 0.0);
    c.notes.push_back("abelian translation action: Ad is the identity, the bound holds vacuously");
    c.finalize();
    return c;
}

Certificate check_proper(const Scale& sigma)
{
    const auto profile = shell_profile(sigma.function());
    std::vector<double> minima;
    for (std::size_t k = 0; k < profile.shells(); ++k) {
        if (profile.count[k] > 0) {
            minima.push_back(profile.min[k]);
        }
    }
    Certificate c;
    c.kind = "proper";
    c.grid = sigma.grid();
    c.notes.push_back("truncated-domain heuristic: necessary condition only");
    c.tables["shell_min"] = minima;
    const std::size_t n = minima.size();
    if (n < 2) {
        c.worst_residual = 1.0;
        c.witness = std::vector<double>(static_cast<std::size_t>(sigma.grid().dim()), 0.0);
        c.notes.push_back("fewer than two shells");
        c.finalize();
        return c;
    }
    double inner_min = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k <= (n - 1) / 2; ++k) {
        inner_min = std::min(inner_min, minima[k]);
    }
    const double boundary_min = minima[n - 1];
    // Growth: boundary minimum must strictly exceed the inner-half minimum.
    c.observe(inner_min - boundary_min + 1e-12 * std::abs(inner_min), {static_cast<double>(n - 1)});
    // Monotonicity of shell minima.
    for (std::size_t k = 0; k + 1 < n; ++k) {
        c.observe(minima[k] - minima[k + 1], {static_cast<double>(k + 1)});
    }
    c.constants["inner_min"] = inner_min;
    c.constants["boundary_min"] = boundary_min;
    c.notes.push_back("witness = shell index");
    c.finalize();
    return c;
}

// ---------------------------------------------------------------- bumps

double bump_profile(double x, double radius)
{
    const double t = x / radius;
    const double q = 1.0 - t * t;
    if (q <= 0.0) {
        return 0.0;
    }
    return std::exp(-1.0 / q);
}

double bump_profile_derivative(double x, double radius, int order)
{
    const double t = x / radius;
    const double q = 1.0 - t * t;
    if (q <= 0.0) {
        return 0.0;
    }
    const double u = std::exp(-1.0 / q);
    // d/dx (-1/q) = -2t / (r q^2)
    const double a = -2.0 * t / (radius * q * q);
    switch (order) {
    case 0:
        return u;
    case 1:
        return u * a;
    case 2: {
        const double da = -2.0 / (radius * radius * q * q) - 8.0 * t * t / (radius * radius * q * q * q);
        return u * (a * a + da);
    }
    default:
        throw DomainError("bump derivative: order " + std::to_string(order) + " not supported (max 2)");
    }
}

namespace {

double raw_bump_mass(const Grid& grid, double radius)
{
    std::vector<double> x(static_cast<std::size_t>(grid.dim()));
    std::vector<double> v(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        grid.point(i, x);
        double p = 1.0;
        for (double c : x) {
            p *= bump_profile(c, radius);
        }
        v[i] = p;
    }
    const double mass = integrate(GridFunction(grid, std::move(v)));
    if (!(mass > 0.0)) {
        throw DomainError("bump: radius " + std::to_string(radius) + " too small for " + grid.describe());
    }
    return mass;
}

} // namespace

GridFunction make_bump(const Grid& grid, double radius)
{
    return make_bump_derivative(grid, radius, MultiIndex::zero(grid.dim()));
}

GridFunction make_bump_derivative(const Grid& grid, double radius, const MultiIndex& gamma)
{
    if (!(radius > 0.0)) {
        throw DomainError("bump: radius must be positive");
    }
    if (gamma.dim() != grid.dim()) {
        throw DomainError("bump: multi-index dimension mismatch");
    }
    const double scale = 1.0 / raw_bump_mass(grid, radius);
    std::vector<double> x(static_cast<std::size_t>(grid.dim()));
    std::vector<double> v(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        grid.point(i, x);
        double p = scale;
        for (std::size_t a = 0; a < x.size(); ++a) {
            p *= bump_profile_derivative(x[a], radius, gamma.orders[a]);
        }
        v[i] = p;
    }
    return GridFunction(grid, std::move(v));
}

// ---------------------------------------------------------------- mollification

GridFunction shift_average(const Scale& sigma, const GridFunction& kernel)
{
    const Grid& sg = sigma.grid();
    const Grid& kg = kernel.grid();
    if (sg.dim() != kg.dim()) {
        throw GridMismatch("shift_average: kernel dimension differs from the scale's");
    }
    const auto terms = kernel_terms(kernel);
    if (sigma.closed_form()) {
        const ClosedForm& base = *sigma.closed_form();
        return sample(PointFunction([&](std::span<const double> m) { return apply_terms(terms, base, m); }), sg,
                      sigma.function().policy());
    }
    // Lattice lookups only: the kernel must share the spacing, and the
    // result lives where every source m - g stays in the box.
    std::vector<double> lo, hi, h;
    for (int a = 0; a < sg.dim(); ++a) {
        const Axis& sa = sg.axis(a);
        const Axis& ka = kg.axis(a);
        if (std::abs(sa.h - ka.h) > 1e-15 * sa.h) {
            throw GridMismatch("shift_average: kernel spacing differs from the scale's on axis " +
                               std::to_string(a) + " and no closed form is available");
        }
        lo.push_back(sa.lo() + ka.hi());
        hi.push_back(sa.hi() + ka.lo());
        h.push_back(sa.h);
        if (lo.back() >= hi.back()) {
            throw DomainError("shift_average: kernel support is wider than the box on axis " + std::to_string(a));
        }
    }
    const Grid out = Grid::box(lo, hi, h);
    std::vector<double> v(out.size());
    std::vector<double> m(static_cast<std::size_t>(out.dim())), src(m.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out.point(i, m);
        double acc = 0.0;
        for (const auto& t : terms) {
            for (std::size_t a = 0; a < m.size(); ++a) {
                src[a] = m[a] - t.g[a];
            }
            acc += t.weight * value_at(sigma.function(), src);
        }
        v[i] = acc;
    }
    return GridFunction(out, std::move(v), sigma.function().policy());
}

Certificate derivative_bound_certificate(const Scale& f, int order, const FitOptions& opts)
{
    if (order < 1) {
        throw DomainError("derivative bound: order must be >= 1");
    }
    struct Entry {
        MultiIndex gamma;
        GridFunction deriv;
        GridFunction base;
    };
    std::vector<Entry> entries;
    for (const auto& gamma : multi_indices_up_to(f.grid().dim(), order)) {
        if (gamma.is_zero()) {
            continue;
        }
        auto d = finite_diff(f.function(), gamma, std::max(order, kDefaultMaxDerivativeOrder));
        auto base = restrict_to(f.function(), d.grid());
        entries.push_back({gamma, std::move(d), std::move(base)});
    }
    auto ratio = [](const Entry& e, int d) {
        double best = 0.0;
        for (std::size_t i = 0; i < e.deriv.size(); ++i) {
            const double num = std::abs(e.deriv[i]);
            if (num > 0.0) {
                best = std::max(best, std::exp(std::log(num) - d * std::log(e.base[i])));
            }
        }
        return best;
    };
    Certificate c;
    c.kind = "derivative_bound";
    c.grid = f.grid();
    c.constants["C_max"] = opts.C_max;
    c.constants["order"] = order;
    int d_used = opts.d_max;
    std::vector<double> Cs(entries.size(), opts.C_max);
    bool fitted = false;
    for (int d = 1; d <= opts.d_max && !fitted; ++d) {
        std::vector<double> trial;
        bool ok = true;
        for (const auto& e : entries) {
            trial.push_back(ratio(e, d));
            ok = ok && trial.back() <= opts.C_max;
        }
        if (ok) {
            fitted = true;
            d_used = d;
            Cs = trial;
        }
    }
    if (!fitted) {
        c.notes.push_back("required constant exceeds C_max for every d <= d_max");
    }
    double C_all = 0.0;
    for (std::size_t k = 0; k < entries.size(); ++k) {
        const auto& e = entries[k];
        c.constants[derivative_constant_key(e.gamma)] = Cs[k];
        C_all = std::max(C_all, Cs[k]);
        for (std::size_t i = 0; i < e.deriv.size(); ++i) {
            const double rhs = Cs[k] * std::pow(e.base[i], d_used);
            auto p = e.deriv.grid().point(i);
            c.observe(slack_residual(std::abs(e.deriv[i]), rhs), std::move(p));
        }
    }
    c.constants["C"] = C_all;
    c.constants["d"] = d_used;
    c.notes.push_back("derivatives by finite differences on the stencil-shrunk interior");
    c.finalize();
    return c;
}

MollifiedScale mollify_scale(const Scale& sigma, const GridFunction& bump,
                             const std::vector<double>& support_half_width, const MollifyOptions& opts)
{
    const Grid& bg = bump.grid();
    if (bg.dim() != sigma.grid().dim()) {
        throw GridMismatch("mollify: bump dimension differs from the scale's");
    }
    if (support_half_width.size() != static_cast<std::size_t>(bg.dim())) {
        throw DomainError("mollify: support box has wrong dimension");
    }
    std::vector<double> x(static_cast<std::size_t>(bg.dim()));
    for (std::size_t i = 0; i < bump.size(); ++i) {
        if (bump[i] < 0.0) {
            throw DomainError("mollify: bump is negative at " + point_string(bg.point(i)));
        }
        if (bump[i] == 0.0) {
            continue;
        }
        bg.point(i, x);
        for (std::size_t a = 0; a < x.size(); ++a) {
            if (std::abs(x[a]) > support_half_width[a] * (1.0 + 1e-12)) {
                throw DomainError("mollify: bump support exceeds the box at " + point_string(x));
            }
        }
    }
    const double mass = integrate(bump);
    if (std::abs(mass - 1.0) > opts.mass_tolerance) {
        throw DomainError("mollify: bump mass " + std::to_string(mass) + " deviates from 1 beyond tolerance");
    }

    std::optional<ClosedForm> cf;
    if (sigma.closed_form()) {
        auto terms = std::make_shared<const std::vector<KernelTerm>>(kernel_terms(bump));
        nlohmann::json desc = {{"closed_form", "mollified"},
                               {"base", sigma.closed_form()->descriptor()},
                               {"support_half_width", support_half_width},
                               {"bump_points", terms->size()}};
        cf = ClosedForm(std::move(desc), [terms, base = *sigma.closed_form()](std::span<const double> m) {
            return apply_terms(*terms, base, m);
        });
    }
    Scale smooth(shift_average(sigma, bump), sigma.kind(), std::move(cf));
    const Scale original = smooth.grid() == sigma.grid() ? sigma : sigma.restricted(smooth.grid());

    // The mollification bounds carry no additive constant (D = 0).
    auto refit = [&](const Scale& base, const Scale& target, const char* kind) {
        Samples s;
        s.lhs.assign(target.function().values().begin(), target.function().values().end());
        s.b1.assign(base.function().values().begin(), base.function().values().end());
        const Grid& g = base.grid();
        s.witness = [&g](std::size_t i) { return g.point(i); };
        return fit_single(kind, s, 1, opts.d_max, opts.C_max, 0.0, g);
    };
    auto upper = refit(original, smooth, "mollify_upper");
    auto lower = refit(smooth, original, "mollify_lower");
    if (!(smooth.grid() == sigma.grid())) {
        upper.notes.push_back("checked on the shrunk box where shifted sources stay inside");
        lower.notes.push_back("checked on the shrunk box where shifted sources stay inside");
    }
    auto deriv = derivative_bound_certificate(smooth, opts.derivative_order, FitOptions{opts.d_max, opts.C_max});
    return MollifiedScale{std::move(smooth), std::move(upper), std::move(lower), std::move(deriv)};
}

} // namespace dmf
