#include "dmf/schwartz.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "dmf/errors.hpp"
#include "dmf/grid_io.hpp"

namespace dmf {

namespace {

constexpr double kLogOverflowGuard = 700.0;

std::string fmt_double(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

GridFunction derivative_or_self(const GridFunction& f, const MultiIndex& gamma)
{
    if (gamma.is_zero()) {
        return f;
    }
    return finite_diff(f, gamma, std::max(gamma.total(), kDefaultMaxDerivativeOrder));
}

double multi_binomial(const MultiIndex& gamma, const MultiIndex& beta)
{
    double r = 1.0;
    for (std::size_t a = 0; a < gamma.orders.size(); ++a) {
        const int n = gamma.orders[a];
        const int k = beta.orders[a];
        double c = 1.0;
        for (int j = 1; j <= k; ++j) {
            c = c * (n - k + j) / j;
        }
        r *= c;
    }
    return r;
}

std::vector<MultiIndex> sub_indices(const MultiIndex& gamma)
{
    std::vector<MultiIndex> out;
    for (const auto& beta : multi_indices_up_to(gamma.dim(), gamma.total())) {
        bool below = true;
        for (std::size_t a = 0; a < beta.orders.size(); ++a) {
            below = below && beta.orders[a] <= gamma.orders[a];
        }
        if (below) {
            out.push_back(beta);
        }
    }
    return out;
}

MultiIndex minus(const MultiIndex& a, const MultiIndex& b)
{
    MultiIndex r = a;
    for (std::size_t i = 0; i < r.orders.size(); ++i) {
        r.orders[i] -= b.orders[i];
    }
    return r;
}

} // namespace

std::string SeminormIndex::label() const
{
    return "d=" + std::to_string(d) + ",gamma=" + gamma.label();
}

GridFunction scale_power_times(const GridFunction& sigma, double p, const GridFunction& f)
{
    const GridFunction s = sigma.grid() == f.grid() ? sigma : restrict_to(sigma, f.grid());
    std::vector<double> v(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) {
        const double x = f[i];
        if (x == 0.0 || p == 0.0) {
            v[i] = x;
            continue;
        }
        const double lg = p * std::log(s[i]);
        double r;
        if (lg < kLogOverflowGuard) {
            r = std::pow(s[i], p) * x;
        } else {
            r = std::copysign(std::exp(lg + std::log(std::abs(x))), x);
        }
        if (!std::isfinite(r)) {
            throw NumericCapError("sigma^" + fmt_double(p) + " * f overflows at " +
                                  grid_point_string(f.grid(), i));
        }
        v[i] = r;
    }
    return GridFunction(f.grid(), std::move(v), f.policy());
}

double seminorm_sigma(const GridFunction& f, const Scale& sigma, const SeminormIndex& idx)
{
    if (!(f.grid() == sigma.grid())) {
        throw GridMismatch("seminorm: function on " + f.grid().describe() + " but scale on " +
                           sigma.grid().describe());
    }
    if (idx.d < 0) {
        throw DomainError("seminorm: negative scale power");
    }
    const auto D = derivative_or_self(f, idx.gamma);
    if (idx.d == 0) {
        return sup_norm(D);
    }
    return sup_norm(scale_power_times(sigma.function(), idx.d, D));
}

double seminorm_schwartz(const GridFunction& phi, int d, int k)
{
    if (phi.grid().dim() != 1) {
        throw DomainError("schwartz seminorm: profile must be one-dimensional");
    }
    if (d < 0 || k < 0) {
        throw DomainError("schwartz seminorm: negative index");
    }
    const auto D = derivative_or_self(phi, MultiIndex::along(1, 0, k));
    double best = 0.0;
    for (std::size_t i = 0; i < D.size(); ++i) {
        const double r = std::abs(D.grid().point(i)[0]);
        best = std::max(best, std::pow(r, d) * std::abs(D[i]));
    }
    return best;
}

MultiplierResult multiplier_sigma(const GridFunction& f, const Scale& sigma, const std::vector<SeminormIndex>& indices,
                                  const Certificate& derivative_bound)
{
    if (derivative_bound.kind != "derivative_bound") {
        throw DomainError("multiplier: expected a derivative_bound certificate, got '" + derivative_bound.kind + "'");
    }
    if (!derivative_bound.pass) {
        throw DomainError("multiplier: the scale's derivative-bound certificate does not pass");
    }
    if (!(f.grid() == sigma.grid())) {
        throw GridMismatch("multiplier: function and scale grids differ");
    }
    const int ds = static_cast<int>(derivative_bound.constant("d"));
    const int order = static_cast<int>(derivative_bound.constant("order"));

    MultiplierResult out{pointwise_mul(sigma.function(), f), {}};
    Certificate& c = out.certificate;
    c.kind = "multiplier_sigma";
    c.grid = f.grid();
    c.constants["d_sigma"] = ds;
    for (std::size_t k = 0; k < indices.size(); ++k) {
        const auto& idx = indices[k];
        if (idx.gamma.total() > order) {
            throw DomainError("multiplier: index " + idx.label() + " exceeds the certified derivative order " +
                              std::to_string(order));
        }
        const double lhs = seminorm_sigma(out.product, sigma, idx);
        double rhs = seminorm_sigma(f, sigma, {idx.d + 1, idx.gamma});
        for (const auto& beta : sub_indices(idx.gamma)) {
            if (beta.is_zero()) {
                continue;
            }
            const double Cb = derivative_bound.constant(derivative_constant_key(beta));
            rhs += multi_binomial(idx.gamma, beta) * Cb * seminorm_sigma(f, sigma, {idx.d + ds, minus(idx.gamma, beta)});
        }
        c.constants["lhs " + idx.label()] = lhs;
        c.constants["rhs " + idx.label()] = rhs;
        c.observe(slack_residual(lhs, rhs), {static_cast<double>(k)});
    }
    if (indices.empty()) {
        c.worst_residual = 0.0;
    }
    c.notes.push_back("witness = position in the index list");
    c.finalize();
    return out;
}

// ---------------------------------------------------------------- profiles

Profile::Profile(nlohmann::json descriptor, Fn value, std::optional<Fn> derivative,
                 std::optional<std::pair<double, double>> domain, double interpolation_error)
    : descriptor_(std::move(descriptor)),
      value_(std::move(value)),
      derivative_(std::move(derivative)),
      domain_(domain),
      interpolation_error_(interpolation_error)
{
}

double Profile::derivative(double t) const
{
    if (!derivative_) {
        throw DomainError("profile '" + descriptor_.value("profile", std::string("?")) + "' has no derivative");
    }
    return (*derivative_)(t);
}

Profile Profile::constant(double c)
{
    return Profile({{"profile", "constant"}, {"value", c}}, [c](double) { return c; }, Fn([](double) { return 0.0; }));
}

Profile Profile::gaussian()
{
    return Profile({{"profile", "gaussian"}}, [](double t) { return std::exp(-t * t); },
                   Fn([](double t) { return -2.0 * t * std::exp(-t * t); }));
}

Profile Profile::reciprocal()
{
    return Profile({{"profile", "reciprocal"}}, [](double t) { return 1.0 / t; },
                   Fn([](double t) { return -1.0 / (t * t); }));
}

Profile Profile::rational(double p)
{
    return Profile({{"profile", "rational"}, {"p", p}}, [p](double t) { return std::pow(1.0 + t * t, -p); },
                   Fn([p](double t) { return -2.0 * p * t * std::pow(1.0 + t * t, -p - 1.0); }));
}

Profile Profile::samples(const GridFunction& values)
{
    if (values.grid().dim() != 1 || values.size() < 2) {
        throw DomainError("profile samples: need a one-dimensional grid with at least two points");
    }
    const Axis ax = values.grid().axis(0);
    std::vector<double> v(values.values().begin(), values.values().end());
    double err = 0.0;
    for (std::size_t i = 1; i + 1 < v.size(); ++i) {
        err = std::max(err, std::abs(v[i + 1] - 2.0 * v[i] + v[i - 1]) / 8.0);
    }
    auto locate = [ax](double t) {
        const double s = (t - ax.lo()) / ax.h;
        auto i = static_cast<std::int64_t>(std::floor(s));
        i = std::clamp<std::int64_t>(i, 0, ax.count - 2);
        return std::pair<std::int64_t, double>(i, s - static_cast<double>(i));
    };
    Fn value = [v, locate](double t) {
        const auto [i, u] = locate(t);
        const auto k = static_cast<std::size_t>(i);
        return v[k] + u * (v[k + 1] - v[k]);
    };
    Fn slope = [v, locate, h = ax.h](double t) {
        const auto k = static_cast<std::size_t>(locate(t).first);
        return (v[k + 1] - v[k]) / h;
    };
    return Profile({{"profile", "samples"}, {"grid", grid_to_json(values.grid())}}, std::move(value),
                   std::move(slope), std::pair<double, double>(ax.lo(), ax.hi()), err);
}

namespace {

std::optional<std::pair<double, double>> intersect(const std::optional<std::pair<double, double>>& a,
                                                   const std::optional<std::pair<double, double>>& b)
{
    if (!a) {
        return b;
    }
    if (!b) {
        return a;
    }
    return std::pair<double, double>(std::max(a->first, b->first), std::min(a->second, b->second));
}

} // namespace

Profile Profile::product(const Profile& a, const Profile& b)
{
    std::optional<Fn> d;
    if (a.has_derivative() && b.has_derivative()) {
        d = [a, b](double t) { return a.derivative(t) * b(t) + a(t) * b.derivative(t); };
    }
    return Profile({{"profile", "product"}, {"factors", {a.descriptor(), b.descriptor()}}},
                   [a, b](double t) { return a(t) * b(t); }, std::move(d), intersect(a.domain(), b.domain()),
                   a.interpolation_error() + b.interpolation_error());
}

Profile Profile::sum(const Profile& a, const Profile& b)
{
    std::optional<Fn> d;
    if (a.has_derivative() && b.has_derivative()) {
        d = [a, b](double t) { return a.derivative(t) + b.derivative(t); };
    }
    return Profile({{"profile", "sum"}, {"terms", {a.descriptor(), b.descriptor()}}},
                   [a, b](double t) { return a(t) + b(t); }, std::move(d), intersect(a.domain(), b.domain()),
                   a.interpolation_error() + b.interpolation_error());
}

GridFunction compose_scale(const Profile& phi, const Scale& sigma)
{
    const auto& f = sigma.function();
    std::vector<double> v(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) {
        const double t = f[i];
        if (phi.domain()) {
            const auto [lo, hi] = *phi.domain();
            const double tol = 1e-12 * std::max(1.0, std::abs(hi));
            if (t < lo - tol || t > hi + tol) {
                throw DomainError("compose: scale value " + fmt_double(t) + " at " + grid_point_string(f.grid(), i) +
                                  " lies outside the profile's samples [" + fmt_double(lo) + ", " + fmt_double(hi) +
                                  "]");
            }
        }
        v[i] = phi(t);
    }
    return GridFunction(f.grid(), std::move(v), f.policy());
}

Certificate chain_rule_certificate(const Profile& phi, const Scale& sigma, std::optional<double> tolerance)
{
    if (!phi.has_derivative()) {
        throw DomainError("chain rule: profile has no derivative");
    }
    const auto composed = compose_scale(phi, sigma);
    Certificate c;
    c.kind = "chain_rule";
    c.grid = sigma.grid();
    double tol_used = 0.0;
    for (int a = 0; a < sigma.grid().dim(); ++a) {
        const auto e = MultiIndex::along(sigma.grid().dim(), a, 1);
        const auto lhs = finite_diff(composed, e);
        const auto ds = finite_diff(sigma.function(), e);
        const auto s = restrict_to(sigma.function(), lhs.grid());
        const double tol = tolerance ? *tolerance : 1e-6 * sup_norm(lhs) + 1e-12;
        tol_used = std::max(tol_used, tol);
        for (std::size_t i = 0; i < lhs.size(); ++i) {
            const double rhs = phi.derivative(s[i]) * ds[i];
            c.observe(std::abs(lhs[i] - rhs) - tol, lhs.grid().point(i));
        }
    }
    c.constants["tolerance"] = tol_used;
    c.constants["interpolation_error"] = phi.interpolation_error();
    c.finalize();
    return c;
}

// ---------------------------------------------------------------- decay report

const DecayEntry& DecayReport::entry(int d, const MultiIndex& gamma) const
{
    for (const auto& e : table) {
        if (e.d == d && e.gamma == gamma) {
            return e;
        }
    }
    throw DomainError("decay report: no entry for d=" + std::to_string(d) + ", gamma=" + gamma.label());
}

const char* to_string(Verdict v)
{
    return v == Verdict::consistent ? "consistent" : "inconsistent";
}

namespace {

std::optional<double> fit_axis_decay(const GridFunction& f, int a)
{
    const Grid& g = f.grid();
    const Axis& ax = g.axis(a);
    const double L = std::max(std::abs(ax.lo()), std::abs(ax.hi()));
    std::vector<double> x(static_cast<std::size_t>(g.dim()), 0.0);
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = 0;
    for (std::int64_t k = ax.first; k <= ax.last(); ++k) {
        x[static_cast<std::size_t>(a)] = static_cast<double>(k) * ax.h;
        const double r = std::abs(x[static_cast<std::size_t>(a)]);
        if (r < L / 2 || r == 0.0) {
            continue;
        }
        const auto idx = g.find(x);
        if (!idx || f[*idx] == 0.0) {
            continue;
        }
        const double lx = std::log(r);
        const double ly = std::log(std::abs(f[*idx]));
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
        ++n;
    }
    const double den = n * sxx - sx * sx;
    if (n < 2 || den <= 0.0) {
        return std::nullopt;
    }
    return -(n * sxy - sx * sy) / den;
}

} // namespace

DecayReport decay_report(const GridFunction& f, const Scale& sigma, int d_max, int l_max)
{
    if (!(f.grid() == sigma.grid())) {
        throw GridMismatch("decay report: function and scale grids differ");
    }
    DecayReport r;
    r.grid = f.grid();
    r.notes.push_back("C_0 membership proxied by shell sups decreasing toward the truncation boundary");
    for (const auto& gamma : multi_indices_up_to(f.grid().dim(), l_max)) {
        const auto D = derivative_or_self(f, gamma);
        for (int d = 0; d <= d_max; ++d) {
            const auto w = d == 0 ? D : scale_power_times(sigma.function(), d, D);
            const auto prof = shell_profile(w);
            std::vector<double> sups;
            for (std::size_t k = 0; k < prof.shells(); ++k) {
                if (prof.count[k] > 0) {
                    sups.push_back(prof.max_abs[k]);
                }
            }
            DecayEntry e;
            e.d = d;
            e.gamma = gamma;
            e.value = sup_norm(w);
            if (sups.size() >= 2) {
                double inner = 0.0;
                for (std::size_t k = 0; k <= (sups.size() - 1) / 2; ++k) {
                    inner = std::max(inner, sups[k]);
                }
                e.growing = sups.back() > (1.0 + 1e-9) * inner;
            }
            e.shell_sup = std::move(sups);
            r.table.push_back(std::move(e));
        }
    }
    std::stable_sort(r.table.begin(), r.table.end(),
                     [](const DecayEntry& a, const DecayEntry& b) { return a.d < b.d; });
    for (const auto& e : r.table) {
        if (e.growing) {
            r.verdict = Verdict::inconsistent;
            r.witness = std::make_pair(e.d, e.gamma);
            break;
        }
    }
    for (int a = 0; a < f.grid().dim(); ++a) {
        r.decay_exponent.push_back(fit_axis_decay(f, a));
    }
    return r;
}

nlohmann::json to_json(const DecayReport& r)
{
    nlohmann::json j;
    j["grid"] = grid_to_json(r.grid);
    j["verdict"] = to_string(r.verdict);
    if (r.witness) {
        j["witness"] = {{"d", r.witness->first}, {"gamma", r.witness->second.orders}};
    } else {
        j["witness"] = nullptr;
    }
    nlohmann::json table = nlohmann::json::array();
    for (const auto& e : r.table) {
        table.push_back({{"d", e.d}, {"gamma", e.gamma.orders}, {"value", e.value}, {"growing", e.growing}});
    }
    j["table"] = std::move(table);
    nlohmann::json exps = nlohmann::json::array();
    for (const auto& p : r.decay_exponent) {
        exps.push_back(p ? nlohmann::json(*p) : nlohmann::json(nullptr));
    }
    j["decay_exponent"] = std::move(exps);
    j["notes"] = r.notes;
    return j;
}

std::string to_csv(const DecayReport& r)
{
    std::ostringstream os;
    os << "d";
    for (int a = 0; a < r.grid.dim(); ++a) {
        os << ",gamma" << a;
    }
    os << ",value,growing\n";
    for (const auto& e : r.table) {
        os << e.d;
        for (int o : e.gamma.orders) {
            os << ',' << o;
        }
        os << ',' << fmt_double(e.value) << ',' << (e.growing ? 1 : 0) << '\n';
    }
    return os.str();
}

} // namespace dmf
