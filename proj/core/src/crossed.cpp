#include "dmf/crossed.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "dmf/errors.hpp"
#include "dmf/grid_io.hpp"

namespace dmf {

namespace {

void require_same(const CrossedElement& a, const CrossedElement& b, const char* what)
{
    if (!(a.window == b.window)) {
        throw GridMismatch(std::string(what) + ": group windows differ");
    }
    if (!(a.grid == b.grid)) {
        throw GridMismatch(std::string(what) + ": slice grids differ");
    }
}

GridFunction zeros(const Grid& g)
{
    return GridFunction::constant(g, 0.0);
}

// acc += c * a .* b, in place on a plain vector.
void fma_into(std::vector<double>& acc, double c, const GridFunction& a, const GridFunction& b)
{
    for (std::size_t i = 0; i < acc.size(); ++i) {
        acc[i] += c * (a[i] * b[i]);
    }
}

double l1_mass(const GridFunction& f)
{
    double s = 0.0;
    for (double v : f.values()) {
        s += std::abs(v);
    }
    return s;
}

std::vector<double> window_omega(const Scale& omega, const GroupWindow& w)
{
    std::vector<double> out(w.size());
    for (std::size_t k = 0; k < w.size(); ++k) {
        const double g = w.point(k);
        out[k] = omega.evaluate(std::span<const double>(&g, 1));
    }
    return out;
}

} // namespace

// ---------------------------------------------------------------- window

GroupWindow GroupWindow::integers(std::int64_t R)
{
    if (R < 0) {
        throw DomainError("group window: radius must be nonnegative");
    }
    return GroupWindow(Kind::z_window, R, 1.0);
}

GroupWindow GroupWindow::sampled_reals(double half_width, double h)
{
    if (!(h > 0.0) || !(half_width > 0.0)) {
        throw DomainError("group window: half width and spacing must be positive");
    }
    const double q = half_width / h;
    const double r = std::round(q);
    if (std::abs(q - r) > 1e-9 * std::max(1.0, q)) {
        throw DomainError("group window: half width must be a multiple of the spacing");
    }
    return GroupWindow(Kind::r_sampled, static_cast<std::int64_t>(r), h);
}

std::optional<std::size_t> GroupWindow::slot(std::int64_t lattice_index) const
{
    if (lattice_index < -R_ || lattice_index > R_) {
        return std::nullopt;
    }
    return static_cast<std::size_t>(lattice_index + R_);
}

Grid GroupWindow::grid() const
{
    return Grid({Axis{-R_, 2 * R_ + 1, h_}});
}

nlohmann::json GroupWindow::descriptor() const
{
    return {{"group", kind_ == Kind::z_window ? "Z" : "R"}, {"radius", R_}, {"h", h_}};
}

GroupWindow GroupWindow::from_json(const nlohmann::json& j)
{
    const auto g = j.at("group").get<std::string>();
    const auto R = j.at("radius").get<std::int64_t>();
    if (g == "Z") {
        return integers(R);
    }
    if (g == "R") {
        const double h = j.at("h").get<double>();
        return sampled_reals(static_cast<double>(R) * h, h);
    }
    throw DomainError("group window: unknown group '" + g + "'");
}

// ---------------------------------------------------------------- action

ActionSpec ActionSpec::trivial()
{
    ActionSpec a;
    a.kind = Kind::trivial;
    return a;
}

ActionSpec ActionSpec::translation(double unit, int axis)
{
    ActionSpec a;
    a.kind = Kind::translation;
    a.unit = unit;
    a.axis = axis;
    return a;
}

std::vector<std::int64_t> ActionSpec::steps(const GroupWindow& w, std::size_t k, const Grid& grid) const
{
    std::vector<std::int64_t> s(static_cast<std::size_t>(grid.dim()), 0);
    if (kind == Kind::trivial) {
        return s;
    }
    if (axis < 0 || axis >= grid.dim()) {
        throw DomainError("action: axis " + std::to_string(axis) + " out of range");
    }
    const double disp = w.point(k) * unit / grid.axis(axis).h;
    const double r = std::round(disp);
    if (std::abs(disp - r) > 1e-9 * std::max(1.0, std::abs(disp))) {
        throw DomainError("action: group element " + std::to_string(w.point(k)) +
                          " does not move the lattice onto itself");
    }
    s[static_cast<std::size_t>(axis)] = static_cast<std::int64_t>(r);
    return s;
}

Translation ActionSpec::apply(const GroupWindow& w, std::size_t k, const GridFunction& f) const
{
    if (kind == Kind::trivial) {
        return Translation{f, 0.0};
    }
    const auto s = steps(w, k, f.grid());
    return translate(f, s);
}

nlohmann::json ActionSpec::descriptor() const
{
    nlohmann::json j = {{"kind", kind == Kind::trivial ? "trivial" : "translation"}, {"unit", unit}, {"axis", axis}};
    j["scaled_space"] = scaled_space ? to_json(*scaled_space) : nlohmann::json(nullptr);
    return j;
}

ActionSpec make_translation_action(const Scale& sigma, const Scale& omega, double unit, int axis,
                                   const FitOptions& fit)
{
    ActionSpec a = ActionSpec::translation(unit, axis);
    GroupAction ga;
    ga.kind = GroupAction::Kind::translation;
    ga.unit.assign(static_cast<std::size_t>(sigma.grid().dim()), 0.0);
    ga.unit.at(static_cast<std::size_t>(axis)) = unit;
    a.scaled_space = check_scaled_space(sigma, omega, ga, fit);
    return a;
}

// ---------------------------------------------------------------- elements

CrossedElement CrossedElement::zero(const GroupWindow& w, const Grid& grid)
{
    CrossedElement F;
    F.window = w;
    F.grid = grid;
    F.slices.assign(w.size(), zeros(grid));
    return F;
}

CrossedElement CrossedElement::point_mass(const GroupWindow& w, const GridFunction& a)
{
    auto F = zero(w, a.grid());
    F.slices[w.identity()] = w.weight() == 1.0 ? a : scalar_mul(1.0 / w.weight(), a);
    return F;
}

CrossedElement convolve(const CrossedElement& F1, const CrossedElement& F2, const ActionSpec& action)
{
    require_same(F1, F2, "convolve");
    const GroupWindow& w = F1.window;
    const auto n = w.size();
    CrossedElement out = CrossedElement::zero(w, F1.grid);
    out.omega = F1.omega;
    const double wt = w.weight();
    double dropped = 0.0;
    for (std::size_t gi = 0; gi < n; ++gi) {
        std::vector<double> acc(F1.grid.size(), 0.0);
        for (std::size_t hi = 0; hi < n; ++hi) {
            const auto k = w.slot(w.lattice(gi) - w.lattice(hi));
            if (!k) {
                continue;
            }
            const auto moved = action.apply(w, hi, F2.slices[*k]);
            dropped += wt * l1_mass(F1.slices[hi]) * moved.dropped_l1;
            fma_into(acc, wt, F1.slices[hi], moved.function);
        }
        out.slices[gi] = GridFunction(F1.grid, std::move(acc));
    }
    // Mass of products landing outside the window.
    for (std::size_t hi = 0; hi < n; ++hi) {
        for (std::size_t ki = 0; ki < n; ++ki) {
            if (!w.slot(w.lattice(hi) + w.lattice(ki))) {
                dropped += wt * l1_mass(F1.slices[hi]) * l1_mass(F2.slices[ki]);
            }
        }
    }
    out.truncated_mass = dropped;
    return out;
}

CrossedElement add(const CrossedElement& F1, const CrossedElement& F2)
{
    require_same(F1, F2, "add");
    CrossedElement out = F1;
    for (std::size_t k = 0; k < out.slices.size(); ++k) {
        out.slices[k] = pointwise_add(F1.slices[k], F2.slices[k]);
    }
    out.truncated_mass = 0.0;
    return out;
}

CrossedElement scale(double c, const CrossedElement& F)
{
    CrossedElement out = F;
    for (auto& s : out.slices) {
        s = scalar_mul(c, s);
    }
    return out;
}

// ---------------------------------------------------------------- seminorms

AlgebraSeminorm AlgebraSeminorm::sup(int dim)
{
    return AlgebraSeminorm{std::nullopt, {0, MultiIndex::zero(dim)}};
}

double AlgebraSeminorm::operator()(const GridFunction& a) const
{
    if (sigma) {
        return seminorm_sigma(a, *sigma, index);
    }
    if (index.d != 0) {
        throw DomainError("algebra seminorm: scale power requires a scale");
    }
    if (index.gamma.is_zero()) {
        return sup_norm(a);
    }
    return sup_norm(finite_diff(a, index.gamma, std::max(index.gamma.total(), kDefaultMaxDerivativeOrder)));
}

double crossed_seminorm(const CrossedElement& F, const Scale& omega, int d, int gamma_order, const AlgebraSeminorm& m)
{
    const GroupWindow& w = F.window;
    if (gamma_order < 0) {
        throw DomainError("crossed seminorm: negative derivative order");
    }
    if (gamma_order > 0 && w.kind() == GroupWindow::Kind::z_window) {
        throw DomainError("crossed seminorm: group derivatives are undefined on a Z window (gamma must be 0)");
    }
    const auto om = window_omega(omega, w);
    if (gamma_order == 0) {
        double acc = 0.0;
        for (std::size_t k = 0; k < w.size(); ++k) {
            acc += w.weight() * std::pow(om[k], d) * m(F.slices[k]);
        }
        return acc;
    }
    // Finite differences across slices, point by point of the space.
    const Grid wg = w.grid();
    const auto gamma = MultiIndex::along(1, 0, gamma_order);
    std::vector<std::vector<double>> deriv; // [point][slot of the shrunk window]
    Grid shrunk;
    for (std::size_t i = 0; i < F.grid.size(); ++i) {
        std::vector<double> col(w.size());
        for (std::size_t k = 0; k < w.size(); ++k) {
            col[k] = F.slices[k][i];
        }
        const auto D = finite_diff(GridFunction(wg, std::move(col)), gamma,
                                   std::max(gamma_order, kDefaultMaxDerivativeOrder));
        shrunk = D.grid();
        deriv.emplace_back(D.values().begin(), D.values().end());
    }
    double acc = 0.0;
    for (std::size_t k = 0; k < shrunk.size(); ++k) {
        std::vector<double> v(F.grid.size());
        for (std::size_t i = 0; i < v.size(); ++i) {
            v[i] = deriv[i][k];
        }
        const double g = shrunk.point(k)[0];
        const double wk = omega.evaluate(std::span<const double>(&g, 1));
        acc += w.weight() * std::pow(wk, d) * m(GridFunction(F.grid, std::move(v)));
    }
    return acc;
}

// ---------------------------------------------------------------- module action

GridFunction act_on_module(const CrossedElement& F, const GridFunction& e, const ActionSpec& action)
{
    if (!(e.grid() == F.grid)) {
        throw GridMismatch("act_on_module: module element grid differs from the slices'");
    }
    const GroupWindow& w = F.window;
    std::vector<double> acc(e.size(), 0.0);
    for (std::size_t k = 0; k < w.size(); ++k) {
        const auto ge = action.apply(w, k, e);
        fma_into(acc, w.weight(), F.slices[k], ge.function);
    }
    return GridFunction(e.grid(), std::move(acc), e.policy());
}

Certificate check_covariance(const GroupWindow& w, std::size_t k, const GridFunction& a, const GridFunction& e,
                             const ActionSpec& action)
{
    const auto lhs = action.apply(w, k, pointwise_mul(a, e)).function;
    const auto rhs = pointwise_mul(action.apply(w, k, a).function, action.apply(w, k, e).function);
    Certificate c;
    c.kind = "covariance";
    c.grid = e.grid();
    double sup = 0.0;
    for (std::size_t i = 0; i < lhs.size(); ++i) {
        const double diff = std::abs(lhs[i] - rhs[i]);
        sup = std::max(sup, diff);
        c.observe(diff - 1e-12 * std::max(1.0, std::abs(rhs[i])), e.grid().point(i));
    }
    c.constants = {{"g", w.point(k)}, {"sup_residual", sup}};
    c.finalize();
    return c;
}

CrossedElement approx_identity(int n, const GridFunction& a, const GroupWindow& w, double r0)
{
    if (n < 0) {
        throw DomainError("approximate identity: index must be nonnegative");
    }
    if (w.kind() == GroupWindow::Kind::z_window) {
        return CrossedElement::point_mass(w, a);
    }
    const double r = std::ldexp(r0, -n);
    const double h = w.spacing();
    if (r > static_cast<double>(w.radius()) * h + 1e-12) {
        throw DomainError("approximate identity: support radius " + std::to_string(r) + " exceeds the window");
    }
    if (r < 2.0 * h) {
        throw DomainError("approximate identity: support radius " + std::to_string(r) +
                          " is below two window steps; refine the window");
    }
    std::vector<double> psi(w.size());
    double mass = 0.0;
    for (std::size_t k = 0; k < w.size(); ++k) {
        psi[k] = bump_profile(w.point(k), r);
        mass += w.weight() * psi[k];
    }
    CrossedElement F = CrossedElement::zero(w, a.grid());
    for (std::size_t k = 0; k < w.size(); ++k) {
        if (psi[k] != 0.0) {
            F.slices[k] = scalar_mul(psi[k] / mass, a);
        }
    }
    return F;
}

GridFunction garding_smooth(const GridFunction& f, const GroupWindow& w, const GridFunction& e,
                            const ActionSpec& action)
{
    if (!(f.grid() == w.grid())) {
        throw GridMismatch("garding_smooth: f must live on the window grid " + w.grid().describe());
    }
    std::vector<double> acc(e.size(), 0.0);
    for (std::size_t k = 0; k < w.size(); ++k) {
        if (f[k] == 0.0) {
            continue;
        }
        const auto ge = action.apply(w, k, e).function;
        const double c = w.weight() * f[k];
        for (std::size_t i = 0; i < acc.size(); ++i) {
            acc[i] += c * ge[i];
        }
    }
    return GridFunction(e.grid(), std::move(acc), e.policy());
}

CrossedFactorization factorize_crossed(const GridFunction& e_tilde, const GridFunction& f, const GroupWindow& w,
                                       const GridFunction& a, const ActionSpec& action, double tolerance)
{
    if (!(f.grid() == w.grid())) {
        throw DomainError("factorize_crossed: f must be supported in the window " + w.grid().describe());
    }
    if (!(a.grid() == e_tilde.grid())) {
        throw GridMismatch("factorize_crossed: a and e~ grids differ");
    }
    CrossedFactorization out{CrossedElement::zero(w, a.grid()), 0.0, {}};
    for (std::size_t k = 0; k < w.size(); ++k) {
        if (f[k] != 0.0) {
            out.b.slices[k] = scalar_mul(f[k], action.apply(w, k, a).function);
        }
    }
    const auto lhs = act_on_module(out.b, e_tilde, action);
    const auto rhs = garding_smooth(f, w, pointwise_mul(a, e_tilde), action);
    Certificate& c = out.certificate;
    c.kind = "crossed_factorization";
    c.grid = a.grid();
    for (std::size_t i = 0; i < lhs.size(); ++i) {
        const double diff = std::abs(lhs[i] - rhs[i]);
        out.residual = std::max(out.residual, diff);
        c.observe(diff - tolerance, a.grid().point(i));
    }
    c.constants = {{"residual", out.residual}, {"tolerance", tolerance}};
    c.finalize();
    return out;
}

CrossedElement group_translate(const CrossedElement& F, std::size_t k, const ActionSpec& action)
{
    const GroupWindow& w = F.window;
    CrossedElement out = CrossedElement::zero(w, F.grid);
    out.omega = F.omega;
    double dropped = 0.0;
    for (std::size_t hi = 0; hi < w.size(); ++hi) {
        const auto src = w.slot(w.lattice(hi) - w.lattice(k));
        if (!src) {
            continue;
        }
        auto moved = action.apply(w, k, F.slices[*src]);
        dropped += moved.dropped_l1;
        out.slices[hi] = std::move(moved.function);
    }
    // Slices pushed out of the window.
    for (std::size_t si = 0; si < w.size(); ++si) {
        if (!w.slot(w.lattice(si) + w.lattice(k))) {
            dropped += l1_mass(F.slices[si]);
        }
    }
    out.truncated_mass = dropped;
    return out;
}

CrossedElement algebra_mult(const GridFunction& a, const CrossedElement& F)
{
    if (!(a.grid() == F.grid)) {
        throw GridMismatch("algebra_mult: a and slice grids differ");
    }
    CrossedElement out = F;
    for (auto& s : out.slices) {
        s = pointwise_mul(a, s);
    }
    out.truncated_mass = 0.0;
    return out;
}

// ---------------------------------------------------------------- estimates

namespace {

struct ScaledConstants {
    double C;
    int d;
    int l;
};

ScaledConstants scaled_constants(const ActionSpec& action)
{
    if (action.kind == ActionSpec::Kind::trivial) {
        return {1.0, 0, 1};
    }
    if (!action.scaled_space) {
        throw DomainError("action has no scaled-space certificate");
    }
    const auto& c = *action.scaled_space;
    if (!c.pass) {
        throw DomainError("action's scaled-space certificate does not pass");
    }
    return {c.constant("C"), static_cast<int>(c.constant("d")), static_cast<int>(c.constant("l"))};
}

double weighted_sup(const Scale& sigma, double p, const GridFunction& f)
{
    return sup_norm(scale_power_times(sigma.function(), p, f));
}

} // namespace

Certificate temperedness_certificate(const ActionSpec& action, const Scale& sigma, const Scale& omega,
                                     const GroupWindow& w, const std::vector<GridFunction>& samples, int dprime_max)
{
    const auto [C, d, l] = scaled_constants(action);
    const auto om = window_omega(omega, w);
    Certificate c;
    c.kind = "temperedness";
    c.grid = sigma.grid();
    c.constants = {{"C", C}, {"d", d}, {"l", l}};
    for (std::size_t s = 0; s < samples.size(); ++s) {
        for (int dp = 0; dp <= dprime_max; ++dp) {
            const double rhs_e = weighted_sup(sigma, static_cast<double>(l * dp), samples[s]);
            for (std::size_t k = 0; k < w.size(); ++k) {
                const auto moved = action.apply(w, k, samples[s]).function;
                const double lhs = weighted_sup(sigma, dp, moved);
                const double rhs = std::pow(C, dp) * std::pow(om[k], d * dp) * rhs_e;
                c.observe(slack_residual(lhs, rhs), {static_cast<double>(s), static_cast<double>(dp), w.point(k)});
            }
        }
    }
    if (samples.empty()) {
        c.worst_residual = 0.0;
    }
    c.notes.push_back("witness = (sample, d', g)");
    c.finalize();
    return c;
}

Certificate module_estimate_certificate(const CrossedElement& F, const GridFunction& e, const ActionSpec& action,
                                        const Scale& sigma, const Scale& omega, int dprime_max)
{
    const auto [C, d, l] = scaled_constants(action);
    const GroupWindow& w = F.window;
    const auto om = window_omega(omega, w);
    const auto Fe = act_on_module(F, e, action);
    Certificate c;
    c.kind = "module_estimate";
    c.grid = e.grid();
    c.constants = {{"C", C}, {"d", d}, {"l", l}};
    for (int dp = 0; dp <= dprime_max; ++dp) {
        double Fnorm = 0.0;
        for (std::size_t k = 0; k < w.size(); ++k) {
            Fnorm += w.weight() * std::pow(om[k], d * dp) * sup_norm(F.slices[k]);
        }
        const double lhs = weighted_sup(sigma, dp, Fe);
        const double rhs = std::pow(C, dp) * Fnorm * weighted_sup(sigma, static_cast<double>(l * dp), e);
        c.constants["lhs d'=" + std::to_string(dp)] = lhs;
        c.constants["rhs d'=" + std::to_string(dp)] = rhs;
        c.observe(slack_residual(lhs, rhs), {static_cast<double>(dp)});
    }
    c.notes.push_back("witness = d'");
    c.finalize();
    return c;
}

Certificate convolution_continuity_certificate(const CrossedElement& F1, const CrossedElement& F2,
                                               const ActionSpec& action, const Scale& omega,
                                               const Certificate& subpolynomial, int d_max)
{
    if (subpolynomial.kind != "subpolynomial" || !subpolynomial.pass) {
        throw DomainError("continuity: needs a passing subpolynomial certificate");
    }
    const double C = subpolynomial.constant("C");
    const int dw = static_cast<int>(subpolynomial.constant("d"));
    const auto conv = convolve(F1, F2, action);
    const auto sup = AlgebraSeminorm::sup(F1.grid.dim());
    Certificate c;
    c.kind = "convolution_continuity";
    c.grid = F1.grid;
    c.constants = {{"C", C}, {"d_omega", dw}};
    for (int d = 0; d <= d_max; ++d) {
        const double lhs = crossed_seminorm(conv, omega, d, 0, sup);
        const double rhs = std::pow(C, d) * crossed_seminorm(F1, omega, d * dw, 0, sup) *
                           crossed_seminorm(F2, omega, d * dw, 0, sup);
        c.observe(slack_residual(lhs, rhs), {static_cast<double>(d)});
    }
    c.notes.push_back("witness = d");
    c.finalize();
    return c;
}

// ---------------------------------------------------------------- persistence

nlohmann::json manifest(const CrossedElement& F, const ActionSpec& action, const std::vector<std::string>& slice_files)
{
    nlohmann::json j;
    j["format"] = "dmf-crossed";
    j["version"] = 1;
    j["window"] = F.window.descriptor();
    j["grid"] = grid_to_json(F.grid);
    j["action"] = action.descriptor();
    if (F.omega) {
        j["omega"] = F.omega->closed_form() ? F.omega->closed_form()->descriptor()
                                            : nlohmann::json(std::vector<double>(F.omega->function().values().begin(),
                                                                                 F.omega->function().values().end()));
    } else {
        j["omega"] = nullptr;
    }
    j["truncated_mass"] = F.truncated_mass;
    j["slices"] = slice_files;
    return j;
}

void write_crossed(const std::filesystem::path& dir, const CrossedElement& F, const ActionSpec& action)
{
    std::filesystem::create_directories(dir);
    std::vector<std::string> names;
    for (std::size_t k = 0; k < F.slices.size(); ++k) {
        names.push_back("slice_" + std::to_string(k) + ".bin");
        save_binary(dir / names.back(), F.slices[k]);
    }
    std::ofstream os(dir / "manifest.json", std::ios::binary);
    os << manifest(F, action, names).dump(2) << '\n';
    if (!os) {
        throw Error("write_crossed: cannot write " + (dir / "manifest.json").string());
    }
}

CrossedElement read_crossed(const std::filesystem::path& dir)
{
    std::ifstream is(dir / "manifest.json", std::ios::binary);
    if (!is) {
        throw Error("read_crossed: cannot open " + (dir / "manifest.json").string());
    }
    const auto j = nlohmann::json::parse(is);
    if (j.value("format", std::string()) != "dmf-crossed") {
        throw DomainError("read_crossed: not a crossed-element manifest");
    }
    CrossedElement F;
    F.window = GroupWindow::from_json(j.at("window"));
    F.grid = grid_from_json(j.at("grid"));
    F.truncated_mass = j.value("truncated_mass", 0.0);
    for (const auto& name : j.at("slices")) {
        auto s = load_grid_function(dir / name.get<std::string>());
        if (!(s.grid() == F.grid)) {
            throw GridMismatch("read_crossed: slice " + name.get<std::string>() + " has a different grid");
        }
        F.slices.push_back(std::move(s));
    }
    if (F.slices.size() != F.window.size()) {
        throw DomainError("read_crossed: slice count does not match the window");
    }
    if (j.contains("omega") && j.at("omega").is_object()) {
        F.omega = Scale::from_closed_form(ClosedForm::from_json(j.at("omega")), F.window.grid(), ScaleKind::on_group);
    }
    return F;
}

} // namespace dmf
