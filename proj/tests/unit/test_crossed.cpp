#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "dmf/crossed.hpp"
#include "dmf/errors.hpp"
#include "oracles.hpp"

using namespace dmf;

namespace {

const Grid& space()
{
    static const Grid g = Grid::symmetric(8, 1.0 / 16);
    return g;
}

constexpr std::int64_t kStep = 16; // one group unit in lattice steps of space()

Scale sigma_x2()
{
    return Scale::from_closed_form(ClosedForm::polynomial({1, 0, 1}), space());
}

Scale omega_on(const GroupWindow& w)
{
    return Scale::from_closed_form(ClosedForm::one_plus_abs_pow(1), w.grid(), ScaleKind::on_group);
}

GridFunction gaussian(double c = 0.0, double s = 1.0)
{
    return sample([=](double x) { return std::exp(-(x - c) * (x - c) / s); }, space());
}

GridFunction random_slice(std::mt19937_64& rng, double support)
{
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> v(space().size(), 0.0);
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (std::abs(space().point(i)[0]) <= support) {
            v[i] = u(rng);
        }
    }
    return GridFunction(space(), std::move(v));
}

CrossedElement random_element(std::mt19937_64& rng, const GroupWindow& w, std::int64_t group_support)
{
    auto F = CrossedElement::zero(w, space());
    for (std::size_t k = 0; k < w.size(); ++k) {
        if (std::abs(w.lattice(k)) <= group_support) {
            F.slices[k] = random_slice(rng, 2.0);
        }
    }
    return F;
}

oracle::Raw raw(const CrossedElement& F)
{
    oracle::Raw r;
    for (const auto& s : F.slices) {
        r.emplace_back(s.values().begin(), s.values().end());
    }
    return r;
}

double max_diff(const CrossedElement& A, const oracle::Raw& B)
{
    double m = 0.0;
    for (std::size_t k = 0; k < A.slices.size(); ++k) {
        for (std::size_t i = 0; i < A.slices[k].size(); ++i) {
            m = std::max(m, std::abs(A.slices[k][i] - B[k][i]));
        }
    }
    return m;
}

double max_diff(const CrossedElement& A, const CrossedElement& B)
{
    return max_diff(A, raw(B));
}

} // namespace

TEST_CASE("group windows")
{
    const auto z = GroupWindow::integers(2);
    CHECK(z.size() == 5);
    CHECK(z.point(z.identity()) == 0.0);
    CHECK(z.weight() == 1.0);
    for (std::size_t k = 0; k < z.size(); ++k) {
        CHECK(z.slot(-z.lattice(k)).has_value());
    }
    const auto r = GroupWindow::sampled_reals(1.0, 0.125);
    CHECK(r.size() == 17);
    CHECK(r.weight() == 0.125);
    CHECK(GroupWindow::from_json(r.descriptor()) == r);
    CHECK_THROWS_AS(GroupWindow::integers(-1), DomainError);
    CHECK_THROWS_AS(GroupWindow::sampled_reals(1.0, 0.3), DomainError);
}

TEST_CASE("action is a homomorphism on lattice translations")
{
    const auto w = GroupWindow::integers(3);
    const auto act = ActionSpec::translation();
    // compact support so no intermediate translation pushes mass off the box
    const auto a = sample([](double x) { return bump_profile(x - 0.5, 1.0); }, space());
    CHECK(sup_norm(pointwise_sub(act.apply(w, w.identity(), a).function, a)) == 0.0);
    for (std::size_t g = 0; g < w.size(); ++g) {
        for (std::size_t h = 0; h < w.size(); ++h) {
            const auto gh = w.slot(w.lattice(g) + w.lattice(h));
            if (!gh) {
                continue;
            }
            const auto lhs = act.apply(w, g, act.apply(w, h, a).function).function;
            const auto rhs = act.apply(w, *gh, a).function;
            CHECK(sup_norm(pointwise_sub(lhs, rhs)) == 0.0);
        }
    }
    CHECK(act.steps(w, w.identity() + 1, space())[0] == kStep);
    CHECK_THROWS_AS(ActionSpec::translation(0.01).steps(w, 4, space()), DomainError);
}

TEST_CASE("convolution with zero and with point masses")
{
    const auto w = GroupWindow::integers(2);
    std::mt19937_64 rng(1);
    const auto F = random_element(rng, w, 1);
    const auto Z = CrossedElement::zero(w, space());
    CHECK(max_diff(convolve(F, Z, ActionSpec::translation()), Z) == 0.0);

    const auto a1 = gaussian(0.3), a2 = gaussian(-0.2, 2.0);
    const auto p = convolve(CrossedElement::point_mass(w, a1), CrossedElement::point_mass(w, a2), ActionSpec::trivial());
    CHECK(max_diff(p, CrossedElement::point_mass(w, pointwise_mul(a1, a2))) == 0.0);
}

TEST_CASE("convolution matches the direct triple sum")
{
    const auto w = GroupWindow::integers(2);
    std::mt19937_64 rng(5);
    for (int t = 0; t < 10; ++t) {
        const auto F1 = random_element(rng, w, 2);
        const auto F2 = random_element(rng, w, 2);
        const auto C = convolve(F1, F2, ActionSpec::translation());
        CHECK(max_diff(C, oracle::convolve(raw(F1), raw(F2), 2, kStep)) <= 1e-14);
    }
}

TEST_CASE("convolution is associative and bilinear")
{
    const auto w = GroupWindow::integers(4);
    const auto act = ActionSpec::translation();
    std::mt19937_64 rng(11);
    for (int t = 0; t < 20; ++t) {
        const auto F1 = random_element(rng, w, 1);
        const auto F2 = random_element(rng, w, 1);
        const auto F3 = random_element(rng, w, 1);
        const auto lhs = convolve(convolve(F1, F2, act), F3, act);
        const auto rhs = convolve(F1, convolve(F2, F3, act), act);
        CHECK(max_diff(lhs, rhs) <= 1e-9);
        CHECK(lhs.truncated_mass == 0.0);
        // same thing through the oracle
        const auto o = oracle::convolve(oracle::convolve(raw(F1), raw(F2), 4, kStep), raw(F3), 4, kStep);
        CHECK(max_diff(lhs, o) <= 1e-12);
        const auto lin = convolve(add(scale(2.0, F1), F2), F3, act);
        const auto sep = add(scale(2.0, convolve(F1, F3, act)), convolve(F2, F3, act));
        CHECK(max_diff(lin, sep) <= 1e-12);
    }
}

TEST_CASE("window truncation is reported")
{
    const auto w = GroupWindow::integers(1);
    auto F = CrossedElement::zero(w, space());
    F.slices[2] = gaussian(); // slot +1
    const auto C = convolve(F, F, ActionSpec::translation());
    CHECK(C.truncated_mass > 0.0);
}

TEST_CASE("crossed seminorms")
{
    const auto w = GroupWindow::integers(2);
    const auto om = omega_on(w);
    const auto m = AlgebraSeminorm::sup(1);
    CHECK(crossed_seminorm(CrossedElement::zero(w, space()), om, 3, 0, m) == 0.0);
    const auto a = gaussian(0.0, 0.5);
    CHECK(crossed_seminorm(CrossedElement::point_mass(w, a), om, 2, 0, m) == sup_norm(a));

    auto F = CrossedElement::zero(w, space());
    F.slices[w.identity() - 1] = a;
    F.slices[w.identity() + 1] = a;
    CHECK(crossed_seminorm(F, om, 1, 0, m) == doctest::Approx(2 * (2 * sup_norm(a))).epsilon(1e-15));

    AlgebraSeminorm weighted{sigma_x2(), {1, MultiIndex::zero(1)}};
    CHECK(crossed_seminorm(F, om, 1, 0, weighted) ==
          doctest::Approx(4 * seminorm_sigma(a, sigma_x2(), {1, MultiIndex::zero(1)})).epsilon(1e-15));
    CHECK_THROWS_AS(crossed_seminorm(F, om, 1, 1, m), DomainError);
}

TEST_CASE("group derivatives on a sampled window")
{
    // F(g) = g a: the first difference across slices is a, so the seminorm is
    // the trapezoid-free weighted sum over the shrunk window.
    const auto w = GroupWindow::sampled_reals(1.0, 0.125);
    const auto one = Scale::from_closed_form(ClosedForm::constant(1.0), w.grid(), ScaleKind::on_group);
    const auto a = gaussian();
    auto F = CrossedElement::zero(w, space());
    for (std::size_t k = 0; k < w.size(); ++k) {
        F.slices[k] = scalar_mul(w.point(k), a);
    }
    const double v = crossed_seminorm(F, one, 0, 1, AlgebraSeminorm::sup(1));
    const double points = static_cast<double>(w.size() - 4);
    CHECK(v == doctest::Approx(points * w.weight() * sup_norm(a)).epsilon(1e-12));
}

TEST_CASE("integrated representation")
{
    const auto w = GroupWindow::integers(2);
    const auto act = ActionSpec::translation();
    std::mt19937_64 rng(17);
    const auto e = gaussian(0.0, 4.0);
    CHECK(sup_norm(act_on_module(CrossedElement::zero(w, space()), e, act)) == 0.0);
    const auto a = gaussian(1.0);
    CHECK(sup_norm(pointwise_sub(act_on_module(CrossedElement::point_mass(w, a), e, act), pointwise_mul(a, e))) == 0.0);
    for (int t = 0; t < 20; ++t) {
        const auto F1 = random_element(rng, w, 1);
        const auto F2 = random_element(rng, w, 1);
        const auto lhs = act_on_module(convolve(F1, F2, act), e, act);
        const auto rhs = act_on_module(F1, act_on_module(F2, e, act), act);
        CHECK(sup_norm(pointwise_sub(lhs, rhs)) <= 1e-9);
        const auto o = oracle::act(raw(F2), {e.values().begin(), e.values().end()}, 2, kStep);
        const auto Fe = act_on_module(F2, e, act);
        for (std::size_t i = 0; i < o.size(); ++i) {
            CHECK(Fe[i] == doctest::Approx(o[i]).epsilon(1e-14).scale(1e-14));
        }
    }
}

TEST_CASE("covariance")
{
    const auto w = GroupWindow::integers(2);
    const auto a = gaussian(0.5), e = gaussian(-1.0, 3.0);
    for (std::size_t k = 0; k < w.size(); ++k) {
        const auto c = check_covariance(w, k, a, e, ActionSpec::translation());
        CHECK(c.pass);
        CHECK(c.constant("sup_residual") <= 1e-12);
    }
    CHECK(check_covariance(w, w.identity(), a, e, ActionSpec::translation()).constant("sup_residual") == 0.0);
    CHECK(check_covariance(w, 0, a, e, ActionSpec::trivial()).constant("sup_residual") == 0.0);
}

TEST_CASE("approximate identity")
{
    const auto z = GroupWindow::integers(2);
    const auto a = gaussian(0.0, 0.5), e = gaussian(0.0, 4.0);
    const auto act = ActionSpec::translation();
    const auto P = approx_identity(3, a, z, 1.0);
    CHECK(max_diff(P, CrossedElement::point_mass(z, a)) == 0.0);
    CHECK(sup_norm(pointwise_sub(act_on_module(P, e, act), pointwise_mul(a, e))) == 0.0);

    const auto r = GroupWindow::sampled_reals(1.0, 1.0 / 16);
    const auto ae = pointwise_mul(a, e);
    double prev = std::numeric_limits<double>::infinity();
    for (int n = 0; n < 3; ++n) {
        const auto Pn = approx_identity(n, a, r, 1.0);
        double mass = 0.0;
        for (std::size_t k = 0; k < r.size(); ++k) {
            if (sup_norm(Pn.slices[k]) > 0.0) {
                mass += r.weight() * Pn.slices[k][space().size() / 2] / a[space().size() / 2];
            }
        }
        CHECK(mass == doctest::Approx(1.0).epsilon(1e-14));
        const double dist = sup_norm(pointwise_sub(act_on_module(Pn, e, act), ae));
        CHECK(dist < prev);
        prev = dist;
    }
    const auto Zr = approx_identity(1, GridFunction::constant(space(), 0.0), r, 1.0);
    for (const auto& s : Zr.slices) {
        CHECK(sup_norm(s) == 0.0);
    }
    CHECK_THROWS_AS(approx_identity(0, a, r, 2.0), DomainError);
    CHECK_THROWS_AS(approx_identity(5, a, r, 1.0), DomainError);
}

TEST_CASE("Garding smoothing")
{
    const auto z = GroupWindow::integers(2);
    const auto act = ActionSpec::translation();
    const auto e = gaussian(0.2);
    const auto delta = sample([](double g) { return g == 0.0 ? 1.0 : 0.0; }, z.grid());
    CHECK(sup_norm(pointwise_sub(garding_smooth(delta, z, e, act), e)) == 0.0);

    const auto c = GridFunction::constant(space(), 0.7);
    const auto uniform = GridFunction::constant(z.grid(), 1.0 / 5);
    CHECK(sup_norm(pointwise_sub(garding_smooth(uniform, z, c, ActionSpec::trivial()), c)) <= 1e-15);
}

TEST_CASE("Garding smoothing matches quadrature on the line")
{
    const double h = 1.0 / 256;
    const double r = 0.5;
    const auto w = GroupWindow::sampled_reals(1.0, h);
    const Grid m = Grid::symmetric(6, h);
    const double Z = oracle::gauss_legendre([r](double g) { return bump_profile(g, r); }, -r, r);
    const auto f = sample([=](double g) { return bump_profile(g, r) / Z; }, w.grid());
    const auto e = sample([](double x) { return std::exp(-x * x); }, m);
    const auto s = garding_smooth(f, w, e, ActionSpec::translation());
    for (std::size_t i = 0; i < m.size(); i += 97) {
        const double x = m.point(i)[0];
        if (std::abs(x) > 5.0) {
            continue;
        }
        const double ref = oracle::gauss_legendre(
            [=](double g) { return bump_profile(g, r) / Z * std::exp(-(x - g) * (x - g)); }, -r, r);
        CHECK(std::abs(s[i] - ref) <= 1e-10);
    }
}

TEST_CASE("crossed factorization")
{
    const auto act = ActionSpec::translation();
    const auto et = gaussian(0.0, 2.0);
    const auto a = gaussian(0.3, 0.5);

    const auto z0 = GroupWindow::integers(0);
    const auto d0 = GridFunction::constant(z0.grid(), 1.0);
    const auto r0 = factorize_crossed(et, d0, z0, a, act);
    CHECK(max_diff(r0.b, CrossedElement::point_mass(z0, a)) == 0.0);
    CHECK(r0.residual == 0.0);

    const auto w = GroupWindow::integers(2);
    const auto f = sample([](double g) { return std::exp(-g * g); }, w.grid());
    const auto r = factorize_crossed(et, f, w, a, act);
    CHECK(r.certificate.pass);
    CHECK(r.residual <= 1e-9);
    // b e~ by direct sums
    oracle::Raw b;
    for (std::size_t k = 0; k < w.size(); ++k) {
        std::vector<double> s(space().size());
        for (std::size_t i = 0; i < s.size(); ++i) {
            s[i] = f[k] * oracle::shifted({a.values().begin(), a.values().end()}, static_cast<std::int64_t>(i),
                                          w.lattice(k), kStep);
        }
        b.push_back(std::move(s));
    }
    CHECK(max_diff(r.b, b) == 0.0);
    const auto be = oracle::act(b, {et.values().begin(), et.values().end()}, 2, kStep);
    const auto rhs = garding_smooth(f, w, pointwise_mul(a, et), act);
    for (std::size_t i = 0; i < be.size(); ++i) {
        CHECK(std::abs(be[i] - rhs[i]) <= 1e-12);
    }

    const auto rz = factorize_crossed(et, f, w, GridFunction::constant(space(), 0.0), act);
    for (const auto& s : rz.b.slices) {
        CHECK(sup_norm(s) == 0.0);
    }
}

TEST_CASE("group translation and algebra multiplication are compatible")
{
    const auto w = GroupWindow::integers(3);
    const auto act = ActionSpec::translation();
    std::mt19937_64 rng(23);
    const auto F = random_element(rng, w, 1);
    CHECK(max_diff(group_translate(F, w.identity(), act), F) == 0.0);
    CHECK(max_diff(algebra_mult(GridFunction::constant(space(), 1.0), F), F) == 0.0);
    const auto a = gaussian(0.4);
    for (std::size_t k = w.identity() - 1; k <= w.identity() + 1; ++k) {
        const auto lhs = group_translate(algebra_mult(a, F), k, act);
        const auto rhs = algebra_mult(act.apply(w, k, a).function, group_translate(F, k, act));
        CHECK(max_diff(lhs, rhs) <= 1e-15);
    }
    const auto far = group_translate(F, w.size() - 1, act);
    CHECK(far.truncated_mass > 0.0);
}

TEST_CASE("estimates with constants from the certificates")
{
    const auto w = GroupWindow::integers(4);
    const auto om = omega_on(w);
    const auto act = make_translation_action(sigma_x2(), om);
    REQUIRE(act.scaled_space);
    CHECK(act.scaled_space->pass);
    std::mt19937_64 rng(29);
    std::vector<GridFunction> samples{gaussian(), gaussian(1.0, 0.5), random_slice(rng, 2.0)};
    CHECK(temperedness_certificate(act, sigma_x2(), om, w, samples, 3).pass);
    for (int t = 0; t < 5; ++t) {
        const auto F = random_element(rng, w, 1);
        CHECK(module_estimate_certificate(F, gaussian(0.0, 2.0), act, sigma_x2(), om, 3).pass);
    }
    const auto sub = check_subpolynomial(om);
    REQUIRE(sub.pass);
    const auto F1 = random_element(rng, w, 1), F2 = random_element(rng, w, 1);
    CHECK(convolution_continuity_certificate(F1, F2, act, om, sub, 3).pass);
    auto bad = sub;
    bad.pass = false;
    CHECK_THROWS_AS(convolution_continuity_certificate(F1, F2, act, om, bad, 3), DomainError);
    CHECK_THROWS_AS(temperedness_certificate(ActionSpec::translation(), sigma_x2(), om, w, samples, 1), DomainError);
}

TEST_CASE("crossed elements round-trip through disk")
{
    const auto dir = std::filesystem::temp_directory_path() / "dmf_test_crossed_roundtrip";
    std::filesystem::remove_all(dir);
    const auto w = GroupWindow::integers(2);
    std::mt19937_64 rng(31);
    auto F = random_element(rng, w, 2);
    F.omega = omega_on(w);
    F.truncated_mass = 0.25;
    write_crossed(dir, F, ActionSpec::translation());
    const auto G = read_crossed(dir);
    CHECK(G.window == F.window);
    CHECK(G.grid == F.grid);
    CHECK(max_diff(G, F) == 0.0);
    CHECK(G.truncated_mass == 0.25);
    REQUIRE(G.omega);
    CHECK(G.omega->function().values()[0] == F.omega->function().values()[0]);
    std::filesystem::remove_all(dir);
}
