#include <doctest.h>

#include <cmath>

#include "dmf/errors.hpp"
#include "dmf/factorization.hpp"

using namespace dmf;

namespace {

const Grid& box()
{
    static const Grid g = Grid::symmetric(8, 1.0 / 64);
    return g;
}

Scale one_plus_x2(const Grid& g = box())
{
    return Scale::from_closed_form(ClosedForm::polynomial({1, 0, 1}), g);
}

GridFunction gaussian(const Grid& g = box())
{
    return sample([](double x) { return std::exp(-x * x); }, g);
}

GridFunction odd_gaussian(const Grid& g = box())
{
    return sample([](double x) { return x * std::exp(-x * x); }, g);
}

const FactorizationResult& gaussian_run()
{
    static const FactorizationResult r = factorize_function(gaussian(), one_plus_x2());
    return r;
}

bool is_even(const GridFunction& f, double tol)
{
    const auto& g = f.grid();
    for (std::size_t i = 0; i < g.size(); ++i) {
        auto x = g.point(i);
        x[0] = -x[0];
        const auto j = g.find(x);
        if (!j || std::abs(f[i] - f[*j]) > tol * std::max(1.0, std::abs(f[i]))) {
            return false;
        }
    }
    return true;
}

} // namespace

TEST_CASE("factorizing zero")
{
    const auto r = factorize_function(GridFunction::constant(box(), 0.0), one_plus_x2());
    CHECK(r.residual == 0.0);
    CHECK(sup_norm(r.phi) == 0.0);
    CHECK(r.pass());
}

TEST_CASE("Gaussian factorization")
{
    const auto& r = gaussian_run();
    CHECK(r.pass());
    CHECK(r.residual <= 1e-6);
    CHECK(r.residual <= r.budget.total());
    CHECK(r.tail_bound >= 0.0);
    CHECK(r.residual >= 0.0);
    for (double v : r.theta.values()) {
        CHECK(v > 0.0);
    }
    CHECK(is_even(r.theta, 1e-15));
    CHECK(is_even(r.phi, 1e-15));
    // the product really reproduces psi
    const auto prod = pointwise_mul(r.theta, r.phi);
    CHECK(sup_norm(pointwise_sub(prod, r.psi)) == r.residual);
    REQUIRE(r.scale.upper);
    CHECK(r.scale.upper->pass);
    CHECK(r.scale.lower->pass);
}

TEST_CASE("theta inverts the truncated product")
{
    const auto& r = gaussian_run();
    CHECK(r.identity.pass);
    const auto& s = r.scale.sigma;
    for (std::size_t i = 0; i < s.grid().size(); ++i) {
        CHECK(std::abs(r.theta[i] * eval_phi_lambda(r.lambda, s[i]).value - 1.0) <= 1e-12);
    }
}

TEST_CASE("selected lambda respects the alpha bounds")
{
    const auto& r = gaussian_run();
    const auto& l = r.lambda;
    CHECK(l.alpha(0) == 1.0);
    for (std::size_t n = 1; n < r.M_select.size(); ++n) {
        const double nd = static_cast<double>(n);
        CHECK(l.alpha(n) <= std::min(l.betas[n], 1.0 / (nd * nd)));
    }
    for (std::size_t j = 1; j < l.K(); ++j) {
        CHECK(l.exponents[j] > l.exponents[j - 1]);
    }
}

TEST_CASE("M table entries match direct seminorms")
{
    const auto& r = gaussian_run();
    const auto& s = r.scale.sigma;
    for (int d : {0, 2, 4}) {
        for (int l : {0, 1, 2}) {
            for (std::size_t n : {0u, 1u, 3u}) {
                const int p = (d + 1) * l + 2 * static_cast<int>(n);
                double ref = 0.0;
                for (int k = 0; k <= l; ++k) {
                    ref = std::max(ref, seminorm_sigma(r.psi, s, {p, MultiIndex::along(1, 0, k)}));
                }
                CHECK(r.M_table[static_cast<std::size_t>(d)][static_cast<std::size_t>(l)][n] ==
                      doctest::Approx(ref).epsilon(1e-10));
            }
        }
    }
}

TEST_CASE("partial sums are Cauchy with the series majorant as modulus")
{
    const auto& r = gaussian_run();
    const auto& s = r.scale.sigma;
    const std::size_t pairs[][2] = {{0, 1}, {0, 3}, {1, 4}, {2, 6}};
    for (const auto& pr : pairs) {
        const auto a = partial_series(r.lambda, s.function(), r.psi, pr[0]);
        const auto b = partial_series(r.lambda, s.function(), r.psi, pr[1]);
        const auto diff = pointwise_sub(b, a);
        for (int d = 0; d <= 4; ++d) {
            for (int l = 0; l <= 2; ++l) {
                double bound = 0.0;
                for (std::size_t n = pr[0] + 1; n <= pr[1]; ++n) {
                    bound += r.lambda.alpha(n) * series_term_majorant(r, d, l, n);
                }
                const double v = seminorm_sigma(diff, s, {d, MultiIndex::along(1, 0, l)});
                CHECK(v <= bound * (1 + 1e-9) + 1e-300);
            }
        }
    }
}

TEST_CASE("factorize refuses functions outside the space proxy")
{
    const auto slow = sample([](double x) { return 1.0 / (1 + x * x); }, box());
    CHECK_THROWS_AS(factorize_function(slow, one_plus_x2()), DomainError);
    FactorizeOptions o;
    o.epsilon = 0.0;
    CHECK_THROWS_AS(factorize_function(gaussian(), one_plus_x2(), o), DomainError);
    o = {};
    o.N_cap = 10;
    CHECK_THROWS_AS(factorize_function(gaussian(), one_plus_x2(), o), DomainError);
}

TEST_CASE("module factorization of zero")
{
    const auto r = factorize_module_element(GridFunction::constant(box(), 0.0), one_plus_x2(), ModuleSpec::self(1));
    CHECK(r.residual == 0.0);
    CHECK(sup_norm(r.f) == 0.0);
    CHECK(r.certificate.pass);
}

TEST_CASE("module factorization of an odd element")
{
    const auto r = factorize_module_element(odd_gaussian(), one_plus_x2(), ModuleSpec::self(1));
    CHECK(r.certificate.pass);
    CHECK(r.residual <= 1e-6);
    for (const auto& sr : r.seminorm_residuals) {
        CHECK(sr.residual <= sr.budget * (1 + 1e-12));
    }
    const auto prod = pointwise_mul(r.theta, r.f);
    for (std::size_t i = 0; i < prod.size(); ++i) {
        CHECK(std::abs(prod[i] - r.e[i]) <= 1e-6);
    }
}

TEST_CASE("module path reproduces the function path on the Gaussian")
{
    const auto m = factorize_module_element(gaussian(), one_plus_x2(), ModuleSpec::self(1));
    const auto& f = gaussian_run();
    CHECK(m.certificate.pass);
    CHECK(m.residual <= 1e-6);
    REQUIRE(m.theta.grid() == f.theta.grid());
    const auto a = pointwise_mul(m.theta, m.f);
    const auto b = pointwise_mul(f.theta, f.phi);
    CHECK(sup_norm(pointwise_sub(a, b)) <= m.budget.total() + f.budget.total());
}

TEST_CASE("C_0 module carries the sup norm only")
{
    const auto r = factorize_module_element(gaussian(), one_plus_x2(), ModuleSpec::c0(1));
    CHECK(r.certificate.pass);
    CHECK(r.seminorm_residuals.size() == 1);
    ModuleSpec bad = ModuleSpec::c0(1);
    bad.seminorms.push_back({1, MultiIndex::zero(1)});
    CHECK_THROWS_AS(factorize_module_element(gaussian(), one_plus_x2(), bad), DomainError);
}

TEST_CASE("identity multiplier returns the element")
{
    const auto r = extend_multiplier(MultiplierSpec::identity(), gaussian(), one_plus_x2(), ModuleSpec::self(1));
    CHECK(sup_norm(pointwise_sub(r.Te, r.factorization.e)) <= r.budget);
}

TEST_CASE("sigma^2 extends to the direct pointwise action")
{
    const auto s = one_plus_x2();
    const auto r = extend_multiplier(MultiplierSpec::scale_power(s, 2), gaussian(), s, ModuleSpec::self(1));
    const auto& g = r.Te.grid();
    double worst = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double x = g.point(i)[0];
        worst = std::max(worst, std::abs(r.Te[i] - (1 + x * x) * (1 + x * x) * std::exp(-x * x)));
    }
    CHECK(worst <= 1e-6);
    CHECK(worst <= r.budget);
    CHECK(r.tau_max == doctest::Approx(65.0 * 65.0));
}

TEST_CASE("two tolerances give the same extension within the combined budgets")
{
    const auto s = one_plus_x2();
    FactorizeOptions a, b;
    a.epsilon = 1e-8;
    b.epsilon = 1e-4;
    const auto ra = extend_multiplier(MultiplierSpec::scale_power(s, 2), odd_gaussian(), s, ModuleSpec::self(1), a);
    const auto rb = extend_multiplier(MultiplierSpec::scale_power(s, 2), odd_gaussian(), s, ModuleSpec::self(1), b);
    CHECK(ra.factorization.lambda.offset != rb.factorization.lambda.offset);
    CHECK(sup_norm(pointwise_sub(ra.Te, rb.Te)) <= ra.budget + rb.budget);
}

TEST_CASE("serialized results carry the certificates")
{
    const auto j = to_json(gaussian_run());
    CHECK(j["certificates"].contains("reciprocal_identity"));
    CHECK(j["lambda"]["exponents"].size() == gaussian_run().lambda.K());
    CHECK(j["residual"].get<double>() == gaussian_run().residual);
}
