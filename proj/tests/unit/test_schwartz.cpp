#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "dmf/errors.hpp"
#include "dmf/schwartz.hpp"
#include "oracles.hpp"

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

SeminormIndex idx(int d, int k = 0)
{
    return {d, MultiIndex::along(1, 0, k)};
}

} // namespace

TEST_CASE("seminorm_sigma on simple functions")
{
    CHECK(seminorm_sigma(GridFunction::constant(box(), 0.0), one_plus_x2(), idx(3, 1)) == 0.0);
    CHECK(seminorm_sigma(gaussian(), one_plus_x2(), idx(0)) == 1.0);
    const double ref = oracle::dense_max([](double x) { return (1 + x * x) * std::exp(-x * x); }, -8, 8);
    CHECK(seminorm_sigma(gaussian(), one_plus_x2(), idx(1)) == doctest::Approx(ref).epsilon(1e-12));
    CHECK(ref == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("seminorm_sigma of a derivative against a dense oracle")
{
    // sup (1 + x^2)^2 |2x| e^{-x^2}, attained off the lattice; the grid value can only be smaller,
    // and with h = 1/64 the gap is second order.
    const double ref =
        oracle::dense_max([](double x) { return std::pow(1 + x * x, 2) * std::abs(2 * x) * std::exp(-x * x); }, -8, 8);
    const double v = seminorm_sigma(gaussian(), one_plus_x2(), idx(2, 1));
    CHECK(v <= ref * (1 + 1e-8));
    CHECK(v >= ref * (1 - 1e-3));
}

TEST_CASE("seminorm_sigma rejects mismatched grids")
{
    CHECK_THROWS_AS(seminorm_sigma(gaussian(Grid::symmetric(4, 0.5)), one_plus_x2(), idx(0)), GridMismatch);
}

TEST_CASE("Schwartz seminorms of the Gaussian")
{
    CHECK(seminorm_schwartz(GridFunction::constant(box(), 0.0), 2, 1) == 0.0);
    CHECK(seminorm_schwartz(gaussian(), 0, 0) == 1.0);
    const double ref = oracle::dense_max([](double r) { return r * r * std::exp(-r * r); }, -8, 8);
    // r^2 e^{-r^2} peaks at r = 1 with value 1/e.
    CHECK(ref == doctest::Approx(1.0 / std::numbers::e).epsilon(1e-12));
    CHECK(seminorm_schwartz(gaussian(), 2, 0) == doctest::Approx(ref).epsilon(1e-12));
}

TEST_CASE("seminorm triangle inequality, product bound and monotonicity in d")
{
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const auto g = Grid::symmetric(4, 1.0 / 16);
    const auto s = one_plus_x2(g);
    for (int t = 0; t < 20; ++t) {
        const double a = u(rng), b = u(rng), c = u(rng);
        const auto f = sample([&](double x) { return a * std::exp(-x * x) + b * x * std::exp(-x * x / 2); }, g);
        const auto h = sample([&](double x) { return c / (1 + x * x * x * x); }, g);
        for (int d = 0; d <= 3; ++d) {
            for (int k = 0; k <= 2; ++k) {
                const double lhs = seminorm_sigma(pointwise_add(f, h), s, idx(d, k));
                const double rhs = seminorm_sigma(f, s, idx(d, k)) + seminorm_sigma(h, s, idx(d, k));
                CHECK(lhs <= rhs * (1 + 1e-12));
                if (d < 3) {
                    CHECK(seminorm_sigma(f, s, idx(d, k)) <= seminorm_sigma(f, s, idx(d + 1, k)));
                }
            }
            CHECK(seminorm_sigma(pointwise_mul(f, h), s, idx(d)) <= seminorm_sigma(f, s, idx(d)) * sup_norm(h) * (1 + 1e-12));
        }
    }
}

TEST_CASE("multiplier bound for sigma = 1 + x^2")
{
    const auto s = one_plus_x2();
    const auto db = derivative_bound_certificate(s, 2);
    REQUIRE(db.pass);
    std::vector<SeminormIndex> list;
    for (int d = 0; d <= 3; ++d) {
        for (int k = 0; k <= 2; ++k) {
            list.push_back(idx(d, k));
        }
    }
    const auto r = multiplier_sigma(gaussian(), s, list, db);
    CHECK(r.certificate.pass);
    for (std::size_t i = 0; i < box().size(); i += 37) {
        const double x = box().point(i)[0];
        CHECK(r.product[i] == doctest::Approx((1 + x * x) * std::exp(-x * x)).epsilon(1e-15));
    }
    // every reported pair satisfies the inequality it claims
    for (const auto& e : list) {
        CHECK(r.certificate.constant("lhs " + e.label()) <= r.certificate.constant("rhs " + e.label()) * (1 + 1e-12));
    }

    const auto zero = multiplier_sigma(GridFunction::constant(box(), 0.0), s, list, db);
    CHECK(zero.certificate.pass);
    CHECK(sup_norm(zero.product) == 0.0);
}

TEST_CASE("multiplier by the constant scale is the identity")
{
    const auto s = Scale::from_closed_form(ClosedForm::constant(1.0), box());
    const auto db = derivative_bound_certificate(s, 2);
    REQUIRE(db.pass);
    const auto r = multiplier_sigma(gaussian(), s, {idx(0), idx(1, 1)}, db);
    CHECK(r.certificate.pass);
    CHECK(sup_norm(pointwise_sub(r.product, gaussian())) == 0.0);
}

TEST_CASE("multiplier requires a passing derivative bound")
{
    auto bad = derivative_bound_certificate(one_plus_x2(), 2);
    bad.pass = false;
    CHECK_THROWS_AS(multiplier_sigma(gaussian(), one_plus_x2(), {idx(0)}, bad), DomainError);
    auto other = bad;
    other.kind = "proper";
    CHECK_THROWS_AS(multiplier_sigma(gaussian(), one_plus_x2(), {idx(0)}, other), DomainError);
}

TEST_CASE("composition with a scale")
{
    const auto s = one_plus_x2();
    const auto c1 = compose_scale(Profile::constant(1.0), s);
    CHECK(sup_norm(pointwise_sub(c1, GridFunction::constant(box(), 1.0))) == 0.0);
    const auto r = compose_scale(Profile::reciprocal(), s);
    for (std::size_t i = 0; i < box().size(); ++i) {
        const double x = box().point(i)[0];
        CHECK(r[i] == 1.0 / (1 + x * x));
    }
}

TEST_CASE("composition is a pointwise algebra homomorphism")
{
    const auto s = one_plus_x2();
    const auto a = Profile::gaussian();
    const auto b = Profile::rational(1.5);
    const auto prod = compose_scale(Profile::product(a, b), s);
    const auto sum = compose_scale(Profile::sum(a, b), s);
    const auto ca = compose_scale(a, s);
    const auto cb = compose_scale(b, s);
    for (std::size_t i = 0; i < box().size(); ++i) {
        CHECK(prod[i] == ca[i] * cb[i]);
        CHECK(sum[i] == ca[i] + cb[i]);
    }
}

TEST_CASE("chain rule certificate")
{
    const auto s = one_plus_x2(Grid::symmetric(4, 1.0 / 64));
    CHECK(chain_rule_certificate(Profile::rational(1.0), s).pass);
    CHECK(chain_rule_certificate(Profile::gaussian(), s).pass);
    CHECK_THROWS_AS(chain_rule_certificate(Profile::samples(GridFunction::constant(Grid::symmetric(1, 0.5), 1.0)), s),
                    DomainError);
}

TEST_CASE("decay reports")
{
    const auto s = one_plus_x2();
    const auto g = decay_report(gaussian(), s, 6, 2);
    CHECK(g.verdict == Verdict::consistent);
    CHECK_FALSE(g.witness);
    for (const auto& e : g.table) {
        CHECK(e.value >= 0.0);
        CHECK_FALSE(e.growing);
    }
    CHECK(g.table.size() == 7 * 3);

    const auto r = decay_report(compose_scale(Profile::reciprocal(), s), s, 6, 2);
    CHECK(r.verdict == Verdict::inconsistent);
    REQUIRE(r.witness);
    CHECK(r.witness->first == 2);
    CHECK(r.entry(2, MultiIndex::zero(1)).growing);
    CHECK_FALSE(r.entry(1, MultiIndex::zero(1)).growing);
    REQUIRE(r.decay_exponent[0]);
    CHECK(*r.decay_exponent[0] == doctest::Approx(2.0).epsilon(0.05));

    const auto c = decay_report(GridFunction::constant(box(), 1.0), s, 6, 2);
    CHECK(c.verdict == Verdict::inconsistent);
    REQUIRE(c.witness);
    CHECK(c.witness->first == 1);
}

TEST_CASE("decay report serializations")
{
    const auto r = decay_report(gaussian(Grid::symmetric(4, 1.0 / 8)), one_plus_x2(Grid::symmetric(4, 1.0 / 8)), 2, 1);
    const auto j = to_json(r);
    CHECK(j["verdict"] == "consistent");
    CHECK(j["table"].size() == r.table.size());
    const auto csv = to_csv(r);
    CHECK(std::count(csv.begin(), csv.end(), '\n') >= static_cast<long>(r.table.size()));
}
