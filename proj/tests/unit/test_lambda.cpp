#include <doctest.h>

#include <cmath>
#include <random>

#include "dmf/errors.hpp"
#include "dmf/grid.hpp"
#include "dmf/lambda.hpp"
#include "oracles.hpp"

using namespace dmf;

namespace {

std::vector<long double> inverse_squares(const std::vector<int>& exps)
{
    std::vector<long double> c;
    for (int k : exps) {
        c.push_back(1.0L / (std::pow(2.0L, k) * std::pow(2.0L, k)));
    }
    return c;
}

std::vector<int> random_exponents(std::mt19937_64& rng, int K)
{
    std::vector<int> e;
    int k = static_cast<int>(rng() % 3);
    for (int j = 0; j < K; ++j) {
        e.push_back(k);
        k += 1 + static_cast<int>(rng() % 3);
    }
    return e;
}

} // namespace

TEST_CASE("empty product has a single coefficient")
{
    const auto a = alpha_coefficients({});
    CHECK(a == std::vector<double>{1.0});
    const auto l = LambdaSequence::from_exponents({});
    CHECK(l.alpha(0) == 1.0);
    CHECK(l.alpha(3) == 0.0);
    CHECK(eval_phi_lambda(l, 5.0).value == 1.0);
}

TEST_CASE("coefficients of (1+x^2)(1+x^2/4)(1+x^2/16)")
{
    const auto a = alpha_coefficients({0, 1, 2});
    REQUIRE(a.size() == 4);
    CHECK(a[0] == 1.0);
    CHECK(a[1] == 21.0 / 16);
    CHECK(a[2] == 21.0 / 64);
    CHECK(a[3] == 1.0 / 64);
}

TEST_CASE("coefficients match brute-force subset expansion for K <= 12")
{
    std::mt19937_64 rng(2024);
    for (int K = 0; K <= 12; ++K) {
        for (int rep = 0; rep < 4; ++rep) {
            const auto e = random_exponents(rng, K);
            const auto a = alpha_coefficients(e);
            const auto ref = oracle::expand_by_subsets(inverse_squares(e));
            REQUIRE(a.size() == ref.size());
            for (std::size_t n = 0; n < a.size(); ++n) {
                const long double rel = std::abs(static_cast<long double>(a[n]) - ref[n]) / ref[n];
                CHECK(rel <= 1e-12L);
            }
        }
    }
}

TEST_CASE("sum of coefficients is the product at x = 1")
{
    const auto l = LambdaSequence::from_exponents({0, 2, 3, 7});
    double s = 0.0;
    for (double a : l.alphas) {
        s += a;
    }
    CHECK(s == doctest::Approx(eval_phi_lambda(l, 1.0).value).epsilon(1e-15));
}

TEST_CASE("coefficient invariants")
{
    const auto l = LambdaSequence::from_exponents({1, 2, 5, 9});
    CHECK(l.alpha(0) == 1.0);
    for (double a : l.alphas) {
        CHECK(a >= 0.0);
    }
    CHECK(l.alpha(5) == 0.0);
    CHECK(l.tail_mass == doctest::Approx(std::ldexp(1.0, -18) / 3));
    CHECK_THROWS_AS(LambdaSequence::from_exponents({1, 1}), DomainError);
    CHECK_THROWS_AS(LambdaSequence::from_exponents({-1, 2}), DomainError);
}

TEST_CASE("product values at small x")
{
    const auto l = LambdaSequence::from_exponents({0, 1, 2});
    const auto at0 = eval_phi_lambda(l, 0.0);
    CHECK(at0.value == 1.0);
    CHECK(at0.tail_factor == 1.0);
    CHECK(eval_phi_lambda(l, 1.0).value == 85.0 / 32);
    CHECK(eval_chi_lambda(l, 0.0) == 1.0);
    CHECK(eval_chi_lambda(l, 1.0) == doctest::Approx(32.0 / 85).epsilon(1e-15));
}

TEST_CASE("tail factor bounds the dropped factors")
{
    const auto full = LambdaSequence::from_exponents({0, 1, 2, 3, 4, 5, 6, 7, 8, 9});
    const auto cut = LambdaSequence::from_exponents({0, 1, 2, 3});
    for (double x : {0.5, 2.0, 10.0, 40.0}) {
        const auto c = eval_phi_lambda(cut, x);
        CHECK(eval_phi_lambda(full, x).value <= c.value * c.tail_factor);
    }
}

TEST_CASE("series and product agree on a grid")
{
    const auto g = Grid::symmetric(8, 1.0 / 64);
    for (const auto& e : {std::vector<int>{0, 1, 2}, std::vector<int>{2, 4, 5, 8, 11}, std::vector<int>{3, 4, 5, 6, 7, 8, 9, 10}}) {
        const auto l = LambdaSequence::from_exponents(e);
        for (std::size_t i = 0; i < g.size(); ++i) {
            const double x = g.point(i)[0];
            const double p = eval_phi_lambda(l, x).value;
            CHECK(std::abs(eval_phi_series(l, x, l.K()) - p) <= 1e-12 * p);
        }
    }
}

TEST_CASE("product and reciprocal are even and monotone in |x|")
{
    const auto l = LambdaSequence::from_exponents({0, 3, 4, 6});
    double prev_phi = 0.0;
    double prev_chi = 2.0;
    for (int i = 0; i <= 400; ++i) {
        const double x = 0.05 * i;
        const double p = eval_phi_lambda(l, x).value;
        const double c = eval_chi_lambda(l, x);
        CHECK(p == eval_phi_lambda(l, -x).value);
        CHECK(c == eval_chi_lambda(l, -x));
        CHECK(p >= 1.0);
        CHECK(c > 0.0);
        CHECK(c <= 1.0);
        CHECK(p >= prev_phi);
        CHECK(c <= prev_chi);
        CHECK(std::abs(p * c - 1.0) <= 1e-12);
        prev_phi = p;
        prev_chi = c;
    }
}

TEST_CASE("chi profile derivative matches a central difference")
{
    const auto l = LambdaSequence::from_exponents({0, 2, 5});
    const auto prof = chi_lambda_profile(l);
    for (double t : {0.0, 0.7, 3.0, 12.0}) {
        const double h = 1e-5;
        const double fd = (prof(t + h) - prof(t - h)) / (2 * h);
        CHECK(prof.derivative(t) == doctest::Approx(fd).epsilon(1e-6));
    }
}

namespace {

void check_selected(const std::vector<double>& M, double eps)
{
    const auto l = select_lambda(M, eps);
    REQUIRE(l.betas.size() == M.size());
    double weighted = 0.0;
    for (std::size_t n = 1; n < M.size(); ++n) {
        const double nd = static_cast<double>(n);
        const double beta = eps * std::ldexp(1.0, -static_cast<int>(n)) / (1.0 + M[n]);
        CHECK(l.betas[n] == doctest::Approx(beta).epsilon(1e-14));
        CHECK(l.alpha(n) <= std::min(beta, 1.0 / (nd * nd)));
        weighted += l.alpha(n) * M[n];
    }
    CHECK(weighted <= 2 * eps);
    for (std::size_t j = 1; j < l.K(); ++j) {
        CHECK(l.exponents[j] == l.exponents[j - 1] + 1);
    }
}

} // namespace

TEST_CASE("select_lambda meets alpha_n <= min(beta_n, 1/n^2)")
{
    const int N = 30;
    std::vector<double> zero(N + 1, 0.0), one(N + 1, 1.0), fact(N + 1), pow2(N + 1);
    for (int n = 0; n <= N; ++n) {
        fact[static_cast<std::size_t>(n)] = std::tgamma(n + 1.0);
        pow2[static_cast<std::size_t>(n)] = std::ldexp(1.0, n);
    }
    for (double eps : {1e-2, 1e-8}) {
        check_selected(zero, eps);
        check_selected(one, eps);
        check_selected(fact, eps);
        check_selected(pow2, eps);
    }
}

TEST_CASE("select_lambda with M_n = 1 meets eps 2^-n / 2")
{
    const std::vector<double> one(21, 1.0);
    const double eps = 1e-6;
    const auto l = select_lambda(one, eps);
    for (std::size_t n = 1; n < one.size(); ++n) {
        CHECK(l.alpha(n) <= eps * std::ldexp(1.0, -static_cast<int>(n)) / 2);
    }
}

TEST_CASE("select_lambda with M_n = n! for n <= 10")
{
    std::vector<double> fact(11);
    for (int n = 0; n <= 10; ++n) {
        fact[static_cast<std::size_t>(n)] = std::tgamma(n + 1.0);
    }
    const double eps = 1e-8;
    const auto l = select_lambda(fact, eps);
    for (int n = 1; n <= 10; ++n) {
        CHECK(l.alpha(static_cast<std::size_t>(n)) * fact[static_cast<std::size_t>(n)] <=
              eps * std::ldexp(1.0, -n));
    }
}

TEST_CASE("select_lambda reports the offending n when the cap runs out")
{
    std::vector<double> M(6, 1e300);
    SelectOptions o;
    o.offset_cap = 2;
    try {
        select_lambda(M, 1e-8, o);
        FAIL("expected NumericCapError");
    } catch (const NumericCapError& e) {
        CHECK(std::string(e.what()).find("n = 1") != std::string::npos);
    }
    CHECK_THROWS_AS(select_lambda({}, 1e-8), DomainError);
    CHECK_THROWS_AS(select_lambda({1.0, 1.0}, 0.0), DomainError);
}
