#include "dmf/counterexamples.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dmf/errors.hpp"

namespace dmf {

double Sequence::at(std::int64_t k) const
{
    if (values.empty() || k < lo || k > hi()) {
        return 0.0;
    }
    return values[static_cast<std::size_t>(k - lo)];
}

double half_sum(const Sequence& s)
{
    double acc = 0.0;
    for (double v : s.values) {
        acc += std::sqrt(std::abs(v));
    }
    return acc;
}

double half_norm(const Sequence& s)
{
    const double h = half_sum(s);
    return h * h;
}

double l1_norm(const Sequence& s)
{
    double acc = 0.0;
    for (double v : s.values) {
        acc += std::abs(v);
    }
    return acc;
}

namespace {

template <class Op>
Sequence combine(const Sequence& a, const Sequence& b, Op op)
{
    if (a.values.empty() && b.values.empty()) {
        return {};
    }
    std::int64_t lo = a.values.empty() ? b.lo : b.values.empty() ? a.lo : std::min(a.lo, b.lo);
    std::int64_t hi = a.values.empty() ? b.hi() : b.values.empty() ? a.hi() : std::max(a.hi(), b.hi());
    Sequence out{lo, std::vector<double>(static_cast<std::size_t>(hi - lo + 1))};
    for (std::int64_t k = lo; k <= hi; ++k) {
        out.values[static_cast<std::size_t>(k - lo)] = op(a.at(k), b.at(k));
    }
    return out;
}

} // namespace

Sequence pointwise_mul(const Sequence& a, const Sequence& b)
{
    return combine(a, b, [](double x, double y) { return x * y; });
}

Sequence pointwise_add(const Sequence& a, const Sequence& b)
{
    return combine(a, b, [](double x, double y) { return x + y; });
}

SequenceSampler::SequenceSampler(std::uint64_t seed) : rng_(seed) {}

Sequence SequenceSampler::next(std::size_t length)
{
    Sequence s{0, std::vector<double>(length)};
    // 53 random bits -> [0, 1) -> [-1, 1); spelled out so the stream does not
    // depend on the standard library's distribution implementation.
    for (auto& v : s.values) {
        const double u = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
        v = 2.0 * u - 1.0;
    }
    return s;
}

double L1Counterexample::half_growth() const
{
    return witness.size() < 2 ? 0.0 : witness.back().half - witness.front().half;
}

double L1Counterexample::l1_change() const
{
    return witness.size() < 2 ? 0.0 : witness.back().l1 - witness.front().l1;
}

L1Counterexample check_l1_counterexample(std::size_t trials, std::size_t length, std::uint64_t seed,
                                         const std::vector<std::int64_t>& windows)
{
    L1Counterexample r;
    r.seed = seed;
    r.trials = trials;
    r.length = length;
    r.product.kind = "l_half_product";
    r.sum.kind = "l_half_sum";
    SequenceSampler sampler(seed);
    double prod_ratio = 0.0;
    double sum_ratio = 0.0;
    for (std::size_t t = 0; t < trials; ++t) {
        const auto phi = sampler.next(length);
        const auto psi = sampler.next(length);
        const double lp = half_norm(pointwise_mul(phi, psi));
        const double rp = l1_norm(phi) * l1_norm(psi);
        r.product.observe(slack_residual(lp, rp), {static_cast<double>(t)});
        const double ls = half_norm(pointwise_add(phi, psi));
        const double rs = 2.0 * (half_norm(phi) + half_norm(psi));
        r.sum.observe(slack_residual(ls, rs), {static_cast<double>(t)});
        if (rp > 0.0) {
            prod_ratio = std::max(prod_ratio, lp / rp);
        }
        if (rs > 0.0) {
            sum_ratio = std::max(sum_ratio, ls / rs);
        }
    }
    if (trials == 0) {
        r.product.worst_residual = 0.0;
        r.sum.worst_residual = 0.0;
    }
    r.product.constants = {{"max_ratio", prod_ratio}, {"trials", static_cast<double>(trials)}};
    r.sum.constants = {{"max_ratio", sum_ratio}, {"trials", static_cast<double>(trials)}};
    r.product.notes.push_back("witness = trial index");
    r.sum.notes.push_back("witness = trial index");
    r.product.finalize();
    r.sum.finalize();

    std::vector<std::int64_t> w = windows;
    std::sort(w.begin(), w.end());
    double l1 = 0.0;
    double half = 0.0;
    std::int64_t k = 0;
    for (std::int64_t N : w) {
        if (N < 1) {
            throw DomainError("check_l1_counterexample: windows must be positive");
        }
        for (; k < N; ++k) {
            const double kk = static_cast<double>(k + 1);
            l1 += 1.0 / (kk * kk);
            half += 1.0 / kk;
        }
        r.witness.push_back({N, l1, half});
    }
    return r;
}

EscapeDemo multiplier_escape_demo(const std::vector<double>& R_values)
{
    EscapeDemo out;
    Certificate& c = out.certificate;
    c.kind = "multiplier_escape";
    for (double R : R_values) {
        if (!(R >= 0.0) || !std::isfinite(R)) {
            throw DomainError("multiplier_escape_demo: R must be finite and nonnegative");
        }
        EscapeRow row;
        row.R = R;
        row.expected = R * R / (1.0 + R * R);
        // Scan |r| in [R, 10 (R + 1)] on both sides; r^2/(1+r^2) increases in
        // |r|, so the infimum over |r| > R is approached at the left end.
        const int samples = 4096;
        const double top = 10.0 * (R + 1.0);
        double inf = std::numeric_limits<double>::infinity();
        for (int j = 0; j <= samples; ++j) {
            const double a = R + (top - R) * static_cast<double>(j) / samples;
            for (double r : {a, -a}) {
                const double f = 1.0 / (1.0 + r * r);
                const double Tf = r * r * f;
                inf = std::min(inf, std::abs(Tf));
                row.identity_residual = std::max(row.identity_residual, std::abs(f * (1.0 + r * r) - 1.0));
            }
        }
        row.inf_Tf = inf;
        const double tol = 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, row.expected);
        c.observe(std::abs(row.inf_Tf - row.expected) - tol, {R});
        out.rows.push_back(row);
    }
    if (R_values.empty()) {
        c.worst_residual = 0.0;
    }
    c.notes.push_back("witness = R");
    c.finalize();
    return out;
}

nlohmann::json to_json(const L1Counterexample& r)
{
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& w : r.witness) {
        rows.push_back({{"window", w.window}, {"l1_partial_sum", w.l1}, {"half_partial_sum", w.half}});
    }
    return {{"seed", r.seed},
            {"trials", r.trials},
            {"length", r.length},
            {"product", to_json(r.product)},
            {"sum", to_json(r.sum)},
            {"witness", {{"sequence", "1/k^2"}, {"rows", rows}}},
            {"half_growth", r.half_growth()},
            {"l1_change", r.l1_change()},
            {"pass", r.pass()}};
}

nlohmann::json to_json(const EscapeDemo& r)
{
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& w : r.rows) {
        rows.push_back({{"R", w.R},
                        {"inf_Tf", w.inf_Tf},
                        {"expected", w.expected},
                        {"identity_residual", w.identity_residual}});
    }
    return {{"f", "1/(1+r^2)"}, {"T", "r^2"}, {"rows", rows}, {"certificate", to_json(r.certificate)}};
}

} // namespace dmf
