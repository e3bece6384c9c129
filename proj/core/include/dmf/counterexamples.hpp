#pragma once

// Two negative results, run numerically: l1(Z) under pointwise
// multiplication is a module over itself whose products all land in the
// smaller space l_{1/2}, and multiplication by r^2 on C_0(R) does not extend
// to a multiplier of the module.

#include <cstdint>
#include <random>
#include <vector>

#include <nlohmann/json.hpp>

#include "dmf/certificate.hpp"

namespace dmf {

/// Finitely supported sequence: values[i] sits at index lo + i.
struct Sequence {
    std::int64_t lo = 0;
    std::vector<double> values;

    static Sequence delta(std::int64_t k = 0) { return {k, {1.0}}; }
    std::int64_t hi() const { return lo + static_cast<std::int64_t>(values.size()) - 1; }
    double at(std::int64_t k) const;
};

/// (sum |s_k|^(1/2))^2, the l_{1/2} quasi-norm in the homogeneous form.
double half_norm(const Sequence& s);
/// sum |s_k|^(1/2), before squaring.
double half_sum(const Sequence& s);
double l1_norm(const Sequence& s);

Sequence pointwise_mul(const Sequence& a, const Sequence& b);
Sequence pointwise_add(const Sequence& a, const Sequence& b);

/// Uniform [-1, 1] entries on {0..length-1} from a 64-bit Mersenne twister.
class SequenceSampler {
public:
    explicit SequenceSampler(std::uint64_t seed);
    Sequence next(std::size_t length);

private:
    std::mt19937_64 rng_;
};

struct PartialSumRow {
    std::int64_t window = 0;
    double l1 = 0.0;   ///< sum_{k <= window} 1/k^2
    double half = 0.0; ///< sum_{k <= window} 1/k
};

struct L1Counterexample {
    Certificate product;  ///< half_norm(phi psi) <= l1(phi) l1(psi)
    Certificate sum;      ///< half_norm(phi + psi) <= 2 (half_norm phi + half_norm psi)
    std::vector<PartialSumRow> witness; ///< s_k = 1/k^2 on growing windows
    std::uint64_t seed = 0;
    std::size_t trials = 0;
    std::size_t length = 0;

    bool pass() const { return product.pass && sum.pass; }
    double half_growth() const;
    double l1_change() const;
};

L1Counterexample check_l1_counterexample(std::size_t trials, std::size_t length, std::uint64_t seed,
                                         const std::vector<std::int64_t>& windows = {100, 1000, 10000});

struct EscapeRow {
    double R = 0.0;
    double inf_Tf = 0.0;    ///< inf_{|r| > R} r^2 / (1 + r^2), evaluated
    double expected = 0.0;  ///< R^2 / (1 + R^2)
    double identity_residual = 0.0; ///< sup |f (1 + r^2) - 1| on the sample
};

struct EscapeDemo {
    std::vector<EscapeRow> rows;
    Certificate certificate; ///< inf matches R^2/(1+R^2) within float for every R
};

/// f(r) = 1/(1+r^2), T = multiplication by r^2; Tf = 1 - f stays near 1 outside every box.
EscapeDemo multiplier_escape_demo(const std::vector<double>& R_values);

nlohmann::json to_json(const L1Counterexample& r);
nlohmann::json to_json(const EscapeDemo& r);

} // namespace dmf
