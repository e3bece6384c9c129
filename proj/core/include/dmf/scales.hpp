#pragma once

// Scale calculus: domination, equivalence, translational equivalence,
// sub-polynomial growth, scaled-space conditions, properness, and
// mollification of a scale into a differentiable equivalent one.
//
// Every check returns a Certificate. On a finite grid every inequality holds
// for *some* constants, so fitted constants are capped at C_max; exceeding
// the cap is reported as pass = false and stands in for asymptotic failure.

#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "dmf/certificate.hpp"
#include "dmf/closed_form.hpp"
#include "dmf/grid.hpp"

namespace dmf {

enum class ScaleKind { on_space, on_group };

/// A grid function with values >= 1, optionally backed by a closed form
/// that allows exact evaluation off the lattice.
class Scale {
public:
    Scale(GridFunction values, ScaleKind kind = ScaleKind::on_space,
          std::optional<ClosedForm> closed_form = std::nullopt);

    static Scale from_closed_form(const ClosedForm& form, const Grid& grid,
                                  ScaleKind kind = ScaleKind::on_space);

    const GridFunction& function() const { return values_; }
    const Grid& grid() const { return values_.grid(); }
    ScaleKind kind() const { return kind_; }
    const std::optional<ClosedForm>& closed_form() const { return closed_form_; }
    bool resampleable() const { return closed_form_.has_value(); }

    double operator[](std::size_t i) const { return values_[i]; }
    double max_value() const;

    /// Closed form when present, otherwise lattice lookup.
    std::optional<double> try_evaluate(std::span<const double> x) const;
    double evaluate(std::span<const double> x) const;

    Scale restricted(const Grid& sub) const;

private:
    GridFunction values_;
    ScaleKind kind_;
    std::optional<ClosedForm> closed_form_;
};

struct FitOptions {
    int d_max = 4;
    double C_max = 1e6;
};

/// gamma <= C * sigma^d + D with D = 1, smallest admissible d.
Certificate fit_domination(const Scale& sigma, const Scale& gamma, int d_max, double C_max = 1e6);

/// Mutual domination: (sigma dominates gamma, gamma dominates sigma).
std::pair<Certificate, Certificate> equivalent(const Scale& sigma, const Scale& gamma, int d_max,
                                               double C_max = 1e6);

/// sigma_h(m) = sigma(m - h) <= C_K sigma(m)^d for every shift h.
/// Shifts are points of the group (same dimension as the space).
Certificate check_translational_equivalence(const Scale& sigma,
                                            const std::vector<std::vector<double>>& shifts,
                                            const FitOptions& opts = {});

/// Explicit (g, h) pairs; empty means "every lattice pair with g + h in the box".
using PairSamples = std::vector<std::pair<std::vector<double>, std::vector<double>>>;

/// omega(g + h) <= C omega(g)^d omega(h)^d.
Certificate check_subpolynomial(const Scale& omega, const PairSamples& pairs = {},
                                const FitOptions& opts = {});

/// omega_-(g) = omega(-g); requires a grid symmetric about the origin.
Scale reflect(const Scale& omega);

/// How a group acts on the space. Translation moves m by g * unit (per axis).
struct GroupAction {
    enum class Kind { trivial, translation };
    Kind kind = Kind::translation;
    std::vector<double> unit{1.0};

    std::vector<double> apply(std::span<const double> g, std::span<const double> m) const;
};

/// sigma(g m) <= C omega(g)^d sigma(m)^l over all (g, m) lattice samples
/// (every `stride`-th point of each grid).
Certificate check_scaled_space(const Scale& sigma, const Scale& omega, const GroupAction& action,
                               const FitOptions& opts = {}, std::size_t stride = 1);

/// Same inequality with caller-supplied constants.
Certificate verify_scaled_space(const Scale& sigma, const Scale& omega, const GroupAction& action,
                                double C, int d, int l, std::size_t stride = 1);

/// Bound on Ad for the implemented (abelian, translation) actions; always
/// holds with C = 1, d = 0.
Certificate check_ad_bound(const Scale& omega);

/// Truncated-domain necessary condition for properness: the minimum over
/// the boundary shell exceeds the minimum over the inner half-box, and the
/// shell minima are nondecreasing outward.
Certificate check_proper(const Scale& sigma);

/// exp(-1 / (1 - (x/r)^2)) on |x| < r, zero elsewhere.
double bump_profile(double x, double radius);
/// d^k/dx^k of bump_profile for k in {0, 1, 2}.
double bump_profile_derivative(double x, double radius, int order);

/// Product bump of the given radius, renormalized to unit trapezoidal mass.
GridFunction make_bump(const Grid& grid, double radius);
/// X^gamma of make_bump(grid, radius) (same normalization), |gamma_i| <= 2.
GridFunction make_bump_derivative(const Grid& grid, double radius, const MultiIndex& gamma);

/// sum_g w(g) kernel(g) sigma(m - g) over the kernel's lattice (trapezoidal
/// weights). `kernel` may take either sign.
GridFunction shift_average(const Scale& sigma, const GridFunction& kernel);

/// |X^gamma f| <= C_gamma f^d for 1 <= |gamma| <= order with one common d.
Certificate derivative_bound_certificate(const Scale& f, int order, const FitOptions& opts = {});

struct MollifyOptions {
    int d_max = 4;
    int derivative_order = 2;
    double C_max = 1e6;
    double mass_tolerance = 1e-10;
};

struct MollifiedScale {
    Scale sigma;                   ///< the mollified scale
    Certificate upper;             ///< mollified <= C * original^d
    Certificate lower;             ///< original <= C * mollified^d
    Certificate derivative_bound;  ///< |X^gamma mollified| <= C_gamma mollified^d
};

/// Averages sigma against a nonnegative unit-mass bump supported in the
/// box |g_i| <= support_half_width[i].
MollifiedScale mollify_scale(const Scale& sigma, const GridFunction& bump,
                             const std::vector<double>& support_half_width,
                             const MollifyOptions& opts = {});

} // namespace dmf
