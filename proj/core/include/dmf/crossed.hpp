#pragma once

// Desk-scale smooth crossed product of a one-dimensional group window (Z or
// sampled R) acting on grid functions by lattice translation: covariant
// convolution, weighted seminorms, the integrated module action, Garding
// smoothing, and the factorization b(g) = f(g) alpha_g(a).

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dmf/certificate.hpp"
#include "dmf/grid.hpp"
#include "dmf/scales.hpp"
#include "dmf/schwartz.hpp"

namespace dmf {

/// Symmetric window {-R..R} * h of a one-dimensional group.
class GroupWindow {
public:
    enum class Kind { z_window, r_sampled };

    static GroupWindow integers(std::int64_t R);
    static GroupWindow sampled_reals(double half_width, double h);

    Kind kind() const { return kind_; }
    std::int64_t radius() const { return R_; }
    double spacing() const { return h_; }
    std::size_t size() const { return static_cast<std::size_t>(2 * R_ + 1); }
    /// Group coordinate of window slot k (slot R is the identity).
    double point(std::size_t k) const { return static_cast<double>(lattice(k)) * h_; }
    std::int64_t lattice(std::size_t k) const { return static_cast<std::int64_t>(k) - R_; }
    std::optional<std::size_t> slot(std::int64_t lattice_index) const;
    std::size_t identity() const { return static_cast<std::size_t>(R_); }
    /// Haar weight: 1 on Z, h on sampled R.
    double weight() const { return kind_ == Kind::z_window ? 1.0 : h_; }
    /// One-dimensional grid carrying functions on the window (scales, bumps).
    Grid grid() const;

    nlohmann::json descriptor() const;
    static GroupWindow from_json(const nlohmann::json& j);

    bool operator==(const GroupWindow&) const = default;

private:
    GroupWindow(Kind k, std::int64_t R, double h) : kind_(k), R_(R), h_(h) {}
    Kind kind_ = Kind::z_window;
    std::int64_t R_ = 0;
    double h_ = 1.0;
};

/// How the group acts on the space, and hence on grid functions:
/// alpha_g(a)(m) = a(m - g * unit e_axis), zero where the source leaves the box.
struct ActionSpec {
    enum class Kind { trivial, translation };
    Kind kind = Kind::translation;
    double unit = 1.0;
    int axis = 0;
    std::optional<Certificate> scaled_space; ///< sigma(g m) <= C omega(g)^d sigma(m)^l

    static ActionSpec trivial();
    static ActionSpec translation(double unit = 1.0, int axis = 0);

    /// Lattice steps on `grid` for the group element in window slot k.
    std::vector<std::int64_t> steps(const GroupWindow& w, std::size_t k, const Grid& grid) const;
    /// alpha_g(f) for g in slot k (also the module action g e).
    Translation apply(const GroupWindow& w, std::size_t k, const GridFunction& f) const;

    nlohmann::json descriptor() const;
};

/// Translation action with its scaled-space certificate fitted from sigma and omega.
ActionSpec make_translation_action(const Scale& sigma, const Scale& omega, double unit = 1.0, int axis = 0,
                                   const FitOptions& fit = {});

/// F: window slot -> grid function on a shared grid.
struct CrossedElement {
    GroupWindow window = GroupWindow::integers(0);
    Grid grid;
    std::vector<GridFunction> slices;
    std::optional<Scale> omega;
    double truncated_mass = 0.0; ///< l1 mass dropped by window or box truncation when produced

    static CrossedElement zero(const GroupWindow& w, const Grid& grid);
    /// delta_0 (x) a: the identity slot carries a / weight so the Haar mass is a.
    static CrossedElement point_mass(const GroupWindow& w, const GridFunction& a);
    const GridFunction& at(std::size_t k) const { return slices.at(k); }
};

/// (F1 * F2)(g) = sum_h w(h) F1(h) alpha_h(F2(g - h)); g - h outside the window contributes zero.
CrossedElement convolve(const CrossedElement& F1, const CrossedElement& F2, const ActionSpec& action);

CrossedElement add(const CrossedElement& F1, const CrossedElement& F2);
CrossedElement scale(double c, const CrossedElement& F);

/// The algebra seminorm used on slices: sup |sigma^d X^gamma a|, or the plain sup without sigma.
struct AlgebraSeminorm {
    std::optional<Scale> sigma;
    SeminormIndex index;

    static AlgebraSeminorm sup(int dim);
    double operator()(const GridFunction& a) const;
};

/// sum_g w(g) omega(g)^d ||(X^gamma F)(g)||_m; gamma_order must be 0 on Z.
double crossed_seminorm(const CrossedElement& F, const Scale& omega, int d, int gamma_order,
                        const AlgebraSeminorm& m);

/// Fe = sum_g w(g) F(g) (g e).
GridFunction act_on_module(const CrossedElement& F, const GridFunction& e, const ActionSpec& action);

/// g (a e) = alpha_g(a) (g e) for g in window slot k.
Certificate check_covariance(const GroupWindow& w, std::size_t k, const GridFunction& a, const GridFunction& e,
                             const ActionSpec& action);

/// Psi_n (x) a with unit Haar mass: delta_0 on Z; on sampled R a bump of
/// radius r0 2^-n renormalized on the window.
CrossedElement approx_identity(int n, const GridFunction& a, const GroupWindow& w, double r0 = 1.0);

/// alpha_f(e) = sum_g w(g) f(g) (g e); f lives on w.grid().
GridFunction garding_smooth(const GridFunction& f, const GroupWindow& w, const GridFunction& e,
                            const ActionSpec& action);

struct CrossedFactorization {
    CrossedElement b;
    double residual = 0.0; ///< sup |b e~ - alpha_f(a e~)|
    Certificate certificate;
};

/// b(g) = f(g) alpha_g(a); checks b e~ = alpha_f(a e~).
CrossedFactorization factorize_crossed(const GridFunction& e_tilde, const GridFunction& f, const GroupWindow& w,
                                       const GridFunction& a, const ActionSpec& action, double tolerance = 1e-9);

/// (gF)(h) = alpha_g(F(h - g)) for g in window slot k.
CrossedElement group_translate(const CrossedElement& F, std::size_t k, const ActionSpec& action);
/// (aF)(h) = a F(h).
CrossedElement algebra_mult(const GridFunction& a, const CrossedElement& F);

/// ||alpha_g(e)||_(d') <= C^d' omega(g)^(d d') ||e||_(l d') over the window and the samples,
/// with (C, d, l) from the action's scaled-space certificate.
Certificate temperedness_certificate(const ActionSpec& action, const Scale& sigma, const Scale& omega,
                                     const GroupWindow& w, const std::vector<GridFunction>& samples, int dprime_max);

/// ||sigma^d' F e|| <= C^d' (sum_g w omega(g)^(d d') ||F(g)||_inf) ||sigma^(l d') e||.
Certificate module_estimate_certificate(const CrossedElement& F, const GridFunction& e, const ActionSpec& action,
                                        const Scale& sigma, const Scale& omega, int dprime_max);

/// ||F1 * F2||_(d,0,sup) <= C^d ||F1||_(d dw,0,sup) ||F2||_(d dw,0,sup) with (C, dw) from a
/// sub-polynomial certificate of omega.
Certificate convolution_continuity_certificate(const CrossedElement& F1, const CrossedElement& F2,
                                               const ActionSpec& action, const Scale& omega,
                                               const Certificate& subpolynomial, int d_max);

nlohmann::json manifest(const CrossedElement& F, const ActionSpec& action,
                        const std::vector<std::string>& slice_files);
/// Writes manifest.json plus slice_<k>.bin into dir.
void write_crossed(const std::filesystem::path& dir, const CrossedElement& F, const ActionSpec& action);
CrossedElement read_crossed(const std::filesystem::path& dir);

} // namespace dmf
