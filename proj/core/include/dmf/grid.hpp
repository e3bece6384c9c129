#pragma once

// Sampled-function substrate: truncated uniform lattices, grid functions,
// fourth-order finite differences, trapezoidal quadrature and norms.

#include <complex>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace dmf {

inline constexpr int kMaxDim = 3;
inline constexpr int kDefaultMaxDerivativeOrder = 4;

/// One axis of a lattice. Points sit at integer multiples of `h`, so the
/// origin is always a lattice point and coordinates are exact multiples.
struct Axis {
    std::int64_t first = 0; ///< lattice index of the lower edge (lo = first * h)
    std::int64_t count = 0; ///< number of points
    double h = 1.0;

    static Axis make(double lo, double hi, double h);

    double lo() const { return static_cast<double>(first) * h; }
    double hi() const { return static_cast<double>(first + count - 1) * h; }
    double coord(std::int64_t local) const { return static_cast<double>(first + local) * h; }
    std::int64_t last() const { return first + count - 1; }

    bool operator==(const Axis&) const = default;
};

/// Tensor-product lattice over a box. Row-major layout, last axis fastest.
class Grid {
public:
    Grid() = default;
    explicit Grid(std::vector<Axis> axes);

    /// [-half_width, half_width]^dim with spacing h on every axis.
    static Grid symmetric(double half_width, double h, int dim = 1);
    static Grid box(const std::vector<double>& lo, const std::vector<double>& hi,
                    const std::vector<double>& h);

    int dim() const { return static_cast<int>(axes_.size()); }
    const Axis& axis(int a) const { return axes_.at(static_cast<std::size_t>(a)); }
    const std::vector<Axis>& axes() const { return axes_; }
    std::size_t size() const { return size_; }
    std::size_t stride(int a) const { return strides_.at(static_cast<std::size_t>(a)); }

    /// Global lattice index (x = k * h) of the flat point along an axis.
    std::int64_t lattice_index(std::size_t flat, int a) const;
    void point(std::size_t flat, std::span<double> x) const;
    std::vector<double> point(std::size_t flat) const;

    /// Flat index of a lattice-aligned coordinate, or nullopt when the
    /// coordinate is off-lattice or outside the box.
    std::optional<std::size_t> find(std::span<const double> x) const;
    std::optional<std::size_t> find_lattice(std::span<const std::int64_t> k) const;

    /// Grid with `radius` points removed from both ends of axis `a`.
    Grid shrunk(int a, std::int64_t radius) const;
    /// True when `other` is a sub-box of this grid with identical spacing.
    bool contains(const Grid& other) const;
    bool symmetric_about_origin() const;
    double cell_volume() const;

    std::string describe() const;

    bool operator==(const Grid& other) const { return axes_ == other.axes_; }

private:
    std::vector<Axis> axes_;
    std::vector<std::size_t> strides_;
    std::size_t size_ = 0;
};

enum class BoundaryPolicy { shrink, one_sided };

const char* to_string(BoundaryPolicy p);
BoundaryPolicy boundary_policy_from_string(const std::string& s);

/// Samples on a grid. Immutable after construction; every value is finite.
template <class T>
class BasicGridFunction {
public:
    using value_type = T;

    BasicGridFunction() = default;
    BasicGridFunction(Grid grid, std::vector<T> values,
                      BoundaryPolicy policy = BoundaryPolicy::shrink);

    /// Constant function.
    static BasicGridFunction constant(const Grid& grid, T value,
                                      BoundaryPolicy policy = BoundaryPolicy::shrink);

    const Grid& grid() const { return grid_; }
    std::span<const T> values() const { return values_; }
    const T& operator[](std::size_t i) const { return values_[i]; }
    std::size_t size() const { return values_.size(); }
    BoundaryPolicy policy() const { return policy_; }

private:
    Grid grid_;
    std::vector<T> values_;
    BoundaryPolicy policy_ = BoundaryPolicy::shrink;
};

using GridFunction = BasicGridFunction<double>;
using ComplexGridFunction = BasicGridFunction<std::complex<double>>;

using PointFunction = std::function<double(std::span<const double>)>;
using ComplexPointFunction = std::function<std::complex<double>(std::span<const double>)>;

/// Per-axis derivative orders.
struct MultiIndex {
    std::vector<int> orders;

    static MultiIndex zero(int dim) { return MultiIndex{std::vector<int>(static_cast<std::size_t>(dim), 0)}; }
    static MultiIndex along(int dim, int axis, int order);

    int total() const;
    int dim() const { return static_cast<int>(orders.size()); }
    bool is_zero() const { return total() == 0; }
    std::string label() const; ///< e.g. "(1,0)"

    bool operator==(const MultiIndex&) const = default;
};

/// All multi-indices of dimension `dim` with |gamma| <= max_total, ordered by
/// total order and then lexicographically (descending in the first axis).
std::vector<MultiIndex> multi_indices_up_to(int dim, int max_total);

/// values[p] = expr(p) at every lattice point; rejects non-finite values.
GridFunction sample(const PointFunction& expr, const Grid& grid,
                    BoundaryPolicy policy = BoundaryPolicy::shrink);
GridFunction sample(const std::function<double(double)>& expr, const Grid& grid,
                    BoundaryPolicy policy = BoundaryPolicy::shrink);
ComplexGridFunction sample_complex(const ComplexPointFunction& expr, const Grid& grid,
                                   BoundaryPolicy policy = BoundaryPolicy::shrink);

/// Fourth-order finite differences composed per multi-index. Under
/// BoundaryPolicy::shrink the result lives on a grid shrunk by the stencil
/// radius (2 points per stencil application); under one_sided the full grid
/// is kept and one-sided fourth-order stencils are used near the edges.
template <class T>
BasicGridFunction<T> finite_diff(const BasicGridFunction<T>& f, const MultiIndex& gamma,
                                 int max_order = kDefaultMaxDerivativeOrder);

template <class T>
double sup_norm(const BasicGridFunction<T>& f);

/// Tensor-product trapezoidal rule over the box.
template <class T>
T integrate(const BasicGridFunction<T>& f);

template <class T>
BasicGridFunction<T> pointwise_mul(const BasicGridFunction<T>& f, const BasicGridFunction<T>& g);
template <class T>
BasicGridFunction<T> pointwise_add(const BasicGridFunction<T>& f, const BasicGridFunction<T>& g);
template <class T>
BasicGridFunction<T> pointwise_sub(const BasicGridFunction<T>& f, const BasicGridFunction<T>& g);
template <class T>
BasicGridFunction<T> scalar_mul(T a, const BasicGridFunction<T>& f);

/// Restriction to a sub-box with identical spacing.
template <class T>
BasicGridFunction<T> restrict_to(const BasicGridFunction<T>& f, const Grid& target);

/// Value at (lattice-aligned) point; throws when off-lattice or outside.
double value_at(const GridFunction& f, std::span<const double> x);

/// Applies fn pointwise.
GridFunction map_values(const GridFunction& f, const std::function<double(double)>& fn);

/// Result of translating a grid function by whole lattice steps.
struct Translation {
    GridFunction function;
    double dropped_l1 = 0.0; ///< sum of |values| pushed outside the box
};

/// (T_s f)(m) = f(m - s) with s = steps * h per axis; points whose source
/// falls outside the box are filled with zero.
Translation translate(const GridFunction& f, std::span<const std::int64_t> steps);

/// Per-shell statistics, shells indexed by the Chebyshev lattice distance
/// max_i |k_i| from the origin (shell 0 is the origin itself).
struct ShellProfile {
    std::vector<double> max_abs;
    std::vector<double> min;
    std::vector<std::size_t> count;

    std::size_t shells() const { return max_abs.size(); }
};

ShellProfile shell_profile(const GridFunction& f);

/// "(x0, x1, ...)" with round-trip precision, for error messages.
std::string point_string(std::span<const double> x);
std::string grid_point_string(const Grid& grid, std::size_t flat);

} // namespace dmf
