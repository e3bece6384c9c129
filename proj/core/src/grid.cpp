#include "dmf/grid.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <sstream>

#include "dmf/errors.hpp"

namespace dmf {

namespace {

constexpr double kLatticeTol = 1e-9;

bool near_integer(double v, std::int64_t& out)
{
    const double r = std::nearbyint(v);
    if (std::abs(v - r) > kLatticeTol * std::max(1.0, std::abs(v))) {
        return false;
    }
    out = static_cast<std::int64_t>(r);
    return true;
}

template <class T>
bool is_finite(const T& v)
{
    if constexpr (std::is_same_v<T, double>) {
        return std::isfinite(v);
    } else {
        return std::isfinite(v.real()) && std::isfinite(v.imag());
    }
}

template <class T>
void require_same_grid(const BasicGridFunction<T>& f, const BasicGridFunction<T>& g, const char* op)
{
    if (!(f.grid() == g.grid())) {
        throw GridMismatch(std::string(op) + ": operands live on different grids (" +
                           f.grid().describe() + " vs " + g.grid().describe() + ")");
    }
}

// Stencil kinds along one axis.
enum class Stencil { first, second };

// Applies one fourth-order stencil along `axis`. Returns the new values and
// the new grid.
template <class T>
std::pair<std::vector<T>, Grid> apply_axis(const std::vector<T>& in, const Grid& grid, int axis,
                                           Stencil kind, BoundaryPolicy policy)
{
    const Axis& ax = grid.axis(axis);
    const std::int64_t n = ax.count;
    const double h = ax.h;
    if (policy == BoundaryPolicy::shrink && n < 5) {
        throw DomainError("finite_diff: stencil exceeds grid along axis " + std::to_string(axis) +
                          " (" + std::to_string(n) + " points, need at least 5)");
    }
    if (policy == BoundaryPolicy::one_sided && n < 6) {
        throw DomainError("finite_diff: one-sided stencil exceeds grid along axis " +
                          std::to_string(axis) + " (" + std::to_string(n) +
                          " points, need at least 6)");
    }

    const Grid out_grid = policy == BoundaryPolicy::shrink ? grid.shrunk(axis, 2) : grid;
    std::vector<T> out(out_grid.size());

    const std::size_t in_stride = grid.stride(axis);
    const std::size_t out_stride = out_grid.stride(axis);
    // Number of independent 1-d lines and their base offsets.
    const std::size_t outer = grid.size() / (static_cast<std::size_t>(n) * in_stride);
    const double scale = kind == Stencil::first ? 1.0 / (12.0 * h) : 1.0 / (12.0 * h * h);

    auto at = [&](std::size_t base, std::int64_t i) { return in[base + static_cast<std::size_t>(i) * in_stride]; };

    const std::int64_t n_out = policy == BoundaryPolicy::shrink ? n - 4 : n;
    for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t inner = 0; inner < in_stride; ++inner) {
            const std::size_t in_base = o * static_cast<std::size_t>(n) * in_stride + inner;
            const std::size_t out_base = o * static_cast<std::size_t>(n_out) * out_stride + inner;
            for (std::int64_t j = 0; j < n_out; ++j) {
                const std::int64_t i = policy == BoundaryPolicy::shrink ? j + 2 : j;
                T v{};
                if (i >= 2 && i <= n - 3) {
                    if (kind == Stencil::first) {
                        v = (at(in_base, i - 2) - 8.0 * at(in_base, i - 1) + 8.0 * at(in_base, i + 1) -
                             at(in_base, i + 2));
                    } else {
                        v = (-at(in_base, i - 2) + 16.0 * at(in_base, i - 1) - 30.0 * at(in_base, i) +
                             16.0 * at(in_base, i + 1) - at(in_base, i + 2));
                    }
                } else if (kind == Stencil::first) {
                    if (i == 0) {
                        v = -25.0 * at(in_base, 0) + 48.0 * at(in_base, 1) - 36.0 * at(in_base, 2) +
                            16.0 * at(in_base, 3) - 3.0 * at(in_base, 4);
                    } else if (i == 1) {
                        v = -3.0 * at(in_base, 0) - 10.0 * at(in_base, 1) + 18.0 * at(in_base, 2) -
                            6.0 * at(in_base, 3) + at(in_base, 4);
                    } else if (i == n - 1) {
                        v = 25.0 * at(in_base, n - 1) - 48.0 * at(in_base, n - 2) +
                            36.0 * at(in_base, n - 3) - 16.0 * at(in_base, n - 4) +
                            3.0 * at(in_base, n - 5);
                    } else {
                        v = 3.0 * at(in_base, n - 1) + 10.0 * at(in_base, n - 2) -
                            18.0 * at(in_base, n - 3) + 6.0 * at(in_base, n - 4) - at(in_base, n - 5);
                    }
                } else {
                    if (i == 0) {
                        v = 45.0 * at(in_base, 0) - 154.0 * at(in_base, 1) + 214.0 * at(in_base, 2) -
                            156.0 * at(in_base, 3) + 61.0 * at(in_base, 4) - 10.0 * at(in_base, 5);
                    } else if (i == 1) {
                        v = 10.0 * at(in_base, 0) - 15.0 * at(in_base, 1) - 4.0 * at(in_base, 2) +
                            14.0 * at(in_base, 3) - 6.0 * at(in_base, 4) + at(in_base, 5);
                    } else if (i == n - 1) {
                        v = 45.0 * at(in_base, n - 1) - 154.0 * at(in_base, n - 2) +
                            214.0 * at(in_base, n - 3) - 156.0 * at(in_base, n - 4) +
                            61.0 * at(in_base, n - 5) - 10.0 * at(in_base, n - 6);
                    } else {
                        v = 10.0 * at(in_base, n - 1) - 15.0 * at(in_base, n - 2) -
                            4.0 * at(in_base, n - 3) + 14.0 * at(in_base, n - 4) -
                            6.0 * at(in_base, n - 5) + at(in_base, n - 6);
                    }
                }
                out[out_base + static_cast<std::size_t>(j) * out_stride] = v * scale;
            }
        }
    }
    return {std::move(out), out_grid};
}

} // namespace

// ---------------------------------------------------------------------------
// Axis / Grid

Axis Axis::make(double lo, double hi, double h)
{
    if (!(h > 0.0) || !std::isfinite(h)) {
        throw DomainError("grid: spacing must be positive and finite");
    }
    if (!(lo < hi)) {
        throw DomainError("grid: box must satisfy lo < hi");
    }
    if (lo > 0.0 || hi < 0.0) {
        throw DomainError("grid: box must contain the origin");
    }
    std::int64_t first = 0;
    std::int64_t last = 0;
    if (!near_integer(lo / h, first) || !near_integer(hi / h, last)) {
        throw DomainError("grid: box edges must be integer multiples of the spacing");
    }
    return Axis{first, last - first + 1, h};
}

Grid::Grid(std::vector<Axis> axes) : axes_(std::move(axes))
{
    if (axes_.empty() || axes_.size() > static_cast<std::size_t>(kMaxDim)) {
        throw DomainError("grid: dimension must be between 1 and 3");
    }
    strides_.assign(axes_.size(), 1);
    size_ = 1;
    for (std::size_t a = axes_.size(); a-- > 0;) {
        if (axes_[a].count < 1 || !(axes_[a].h > 0.0)) {
            throw DomainError("grid: invalid axis");
        }
        strides_[a] = size_;
        size_ *= static_cast<std::size_t>(axes_[a].count);
    }
}

Grid Grid::symmetric(double half_width, double h, int dim)
{
    if (dim < 1 || dim > kMaxDim) {
        throw DomainError("grid: dimension must be between 1 and 3");
    }
    return Grid(std::vector<Axis>(static_cast<std::size_t>(dim), Axis::make(-half_width, half_width, h)));
}

Grid Grid::box(const std::vector<double>& lo, const std::vector<double>& hi, const std::vector<double>& h)
{
    if (lo.size() != hi.size() || lo.size() != h.size()) {
        throw DomainError("grid: lo, hi and h must have the same length");
    }
    std::vector<Axis> axes;
    for (std::size_t i = 0; i < lo.size(); ++i) {
        axes.push_back(Axis::make(lo[i], hi[i], h[i]));
    }
    return Grid(std::move(axes));
}

std::int64_t Grid::lattice_index(std::size_t flat, int a) const
{
    const auto& ax = axes_[static_cast<std::size_t>(a)];
    const auto local = static_cast<std::int64_t>((flat / strides_[static_cast<std::size_t>(a)]) %
                                                 static_cast<std::size_t>(ax.count));
    return ax.first + local;
}

void Grid::point(std::size_t flat, std::span<double> x) const
{
    for (int a = 0; a < dim(); ++a) {
        x[static_cast<std::size_t>(a)] = static_cast<double>(lattice_index(flat, a)) * axes_[static_cast<std::size_t>(a)].h;
    }
}

std::vector<double> Grid::point(std::size_t flat) const
{
    std::vector<double> x(static_cast<std::size_t>(dim()));
    point(flat, x);
    return x;
}

std::optional<std::size_t> Grid::find(std::span<const double> x) const
{
    if (x.size() != axes_.size()) {
        return std::nullopt;
    }
    std::array<std::int64_t, kMaxDim> k{};
    for (std::size_t a = 0; a < axes_.size(); ++a) {
        if (!near_integer(x[a] / axes_[a].h, k[a])) {
            return std::nullopt;
        }
    }
    return find_lattice(std::span<const std::int64_t>(k.data(), axes_.size()));
}

std::optional<std::size_t> Grid::find_lattice(std::span<const std::int64_t> k) const
{
    if (k.size() != axes_.size()) {
        return std::nullopt;
    }
    std::size_t flat = 0;
    for (std::size_t a = 0; a < axes_.size(); ++a) {
        if (k[a] < axes_[a].first || k[a] > axes_[a].last()) {
            return std::nullopt;
        }
        flat += static_cast<std::size_t>(k[a] - axes_[a].first) * strides_[a];
    }
    return flat;
}

Grid Grid::shrunk(int a, std::int64_t radius) const
{
    std::vector<Axis> axes = axes_;
    Axis& ax = axes.at(static_cast<std::size_t>(a));
    if (ax.count <= 2 * radius) {
        throw DomainError("grid: cannot shrink axis " + std::to_string(a) + " by " +
                          std::to_string(radius) + " points");
    }
    ax.first += radius;
    ax.count -= 2 * radius;
    return Grid(std::move(axes));
}

bool Grid::contains(const Grid& other) const
{
    if (other.dim() != dim()) {
        return false;
    }
    for (std::size_t a = 0; a < axes_.size(); ++a) {
        const Axis& mine = axes_[a];
        const Axis& theirs = other.axes_[a];
        if (mine.h != theirs.h || theirs.first < mine.first || theirs.last() > mine.last()) {
            return false;
        }
    }
    return true;
}

bool Grid::symmetric_about_origin() const
{
    return std::all_of(axes_.begin(), axes_.end(), [](const Axis& ax) { return ax.first == -ax.last(); });
}

double Grid::cell_volume() const
{
    double v = 1.0;
    for (const auto& ax : axes_) {
        v *= ax.h;
    }
    return v;
}

std::string Grid::describe() const
{
    std::ostringstream os;
    os.precision(17);
    for (std::size_t a = 0; a < axes_.size(); ++a) {
        os << (a ? " x " : "") << '[' << axes_[a].lo() << ", " << axes_[a].hi() << "]/h=" << axes_[a].h;
    }
    return os.str();
}

const char* to_string(BoundaryPolicy p)
{
    return p == BoundaryPolicy::shrink ? "shrink" : "one_sided";
}

BoundaryPolicy boundary_policy_from_string(const std::string& s)
{
    if (s == "shrink") {
        return BoundaryPolicy::shrink;
    }
    if (s == "one_sided") {
        return BoundaryPolicy::one_sided;
    }
    throw DomainError("unknown boundary policy '" + s + "'");
}

// ---------------------------------------------------------------------------
// BasicGridFunction

template <class T>
BasicGridFunction<T>::BasicGridFunction(Grid grid, std::vector<T> values, BoundaryPolicy policy)
    : grid_(std::move(grid)), values_(std::move(values)), policy_(policy)
{
    if (values_.size() != grid_.size()) {
        throw DomainError("grid function: value count " + std::to_string(values_.size()) +
                          " does not match lattice size " + std::to_string(grid_.size()));
    }
    for (std::size_t i = 0; i < values_.size(); ++i) {
        if (!is_finite(values_[i])) {
            throw DomainError("grid function: non-finite value at " + point_string(grid_.point(i)));
        }
    }
}

template <class T>
BasicGridFunction<T> BasicGridFunction<T>::constant(const Grid& grid, T value, BoundaryPolicy policy)
{
    return BasicGridFunction(grid, std::vector<T>(grid.size(), value), policy);
}

template class BasicGridFunction<double>;
template class BasicGridFunction<std::complex<double>>;

// ---------------------------------------------------------------------------
// MultiIndex

MultiIndex MultiIndex::along(int dim, int axis, int order)
{
    MultiIndex m = zero(dim);
    m.orders.at(static_cast<std::size_t>(axis)) = order;
    return m;
}

int MultiIndex::total() const
{
    int t = 0;
    for (int o : orders) {
        t += o;
    }
    return t;
}

std::string MultiIndex::label() const
{
    std::string s = "(";
    for (std::size_t i = 0; i < orders.size(); ++i) {
        s += (i ? "," : "") + std::to_string(orders[i]);
    }
    return s + ")";
}

std::vector<MultiIndex> multi_indices_up_to(int dim, int max_total)
{
    std::vector<MultiIndex> out;
    for (int total = 0; total <= max_total; ++total) {
        // Enumerate compositions of `total` into `dim` parts, first axis descending.
        std::vector<int> cur(static_cast<std::size_t>(dim), 0);
        std::function<void(int, int)> rec = [&](int axis, int remaining) {
            if (axis == dim - 1) {
                cur[static_cast<std::size_t>(axis)] = remaining;
                out.push_back(MultiIndex{cur});
                return;
            }
            for (int k = remaining; k >= 0; --k) {
                cur[static_cast<std::size_t>(axis)] = k;
                rec(axis + 1, remaining - k);
            }
        };
        rec(0, total);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Sampling

GridFunction sample(const PointFunction& expr, const Grid& grid, BoundaryPolicy policy)
{
    std::vector<double> values(grid.size());
    std::vector<double> x(static_cast<std::size_t>(grid.dim()));
    for (std::size_t i = 0; i < grid.size(); ++i) {
        grid.point(i, x);
        values[i] = expr(x);
        if (!std::isfinite(values[i])) {
            throw DomainError("sample: expression is not finite at " + point_string(x));
        }
    }
    return GridFunction(grid, std::move(values), policy);
}

GridFunction sample(const std::function<double(double)>& expr, const Grid& grid, BoundaryPolicy policy)
{
    if (grid.dim() != 1) {
        throw DomainError("sample: scalar expression requires a 1-d grid");
    }
    return sample([&](std::span<const double> x) { return expr(x[0]); }, grid, policy);
}

ComplexGridFunction sample_complex(const ComplexPointFunction& expr, const Grid& grid, BoundaryPolicy policy)
{
    std::vector<std::complex<double>> values(grid.size());
    std::vector<double> x(static_cast<std::size_t>(grid.dim()));
    for (std::size_t i = 0; i < grid.size(); ++i) {
        grid.point(i, x);
        values[i] = expr(x);
        if (!is_finite(values[i])) {
            throw DomainError("sample: expression is not finite at " + point_string(x));
        }
    }
    return ComplexGridFunction(grid, std::move(values), policy);
}

// ---------------------------------------------------------------------------
// Calculus

template <class T>
BasicGridFunction<T> finite_diff(const BasicGridFunction<T>& f, const MultiIndex& gamma, int max_order)
{
    if (gamma.dim() != f.grid().dim()) {
        throw DomainError("finite_diff: multi-index dimension does not match the grid");
    }
    if (gamma.total() > max_order) {
        throw DomainError("finite_diff: |gamma| = " + std::to_string(gamma.total()) +
                          " exceeds the maximum order " + std::to_string(max_order));
    }
    std::vector<T> values(f.values().begin(), f.values().end());
    Grid grid = f.grid();
    for (int a = 0; a < gamma.dim(); ++a) {
        const int k = gamma.orders[static_cast<std::size_t>(a)];
        if (k < 0) {
            throw DomainError("finite_diff: negative derivative order");
        }
        for (int s = 0; s < k / 2; ++s) {
            auto [v, g] = apply_axis(values, grid, a, Stencil::second, f.policy());
            values = std::move(v);
            grid = std::move(g);
        }
        if (k % 2 == 1) {
            auto [v, g] = apply_axis(values, grid, a, Stencil::first, f.policy());
            values = std::move(v);
            grid = std::move(g);
        }
    }
    return BasicGridFunction<T>(std::move(grid), std::move(values), f.policy());
}

template <class T>
double sup_norm(const BasicGridFunction<T>& f)
{
    double m = 0.0;
    for (const auto& v : f.values()) {
        m = std::max(m, static_cast<double>(std::abs(v)));
    }
    return m;
}

template <class T>
T integrate(const BasicGridFunction<T>& f)
{
    const Grid& grid = f.grid();
    T sum{};
    for (std::size_t i = 0; i < grid.size(); ++i) {
        double w = 1.0;
        for (int a = 0; a < grid.dim(); ++a) {
            const Axis& ax = grid.axis(a);
            const std::int64_t k = grid.lattice_index(i, a);
            const bool edge = ax.count > 1 && (k == ax.first || k == ax.last());
            w *= edge ? 0.5 * ax.h : ax.h;
        }
        sum += w * f[i];
    }
    return sum;
}

template <class T>
BasicGridFunction<T> pointwise_mul(const BasicGridFunction<T>& f, const BasicGridFunction<T>& g)
{
    require_same_grid(f, g, "pointwise_mul");
    std::vector<T> v(f.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        v[i] = f[i] * g[i];
    }
    return BasicGridFunction<T>(f.grid(), std::move(v), f.policy());
}

template <class T>
BasicGridFunction<T> pointwise_add(const BasicGridFunction<T>& f, const BasicGridFunction<T>& g)
{
    require_same_grid(f, g, "pointwise_add");
    std::vector<T> v(f.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        v[i] = f[i] + g[i];
    }
    return BasicGridFunction<T>(f.grid(), std::move(v), f.policy());
}

template <class T>
BasicGridFunction<T> pointwise_sub(const BasicGridFunction<T>& f, const BasicGridFunction<T>& g)
{
    require_same_grid(f, g, "pointwise_sub");
    std::vector<T> v(f.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        v[i] = f[i] - g[i];
    }
    return BasicGridFunction<T>(f.grid(), std::move(v), f.policy());
}

template <class T>
BasicGridFunction<T> scalar_mul(T a, const BasicGridFunction<T>& f)
{
    std::vector<T> v(f.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        v[i] = a * f[i];
    }
    return BasicGridFunction<T>(f.grid(), std::move(v), f.policy());
}

template <class T>
BasicGridFunction<T> restrict_to(const BasicGridFunction<T>& f, const Grid& target)
{
    if (f.grid() == target) {
        return f;
    }
    if (!f.grid().contains(target)) {
        throw GridMismatch("restrict_to: " + target.describe() + " is not a sub-box of " +
                           f.grid().describe());
    }
    std::vector<T> v(target.size());
    std::array<std::int64_t, kMaxDim> k{};
    for (std::size_t i = 0; i < target.size(); ++i) {
        for (int a = 0; a < target.dim(); ++a) {
            k[static_cast<std::size_t>(a)] = target.lattice_index(i, a);
        }
        v[i] = f[*f.grid().find_lattice(std::span<const std::int64_t>(k.data(), static_cast<std::size_t>(target.dim())))];
    }
    return BasicGridFunction<T>(target, std::move(v), f.policy());
}

#define DMF_INSTANTIATE(T)                                                                          \
    template BasicGridFunction<T> finite_diff(const BasicGridFunction<T>&, const MultiIndex&, int); \
    template double sup_norm(const BasicGridFunction<T>&);                                          \
    template T integrate(const BasicGridFunction<T>&);                                              \
    template BasicGridFunction<T> pointwise_mul(const BasicGridFunction<T>&, const BasicGridFunction<T>&); \
    template BasicGridFunction<T> pointwise_add(const BasicGridFunction<T>&, const BasicGridFunction<T>&); \
    template BasicGridFunction<T> pointwise_sub(const BasicGridFunction<T>&, const BasicGridFunction<T>&); \
    template BasicGridFunction<T> scalar_mul(T, const BasicGridFunction<T>&);                       \
    template BasicGridFunction<T> restrict_to(const BasicGridFunction<T>&, const Grid&);

DMF_INSTANTIATE(double)
DMF_INSTANTIATE(std::complex<double>)
#undef DMF_INSTANTIATE

double value_at(const GridFunction& f, std::span<const double> x)
{
    const auto idx = f.grid().find(x);
    if (!idx) {
        throw DomainError("value_at: " + point_string(x) + " is not a lattice point of " + f.grid().describe());
    }
    return f[*idx];
}

GridFunction map_values(const GridFunction& f, const std::function<double(double)>& fn)
{
    std::vector<double> v(f.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        v[i] = fn(f[i]);
    }
    return GridFunction(f.grid(), std::move(v), f.policy());
}

Translation translate(const GridFunction& f, std::span<const std::int64_t> steps)
{
    const Grid& grid = f.grid();
    if (steps.size() != static_cast<std::size_t>(grid.dim())) {
        throw DomainError("translate: shift dimension does not match the grid");
    }
    std::vector<double> out(grid.size(), 0.0);
    std::array<std::int64_t, kMaxDim> k{};
    double kept = 0.0;
    double total = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        total += std::abs(f[i]);
    }
    for (std::size_t i = 0; i < grid.size(); ++i) {
        for (int a = 0; a < grid.dim(); ++a) {
            k[static_cast<std::size_t>(a)] = grid.lattice_index(i, a) - steps[static_cast<std::size_t>(a)];
        }
        const auto src = grid.find_lattice(std::span<const std::int64_t>(k.data(), steps.size()));
        if (src) {
            out[i] = f[*src];
            kept += std::abs(out[i]);
        }
    }
    return Translation{GridFunction(grid, std::move(out), f.policy()), std::max(0.0, total - kept)};
}

ShellProfile shell_profile(const GridFunction& f)
{
    const Grid& grid = f.grid();
    std::int64_t max_shell = 0;
    for (int a = 0; a < grid.dim(); ++a) {
        max_shell = std::max({max_shell, std::abs(grid.axis(a).first), std::abs(grid.axis(a).last())});
    }
    ShellProfile p;
    const auto n = static_cast<std::size_t>(max_shell + 1);
    p.max_abs.assign(n, 0.0);
    p.min.assign(n, std::numeric_limits<double>::infinity());
    p.count.assign(n, 0);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        std::int64_t s = 0;
        for (int a = 0; a < grid.dim(); ++a) {
            s = std::max(s, std::abs(grid.lattice_index(i, a)));
        }
        const auto si = static_cast<std::size_t>(s);
        p.max_abs[si] = std::max(p.max_abs[si], std::abs(f[i]));
        p.min[si] = std::min(p.min[si], f[i]);
        ++p.count[si];
    }
    return p;
}

std::string point_string(std::span<const double> x)
{
    std::ostringstream os;
    os.precision(17);
    os << '(';
    for (std::size_t i = 0; i < x.size(); ++i) {
        os << (i ? ", " : "") << x[i];
    }
    os << ')';
    return os.str();
}

std::string grid_point_string(const Grid& grid, std::size_t flat)
{
    return point_string(grid.point(flat));
}

} // namespace dmf
