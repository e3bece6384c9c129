#include "dmf/grid_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "dmf/errors.hpp"

namespace dmf {

namespace {

constexpr char kMagic[4] = {'D', 'M', 'F', 'G'};

std::uint64_t to_le(std::uint64_t v)
{
    if constexpr (std::endian::native == std::endian::big) {
        std::uint64_t r = 0;
        for (int i = 0; i < 8; ++i) {
            r = (r << 8) | (v & 0xffu);
            v >>= 8;
        }
        return r;
    } else {
        return v;
    }
}

void put_u64(std::ostream& os, std::uint64_t v)
{
    v = to_le(v);
    char buf[8];
    std::memcpy(buf, &v, 8);
    os.write(buf, 8);
}

std::uint64_t get_u64(std::istream& is)
{
    char buf[8];
    if (!is.read(buf, 8)) {
        throw DomainError("binary grid: truncated stream");
    }
    std::uint64_t v = 0;
    std::memcpy(&v, buf, 8);
    return to_le(v);
}

void put_double(std::ostream& os, double d)
{
    put_u64(os, std::bit_cast<std::uint64_t>(d));
}

double get_double(std::istream& is)
{
    return std::bit_cast<double>(get_u64(is));
}

std::string fmt17(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

template <class T>
void write_binary_impl(std::ostream& os, const BasicGridFunction<T>& f, const char* dtype)
{
    nlohmann::json header = {
        {"format", "dmf-grid"},
        {"version", 1},
        {"dtype", dtype},
        {"boundary_policy", to_string(f.policy())},
        {"grid", grid_to_json(f.grid())},
        {"count", f.size()},
    };
    const std::string text = header.dump();
    os.write(kMagic, 4);
    put_u64(os, text.size());
    os.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& v : f.values()) {
        if constexpr (std::is_same_v<T, double>) {
            put_double(os, v);
        } else {
            put_double(os, v.real());
            put_double(os, v.imag());
        }
    }
}

template <class T>
BasicGridFunction<T> read_binary_impl(std::istream& is, const char* dtype)
{
    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
        throw DomainError("binary grid: bad magic");
    }
    const std::uint64_t len = get_u64(is);
    if (len > (1u << 24)) {
        throw DomainError("binary grid: header too large");
    }
    std::string text(len, '\0');
    if (!is.read(text.data(), static_cast<std::streamsize>(len))) {
        throw DomainError("binary grid: truncated header");
    }
    const auto header = nlohmann::json::parse(text);
    if (header.at("format") != "dmf-grid" || header.at("version") != 1) {
        throw DomainError("binary grid: unsupported format");
    }
    if (header.at("dtype") != dtype) {
        throw DomainError("binary grid: dtype is " + header.at("dtype").get<std::string>() + ", expected " + dtype);
    }
    Grid grid = grid_from_json(header.at("grid"));
    const auto count = header.at("count").get<std::size_t>();
    if (count != grid.size()) {
        throw DomainError("binary grid: count does not match the grid");
    }
    std::vector<T> values(count);
    for (auto& v : values) {
        if constexpr (std::is_same_v<T, double>) {
            v = get_double(is);
        } else {
            const double re = get_double(is);
            const double im = get_double(is);
            v = {re, im};
        }
    }
    return BasicGridFunction<T>(std::move(grid), std::move(values),
                                boundary_policy_from_string(header.at("boundary_policy").get<std::string>()));
}

// Rebuild a grid from the coordinate columns of a CSV file.
Grid infer_grid(const std::vector<std::vector<double>>& coords)
{
    std::vector<Axis> axes;
    for (const auto& column : coords) {
        std::vector<double> u = column;
        std::sort(u.begin(), u.end());
        u.erase(std::unique(u.begin(), u.end()), u.end());
        if (u.size() < 2) {
            throw DomainError("csv grid: each axis needs at least two distinct coordinates");
        }
        const double h = (u.back() - u.front()) / static_cast<double>(u.size() - 1);
        axes.push_back(Axis::make(u.front(), u.back(), h));
    }
    return Grid(std::move(axes));
}

template <class T>
void write_csv_impl(std::ostream& os, const BasicGridFunction<T>& f)
{
    const Grid& grid = f.grid();
    for (int a = 0; a < grid.dim(); ++a) {
        os << 'x' << a << ',';
    }
    if constexpr (std::is_same_v<T, double>) {
        os << "value\n";
    } else {
        os << "re,im\n";
    }
    std::vector<double> x(static_cast<std::size_t>(grid.dim()));
    for (std::size_t i = 0; i < grid.size(); ++i) {
        grid.point(i, x);
        for (double c : x) {
            os << fmt17(c) << ',';
        }
        if constexpr (std::is_same_v<T, double>) {
            os << fmt17(f[i]) << '\n';
        } else {
            os << fmt17(f[i].real()) << ',' << fmt17(f[i].imag()) << '\n';
        }
    }
}

template <class T>
BasicGridFunction<T> read_csv_impl(std::istream& is)
{
    std::string line;
    if (!std::getline(is, line)) {
        throw DomainError("csv grid: empty input");
    }
    std::vector<std::string> header;
    {
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            header.push_back(cell);
        }
    }
    constexpr std::size_t value_cols = std::is_same_v<T, double> ? 1 : 2;
    if (header.size() <= value_cols) {
        throw DomainError("csv grid: header needs coordinate and value columns");
    }
    const std::size_t dim = header.size() - value_cols;
    std::vector<std::vector<double>> coords(dim);
    std::vector<std::vector<double>> points;
    std::vector<T> raw;
    while (std::getline(is, line)) {
        if (line.empty()) {
            continue;
        }
        std::stringstream ss(line);
        std::string cell;
        std::vector<double> row;
        while (std::getline(ss, cell, ',')) {
            row.push_back(std::stod(cell));
        }
        if (row.size() != header.size()) {
            throw DomainError("csv grid: row has " + std::to_string(row.size()) + " columns, expected " +
                              std::to_string(header.size()));
        }
        for (std::size_t a = 0; a < dim; ++a) {
            coords[a].push_back(row[a]);
        }
        points.emplace_back(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(dim));
        if constexpr (std::is_same_v<T, double>) {
            raw.push_back(row[dim]);
        } else {
            raw.emplace_back(row[dim], row[dim + 1]);
        }
    }
    Grid grid = infer_grid(coords);
    if (points.size() != grid.size()) {
        throw DomainError("csv grid: rows do not cover the inferred lattice");
    }
    std::vector<T> values(grid.size());
    std::vector<bool> seen(grid.size(), false);
    for (std::size_t r = 0; r < points.size(); ++r) {
        const auto idx = grid.find(points[r]);
        if (!idx || seen[*idx]) {
            throw DomainError("csv grid: row " + std::to_string(r + 2) + " is off-lattice or duplicated");
        }
        seen[*idx] = true;
        values[*idx] = raw[r];
    }
    return BasicGridFunction<T>(std::move(grid), std::move(values));
}

} // namespace

nlohmann::json grid_to_json(const Grid& grid)
{
    nlohmann::json lo = nlohmann::json::array();
    nlohmann::json hi = nlohmann::json::array();
    nlohmann::json h = nlohmann::json::array();
    for (const auto& ax : grid.axes()) {
        lo.push_back(ax.lo());
        hi.push_back(ax.hi());
        h.push_back(ax.h);
    }
    return {{"lo", lo}, {"hi", hi}, {"h", h}};
}

Grid grid_from_json(const nlohmann::json& j)
{
    if (j.contains("L")) {
        const int dim = j.value("dim", 1);
        return Grid::symmetric(j.at("L").get<double>(), j.at("h").get<double>(), dim);
    }
    return Grid::box(j.at("lo").get<std::vector<double>>(), j.at("hi").get<std::vector<double>>(),
                     j.at("h").get<std::vector<double>>());
}

void write_csv(std::ostream& os, const GridFunction& f) { write_csv_impl(os, f); }
void write_csv(std::ostream& os, const ComplexGridFunction& f) { write_csv_impl(os, f); }
GridFunction read_csv(std::istream& is) { return read_csv_impl<double>(is); }
ComplexGridFunction read_csv_complex(std::istream& is) { return read_csv_impl<std::complex<double>>(is); }

void write_binary(std::ostream& os, const GridFunction& f) { write_binary_impl(os, f, "float64"); }
void write_binary(std::ostream& os, const ComplexGridFunction& f) { write_binary_impl(os, f, "complex128"); }
GridFunction read_binary(std::istream& is) { return read_binary_impl<double>(is, "float64"); }
ComplexGridFunction read_binary_complex(std::istream& is)
{
    return read_binary_impl<std::complex<double>>(is, "complex128");
}

void save_csv(const std::filesystem::path& path, const GridFunction& f)
{
    std::ofstream os(path);
    if (!os) {
        throw Error("cannot open " + path.string() + " for writing");
    }
    write_csv(os, f);
}

void save_binary(const std::filesystem::path& path, const GridFunction& f)
{
    std::ofstream os(path, std::ios::binary);
    if (!os) {
        throw Error("cannot open " + path.string() + " for writing");
    }
    write_binary(os, f);
}

GridFunction load_grid_function(const std::filesystem::path& path)
{
    if (path.extension() == ".csv") {
        std::ifstream is(path);
        if (!is) {
            throw Error("cannot open " + path.string());
        }
        return read_csv(is);
    }
    std::ifstream is(path, std::ios::binary);
    if (!is) {
        throw Error("cannot open " + path.string());
    }
    return read_binary(is);
}

} // namespace dmf
