#pragma once

// Grid function persistence.
//
// CSV: one row per lattice point, coordinate columns x0..x{d-1} followed by
// `value` (or `re`,`im` for complex data), printed with 17 significant digits.
//
// Binary: the 4-byte magic "DMFG", a little-endian uint64 header length, a
// JSON header (format, version, dtype, boundary_policy, axes, count) and the
// samples as little-endian IEEE-754 doubles (re/im interleaved for complex).
// The binary form round-trips bit-exactly.

#include <filesystem>
#include <iosfwd>
#include <string>

#include <nlohmann/json.hpp>

#include "dmf/grid.hpp"

namespace dmf {

nlohmann::json grid_to_json(const Grid& grid);
Grid grid_from_json(const nlohmann::json& j);

void write_csv(std::ostream& os, const GridFunction& f);
void write_csv(std::ostream& os, const ComplexGridFunction& f);
GridFunction read_csv(std::istream& is);
ComplexGridFunction read_csv_complex(std::istream& is);

void write_binary(std::ostream& os, const GridFunction& f);
void write_binary(std::ostream& os, const ComplexGridFunction& f);
GridFunction read_binary(std::istream& is);
ComplexGridFunction read_binary_complex(std::istream& is);

void save_csv(const std::filesystem::path& path, const GridFunction& f);
void save_binary(const std::filesystem::path& path, const GridFunction& f);
GridFunction load_grid_function(const std::filesystem::path& path); ///< by extension (.csv or .bin)

} // namespace dmf
