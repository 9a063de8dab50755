#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "tfpf/fractional_kernels.hpp"
#include "tfpf/spectral_domain.hpp"
#include "tfpf/temporal_mesh.hpp"

namespace tfpf {

// FPF1 snapshot: "FPF1", u32 nx, u32 ny, then nx*ny f64 values with x
// fastest. All little-endian.

namespace detail {

inline void put_u32(std::ostream& os, std::uint32_t v) {
    const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                                static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4)) throw std::runtime_error("FPF1: truncated header");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline void put_f64(std::ostream& os, double v) {
    std::uint64_t u;
    std::memcpy(&u, &v, 8);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(u >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 8);
}

inline double get_f64(std::istream& is) {
    unsigned char b[8];
    if (!is.read(reinterpret_cast<char*>(b), 8)) throw std::runtime_error("FPF1: truncated data");
    std::uint64_t u = 0;
    for (int i = 0; i < 8; ++i) u |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    double v;
    std::memcpy(&v, &u, 8);
    return v;
}

}  // namespace detail

inline void write_fpf1(std::ostream& os, const ScalarField& u) {
    os.write("FPF1", 4);
    detail::put_u32(os, static_cast<std::uint32_t>(u.grid().nx));
    detail::put_u32(os, static_cast<std::uint32_t>(u.grid().ny));
    for (std::size_t k = 0; k < u.size(); ++k) detail::put_f64(os, u[k]);
}

/// Reads values into a field on `grid`; the stored sizes must match.
inline ScalarField read_fpf1(std::istream& is, const PeriodicGrid& grid) {
    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, "FPF1", 4) != 0) throw std::runtime_error("FPF1: bad magic");
    const auto nx = detail::get_u32(is);
    const auto ny = detail::get_u32(is);
    if (static_cast<int>(nx) != grid.nx || static_cast<int>(ny) != grid.ny) throw std::runtime_error("FPF1: grid size mismatch");
    ScalarField u(grid);
    for (std::size_t k = 0; k < u.size(); ++k) u[k] = detail::get_f64(is);
    return u;
}

/// Plain-text alternative with header `x,y,value`.
inline void write_field_csv(std::ostream& os, const ScalarField& u) {
    const auto old = os.precision(17);
    os << "x,y,value\n";
    const PeriodicGrid& g = u.grid();
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) os << g.x(i) << ',' << g.y(j) << ',' << u(i, j) << '\n';
    os.precision(old);
}

/// Kernel rows of a whole mesh, header `n,j,b,b_mod`.
inline void write_kernels_csv(std::ostream& os, const std::vector<KernelRow>& rows) {
    const auto old = os.precision(17);
    os << "n,j,b,b_mod\n";
    for (const auto& row : rows) {
        const ModifiedKernelRow mod = modify_row(row);
        for (std::size_t j = 0; j < row.size(); ++j) os << row.step << ',' << j << ',' << row.weights[j] << ',' << mod.weights[j] << '\n';
    }
    os.precision(old);
}

}  // namespace tfpf
