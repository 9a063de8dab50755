#pragma once

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <memory>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace tfpf {

/// Doubly periodic rectangle [0,Lx) x [0,Ly) with Nx x Ny nodes.
struct PeriodicGrid {
    double lx = 2.0 * std::numbers::pi;
    double ly = 2.0 * std::numbers::pi;
    int nx = 64;
    int ny = 64;

    PeriodicGrid() = default;
    PeriodicGrid(double lx_, double ly_, int nx_, int ny_) : lx(lx_), ly(ly_), nx(nx_), ny(ny_) { validate(); }

    void validate() const {
        if (nx < 4 || ny < 4 || nx % 2 != 0 || ny % 2 != 0) {
            throw std::invalid_argument("PeriodicGrid: Nx, Ny must be even and >= 4");
        }
        if (!(lx > 0.0 && ly > 0.0)) throw std::invalid_argument("PeriodicGrid: domain lengths must be positive");
    }

    std::size_t size() const { return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny); }
    double area() const { return lx * ly; }
    double cell_area() const { return area() / static_cast<double>(size()); }
    double x(int i) const { return lx * i / nx; }
    double y(int j) const { return ly * j / ny; }

    bool operator==(const PeriodicGrid&) const = default;
};

/// Real grid function, row-major with x fastest: value(i, j) = values[j * nx + i].
class ScalarField {
public:
    ScalarField() = default;
    explicit ScalarField(const PeriodicGrid& grid, double fill = 0.0) : grid_(grid), values_(grid.size(), fill) {}
    ScalarField(const PeriodicGrid& grid, std::vector<double> values) : grid_(grid), values_(std::move(values)) {
        if (values_.size() != grid_.size()) throw std::invalid_argument("ScalarField: value count does not match grid");
    }

    template <class F>
    static ScalarField from_function(const PeriodicGrid& grid, F&& f) {
        ScalarField u(grid);
        for (int j = 0; j < grid.ny; ++j)
            for (int i = 0; i < grid.nx; ++i) u(i, j) = f(grid.x(i), grid.y(j));
        return u;
    }

    const PeriodicGrid& grid() const { return grid_; }
    std::size_t size() const { return values_.size(); }
    double* data() { return values_.data(); }
    const double* data() const { return values_.data(); }
    std::vector<double>& values() { return values_; }
    const std::vector<double>& values() const { return values_; }

    double& operator[](std::size_t k) { return values_[k]; }
    double operator[](std::size_t k) const { return values_[k]; }
    double& operator()(int i, int j) { return values_[static_cast<std::size_t>(j) * grid_.nx + i]; }
    double operator()(int i, int j) const { return values_[static_cast<std::size_t>(j) * grid_.nx + i]; }

    ScalarField& operator+=(const ScalarField& o) {
        check_same(o);
        for (std::size_t k = 0; k < size(); ++k) values_[k] += o.values_[k];
        return *this;
    }
    ScalarField& operator-=(const ScalarField& o) {
        check_same(o);
        for (std::size_t k = 0; k < size(); ++k) values_[k] -= o.values_[k];
        return *this;
    }
    ScalarField& operator*=(double a) {
        for (auto& v : values_) v *= a;
        return *this;
    }
    ScalarField& operator+=(double a) {
        for (auto& v : values_) v += a;
        return *this;
    }

    void check_same(const ScalarField& o) const {
        if (o.size() != size()) throw std::invalid_argument("ScalarField: shape mismatch");
    }

    bool all_finite() const {
        return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
    }

private:
    PeriodicGrid grid_;
    std::vector<double> values_;
};

inline ScalarField operator+(ScalarField a, const ScalarField& b) { return a += b; }
inline ScalarField operator-(ScalarField a, const ScalarField& b) { return a -= b; }
inline ScalarField operator*(double s, ScalarField a) { return a *= s; }

/// Pointwise product.
inline ScalarField hadamard(const ScalarField& a, const ScalarField& b) {
    a.check_same(b);
    ScalarField out(a.grid());
    for (std::size_t k = 0; k < a.size(); ++k) out[k] = a[k] * b[k];
    return out;
}

template <class F>
ScalarField map(const ScalarField& u, F&& f) {
    ScalarField out(u.grid());
    for (std::size_t k = 0; k < u.size(); ++k) out[k] = f(u[k]);
    return out;
}

// Vector-space hooks for the history templates.
inline ScalarField zero_like(const ScalarField& u) { return ScalarField(u.grid()); }
inline void axpy(double a, const ScalarField& x, ScalarField& y) {
    x.check_same(y);
    double* yd = y.data();
    const double* xd = x.data();
    for (std::size_t k = 0; k < x.size(); ++k) yd[k] += a * xd[k];
}

/// Discrete L2 product sum u v dA (spectrally exact for resolved trigonometric integrands).
inline double inner(const ScalarField& u, const ScalarField& v) {
    u.check_same(v);
    double s = 0.0;
    for (std::size_t k = 0; k < u.size(); ++k) s += u[k] * v[k];
    return s * u.grid().cell_area();
}

inline double integral(const ScalarField& u) {
    double s = 0.0;
    for (std::size_t k = 0; k < u.size(); ++k) s += u[k];
    return s * u.grid().cell_area();
}

inline double mean(const ScalarField& u) { return integral(u) / u.grid().area(); }
inline double norm_l2(const ScalarField& u) { return std::sqrt(inner(u, u)); }
inline double norm_linf(const ScalarField& u) {
    double m = 0.0;
    for (std::size_t k = 0; k < u.size(); ++k) m = std::max(m, std::abs(u[k]));
    return m;
}

/// Diagonal solve hit a mode where the operator symbol vanishes.
class SingularModeError : public std::runtime_error {
public:
    SingularModeError(double kx, double ky, double value)
        : std::runtime_error(describe(kx, ky, value)), kx_(kx), ky_(ky) {}
    double kx() const { return kx_; }
    double ky() const { return ky_; }

private:
    static std::string describe(double kx, double ky, double value) {
        std::ostringstream os;
        os << "diagonal_solve: singular mode at (kx, ky) = (" << kx << ", " << ky << "), symbol = " << value;
        return os.str();
    }
    double kx_, ky_;
};

/// Per-mode real multiplier on the half-complex (r2c) layout.
using Symbol = std::vector<double>;

/// Fourier-diagonal operators on one PeriodicGrid, backed by FFTW.
///
/// Transforms are on demand; fields stay in physical space. The object
/// owns scratch buffers, so one instance must not be used from two threads
/// at once.
class SpectralOps {
public:
    explicit SpectralOps(const PeriodicGrid& grid) : grid_(grid), nxh_(grid.nx / 2 + 1) {
        grid_.validate();
        const std::size_t nmodes = modes();
        real_ = static_cast<double*>(fftw_malloc(sizeof(double) * grid_.size()));
        spec_ = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * nmodes));
        if (!real_ || !spec_) throw std::bad_alloc();
        forward_ = fftw_plan_dft_r2c_2d(grid_.ny, grid_.nx, real_, spec_, FFTW_ESTIMATE);
        backward_ = fftw_plan_dft_c2r_2d(grid_.ny, grid_.nx, spec_, real_, FFTW_ESTIMATE);

        kx_.resize(nmodes);
        ky_.resize(nmodes);
        for (int j = 0; j < grid_.ny; ++j) {
            const int mj = j < grid_.ny / 2 ? j : j - grid_.ny;
            for (int m = 0; m < nxh_; ++m) {
                const int mi = m < grid_.nx / 2 ? m : m - grid_.nx;
                const std::size_t idx = index(j, m);
                kx_[idx] = 2.0 * std::numbers::pi * mi / grid_.lx;
                ky_[idx] = 2.0 * std::numbers::pi * mj / grid_.ly;
            }
        }
        neg_lap_ = make_symbol([](double kx, double ky) { return kx * kx + ky * ky; });
        lap_ = make_symbol([](double kx, double ky) { return -(kx * kx + ky * ky); });
        sh_ = make_symbol([](double kx, double ky) {
            const double s = 1.0 - (kx * kx + ky * ky);
            return s * s;
        });
    }

    SpectralOps(const SpectralOps& o) : SpectralOps(o.grid_) {}
    SpectralOps& operator=(const SpectralOps&) = delete;

    ~SpectralOps() {
        fftw_destroy_plan(forward_);
        fftw_destroy_plan(backward_);
        fftw_free(real_);
        fftw_free(spec_);
    }

    const PeriodicGrid& grid() const { return grid_; }
    std::size_t modes() const { return static_cast<std::size_t>(grid_.ny) * static_cast<std::size_t>(nxh_); }
    double kx(std::size_t mode) const { return kx_[mode]; }
    double ky(std::size_t mode) const { return ky_[mode]; }

    /// Builds a symbol from f(kx, ky).
    template <class F>
    Symbol make_symbol(F&& f) const {
        Symbol s(modes());
        for (std::size_t k = 0; k < s.size(); ++k) s[k] = f(kx_[k], ky_[k]);
        return s;
    }

    /// |k|^2, i.e. the symbol of -Laplacian.
    const Symbol& neg_laplacian_symbol() const { return neg_lap_; }

    /// Forward transform (unnormalized) into a caller-owned coefficient buffer.
    void forward(const ScalarField& u, std::vector<std::complex<double>>& out) const {
        check(u);
        std::copy(u.data(), u.data() + u.size(), real_);
        fftw_execute(forward_);
        out.resize(modes());
        for (std::size_t k = 0; k < modes(); ++k) out[k] = {spec_[k][0], spec_[k][1]};
    }

    /// Inverse transform of coefficients produced by forward(), including the 1/(Nx Ny) scaling.
    ScalarField inverse(const std::vector<std::complex<double>>& coeffs) const {
        const double scale = 1.0 / static_cast<double>(grid_.size());
        for (std::size_t k = 0; k < modes(); ++k) {
            spec_[k][0] = coeffs[k].real() * scale;
            spec_[k][1] = coeffs[k].imag() * scale;
        }
        fftw_execute(backward_);
        ScalarField out(grid_);
        std::copy(real_, real_ + grid_.size(), out.data());
        return out;
    }

    /// Multiplies u by a Fourier symbol.
    ScalarField apply(const Symbol& symbol, const ScalarField& u) const {
        check(u);
        std::copy(u.data(), u.data() + u.size(), real_);
        fftw_execute(forward_);
        const double scale = 1.0 / static_cast<double>(grid_.size());
        for (std::size_t k = 0; k < modes(); ++k) {
            const double m = symbol[k] * scale;
            spec_[k][0] *= m;
            spec_[k][1] *= m;
        }
        fftw_execute(backward_);
        ScalarField out(grid_);
        std::copy(real_, real_ + grid_.size(), out.data());
        return out;
    }

    /// s1(k) u1^ + s2(k) u2^ with one inverse transform.
    ScalarField apply_sum(const Symbol& s1, const ScalarField& u1, const Symbol& s2, const ScalarField& u2) const {
        forward(u1, buf_);
        check(u2);
        std::copy(u2.data(), u2.data() + u2.size(), real_);
        fftw_execute(forward_);
        for (std::size_t k = 0; k < modes(); ++k) {
            buf_[k] = s1[k] * buf_[k] + s2[k] * std::complex<double>(spec_[k][0], spec_[k][1]);
        }
        return inverse(buf_);
    }

    ScalarField laplacian(const ScalarField& u) const { return apply(lap_, u); }
    ScalarField neg_laplacian(const ScalarField& u) const { return apply(neg_lap_, u); }
    /// (1 + Laplacian)^2 u, symbol (1 - |k|^2)^2.
    ScalarField one_plus_lap_sq(const ScalarField& u) const { return apply(sh_, u); }
    const Symbol& one_plus_lap_sq_symbol() const { return sh_; }

    /// Solves (a I + Op) u = rhs where Op has the given symbol.
    ScalarField diagonal_solve(double a, const Symbol& symbol, const ScalarField& rhs) const {
        check(rhs);
        std::copy(rhs.data(), rhs.data() + rhs.size(), real_);
        fftw_execute(forward_);
        const double scale = 1.0 / static_cast<double>(grid_.size());
        for (std::size_t k = 0; k < modes(); ++k) {
            const double d = a + symbol[k];
            if (d == 0.0 || !std::isfinite(1.0 / d)) throw SingularModeError(kx_[k], ky_[k], d);
            const double m = scale / d;
            spec_[k][0] *= m;
            spec_[k][1] *= m;
        }
        fftw_execute(backward_);
        ScalarField out(grid_);
        std::copy(real_, real_ + grid_.size(), out.data());
        return out;
    }

    /// |u|_{H^-1}^2 = sum_{k != 0} |u^_k|^2 / |k|^2 (zero mode dropped), with
    /// the same area weighting as inner().
    double neg_sobolev_norm_sq(const ScalarField& u) const {
        check(u);
        std::copy(u.data(), u.data() + u.size(), real_);
        fftw_execute(forward_);
        double s = 0.0;
        for (int j = 0; j < grid_.ny; ++j) {
            for (int m = 0; m < nxh_; ++m) {
                const std::size_t idx = index(j, m);
                if (neg_lap_[idx] == 0.0) continue;
                // Interior half-plane columns stand for two conjugate modes.
                const bool paired = m != 0 && !(grid_.nx % 2 == 0 && m == grid_.nx / 2);
                const double a2 = spec_[idx][0] * spec_[idx][0] + spec_[idx][1] * spec_[idx][1];
                s += (paired ? 2.0 : 1.0) * a2 / neg_lap_[idx];
            }
        }
        const double n = static_cast<double>(grid_.size());
        return s * grid_.cell_area() / n;
    }

private:
    std::size_t index(int j, int m) const { return static_cast<std::size_t>(j) * nxh_ + m; }
    void check(const ScalarField& u) const {
        if (u.size() != grid_.size()) throw std::invalid_argument("SpectralOps: field does not match grid");
    }

    PeriodicGrid grid_;
    int nxh_;
    double* real_ = nullptr;
    fftw_complex* spec_ = nullptr;
    fftw_plan forward_ = nullptr;
    fftw_plan backward_ = nullptr;
    std::vector<double> kx_, ky_;
    Symbol neg_lap_, lap_, sh_;
    mutable std::vector<std::complex<double>> buf_;
};

}  // namespace tfpf
