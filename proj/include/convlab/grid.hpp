#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace convlab {

using cplx = std::complex<double>;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 6.28318530717958647692;

// Default cap on total grid points (N^d); make_grids rejects larger requests.
inline constexpr std::size_t kDefaultMaxGridPoints = std::size_t{1} << 24;

enum class Domain { frequency, space };

// Uniform symmetric grid on [-(N/2)*step, (N/2-1)*step] per dimension.
// N is even, the origin sits at index N/2 along each axis. The index
// j = 0 (Nyquist edge) is the one point without a mirror partner; all
// symmetry-sensitive checks skip it.
struct Grid {
    Domain domain = Domain::frequency;
    int dim = 1;
    int n = 0;          // points per dimension, even
    double step = 0.0;  // spacing per dimension

    int origin() const { return n / 2; }
    double coord(int i) const { return (i - n / 2) * step; }
    double extent() const { return (n / 2) * step; }

    std::size_t size() const {
        std::size_t total = 1;
        for (int k = 0; k < dim; ++k) total *= static_cast<std::size_t>(n);
        return total;
    }

    bool operator==(const Grid& o) const {
        return domain == o.domain && dim == o.dim && n == o.n && step == o.step;
    }
    bool operator!=(const Grid& o) const { return !(*this == o); }
};

struct GridPair {
    Grid freq;
    Grid space;
};

// Compatible frequency/space grids with step_x * step_s * N = 2*pi.
GridPair make_grids(int dim, int n, double s_max,
                    std::size_t max_points = kDefaultMaxGridPoints);

// Complex-valued function sampled on a grid. `hermitian` is a claim
// (f(-s) == conj f(s)) that holds by construction for CFs of real data.
struct GridFn {
    Grid grid;
    std::vector<cplx> values;
    bool hermitian = false;

    cplx at(std::size_t flat) const { return values[flat]; }
    std::size_t size() const { return values.size(); }
};

GridFn make_fn(const Grid& grid, bool hermitian = false);

// Evaluate f(coords) at every node; coords passed as a dim-length pointer.
GridFn sample_fn(const Grid& grid, const std::function<cplx(const double*)>& f,
                 bool hermitian = false);

// Convenience for d=1.
GridFn sample_fn1(const Grid& grid, const std::function<cplx(double)>& f,
                  bool hermitian = false);

// Flat index <-> per-axis indices (row major, axis 0 slowest).
void unflatten(const Grid& grid, std::size_t flat, int* idx);
std::size_t flatten(const Grid& grid, const int* idx);
std::size_t origin_index(const Grid& grid);
void node_coords(const Grid& grid, std::size_t flat, double* out);

// Quadrature-scaled transform pair with the e^{+i s.x} forward convention:
//   forward:  F(s_j) = step_x^d * sum_m f(x_m) e^{+i s_j.x_m}
//   inverse:  f(x_m) = (2pi)^{-d} step_s^d * sum_j F(s_j) e^{-i s_j.x_m}
// On the compatible pair the lattice phases are exact N-th roots of unity,
// so inverse(forward(f)) == f to rounding.
GridFn forward_transform(const GridFn& f);
GridFn inverse_transform(const GridFn& phi);

// Pointwise algebra. Grids must match.
GridFn mul(const GridFn& a, const GridFn& b);
GridFn div_unchecked(const GridFn& a, const GridFn& b);  // propagates inf/nan at zeros
GridFn add(const GridFn& a, const GridFn& b);
GridFn sub(const GridFn& a, const GridFn& b);
GridFn scale(const GridFn& a, cplx c);
GridFn conj_fn(const GridFn& a);

// Central differences along axis k, one-sided (second order) at the edges.
GridFn grid_derivative(const GridFn& f, int axis);

// max over pairable nodes of |f(-s) - conj f(s)|.
double hermitian_defect(const GridFn& f);

double max_abs(const GridFn& f);
cplx value_at_origin(const GridFn& f);

// step^d * sum |f|^2 (trapezoid-free lattice quadrature).
double l2_norm_sq(const GridFn& f);

}  // namespace convlab
