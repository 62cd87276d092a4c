#include "convlab/grid.hpp"

#include <cmath>
#include <cstring>

namespace convlab {

GridPair make_grids(int dim, int n, double s_max, std::size_t max_points) {
    if (dim < 1 || dim > 3)
        throw std::invalid_argument("make_grids: dim must be 1, 2 or 3");
    if (n < 8 || n % 2 != 0)
        throw std::invalid_argument("make_grids: N must be even and >= 8");
    if (!(s_max > 0.0))
        throw std::invalid_argument("make_grids: s_max must be positive");

    std::size_t total = 1;
    for (int k = 0; k < dim; ++k) {
        if (total > max_points / static_cast<std::size_t>(n))
            throw std::invalid_argument("make_grids: N^d exceeds grid point cap");
        total *= static_cast<std::size_t>(n);
    }

    const double ds = s_max / (n / 2);
    const double dx = kTwoPi / (n * ds);
    GridPair out;
    out.freq = Grid{Domain::frequency, dim, n, ds};
    out.space = Grid{Domain::space, dim, n, dx};
    return out;
}

GridFn make_fn(const Grid& grid, bool hermitian) {
    GridFn f;
    f.grid = grid;
    f.values.assign(grid.size(), cplx{0.0, 0.0});
    f.hermitian = hermitian;
    return f;
}

void unflatten(const Grid& grid, std::size_t flat, int* idx) {
    for (int k = grid.dim - 1; k >= 0; --k) {
        idx[k] = static_cast<int>(flat % grid.n);
        flat /= grid.n;
    }
}

std::size_t flatten(const Grid& grid, const int* idx) {
    std::size_t flat = 0;
    for (int k = 0; k < grid.dim; ++k)
        flat = flat * grid.n + static_cast<std::size_t>(idx[k]);
    return flat;
}

std::size_t origin_index(const Grid& grid) {
    std::size_t flat = 0;
    for (int k = 0; k < grid.dim; ++k)
        flat = flat * grid.n + static_cast<std::size_t>(grid.n / 2);
    return flat;
}

void node_coords(const Grid& grid, std::size_t flat, double* out) {
    for (int k = grid.dim - 1; k >= 0; --k) {
        out[k] = grid.coord(static_cast<int>(flat % grid.n));
        flat /= grid.n;
    }
}

GridFn sample_fn(const Grid& grid, const std::function<cplx(const double*)>& f,
                 bool hermitian) {
    GridFn out = make_fn(grid, hermitian);
    double xs[3];
    const std::size_t total = grid.size();
    for (std::size_t i = 0; i < total; ++i) {
        node_coords(grid, i, xs);
        out.values[i] = f(xs);
    }
    return out;
}

GridFn sample_fn1(const Grid& grid, const std::function<cplx(double)>& f,
                  bool hermitian) {
    if (grid.dim != 1) throw std::invalid_argument("sample_fn1: grid must be 1-d");
    return sample_fn(grid, [&](const double* x) { return f(x[0]); }, hermitian);
}

namespace {

// Roots-of-unity table w[r] = exp(sign * 2*pi*i * r / n). On the compatible
// pair s_j * x_m = 2*pi*(j-n/2)*(m-n/2)/n exactly, so each phase is a table
// entry; the transform is a centered DFT free of phase drift.
std::vector<cplx> unit_roots(int n, int sign) {
    std::vector<cplx> w(static_cast<std::size_t>(n));
    for (int r = 0; r < n; ++r) {
        const double a = sign * kTwoPi * r / n;
        w[static_cast<std::size_t>(r)] = cplx{std::cos(a), std::sin(a)};
    }
    return w;
}

// Apply the centered DFT along every axis: out_j = scale * sum_m in_m w[(j-o)(m-o) mod n].
std::vector<cplx> transform_all_axes(const Grid& grid, const std::vector<cplx>& in,
                                     int sign, double axis_scale) {
    const int n = grid.n;
    const int o = n / 2;
    const auto w = unit_roots(n, sign);
    std::vector<cplx> cur = in;
    std::vector<cplx> line(static_cast<std::size_t>(n));
    std::vector<cplx> res(static_cast<std::size_t>(n));

    const std::size_t total = grid.size();
    for (int axis = 0; axis < grid.dim; ++axis) {
        // stride between consecutive entries along `axis`
        std::size_t stride = 1;
        for (int k = axis + 1; k < grid.dim; ++k) stride *= static_cast<std::size_t>(n);
        const std::size_t nlines = total / static_cast<std::size_t>(n);

        for (std::size_t l = 0; l < nlines; ++l) {
            // base offset of the l-th line along this axis
            const std::size_t block = l / stride;
            const std::size_t within = l % stride;
            const std::size_t base = block * stride * static_cast<std::size_t>(n) + within;

            for (int m = 0; m < n; ++m)
                line[static_cast<std::size_t>(m)] = cur[base + static_cast<std::size_t>(m) * stride];

            for (int j = 0; j < n; ++j) {
                const long long jo = j - o;
                // r_m = (j-o)(m-o) mod n, advanced incrementally by (j-o)
                long long r = ((jo * (0LL - o)) % n + n) % n;
                const long long dr = ((jo % n) + n) % n;
                cplx acc{0.0, 0.0};
                for (int m = 0; m < n; ++m) {
                    acc += line[static_cast<std::size_t>(m)] * w[static_cast<std::size_t>(r)];
                    r += dr;
                    if (r >= n) r -= n;
                }
                res[static_cast<std::size_t>(j)] = axis_scale * acc;
            }
            for (int j = 0; j < n; ++j)
                cur[base + static_cast<std::size_t>(j) * stride] = res[static_cast<std::size_t>(j)];
        }
    }
    return cur;
}

void require_same_grid(const GridFn& a, const GridFn& b, const char* what) {
    if (a.grid != b.grid)
        throw std::invalid_argument(std::string(what) + ": grid mismatch");
}

}  // namespace

GridFn forward_transform(const GridFn& f) {
    if (f.grid.domain != Domain::space)
        throw std::invalid_argument("forward_transform: input must live on a space grid");
    GridFn out;
    out.grid = Grid{Domain::frequency, f.grid.dim, f.grid.n, kTwoPi / (f.grid.n * f.grid.step)};
    out.values = transform_all_axes(f.grid, f.values, +1, f.grid.step);
    out.hermitian = f.hermitian;  // real input in space <-> hermitian spectrum
    return out;
}

GridFn inverse_transform(const GridFn& phi) {
    if (phi.grid.domain != Domain::frequency)
        throw std::invalid_argument("inverse_transform: input must live on a frequency grid");
    GridFn out;
    out.grid = Grid{Domain::space, phi.grid.dim, phi.grid.n, kTwoPi / (phi.grid.n * phi.grid.step)};
    out.values = transform_all_axes(phi.grid, phi.values, -1, phi.grid.step / kTwoPi);
    out.hermitian = phi.hermitian;
    return out;
}

GridFn mul(const GridFn& a, const GridFn& b) {
    require_same_grid(a, b, "mul");
    GridFn out = a;
    for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] *= b.values[i];
    out.hermitian = a.hermitian && b.hermitian;
    return out;
}

GridFn div_unchecked(const GridFn& a, const GridFn& b) {
    require_same_grid(a, b, "div_unchecked");
    GridFn out = a;
    for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] /= b.values[i];
    out.hermitian = a.hermitian && b.hermitian;
    return out;
}

GridFn add(const GridFn& a, const GridFn& b) {
    require_same_grid(a, b, "add");
    GridFn out = a;
    for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] += b.values[i];
    out.hermitian = a.hermitian && b.hermitian;
    return out;
}

GridFn sub(const GridFn& a, const GridFn& b) {
    require_same_grid(a, b, "sub");
    GridFn out = a;
    for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] -= b.values[i];
    out.hermitian = a.hermitian && b.hermitian;
    return out;
}

GridFn scale(const GridFn& a, cplx c) {
    GridFn out = a;
    for (auto& v : out.values) v *= c;
    out.hermitian = a.hermitian && c.imag() == 0.0;
    return out;
}

GridFn conj_fn(const GridFn& a) {
    GridFn out = a;
    for (auto& v : out.values) v = std::conj(v);
    return out;
}

GridFn grid_derivative(const GridFn& f, int axis) {
    if (axis < 0 || axis >= f.grid.dim)
        throw std::invalid_argument("grid_derivative: axis out of range");
    if (f.grid.n < 4)
        throw std::invalid_argument("grid_derivative: need N >= 4");

    const int n = f.grid.n;
    const double h = f.grid.step;
    std::size_t stride = 1;
    for (int k = axis + 1; k < f.grid.dim; ++k) stride *= static_cast<std::size_t>(n);

    GridFn out = make_fn(f.grid, false);
    const std::size_t nlines = f.grid.size() / static_cast<std::size_t>(n);
    for (std::size_t l = 0; l < nlines; ++l) {
        const std::size_t block = l / stride;
        const std::size_t within = l % stride;
        const std::size_t base = block * stride * static_cast<std::size_t>(n) + within;
        auto v = [&](int m) { return f.values[base + static_cast<std::size_t>(m) * stride]; };

        out.values[base] = (-3.0 * v(0) + 4.0 * v(1) - v(2)) / (2.0 * h);
        for (int m = 1; m + 1 < n; ++m)
            out.values[base + static_cast<std::size_t>(m) * stride] = (v(m + 1) - v(m - 1)) / (2.0 * h);
        out.values[base + static_cast<std::size_t>(n - 1) * stride] =
            (3.0 * v(n - 1) - 4.0 * v(n - 2) + v(n - 3)) / (2.0 * h);
    }
    out.hermitian = false;
    return out;
}

double hermitian_defect(const GridFn& f) {
    const int n = f.grid.n;
    const int d = f.grid.dim;
    int idx[3], mirror[3];
    double worst = 0.0;
    const std::size_t total = f.grid.size();
    for (std::size_t i = 0; i < total; ++i) {
        unflatten(f.grid, i, idx);
        bool pairable = true;
        for (int k = 0; k < d; ++k) {
            if (idx[k] == 0) { pairable = false; break; }  // Nyquist edge, no partner
            mirror[k] = n - idx[k];
        }
        if (!pairable) continue;
        const cplx diff = f.values[flatten(f.grid, mirror)] - std::conj(f.values[i]);
        worst = std::max(worst, std::abs(diff));
    }
    return worst;
}

double max_abs(const GridFn& f) {
    double m = 0.0;
    for (const auto& v : f.values) m = std::max(m, std::abs(v));
    return m;
}

cplx value_at_origin(const GridFn& f) { return f.values[origin_index(f.grid)]; }

double l2_norm_sq(const GridFn& f) {
    double acc = 0.0;
    for (const auto& v : f.values) acc += std::norm(v);
    double w = 1.0;
    for (int k = 0; k < f.grid.dim; ++k) w *= f.grid.step;
    return acc * w;
}

}  // namespace convlab
