#include "convlab/moments.hpp"

#include "convlab/support.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace convlab {

void validate_sample(const Sample& s) {
    if (s.n < 2) throw std::invalid_argument("sample: need n >= 2");
    if (s.d < 1 || s.d > 3) throw std::invalid_argument("sample: d must be 1..3");
    auto check = [&](const std::vector<double>& col, std::size_t want, const char* name) {
        if (col.empty()) return;
        if (col.size() != want)
            throw std::invalid_argument(std::string("sample: bad length for ") + name);
        for (double v : col)
            if (!std::isfinite(v))
                throw std::invalid_argument(std::string("sample: non-finite value in ") + name);
    };
    const std::size_t nd = s.n * static_cast<std::size_t>(s.d);
    check(s.z, nd, "z");
    check(s.x, nd, "x");
    check(s.y, s.n, "y");
    check(s.y2, s.n, "y2");
    if (s.z.empty()) throw std::invalid_argument("sample: z column missing");
}

namespace {

// Accumulate sum_j c_j e^{i s.z_j}. Per-axis phases are built outward from
// the origin with conjugate steps, so the result is exactly hermitian for
// real weights and exactly sum(c) at s=0.
void accumulate_phases(const std::vector<double>& weights, const std::vector<double>& data,
                       int d, const Grid& freq, std::vector<cplx>& acc) {
    const int n = freq.n;
    const int o = n / 2;
    const std::size_t npts = weights.size();

    if (d == 1) {
        for (std::size_t j = 0; j < npts; ++j) {
            const double w = weights[j];
            if (w == 0.0) continue;
            const double a = freq.step * data[j];
            const cplx up{std::cos(a), std::sin(a)};
            const cplx dn = std::conj(up);
            cplx pu{1.0, 0.0}, pd{1.0, 0.0};
            acc[static_cast<std::size_t>(o)] += w;
            for (int t = 1; t <= o; ++t) {
                pd *= dn;
                acc[static_cast<std::size_t>(o - t)] += w * pd;
                if (o + t < n) {
                    pu *= up;
                    acc[static_cast<std::size_t>(o + t)] += w * pu;
                }
            }
        }
        return;
    }

    // general d: tensor product of per-axis phase lines
    std::vector<cplx> line(static_cast<std::size_t>(d) * static_cast<std::size_t>(n));
    for (std::size_t j = 0; j < npts; ++j) {
        const double w = weights[j];
        if (w == 0.0) continue;
        for (int k = 0; k < d; ++k) {
            cplx* pl = line.data() + static_cast<std::size_t>(k) * n;
            const double a = freq.step * data[j * static_cast<std::size_t>(d) + static_cast<std::size_t>(k)];
            const cplx up{std::cos(a), std::sin(a)};
            const cplx dn = std::conj(up);
            pl[o] = cplx{1.0, 0.0};
            cplx pu{1.0, 0.0}, pd{1.0, 0.0};
            for (int t = 1; t <= o; ++t) {
                pd *= dn;
                pl[o - t] = pd;
                if (o + t < n) {
                    pu *= up;
                    pl[o + t] = pu;
                }
            }
        }
        int idx[3] = {0, 0, 0};
        const std::size_t total = freq.size();
        for (std::size_t flat = 0; flat < total; ++flat) {
            cplx p{w, 0.0};
            std::size_t rem = flat;
            for (int k = d - 1; k >= 0; --k) {
                p *= line[static_cast<std::size_t>(k) * n + rem % static_cast<std::size_t>(n)];
                rem /= static_cast<std::size_t>(n);
            }
            acc[flat] += p;
        }
        (void)idx;
    }
}

}  // namespace

GridFn weighted_ecf(const std::vector<double>& weights, const std::vector<double>& data,
                    int d, const Grid& freq) {
    if (freq.domain != Domain::frequency)
        throw std::invalid_argument("weighted_ecf: need a frequency grid");
    const std::size_t npts = weights.size();
    if (data.size() != npts * static_cast<std::size_t>(d))
        throw std::invalid_argument("weighted_ecf: weight/data length mismatch");
    for (double w : weights)
        if (!std::isfinite(w)) throw std::invalid_argument("weighted_ecf: non-finite weight");
    for (double v : data)
        if (!std::isfinite(v)) throw std::invalid_argument("weighted_ecf: non-finite data");

    GridFn out = make_fn(freq, true);
    accumulate_phases(weights, data, d, freq, out.values);
    const double inv_n = 1.0 / static_cast<double>(npts);
    for (auto& v : out.values) v *= inv_n;
    return out;
}

GridFn ecf(const std::vector<double>& data, int d, const Grid& freq) {
    const std::size_t npts = data.size() / static_cast<std::size_t>(d);
    if (npts < 2) throw std::invalid_argument("ecf: need n >= 2");
    return weighted_ecf(std::vector<double>(npts, 1.0), data, d, freq);
}

GridFn epsilon_k(const Sample& s, int k, const Grid& freq, int sign) {
    if (!s.has_x()) throw std::invalid_argument("epsilon_k: sample has no x column");
    if (k < 0 || k >= s.d) throw std::invalid_argument("epsilon_k: bad axis");
    std::vector<double> w(s.n);
    for (std::size_t j = 0; j < s.n; ++j) w[j] = s.xv(j, k);
    GridFn g = weighted_ecf(w, s.z, s.d, freq);
    return scale(g, cplx{0.0, static_cast<double>(sign)});
}

GridFn ecf_derivative(const Sample& s, int k, const Grid& freq) {
    if (k < 0 || k >= s.d) throw std::invalid_argument("ecf_derivative: bad axis");
    std::vector<double> w(s.n);
    for (std::size_t j = 0; j < s.n; ++j) w[j] = s.zv(j, k);
    GridFn g = weighted_ecf(w, s.z, s.d, freq);
    return scale(g, cplx{0.0, 1.0});
}

double sigma_ecf(std::size_t n, std::size_t grid_points) {
    return std::sqrt(2.0 * std::log(static_cast<double>(grid_points))) /
           std::sqrt(static_cast<double>(n));
}

CondMean conditional_mean_on_grid(const std::vector<double>& c, const Sample& s,
                                  const Grid& space, double bandwidth, double floor_rel) {
    if (space.domain != Domain::space)
        throw std::invalid_argument("conditional_mean_on_grid: need a space grid");
    if (!(bandwidth > 0.0))
        throw std::invalid_argument("conditional_mean_on_grid: bandwidth must be positive");
    if (s.d > 2)
        throw std::invalid_argument("conditional_mean_on_grid: d must be 1 or 2");
    if (c.size() != s.n)
        throw std::invalid_argument("conditional_mean_on_grid: weight length mismatch");

    const double cut = 6.0 * bandwidth;  // Gaussian kernel truncated here
    CondMean out;
    out.values = make_fn(space, false);
    out.flagged.assign(space.size(), 0);

    if (s.d == 1) {
        std::vector<std::size_t> order(s.n);
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::sort(order.begin(), order.end(),
                  [&](std::size_t a, std::size_t b) { return s.z[a] < s.z[b]; });
        std::vector<double> zs(s.n), cs(s.n);
        for (std::size_t j = 0; j < s.n; ++j) {
            zs[j] = s.z[order[j]];
            cs[j] = c[order[j]];
        }
        std::vector<double> den(space.size(), 0.0);
        for (int i = 0; i < space.n; ++i) {
            const double xg = space.coord(i);
            const auto lo = std::lower_bound(zs.begin(), zs.end(), xg - cut) - zs.begin();
            const auto hi = std::upper_bound(zs.begin(), zs.end(), xg + cut) - zs.begin();
            double sw = 0.0, sum = 0.0;
            for (auto j = static_cast<std::size_t>(lo); j < static_cast<std::size_t>(hi); ++j) {
                const double u = (zs[j] - xg) / bandwidth;
                const double kw = std::exp(-0.5 * u * u);
                sw += kw;
                sum += kw * cs[j];
            }
            den[static_cast<std::size_t>(i)] = sw;
            out.values.values[static_cast<std::size_t>(i)] = sw > 0.0 ? cplx{sum / sw, 0.0} : cplx{0.0, 0.0};
        }
        const double dmax = *std::max_element(den.begin(), den.end());
        if (dmax <= 0.0) throw NumericalError("conditional_mean_on_grid: every node is empty");
        std::size_t nflag = 0;
        for (std::size_t i = 0; i < den.size(); ++i) {
            if (den[i] < floor_rel * dmax) {
                out.flagged[i] = 1;
                ++nflag;
            }
        }
        if (nflag == out.flagged.size())
            throw NumericalError("conditional_mean_on_grid: all nodes flagged");
        return out;
    }

    // d == 2: direct sums with the same truncation box
    std::vector<double> den(space.size(), 0.0);
    int idx[3];
    for (std::size_t flat = 0; flat < space.size(); ++flat) {
        unflatten(space, flat, idx);
        const double g0 = space.coord(idx[0]);
        const double g1 = space.coord(idx[1]);
        double sw = 0.0, sum = 0.0;
        for (std::size_t j = 0; j < s.n; ++j) {
            const double d0 = s.zv(j, 0) - g0;
            if (std::abs(d0) > cut) continue;
            const double d1 = s.zv(j, 1) - g1;
            if (std::abs(d1) > cut) continue;
            const double kw = std::exp(-0.5 * (d0 * d0 + d1 * d1) / (bandwidth * bandwidth));
            sw += kw;
            sum += kw * c[j];
        }
        den[flat] = sw;
        out.values.values[flat] = sw > 0.0 ? cplx{sum / sw, 0.0} : cplx{0.0, 0.0};
    }
    const double dmax = *std::max_element(den.begin(), den.end());
    if (dmax <= 0.0) throw NumericalError("conditional_mean_on_grid: every node is empty");
    std::size_t nflag = 0;
    for (std::size_t i = 0; i < den.size(); ++i) {
        if (den[i] < floor_rel * dmax) {
            out.flagged[i] = 1;
            ++nflag;
        }
    }
    if (nflag == out.flagged.size())
        throw NumericalError("conditional_mean_on_grid: all nodes flagged");
    return out;
}

double silverman_bandwidth(const Sample& s) {
    // rule-of-thumb on the first z coordinate
    double mean = 0.0;
    for (std::size_t j = 0; j < s.n; ++j) mean += s.zv(j, 0);
    mean /= static_cast<double>(s.n);
    double var = 0.0;
    for (std::size_t j = 0; j < s.n; ++j) {
        const double dzj = s.zv(j, 0) - mean;
        var += dzj * dzj;
    }
    var /= static_cast<double>(s.n - 1);
    return 1.06 * std::sqrt(var) * std::pow(static_cast<double>(s.n), -0.2);
}

namespace {

std::vector<double> column(const Sample& s, const std::vector<double>& block, int k) {
    std::vector<double> col(s.n);
    for (std::size_t j = 0; j < s.n; ++j)
        col[j] = block[j * static_cast<std::size_t>(s.d) + static_cast<std::size_t>(k)];
    return col;
}

}  // namespace

MomentFns moments_model3(const Sample& s, const Grid& freq) {
    validate_sample(s);
    if (!s.has_x()) throw std::invalid_argument("model 3 moments: x column required");
    MomentFns m;
    m.phi_z = ecf(s.z, s.d, freq);
    m.phi_x = ecf(s.x, s.d, freq);
    for (int k = 0; k < s.d; ++k) {
        m.eps_k.push_back(epsilon_k(s, k, freq));
        m.gamma_dk.push_back(ecf_derivative(s, k, freq));
    }
    m.noise_scale = sigma_ecf(s.n, freq.size());
    return m;
}

MomentFns moments_model4a(const Sample& s, const Grid& freq) {
    validate_sample(s);
    if (!s.has_x()) throw std::invalid_argument("model 4a moments: x column required");
    MomentFns m;
    m.phi_z = ecf(s.z, s.d, freq);
    m.phi_x = ecf(s.x, s.d, freq);

    const std::size_t nd = s.n * static_cast<std::size_t>(s.d);
    std::vector<double> xi(nd);
    for (std::size_t i = 0; i < nd; ++i) xi[i] = s.z[i] - s.x[i];
    m.phi_zx = ecf(xi, s.d, freq);

    // E(x_k e^{i s.xi}) carries a mean(x_k) * phi_xi term from the latent
    // mean; subtract it, and with xi = z - x the differentiated factor is
    // phi_{-ux}, which flips the usual +i to -i:
    //   eps_k = -i (Ft(w_k) - mean(x_k) phi_xi) = (phi_{-ux})'_k phi_u.
    for (int k = 0; k < s.d; ++k) {
        std::vector<double> xk = column(s, s.x, k);
        const double mx = std::accumulate(xk.begin(), xk.end(), 0.0) / static_cast<double>(s.n);
        GridFn wk = weighted_ecf(xk, xi, s.d, freq);
        GridFn corrected = sub(wk, scale(*m.phi_zx, cplx{mx, 0.0}));
        m.eps_k.push_back(scale(corrected, cplx{0.0, -1.0}));

        std::vector<double> xik = column(s, xi, k);
        GridFn dk = weighted_ecf(xik, xi, s.d, freq);
        m.gamma_dk.push_back(scale(dk, cplx{0.0, 1.0}));
    }
    m.noise_scale = sigma_ecf(s.n, freq.size());
    return m;
}

MomentFns moments_model5(const Sample& s, const Grid& freq) {
    validate_sample(s);
    if (!s.has_x() || !s.has_y())
        throw std::invalid_argument("model 5 moments: x and y columns required");
    MomentFns m;
    m.phi_z = ecf(s.z, s.d, freq);
    m.phi_x = ecf(s.x, s.d, freq);
    m.eps = weighted_ecf(s.y, s.z, s.d, freq);
    for (int k = 0; k < s.d; ++k) {
        std::vector<double> xy(s.n), zy(s.n);
        for (std::size_t j = 0; j < s.n; ++j) {
            xy[j] = s.xv(j, k) * s.y[j];
            zy[j] = s.zv(j, k) * s.y[j];
        }
        m.eps_k.push_back(scale(weighted_ecf(xy, s.z, s.d, freq), cplx{0.0, 1.0}));
        m.gamma_dk.push_back(scale(weighted_ecf(zy, s.z, s.d, freq), cplx{0.0, 1.0}));
    }
    m.mean_y = std::accumulate(s.y.begin(), s.y.end(), 0.0) / static_cast<double>(s.n);
    double yy = 0.0;
    for (double v : s.y) yy += v * v;
    m.rms_y = std::sqrt(yy / static_cast<double>(s.n));
    m.noise_scale = sigma_ecf(s.n, freq.size());
    return m;
}

MomentFns moments_model7(const Sample& s, const GridPair& grids, double bandwidth) {
    validate_sample(s);
    if (!s.has_x() || !s.has_y())
        throw std::invalid_argument("model 7 moments: x and y columns required");
    if (s.d != 1)
        throw std::invalid_argument("model 7 sampled moments: d=1 only (conditional means)");
    MomentFns m;
    m.phi_z = ecf(s.z, s.d, grids.freq);

    // Model 7 moment functions are genuine conditional means; estimate them
    // on the space grid and transform.
    CondMean w = conditional_mean_on_grid(s.y, s, grids.space, bandwidth);
    m.eps = forward_transform(w.values);

    std::vector<double> xy(s.n);
    for (std::size_t j = 0; j < s.n; ++j) xy[j] = s.xv(j, 0) * s.y[j];
    CondMean wk = conditional_mean_on_grid(xy, s, grids.space, bandwidth);
    m.eps_k.push_back(scale(forward_transform(wk.values), cplx{0.0, 1.0}));

    // (eps)'(s) = i * Ft(x * w(x)) on the grid, exact in the lattice world
    GridFn xw = w.values;
    for (int i = 0; i < grids.space.n; ++i)
        xw.values[static_cast<std::size_t>(i)] *= grids.space.coord(i);
    m.gamma_dk.push_back(scale(forward_transform(xw), cplx{0.0, 1.0}));

    m.mean_y = std::accumulate(s.y.begin(), s.y.end(), 0.0) / static_cast<double>(s.n);
    m.noise_scale = sigma_ecf(s.n, grids.freq.size());
    return m;
}

MomentFns moments_ar1(const Sample& s, const Grid& freq) {
    validate_sample(s);
    if (!s.has_x() || !s.has_y())
        throw std::invalid_argument("ar1 moments: x and y columns required");
    if (s.d != 1) throw std::invalid_argument("ar1 moments: univariate only");
    MomentFns m;
    m.phi_z = ecf(s.z, s.d, freq);
    m.ftw_x = weighted_ecf(s.x, s.z, s.d, freq);
    m.ftw_y = weighted_ecf(s.y, s.z, s.d, freq);
    m.ft_zfz = weighted_ecf(s.z, s.z, s.d, freq);
    m.noise_scale = sigma_ecf(s.n, freq.size());
    return m;
}

}  // namespace convlab
