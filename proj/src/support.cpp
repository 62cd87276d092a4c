#include "convlab/support.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

namespace convlab {

std::size_t SupportMask::popcount() const {
    std::size_t c = 0;
    for (auto b : mask) c += b;
    return c;
}

namespace {

void label_components(SupportMask& m) {
    const Grid& g = m.grid;
    const std::size_t total = g.size();
    m.component_id.assign(total, -1);
    m.components.clear();
    m.zero_component = -1;

    std::size_t strides[3] = {1, 1, 1};
    for (int k = g.dim - 1; k >= 0; --k)
        strides[k] = (k == g.dim - 1) ? 1 : strides[k + 1] * static_cast<std::size_t>(g.n);

    int idx[3];
    std::deque<std::size_t> queue;
    for (std::size_t seed = 0; seed < total; ++seed) {
        if (!m.mask[seed] || m.component_id[seed] >= 0) continue;
        const int cid = static_cast<int>(m.components.size());
        m.components.push_back(Component{});
        queue.clear();
        queue.push_back(seed);
        m.component_id[seed] = cid;
        while (!queue.empty()) {
            const std::size_t cur = queue.front();
            queue.pop_front();
            m.components[static_cast<std::size_t>(cid)].indices.push_back(cur);
            unflatten(g, cur, idx);
            for (int k = 0; k < g.dim; ++k) {
                if (idx[k] > 0) {
                    const std::size_t nb = cur - strides[k];
                    if (m.mask[nb] && m.component_id[nb] < 0) {
                        m.component_id[nb] = cid;
                        queue.push_back(nb);
                    }
                }
                if (idx[k] + 1 < g.n) {
                    const std::size_t nb = cur + strides[k];
                    if (m.mask[nb] && m.component_id[nb] < 0) {
                        m.component_id[nb] = cid;
                        queue.push_back(nb);
                    }
                }
            }
        }
        std::sort(m.components[static_cast<std::size_t>(cid)].indices.begin(),
                  m.components[static_cast<std::size_t>(cid)].indices.end());
    }

    const std::size_t o = origin_index(g);
    if (m.mask[o]) {
        m.zero_component = m.component_id[o];
        auto& zc = m.components[static_cast<std::size_t>(m.zero_component)];
        zc.anchor_index = o;
        zc.anchor_value = cplx{1.0, 0.0};
        zc.anchor_known = true;
        zc.identified = true;
    }
}

}  // namespace

SupportMask detect_support(const GridFn& beta, double tau) {
    if (!(tau > 0.0)) throw std::invalid_argument("detect_support: tau must be positive");
    std::vector<std::uint8_t> bits(beta.values.size(), 0);
    std::size_t count = 0;
    for (std::size_t i = 0; i < beta.values.size(); ++i) {
        if (std::abs(beta.values[i]) > tau) {
            bits[i] = 1;
            ++count;
        }
    }
    if (count == 0) throw NumericalError("detect_support: support is empty at this threshold");
    return make_mask(beta.grid, std::move(bits));
}

SupportMask make_mask(const Grid& grid, std::vector<std::uint8_t> bits) {
    if (bits.size() != grid.size()) throw std::invalid_argument("make_mask: size mismatch");
    SupportMask m;
    m.grid = grid;
    m.mask = std::move(bits);
    label_components(m);
    return m;
}

SupportMask intersect_mask(const SupportMask& m, const std::vector<std::uint8_t>& keep) {
    if (keep.size() != m.mask.size())
        throw std::invalid_argument("intersect_mask: size mismatch");
    SupportMask out;
    out.grid = m.grid;
    out.mask.resize(m.mask.size());
    std::size_t count = 0;
    for (std::size_t i = 0; i < m.mask.size(); ++i) {
        out.mask[i] = static_cast<std::uint8_t>(m.mask[i] && keep[i]);
        count += out.mask[i];
    }
    if (count == 0) throw NumericalError("intersect_mask: empty intersection");
    label_components(out);
    return out;
}

GridFn safe_divide(const GridFn& gamma, const GridFn& beta, const SupportMask& mask) {
    if (gamma.grid != beta.grid || gamma.grid != mask.grid)
        throw std::invalid_argument("safe_divide: grid mismatch");
    GridFn out = make_fn(gamma.grid, gamma.hermitian && beta.hermitian);
    for (std::size_t i = 0; i < out.values.size(); ++i)
        out.values[i] = mask.mask[i] ? gamma.values[i] / beta.values[i] : cplx{0.0, 0.0};
    return out;
}

cplx ZeroFit::eval(double t) const {
    cplx acc{0.0, 0.0};
    const double u = t - root;
    for (std::size_t r = poly.size(); r-- > 0;) acc = acc * u + poly[r];
    return acc;
}

namespace {

// Least squares for the small Vandermonde systems of fit_zero (cols <= ~10),
// via normal equations with partial-pivot elimination.
std::vector<cplx> solve_ls(const std::vector<double>& a, const std::vector<cplx>& b,
                           std::size_t rows, std::size_t cols) {
    std::vector<double> ata(cols * cols, 0.0);
    std::vector<cplx> atb(cols, cplx{0.0, 0.0});
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < cols; ++j) {
            atb[j] += a[i * cols + j] * b[i];
            for (std::size_t k = j; k < cols; ++k)
                ata[j * cols + k] += a[i * cols + j] * a[i * cols + k];
        }
    }
    for (std::size_t j = 0; j < cols; ++j)
        for (std::size_t k = 0; k < j; ++k) ata[j * cols + k] = ata[k * cols + j];

    for (std::size_t col = 0; col < cols; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < cols; ++r)
            if (std::abs(ata[r * cols + col]) > std::abs(ata[piv * cols + col])) piv = r;
        if (std::abs(ata[piv * cols + col]) < 1e-300)
            throw NumericalError("fit_zero: singular local system");
        if (piv != col) {
            for (std::size_t k = 0; k < cols; ++k)
                std::swap(ata[piv * cols + k], ata[col * cols + k]);
            std::swap(atb[piv], atb[col]);
        }
        for (std::size_t r = col + 1; r < cols; ++r) {
            const double f = ata[r * cols + col] / ata[col * cols + col];
            for (std::size_t k = col; k < cols; ++k) ata[r * cols + k] -= f * ata[col * cols + k];
            atb[r] -= f * atb[col];
        }
    }
    std::vector<cplx> x(cols);
    for (std::size_t col = cols; col-- > 0;) {
        cplx acc = atb[col];
        for (std::size_t k = col + 1; k < cols; ++k) acc -= ata[col * cols + k] * x[k];
        x[col] = acc / ata[col * cols + col];
    }
    return x;
}

}  // namespace

std::vector<cplx> poly_fit(const std::vector<double>& t, const std::vector<cplx>& v,
                           int degree, double center, double scale) {
    if (t.size() != v.size() || t.empty())
        throw std::invalid_argument("poly_fit: bad inputs");
    if (degree < 0 || static_cast<std::size_t>(degree) + 1 > t.size())
        throw std::invalid_argument("poly_fit: degree too high for the data");
    const std::size_t rows = t.size();
    const std::size_t cols = static_cast<std::size_t>(degree) + 1;
    std::vector<double> A(rows * cols);
    for (std::size_t i = 0; i < rows; ++i) {
        const double u = (t[i] - center) / scale;
        double p = 1.0;
        for (std::size_t j = 0; j < cols; ++j) {
            A[i * cols + j] = p;
            p *= u;
        }
    }
    return solve_ls(A, v, rows, cols);
}

cplx poly_eval(const std::vector<cplx>& coeffs, double u) {
    cplx acc{0.0, 0.0};
    for (std::size_t r = coeffs.size(); r-- > 0;) acc = acc * u + coeffs[r];
    return acc;
}

ZeroFit fit_zero(const GridFn& beta, std::size_t x0_flat, int axis, int max_order,
                 FitSide side, const std::vector<std::uint8_t>* valid) {
    const Grid& g = beta.grid;
    if (axis < 0 || axis >= g.dim) throw std::invalid_argument("fit_zero: bad axis");
    if (max_order < 1) throw std::invalid_argument("fit_zero: max_order must be >= 1");

    std::size_t stride = 1;
    for (int k = axis + 1; k < g.dim; ++k) stride *= static_cast<std::size_t>(g.n);
    int idx[3];
    unflatten(g, x0_flat, idx);
    const int m0 = idx[axis];
    const std::size_t base = x0_flat - static_cast<std::size_t>(m0) * stride;

    // window of usable samples around m0
    const int deg = max_order + 3;
    const int want = std::max(2 * max_order + 1, deg + 3);
    std::vector<int> pts;
    auto usable = [&](int m) {
        if (m < 0 || m >= g.n) return false;
        if (side == FitSide::left && m > m0) return false;
        if (side == FitSide::right && m < m0) return false;
        if (valid && !(*valid)[base + static_cast<std::size_t>(m) * stride]) return false;
        return true;
    };
    for (int off = 0; off <= g.n && static_cast<int>(pts.size()) < want + 4; ++off) {
        if (off == 0) {
            if (usable(m0)) pts.push_back(m0);
            continue;
        }
        if (usable(m0 - off)) pts.push_back(m0 - off);
        if (usable(m0 + off)) pts.push_back(m0 + off);
    }
    if (static_cast<int>(pts.size()) < 2 * max_order + 1)
        throw std::invalid_argument("fit_zero: window too small");
    std::sort(pts.begin(), pts.end());

    const double t0 = g.coord(m0);
    double half = 0.0;
    for (int m : pts) half = std::max(half, std::abs(g.coord(m) - t0));

    // fit in the scaled variable u = (t - t0)/half
    const std::size_t rows = pts.size();
    const std::size_t cols = static_cast<std::size_t>(deg) + 1;
    std::vector<double> A(rows * cols);
    std::vector<cplx> rhs(rows);
    for (std::size_t i = 0; i < rows; ++i) {
        const double u = (g.coord(pts[i]) - t0) / half;
        double p = 1.0;
        for (std::size_t j = 0; j < cols; ++j) {
            A[i * cols + j] = p;
            p *= u;
        }
        rhs[i] = beta.values[base + static_cast<std::size_t>(pts[i]) * stride];
    }
    std::vector<cplx> c = solve_ls(A, rhs, rows, cols);

    double coef_scale = 0.0;
    for (const auto& v : c) coef_scale = std::max(coef_scale, std::abs(v));
    // ambient scale of beta along this line, to recognize numerically flat zeros
    double ambient = 0.0;
    for (int m = 0; m < g.n; ++m)
        ambient = std::max(ambient, std::abs(beta.values[base + static_cast<std::size_t>(m) * stride]));
    if (coef_scale <= 1e-8 * ambient)
        throw NumericalError("fit_zero: zero of infinite numerical order (window is numerically flat)");

    // Taylor shift of scaled coefficients by u -> u + delta
    auto shift_by = [&](std::vector<cplx>& cc, double delta) {
        for (std::size_t j = 0; j + 1 < cc.size(); ++j)
            for (std::size_t r = cc.size() - 1; r > j; --r) cc[r - 1] += delta * cc[r];
    };

    // Candidate multiplicities, highest first. For candidate m the update
    // delta = -c_{m-1}/(m c_m) is Newton with known multiplicity: it
    // converges quadratically for the true m and runs out of the window
    // for overstated ones.
    const double sig_tol = 1e-3 * coef_scale;
    int order = -1;
    double u_root = 0.0;
    std::vector<cplx> shifted;
    for (int cand = max_order; cand >= 1 && order < 0; --cand) {
        if (std::abs(c[static_cast<std::size_t>(cand)]) < sig_tol) continue;
        std::vector<cplx> work = c;
        double acc = 0.0;
        bool ok = true;
        for (int it = 0; it < 60; ++it) {
            const cplx cm = work[static_cast<std::size_t>(cand)];
            if (std::abs(cm) < 1e-300) { ok = false; break; }
            const double delta =
                -(work[static_cast<std::size_t>(cand - 1)] / (static_cast<double>(cand) * cm)).real();
            if (!std::isfinite(delta) || std::abs(acc + delta) > 1.2) { ok = false; break; }
            shift_by(work, delta);
            acc += delta;
            if (std::abs(delta) < 1e-13) break;
        }
        if (!ok) continue;
        double post_scale = 0.0;
        for (const auto& v : work) post_scale = std::max(post_scale, std::abs(v));
        if (std::abs(work[static_cast<std::size_t>(cand)]) < 1e-3 * post_scale) continue;
        bool lower_clean = true;
        for (int j = 0; j < cand; ++j)
            if (std::abs(work[static_cast<std::size_t>(j)]) > 1e-4 * post_scale) { lower_clean = false; break; }
        if (!lower_clean) continue;
        order = cand;
        u_root = acc;
        shifted = std::move(work);
    }
    if (order < 0) {
        // distinguish "no zero here" from "flat beyond max_order"
        if (std::abs(c[0]) > 1e-3 * coef_scale)
            throw NumericalError("fit_zero: function does not vanish near the fitted point");
        throw NumericalError("fit_zero: zero of infinite numerical order (all orders up to max_order vanish)");
    }

    ZeroFit fit;
    fit.axis = axis;
    fit.root = t0 + u_root * half;
    fit.window_halfwidth = half;
    fit.order = order;
    // un-scale: coefficient of (t-root)^r is shifted[r] / half^r
    fit.poly.resize(cols);
    double hp = 1.0;
    for (std::size_t r = 0; r < cols; ++r) {
        fit.poly[r] = shifted[r] / hp;
        hp *= half;
    }
    fit.eta = fit.poly[static_cast<std::size_t>(order)];
    if (std::abs(fit.eta) == 0.0)
        throw NumericalError("fit_zero: vanishing leading coefficient");

    // nearest grid node to the root
    int mr = m0 + static_cast<int>(std::lround(u_root * half / g.step));
    mr = std::clamp(mr, 0, g.n - 1);
    idx[axis] = mr;
    fit.nearest_index = flatten(g, idx);
    return fit;
}

std::size_t extend_across_zero(const ZeroFit& fit, SupportMask& mask,
                               int target_component, int min_offset) {
    if (target_component < 0 ||
        target_component >= static_cast<int>(mask.components.size()))
        throw std::invalid_argument("extend_across_zero: bad component id");
    const Grid& g = mask.grid;
    auto& comp = mask.components[static_cast<std::size_t>(target_component)];

    // candidate: in-component node on the axis line through the root,
    // nearest to the root but at least min_offset cells away.
    int ref[3], idx[3];
    unflatten(g, fit.nearest_index, ref);

    std::size_t best = 0;
    double best_dist = -1.0;
    for (std::size_t flat : comp.indices) {
        unflatten(g, flat, idx);
        bool on_line = true;
        for (int k = 0; k < g.dim; ++k)
            if (k != fit.axis && idx[k] != ref[k]) { on_line = false; break; }
        if (!on_line) continue;
        const double dist = std::abs(g.coord(idx[fit.axis]) - fit.root);
        if (dist < static_cast<double>(min_offset) * g.step) continue;
        if (best_dist < 0.0 || dist < best_dist) {
            best_dist = dist;
            best = flat;
        }
    }
    if (best_dist < 0.0)
        throw NumericalError("extend_across_zero: target component unreachable along the fit axis");

    unflatten(g, best, idx);
    comp.anchor_index = best;
    comp.anchor_value = fit.eval(g.coord(idx[fit.axis]));
    comp.anchor_known = true;
    comp.identified = true;
    return best;
}

}  // namespace convlab
