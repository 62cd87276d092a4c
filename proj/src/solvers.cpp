#include "convlab/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace convlab {

namespace {

double pick_tau(const SolveOptions& opts, double noise_scale, double weight_scale = 1.0) {
    if (opts.tau > 0.0) return opts.tau;
    if (noise_scale > 0.0) return 3.0 * noise_scale * std::max(1.0, weight_scale);
    return 1e-10;
}

void normalize_cf(GridFn& f, const SupportMask& mask) {
    const std::size_t o = origin_index(f.grid);
    if (!mask.in(o)) return;  // zero not identified; leave as computed
    const cplx v0 = f.values[o];
    if (std::abs(v0) == 0.0) throw NumericalError("normalize_cf: zero value at the origin");
    for (auto& v : f.values) v /= v0;
}

SupportMask identified_submask(const SupportMask& mask) {
    std::vector<std::uint8_t> keep(mask.mask.size(), 0);
    for (const auto& comp : mask.components)
        if (comp.identified)
            for (std::size_t i : comp.indices) keep[i] = 1;
    SupportMask out = make_mask(mask.grid, std::move(keep));
    for (auto& comp : out.components) comp.identified = true;
    // carry anchors over where the components coincide
    for (const auto& src : mask.components) {
        if (!src.identified || !src.anchor_known) continue;
        const int cid = out.component_id[src.anchor_index];
        if (cid >= 0) {
            out.components[static_cast<std::size_t>(cid)].anchor_index = src.anchor_index;
            out.components[static_cast<std::size_t>(cid)].anchor_value = src.anchor_value;
            out.components[static_cast<std::size_t>(cid)].anchor_known = true;
        }
    }
    return out;
}

// 1-d components are index intervals; list them sorted.
struct Interval {
    std::size_t lo, hi;  // inclusive
    int id;
};
std::vector<Interval> intervals_1d(const SupportMask& mask) {
    std::vector<Interval> out;
    for (std::size_t c = 0; c < mask.components.size(); ++c) {
        const auto& comp = mask.components[c];
        out.push_back(Interval{comp.indices.front(), comp.indices.back(), static_cast<int>(c)});
    }
    std::sort(out.begin(), out.end(), [](const Interval& a, const Interval& b) { return a.lo < b.lo; });
    return out;
}

std::size_t argmin_abs_on_range(const GridFn& f, std::size_t lo, std::size_t hi) {
    std::size_t best = lo;
    double bv = std::abs(f.values[lo]);
    for (std::size_t i = lo + 1; i <= hi; ++i) {
        const double v = std::abs(f.values[i]);
        if (v < bv) {
            bv = v;
            best = i;
        }
    }
    return best;
}

}  // namespace

KappaField kappa_field(const std::vector<GridFn>& numerators, const GridFn& gamma,
                       const SupportMask& mask) {
    if (numerators.empty()) throw std::invalid_argument("kappa_field: no numerators");
    if (static_cast<int>(numerators.size()) != gamma.grid.dim)
        throw std::invalid_argument("kappa_field: need one numerator per dimension");
    if (mask.popcount() == 0) throw NumericalError("kappa_field: empty mask");

    KappaField kf;
    kf.domain = mask;
    for (const auto& num : numerators) kf.kappa.push_back(safe_divide(num, gamma, mask));

    kf.curl_residual = 0.0;
    const int d = gamma.grid.dim;
    if (d >= 2) {
        // cross-derivative mismatch, measured where the centered stencil
        // stays inside the mask
        std::vector<GridFn> dkj;
        for (int k = 0; k < d; ++k)
            for (int j = 0; j < d; ++j) dkj.push_back(grid_derivative(kf.kappa[static_cast<std::size_t>(k)], j));
        const Grid& g = gamma.grid;
        std::size_t strides[3] = {1, 1, 1};
        for (int k = g.dim - 1; k >= 0; --k)
            strides[k] = (k == g.dim - 1) ? 1 : strides[k + 1] * static_cast<std::size_t>(g.n);
        int idx[3];
        for (std::size_t i = 0; i < g.size(); ++i) {
            if (!mask.in(i)) continue;
            unflatten(g, i, idx);
            bool interior = true;
            for (int ax = 0; ax < d && interior; ++ax) {
                if (idx[ax] == 0 || idx[ax] + 1 >= g.n) interior = false;
                else if (!mask.in(i - strides[ax]) || !mask.in(i + strides[ax])) interior = false;
            }
            if (!interior) continue;
            for (int k = 0; k < d; ++k)
                for (int j = k + 1; j < d; ++j) {
                    const cplx r = dkj[static_cast<std::size_t>(k * d + j)].values[i] -
                                   dkj[static_cast<std::size_t>(j * d + k)].values[i];
                    kf.curl_residual = std::max(kf.curl_residual, std::abs(r));
                }
        }
    }
    return kf;
}

GridFn path_exponential(const KappaField& kf, int component, cplx anchor_value,
                        double curl_tol, bool transpose_axes) {
    const SupportMask& mask = kf.domain;
    if (component < 0 || component >= static_cast<int>(mask.components.size()))
        throw std::invalid_argument("path_exponential: bad component id");
    const Grid& g = kf.kappa.front().grid;
    const int d = g.dim;
    if (d >= 2 && kf.curl_residual > curl_tol)
        throw NumericalError("path_exponential: curl residual exceeds tolerance, field is not integrable");

    const Component& comp = mask.components[static_cast<std::size_t>(component)];
    const std::size_t anchor = comp.anchor_known ? comp.anchor_index : comp.indices.front();
    if (mask.component_id[anchor] != component)
        throw std::invalid_argument("path_exponential: anchor outside the component");

    std::size_t strides[3] = {1, 1, 1};
    for (int k = d - 1; k >= 0; --k)
        strides[k] = (k == d - 1) ? 1 : strides[k + 1] * static_cast<std::size_t>(g.n);

    std::vector<cplx> integral(g.size(), cplx{0.0, 0.0});
    std::vector<std::uint8_t> reached(g.size(), 0);
    reached[anchor] = 1;

    auto in_comp = [&](std::size_t flat) { return mask.component_id[flat] == component; };

    std::vector<int> axes(static_cast<std::size_t>(d));
    std::iota(axes.begin(), axes.end(), 0);
    if (transpose_axes) std::reverse(axes.begin(), axes.end());

    // sweep axis-parallel extensions until stable (one pass suffices for
    // rectangular masks; reentrant shapes take a few)
    bool grew = true;
    int sweeps = 0;
    while (grew && sweeps < 4 * d + 4) {
        grew = false;
        ++sweeps;
        for (int ax : axes) {
            const std::size_t stride = strides[ax];
            const std::size_t nlines = g.size() / static_cast<std::size_t>(g.n);
            for (std::size_t l = 0; l < nlines; ++l) {
                const std::size_t block = l / stride;
                const std::size_t within = l % stride;
                const std::size_t base = block * stride * static_cast<std::size_t>(g.n) + within;
                // forward pass then backward pass along the line
                for (int m = 1; m < g.n; ++m) {
                    const std::size_t cur = base + static_cast<std::size_t>(m) * stride;
                    const std::size_t prv = cur - stride;
                    if (!reached[cur] && reached[prv] && in_comp(cur) && in_comp(prv)) {
                        integral[cur] = integral[prv] +
                                        0.5 * g.step *
                                            (kf.kappa[static_cast<std::size_t>(ax)].values[prv] +
                                             kf.kappa[static_cast<std::size_t>(ax)].values[cur]);
                        reached[cur] = 1;
                        grew = true;
                    }
                }
                for (int m = g.n - 2; m >= 0; --m) {
                    const std::size_t cur = base + static_cast<std::size_t>(m) * stride;
                    const std::size_t nxt = cur + stride;
                    if (!reached[cur] && reached[nxt] && in_comp(cur) && in_comp(nxt)) {
                        integral[cur] = integral[nxt] -
                                        0.5 * g.step *
                                            (kf.kappa[static_cast<std::size_t>(ax)].values[nxt] +
                                             kf.kappa[static_cast<std::size_t>(ax)].values[cur]);
                        reached[cur] = 1;
                        grew = true;
                    }
                }
            }
        }
        if (d == 1) break;
    }

    GridFn out = make_fn(g, false);
    for (std::size_t i : comp.indices)
        if (reached[i]) out.values[i] = anchor_value * std::exp(integral[i]);
    return out;
}

namespace {

// A zero of gamma between grid nodes leaves no sub-threshold node but makes
// the kappa field spike; cut such cells out of the mask so the path
// integral never drives through a pole. A cell is cut when |kappa| step
// exceeds one log-unit AND |gamma| dips locally (poles sit in dips,
// decaying tails do not).
std::vector<std::uint8_t> pole_dip_keep(const GridFn& gamma,
                                        const std::vector<GridFn>& numerators,
                                        const SupportMask& mask) {
    const Grid& g = gamma.grid;
    std::vector<std::uint8_t> keep(mask.mask.size(), 1);
    for (int j = 0; j < g.n; ++j) {
        const std::size_t i = static_cast<std::size_t>(j);
        if (!mask.in(i)) continue;
        double kmax = 0.0;
        for (const auto& num : numerators)
            kmax = std::max(kmax, std::abs(num.values[i] / gamma.values[i]));
        if (kmax * g.step <= 1.0) continue;
        const double here = std::abs(gamma.values[i]);
        auto rises = [&](int dir) {
            for (int t = 3; t <= 4; ++t) {
                const int jj = j + dir * t;
                if (jj < 0 || jj >= g.n) return false;
                if (std::abs(gamma.values[static_cast<std::size_t>(jj)]) > 2.0 * here) return true;
            }
            return false;
        };
        if (rises(-1) && rises(+1)) keep[i] = 0;
    }
    return keep;
}

struct GapInfo {
    std::size_t lo = 0, hi = 0;  // masked-out cells, inclusive
    bool has_fit = false;
    ZeroFit fit;
};

// Cumulative trapezoid of kappa within a 1-d component, with the pole part
// m/(s - root) of any adjacent fitted zero integrated in closed form (the
// residual kappa is smooth there, so the trapezoid stays second order).
void integrate_component_split(const GridFn& kappa, const Interval& iv, std::size_t anchor,
                               cplx anchor_value, const ZeroFit* left, const ZeroFit* right,
                               GridFn& out) {
    const Grid& g = out.grid;
    auto kreg = [&](std::size_t i) {
        cplx v = kappa.values[i];
        const double s = g.coord(static_cast<int>(i));
        if (left) v -= static_cast<double>(left->order) / (s - left->root);
        if (right) v -= static_cast<double>(right->order) / (s - right->root);
        return v;
    };
    auto logpole = [&](std::size_t i) {
        double acc = 0.0;
        const double s = g.coord(static_cast<int>(i));
        const double sa = g.coord(static_cast<int>(anchor));
        if (left) acc += left->order * std::log((s - left->root) / (sa - left->root));
        if (right) acc += right->order * std::log((right->root - s) / (right->root - sa));
        return acc;
    };
    std::vector<cplx> integral(iv.hi - iv.lo + 1, cplx{0.0, 0.0});
    auto at = [&](std::size_t i) -> cplx& { return integral[i - iv.lo]; };
    for (std::size_t i = anchor + 1; i <= iv.hi; ++i)
        at(i) = at(i - 1) + 0.5 * g.step * (kreg(i - 1) + kreg(i));
    for (std::size_t i = anchor; i-- > iv.lo;)
        at(i) = at(i + 1) - 0.5 * g.step * (kreg(i) + kreg(i + 1));
    for (std::size_t i = iv.lo; i <= iv.hi; ++i)
        out.values[i] = anchor_value * std::exp(at(i) + logpole(i));
}

// Reconstruct the exponential factor on every reachable component: the zero
// component from its supplied anchor, further components across finite-order
// zeros of gamma. The continuation anchors alpha at a node zeta just past
// the zero via alpha(zeta) = gamma(zeta) / beta_hat(zeta), where
// beta_hat = gamma/alpha is smoothly extrapolated from the solved side.
struct ChainResult {
    GridFn alpha;
    SupportMask mask;  // annotated with anchors + identified flags
    std::vector<std::size_t> filled_cells;  // gap cells absorbed into supp(gamma, d)
    int zeros_crossed = 0;
    int max_order_seen = 0;
};

ChainResult integrate_chain(const KappaField& kf, const GridFn& gamma, cplx anchor0,
                            const SolveOptions& opts) {
    ChainResult res;
    res.mask = kf.domain;
    if (res.mask.zero_component < 0)
        throw NumericalError("solve: s=0 is outside the numerical support (empty zero-component)");

    const Grid& g = gamma.grid;
    res.mask.components[static_cast<std::size_t>(res.mask.zero_component)].anchor_value = anchor0;

    if (g.dim != 1) {
        // extension across zeros is a 1-d arc construction; in d >= 2 only
        // the zero component is reconstructed
        res.alpha = path_exponential(kf, res.mask.zero_component, anchor0, opts.curl_tol);
        res.alpha.hermitian = gamma.hermitian && anchor0.imag() == 0.0;
        return res;
    }

    auto ivs = intervals_1d(res.mask);
    int zero_pos = -1;
    for (std::size_t i = 0; i < ivs.size(); ++i)
        if (ivs[i].id == res.mask.zero_component) zero_pos = static_cast<int>(i);

    // fit gamma's zero in each inter-component gap once
    std::vector<GapInfo> gaps;  // gaps[p] sits between ivs[p] and ivs[p+1]
    for (std::size_t p = 0; p + 1 < ivs.size(); ++p) {
        GapInfo gi;
        gi.lo = ivs[p].hi + 1;
        gi.hi = ivs[p + 1].lo - 1;
        if (gi.hi >= gi.lo &&
            gi.hi - gi.lo + 1 <= static_cast<std::size_t>(2 * opts.max_zero_order + 6)) {
            try {
                const std::size_t center = argmin_abs_on_range(gamma, gi.lo, gi.hi);
                gi.fit = fit_zero(gamma, center, 0, opts.max_zero_order);
                gi.has_fit = true;
            } catch (const std::exception&) {
                gi.has_fit = false;
            }
        }
        gaps.push_back(gi);
    }
    auto left_fit_of = [&](int p) -> const ZeroFit* {
        return p > 0 && gaps[static_cast<std::size_t>(p - 1)].has_fit
                   ? &gaps[static_cast<std::size_t>(p - 1)].fit
                   : nullptr;
    };
    auto right_fit_of = [&](int p) -> const ZeroFit* {
        return static_cast<std::size_t>(p) < gaps.size() && gaps[static_cast<std::size_t>(p)].has_fit
                   ? &gaps[static_cast<std::size_t>(p)].fit
                   : nullptr;
    };

    res.alpha = make_fn(g, gamma.hermitian && anchor0.imag() == 0.0);
    const std::size_t o = origin_index(g);
    integrate_component_split(kf.kappa[0], ivs[static_cast<std::size_t>(zero_pos)], o, anchor0,
                              left_fit_of(zero_pos), right_fit_of(zero_pos), res.alpha);

    auto try_extend = [&](int pos_from, int pos_to) -> bool {
        const Interval& from = ivs[static_cast<std::size_t>(pos_from)];
        const Interval& to = ivs[static_cast<std::size_t>(pos_to)];
        const bool rightward = pos_to > pos_from;
        const GapInfo& gap = gaps[static_cast<std::size_t>(rightward ? pos_from : pos_to)];
        if (!gap.has_fit) return false;
        const ZeroFit& fit = gap.fit;

        // smooth extrapolation of beta = gamma/alpha from the solved side,
        // keeping a small guard away from the contaminated edge cells
        const int guard = 2, width = 14;
        std::vector<double> ts;
        std::vector<cplx> vs;
        if (rightward) {
            const std::size_t edge = from.hi;
            for (std::size_t i = edge - std::min(edge, static_cast<std::size_t>(guard + width));
                 i + static_cast<std::size_t>(guard) <= edge; ++i) {
                if (i < from.lo) continue;
                ts.push_back(g.coord(static_cast<int>(i)));
                vs.push_back(gamma.values[i] / res.alpha.values[i]);
            }
        } else {
            const std::size_t edge = from.lo;
            for (std::size_t i = edge + static_cast<std::size_t>(guard);
                 i <= std::min(from.hi, edge + static_cast<std::size_t>(guard + width)); ++i) {
                ts.push_back(g.coord(static_cast<int>(i)));
                vs.push_back(gamma.values[i] / res.alpha.values[i]);
            }
        }
        if (ts.size() < 4) return false;
        const int deg = std::min<int>(5, static_cast<int>(ts.size()) - 2);
        double tc = 0.0;
        for (double t : ts) tc += t;
        tc /= static_cast<double>(ts.size());
        double tsc = 0.0;
        for (double t : ts) tsc = std::max(tsc, std::abs(t - tc));
        std::vector<cplx> bc;
        try {
            bc = poly_fit(ts, vs, deg, tc, std::max(tsc, g.step));
        } catch (const std::exception&) {
            return false;
        }

        // anchor node inside the target, a few cells past the fitted root
        std::size_t zeta = 0;
        bool found = false;
        if (rightward) {
            for (std::size_t i = to.lo; i <= to.hi; ++i) {
                if (g.coord(static_cast<int>(i)) >= fit.root + 3.0 * g.step) {
                    zeta = i;
                    found = true;
                    break;
                }
            }
        } else {
            for (std::size_t i = to.hi + 1; i-- > to.lo;) {
                if (g.coord(static_cast<int>(i)) <= fit.root - 3.0 * g.step) {
                    zeta = i;
                    found = true;
                    break;
                }
            }
        }
        if (!found) return false;

        const cplx beta_hat =
            poly_eval(bc, (g.coord(static_cast<int>(zeta)) - tc) / std::max(tsc, g.step));
        if (std::abs(beta_hat) == 0.0) return false;
        const cplx anchor_val = gamma.values[zeta] / beta_hat;

        auto& target = res.mask.components[static_cast<std::size_t>(to.id)];
        target.anchor_index = zeta;
        target.anchor_value = anchor_val;
        target.anchor_known = true;
        target.identified = true;

        integrate_component_split(kf.kappa[0], to, zeta, anchor_val, left_fit_of(pos_to),
                                  right_fit_of(pos_to), res.alpha);

        // Re-anchor: the two one-sided continuations of beta must agree at
        // the root; their ratio is the multiplicative bias of the anchor
        // extrapolation, which the shorter to-the-root extrapolations
        // estimate far more accurately than the anchor step itself.
        {
            std::vector<double> tt;
            std::vector<cplx> vt;
            if (rightward) {
                for (std::size_t i = to.lo + static_cast<std::size_t>(guard);
                     i <= std::min(to.hi, to.lo + static_cast<std::size_t>(guard + width)); ++i) {
                    tt.push_back(g.coord(static_cast<int>(i)));
                    vt.push_back(gamma.values[i] / res.alpha.values[i]);
                }
            } else {
                const std::size_t edge_t = to.hi;
                for (std::size_t i = edge_t - std::min(edge_t, static_cast<std::size_t>(guard + width));
                     i + static_cast<std::size_t>(guard) <= edge_t; ++i) {
                    if (i < to.lo) continue;
                    tt.push_back(g.coord(static_cast<int>(i)));
                    vt.push_back(gamma.values[i] / res.alpha.values[i]);
                }
            }
            if (tt.size() >= 4) {
                double tct = 0.0;
                for (double t : tt) tct += t;
                tct /= static_cast<double>(tt.size());
                double tst = 0.0;
                for (double t : tt) tst = std::max(tst, std::abs(t - tct));
                try {
                    const auto bt = poly_fit(tt, vt, std::min<int>(5, static_cast<int>(tt.size()) - 2),
                                             tct, std::max(tst, g.step));
                    const cplx beta_from = poly_eval(bc, (fit.root - tc) / std::max(tsc, g.step));
                    const cplx beta_to = poly_eval(bt, (fit.root - tct) / std::max(tst, g.step));
                    if (std::abs(beta_to) > 0.0 && std::abs(beta_from) > 0.0) {
                        const cplx ratio = beta_from / beta_to;
                        if (std::abs(ratio - cplx{1.0, 0.0}) < 0.2) {
                            for (std::size_t i : res.mask.components[static_cast<std::size_t>(to.id)].indices)
                                res.alpha.values[i] /= ratio;
                            res.mask.components[static_cast<std::size_t>(to.id)].anchor_value =
                                res.alpha.values[zeta];
                        }
                    }
                } catch (const std::exception&) {
                }
            }
        }

        // With both sides solved, the complementary factor beta = gamma/alpha
        // is smooth through the zero: interpolate it across the gap and fill
        // alpha = gamma/beta there, absorbing the cells into supp(gamma, d).
        {
            std::vector<double> t2;
            std::vector<cplx> v2;
            const Interval& lo_iv = rightward ? from : to;
            const Interval& hi_iv = rightward ? to : from;
            for (std::size_t i = lo_iv.hi - std::min(lo_iv.hi - lo_iv.lo, std::size_t{7});
                 i + 1 <= lo_iv.hi; ++i) {
                t2.push_back(g.coord(static_cast<int>(i)));
                v2.push_back(gamma.values[i] / res.alpha.values[i]);
            }
            for (std::size_t i = hi_iv.lo + 1; i <= std::min(hi_iv.hi, hi_iv.lo + 8); ++i) {
                t2.push_back(g.coord(static_cast<int>(i)));
                v2.push_back(gamma.values[i] / res.alpha.values[i]);
            }
            if (t2.size() >= 6) {
                double tc2 = 0.0;
                for (double t : t2) tc2 += t;
                tc2 /= static_cast<double>(t2.size());
                double ts2 = 0.0;
                for (double t : t2) ts2 = std::max(ts2, std::abs(t - tc2));
                try {
                    const auto bc2 =
                        poly_fit(t2, v2, std::min<int>(4, static_cast<int>(t2.size()) - 2), tc2,
                                 std::max(ts2, g.step));
                    for (std::size_t i = gap.lo; i <= gap.hi; ++i) {
                        const cplx bh = poly_eval(bc2, (g.coord(static_cast<int>(i)) - tc2) /
                                                           std::max(ts2, g.step));
                        if (std::abs(bh) == 0.0) continue;
                        res.alpha.values[i] = gamma.values[i] / bh;
                        res.filled_cells.push_back(i);
                    }
                } catch (const std::exception&) {
                    // leave the gap dark if the local fit degenerates
                }
            }
        }

        ++res.zeros_crossed;
        res.max_order_seen = std::max(res.max_order_seen, fit.order);
        return true;
    };

    for (int p = zero_pos; p + 1 < static_cast<int>(ivs.size()); ++p)
        if (!try_extend(p, p + 1)) break;
    for (int p = zero_pos; p - 1 >= 0; --p)
        if (!try_extend(p, p - 1)) break;

    return res;
}

struct PairResult {
    GridFn alpha;  // exponential-route factor
    GridFn beta;   // complementary factor gamma/alpha
    SupportMask identified;
    double curl = 0.0;
    int zeros_crossed = 0;
};

PairResult solve_pair(const GridFn& gamma, const std::vector<GridFn>& numerators,
                      cplx anchor0, const SolveOptions& opts, double tau) {
    SupportMask mask = detect_support(gamma, tau);
    if (gamma.grid.dim == 1) {
        auto keep = pole_dip_keep(gamma, numerators, mask);
        bool cut = false;
        for (std::size_t i = 0; i < keep.size(); ++i)
            if (mask.in(i) && !keep[i]) { cut = true; break; }
        if (cut) mask = intersect_mask(mask, keep);
    }
    KappaField kf = kappa_field(numerators, gamma, mask);
    ChainResult chain = integrate_chain(kf, gamma, anchor0, opts);

    PairResult pr;
    if (!chain.filled_cells.empty()) {
        std::vector<std::uint8_t> bits = chain.mask.mask;
        for (std::size_t i : chain.filled_cells) bits[i] = 1;
        SupportMask merged = make_mask(gamma.grid, std::move(bits));
        for (auto& comp : merged.components) {
            for (std::size_t i : comp.indices) {
                const int old = chain.mask.component_id[i];
                if (old >= 0 &&
                    chain.mask.components[static_cast<std::size_t>(old)].identified) {
                    comp.identified = true;
                    break;
                }
            }
        }
        pr.identified = identified_submask(merged);
    } else {
        pr.identified = identified_submask(chain.mask);
    }
    pr.alpha = chain.alpha;
    pr.beta = safe_divide(gamma, chain.alpha, pr.identified);
    pr.beta.hermitian = gamma.hermitian && pr.alpha.hermitian;
    pr.curl = kf.curl_residual;
    pr.zeros_crossed = chain.zeros_crossed;
    return pr;
}

// Fill isolated finite-order zeros of the divisor with the eta-ratio limit
// and absorb them into the mask (numerical supp(beta, d)). 1-d only.
std::size_t fill_finite_order_zeros(GridFn& alpha, SupportMask& mask, const GridFn& gamma,
                                    const GridFn& beta, int max_order) {
    if (mask.grid.dim != 1) return 0;
    auto ivs = intervals_1d(mask);
    std::vector<std::uint8_t> bits = mask.mask;
    std::size_t filled = 0;
    for (std::size_t p = 0; p + 1 < ivs.size(); ++p) {
        const std::size_t lo = ivs[p].hi + 1, hi = ivs[p + 1].lo - 1;
        if (lo > hi || hi - lo + 1 > static_cast<std::size_t>(2 * max_order + 6)) continue;
        try {
            const std::size_t center = argmin_abs_on_range(beta, lo, hi);
            ZeroFit fb = fit_zero(beta, center, 0, max_order);
            ZeroFit fg = fit_zero(gamma, center, 0, max_order);
            for (std::size_t i = lo; i <= hi; ++i) {
                const double t = mask.grid.coord(static_cast<int>(i));
                const cplx bv = fb.eval(t);
                if (std::abs(bv) == 0.0) continue;
                alpha.values[i] = fg.eval(t) / bv;
                bits[i] = 1;
                ++filled;
            }
        } catch (const std::exception&) {
            continue;  // not a finite-order zero; leave the gap dark
        }
    }
    if (filled > 0) {
        SupportMask merged = make_mask(mask.grid, std::move(bits));
        for (auto& comp : merged.components) {
            // a merged component is identified if it contains any node of an
            // identified component of the original mask
            for (std::size_t i : comp.indices) {
                const int old = mask.component_id[i];
                if (old >= 0 && mask.components[static_cast<std::size_t>(old)].identified) {
                    comp.identified = true;
                    break;
                }
            }
        }
        mask = merged;
    }
    return filled;
}

void mark_chain_identified(SupportMask& mask, const GridFn& beta, int max_order) {
    if (mask.grid.dim != 1 || mask.zero_component < 0) return;
    auto ivs = intervals_1d(mask);
    int zero_pos = -1;
    for (std::size_t i = 0; i < ivs.size(); ++i)
        if (ivs[i].id == mask.zero_component) zero_pos = static_cast<int>(i);
    if (zero_pos < 0) return;

    auto bridge = [&](const Interval& a, const Interval& b) -> bool {
        const std::size_t lo = std::min(a.hi, b.hi) + 1;
        const std::size_t hi = std::max(a.lo, b.lo) - 1;
        if (lo > hi || hi - lo + 1 > static_cast<std::size_t>(2 * max_order + 6)) return false;
        try {
            const std::size_t center = argmin_abs_on_range(beta, lo, hi);
            (void)fit_zero(beta, center, 0, max_order);
            return true;
        } catch (const std::exception&) {
            return false;
        }
    };
    for (int p = zero_pos; p + 1 < static_cast<int>(ivs.size()); ++p) {
        if (!bridge(ivs[static_cast<std::size_t>(p)], ivs[static_cast<std::size_t>(p + 1)])) break;
        mask.components[static_cast<std::size_t>(ivs[static_cast<std::size_t>(p + 1)].id)].identified = true;
    }
    for (int p = zero_pos; p - 1 >= 0; --p) {
        if (!bridge(ivs[static_cast<std::size_t>(p)], ivs[static_cast<std::size_t>(p - 1)])) break;
        mask.components[static_cast<std::size_t>(ivs[static_cast<std::size_t>(p - 1)].id)].identified = true;
    }
}

}  // namespace

ModelSolution solve_model1(const GridFn& phi_z, const GridFn& phi_u, const SolveOptions& opts) {
    const double tau = opts.tau > 0.0 ? opts.tau : 1e-10;  // divisor is the known error CF
    SupportMask mask = detect_support(phi_u, tau);
    GridFn alpha = safe_divide(phi_z, phi_u, mask);
    mark_chain_identified(mask, phi_u, opts.max_zero_order);
    const std::size_t filled = fill_finite_order_zeros(alpha, mask, phi_z, phi_u, opts.max_zero_order);

    ModelSolution sol;
    sol.identified = identified_submask(mask);
    for (std::size_t i = 0; i < alpha.values.size(); ++i)
        if (!sol.identified.in(i)) alpha.values[i] = cplx{0.0, 0.0};
    alpha.hermitian = phi_z.hermitian && phi_u.hermitian;
    normalize_cf(alpha, sol.identified);
    sol.diagnostics["recon_rel_residual"] = reconstruction_residual(alpha, phi_u, phi_z, sol.identified);
    sol.diagnostics["zero_cells_filled"] = static_cast<double>(filled);
    sol.diagnostics["support_fraction"] =
        static_cast<double>(sol.identified.popcount()) / static_cast<double>(phi_z.grid.size());
    sol.f_xstar = inverse_transform(alpha);
    sol.phi_xstar = std::move(alpha);
    return sol;
}

ModelSolution solve_model2(const GridFn& phi_z, const GridFn& phi_u) {
    GridFn alpha = mul(phi_z, conj_fn(phi_u));
    alpha.hermitian = phi_z.hermitian && phi_u.hermitian;
    ModelSolution sol;
    sol.identified = make_mask(phi_z.grid, std::vector<std::uint8_t>(phi_z.grid.size(), 1));
    normalize_cf(alpha, sol.identified);
    sol.diagnostics["recon_rel_residual"] = 0.0;
    sol.f_xstar = inverse_transform(alpha);
    sol.phi_xstar = std::move(alpha);
    return sol;
}

namespace {

ModelSolution solve_model3_impl(const MomentFns& m, Variant variant, const SolveOptions& opts) {
    if (m.eps_k.empty()) throw std::invalid_argument("model 3: eps_k missing");
    const double tau = pick_tau(opts, m.noise_scale);

    std::vector<GridFn> numerators;
    if (variant == Variant::B) {
        numerators = m.eps_k;  // eps_k / phi_z = (phi_xstar)'/phi_xstar
    } else {
        if (m.gamma_dk.size() != m.eps_k.size())
            throw std::invalid_argument("model 3 variant A: (phi_z)'_k missing");
        for (std::size_t k = 0; k < m.eps_k.size(); ++k)
            numerators.push_back(sub(m.gamma_dk[k], m.eps_k[k]));  // -> (phi_u)'/phi_u
    }

    PairResult pr = solve_pair(m.phi_z, numerators, cplx{1.0, 0.0}, opts, tau);

    GridFn phi_xstar = variant == Variant::B ? pr.alpha : pr.beta;
    GridFn phi_u = variant == Variant::B ? pr.beta : pr.alpha;
    if (opts.swap_factors) std::swap(phi_xstar, phi_u);
    normalize_cf(phi_xstar, pr.identified);
    normalize_cf(phi_u, pr.identified);

    ModelSolution sol;
    sol.identified = pr.identified;
    sol.diagnostics["curl_residual"] = pr.curl;
    sol.diagnostics["zeros_crossed"] = pr.zeros_crossed;
    sol.diagnostics["recon_rel_residual"] =
        reconstruction_residual(phi_xstar, phi_u, m.phi_z, sol.identified);
    sol.diagnostics["support_fraction"] =
        static_cast<double>(sol.identified.popcount()) / static_cast<double>(m.phi_z.grid.size());
    sol.f_xstar = inverse_transform(phi_xstar);
    sol.phi_xstar = std::move(phi_xstar);
    sol.phi_u = std::move(phi_u);
    return sol;
}

}  // namespace

ModelSolution solve_model3(const MomentFns& m, Variant variant, const SolveOptions& opts) {
    return solve_model3_impl(m, variant, opts);
}

ModelSolution solve_model4(const MomentFns& m, Variant variant, const SolveOptions& opts) {
    if (!m.phi_x) throw std::invalid_argument("model 4: phi_x missing");
    ModelSolution sol = solve_model3_impl(m, variant, opts);
    const double tau = pick_tau(opts, m.noise_scale);
    SupportMask mx = detect_support(*sol.phi_xstar, tau);
    GridFn phi_ux = safe_divide(*m.phi_x, *sol.phi_xstar, mx);
    phi_ux.hermitian = m.phi_x->hermitian && sol.phi_xstar->hermitian;
    normalize_cf(phi_ux, mx);
    sol.diagnostics["recon_rel_residual_x"] =
        reconstruction_residual(*sol.phi_xstar, phi_ux, *m.phi_x, mx);
    sol.phi_ux = std::move(phi_ux);
    return sol;
}

ModelSolution solve_model4a(const MomentFns& m, Variant variant, const SolveOptions& opts) {
    if (!m.phi_zx) throw std::invalid_argument("model 4a: phi_{z-x} missing");
    if (!m.phi_x) throw std::invalid_argument("model 4a: phi_x missing");
    if (m.eps_k.empty()) throw std::invalid_argument("model 4a: eps_k missing");
    const double tau = pick_tau(opts, m.noise_scale);

    std::vector<GridFn> numerators;
    if (variant == Variant::B) {
        numerators = m.eps_k;  // -> phi_{-ux}
    } else {
        if (m.gamma_dk.size() != m.eps_k.size())
            throw std::invalid_argument("model 4a variant A: (phi_{z-x})'_k missing");
        for (std::size_t k = 0; k < m.eps_k.size(); ++k)
            numerators.push_back(sub(m.gamma_dk[k], m.eps_k[k]));  // -> phi_u
    }

    PairResult pr = solve_pair(*m.phi_zx, numerators, cplx{1.0, 0.0}, opts, tau);
    GridFn phi_minus_ux = variant == Variant::B ? pr.alpha : pr.beta;
    GridFn phi_u = variant == Variant::B ? pr.beta : pr.alpha;
    normalize_cf(phi_minus_ux, pr.identified);
    normalize_cf(phi_u, pr.identified);
    GridFn phi_ux = conj_fn(phi_minus_ux);
    phi_ux.hermitian = phi_minus_ux.hermitian;

    ModelSolution sol;
    sol.identified = pr.identified;
    sol.diagnostics["curl_residual"] = pr.curl;
    sol.diagnostics["zeros_crossed"] = pr.zeros_crossed;
    sol.diagnostics["recon_rel_residual"] =
        reconstruction_residual(phi_minus_ux, phi_u, *m.phi_zx, sol.identified);

    // phi_xstar = phi_x / phi_ux on supp(phi_ux); this step does not
    // restrict the error CFs, which is the point of the 4a route.
    SupportMask mux = detect_support(phi_ux, tau);
    GridFn phi_xstar = safe_divide(*m.phi_x, phi_ux, mux);
    phi_xstar.hermitian = m.phi_x->hermitian && phi_ux.hermitian;
    normalize_cf(phi_xstar, mux);
    sol.diagnostics["recon_rel_residual_x"] =
        reconstruction_residual(phi_xstar, phi_ux, *m.phi_x, mux);
    sol.f_xstar = inverse_transform(phi_xstar);
    sol.phi_xstar = std::move(phi_xstar);
    sol.phi_u = std::move(phi_u);
    sol.phi_ux = std::move(phi_ux);
    return sol;
}

ModelSolution solve_model5(const MomentFns& m, Variant variant, const SolveOptions& opts) {
    if (!m.eps) throw std::invalid_argument("model 5: eps missing");
    if (m.eps_k.empty()) throw std::invalid_argument("model 5: eps_k missing");
    const double tau = pick_tau(opts, m.noise_scale, m.rms_y);

    // step 1: Kotlyarski pair on gamma = eps
    PairResult pr;
    if (variant == Variant::A) {
        // exponentiate eps_k/eps -> Ft(g f_xstar); anchor is its value at 0,
        // the population mean of y
        pr = solve_pair(*m.eps, m.eps_k, cplx{m.mean_y, 0.0}, opts, tau);
    } else {
        if (m.gamma_dk.size() != m.eps_k.size())
            throw std::invalid_argument("model 5 variant B: (eps)'_k missing");
        std::vector<GridFn> numerators;
        for (std::size_t k = 0; k < m.eps_k.size(); ++k)
            numerators.push_back(sub(m.gamma_dk[k], m.eps_k[k]));  // -> (phi_u)'/phi_u
        pr = solve_pair(*m.eps, numerators, cplx{1.0, 0.0}, opts, tau);
    }
    GridFn ft_gf = variant == Variant::A ? pr.alpha : pr.beta;
    GridFn phi_u = variant == Variant::A ? pr.beta : pr.alpha;
    normalize_cf(phi_u, pr.identified);

    ModelSolution sol;
    sol.identified = pr.identified;
    sol.diagnostics["curl_residual"] = pr.curl;
    sol.diagnostics["zeros_crossed"] = pr.zeros_crossed;
    sol.diagnostics["recon_rel_residual"] =
        reconstruction_residual(ft_gf, phi_u, *m.eps, sol.identified);

    // step 2: phi_xstar = phi_z / phi_u
    SupportMask mu = detect_support(phi_u, tau);
    GridFn phi_xstar = safe_divide(m.phi_z, phi_u, mu);
    phi_xstar.hermitian = m.phi_z.hermitian && phi_u.hermitian;
    normalize_cf(phi_xstar, mu);
    sol.diagnostics["recon_rel_residual_z"] =
        reconstruction_residual(phi_xstar, phi_u, m.phi_z, mu);

    // step 3: g = Ft^{-1}(Ft(g f_xstar)) / Ft^{-1}(phi_xstar) on the spatial
    // support of the recovered density
    GridFn f_xstar = inverse_transform(phi_xstar);
    GridFn gf = inverse_transform(ft_gf);
    double fmax = 0.0;
    for (const auto& v : f_xstar.values) fmax = std::max(fmax, v.real());
    if (fmax <= 0.0) throw NumericalError("model 5: recovered density is nonpositive everywhere");
    GridFn g_hat = make_fn(f_xstar.grid, false);
    std::size_t live = 0;
    for (std::size_t i = 0; i < g_hat.values.size(); ++i) {
        if (f_xstar.values[i].real() > opts.spatial_floor * fmax) {
            g_hat.values[i] = cplx{gf.values[i].real() / f_xstar.values[i].real(), 0.0};
            ++live;
        }
    }
    if (live == 0) throw NumericalError("model 5: empty spatial mask");
    sol.diagnostics["spatial_mask_fraction"] =
        static_cast<double>(live) / static_cast<double>(g_hat.values.size());

    sol.f_xstar = std::move(f_xstar);
    sol.g_hat = std::move(g_hat);
    sol.ft_g = std::move(ft_gf);
    sol.phi_xstar = std::move(phi_xstar);
    sol.phi_u = std::move(phi_u);
    return sol;
}

ModelSolution solve_model6(const GridFn& phi_z, const GridFn& phi_x,
                           const GridFn& w_on_space_grid, const SolveOptions& opts) {
    const double tau = opts.tau > 0.0 ? opts.tau : 1e-10;
    GridFn eps = forward_transform(w_on_space_grid);

    SupportMask mz = detect_support(phi_z, tau);
    GridFn phi_minus_u = safe_divide(phi_x, phi_z, mz);
    phi_minus_u.hermitian = phi_x.hermitian && phi_z.hermitian;
    // w = g * f_u, so divide by phi_u = conj(phi_{-u}) (equal for symmetric u)
    GridFn phi_u = conj_fn(phi_minus_u);
    phi_u.hermitian = phi_minus_u.hermitian;
    normalize_cf(phi_u, mz);

    SupportMask mu = detect_support(phi_u, tau);
    GridFn ft_g = safe_divide(eps, phi_u, mu);

    ModelSolution sol;
    sol.identified = mu;
    sol.diagnostics["recon_rel_residual"] = reconstruction_residual(ft_g, phi_u, eps, mu);
    GridFn g_space = inverse_transform(ft_g);
    for (auto& v : g_space.values) v = cplx{v.real(), 0.0};
    sol.g_hat = std::move(g_space);
    sol.ft_g = std::move(ft_g);
    sol.phi_u = std::move(phi_u);
    return sol;
}

ModelSolution solve_model7(const MomentFns& m, Variant variant, const SolveOptions& opts,
                           std::optional<cplx> ftg_anchor) {
    if (!m.eps) throw std::invalid_argument("model 7: eps missing");
    if (m.eps_k.empty()) throw std::invalid_argument("model 7: eps_k missing");
    const double tau = pick_tau(opts, m.noise_scale, m.rms_y);

    PairResult pr;
    if (variant == Variant::A) {
        // Ft(g)(0) = eps(0) when the identified component contains 0, since
        // phi_u(0) = 1; otherwise the caller must supply the anchor.
        cplx anchor = ftg_anchor.value_or(m.eps->values[origin_index(m.eps->grid)]);
        pr = solve_pair(*m.eps, m.eps_k, anchor, opts, tau);
    } else {
        if (m.gamma_dk.size() != m.eps_k.size())
            throw std::invalid_argument("model 7 variant B: (eps)'_k missing");
        std::vector<GridFn> numerators;
        for (std::size_t k = 0; k < m.eps_k.size(); ++k)
            numerators.push_back(sub(m.gamma_dk[k], m.eps_k[k]));
        pr = solve_pair(*m.eps, numerators, cplx{1.0, 0.0}, opts, tau);
    }
    GridFn ft_g = variant == Variant::A ? pr.alpha : pr.beta;
    GridFn phi_u = variant == Variant::A ? pr.beta : pr.alpha;
    normalize_cf(phi_u, pr.identified);

    ModelSolution sol;
    sol.identified = pr.identified;
    sol.diagnostics["curl_residual"] = pr.curl;
    sol.diagnostics["zeros_crossed"] = pr.zeros_crossed;
    sol.diagnostics["recon_rel_residual"] =
        reconstruction_residual(ft_g, phi_u, *m.eps, sol.identified);
    GridFn g_space = inverse_transform(ft_g);
    for (auto& v : g_space.values) v = cplx{v.real(), 0.0};
    sol.g_hat = std::move(g_space);
    sol.ft_g = std::move(ft_g);
    sol.phi_u = std::move(phi_u);
    return sol;
}

double estimate_rho(const GridFn& w_x, const GridFn& w_y, const GridFn& zfz,
                    double window_halfwidth, double denom_floor_rel) {
    if (w_x.grid != w_y.grid || w_x.grid != zfz.grid)
        throw std::invalid_argument("estimate_rho: grid mismatch");
    if (w_x.grid.domain != Domain::space)
        throw std::invalid_argument("estimate_rho: inputs live on the space grid");
    if (w_x.grid.dim != 1) throw std::invalid_argument("estimate_rho: univariate only");

    double den_scale = 0.0;
    for (std::size_t i = 0; i < w_x.values.size(); ++i)
        den_scale = std::max(den_scale, std::abs(w_x.values[i] - zfz.values[i]));
    const double floor = denom_floor_rel * den_scale;

    struct Pt {
        double r, w;
    };
    std::vector<Pt> pts;
    for (int i = 0; i < w_x.grid.n; ++i) {
        const double t = w_x.grid.coord(i);
        if (std::abs(t) > window_halfwidth) continue;
        const std::size_t fi = static_cast<std::size_t>(i);
        const cplx den = w_x.values[fi] - zfz.values[fi];
        const cplx num = w_y.values[fi] - w_x.values[fi];
        const double dw = std::abs(den);
        if (dw <= floor) continue;
        pts.push_back(Pt{(num / den).real(), dw});
    }
    if (pts.empty())
        throw NumericalError("estimate_rho: denominator below threshold across the window");

    std::sort(pts.begin(), pts.end(), [](const Pt& a, const Pt& b) { return a.r < b.r; });
    double wsum = 0.0;
    for (const auto& p : pts) wsum += p.w;
    double acc = 0.0;
    for (const auto& p : pts) {
        acc += p.w;
        if (acc >= 0.5 * wsum) return p.r;
    }
    return pts.back().r;
}

ModelSolution solve_ar1(const MomentFns& m, const SolveOptions& opts) {
    if (!m.ftw_x || !m.ftw_y || !m.ft_zfz)
        throw std::invalid_argument("ar1: weighted moment transforms missing");
    const Grid& fg = m.phi_z.grid;

    GridFn wx = inverse_transform(*m.ftw_x);
    GridFn wy = inverse_transform(*m.ftw_y);
    GridFn zfz = inverse_transform(*m.ft_zfz);

    // window from the CF curvature at the origin: E z^2 ~ (2 - 2 Re phi(ds))/ds^2
    const std::size_t o = origin_index(fg);
    const double re1 = m.phi_z.values[o + 1].real();
    const double var_z = std::max((2.0 - 2.0 * re1) / (fg.step * fg.step), 1e-12);
    const double window = 2.0 * std::sqrt(var_z);

    const double rho = estimate_rho(wx, wy, zfz, window);
    if (std::abs(1.0 - rho) < 1e-6)
        throw NumericalError("ar1: rho is numerically 1, system degenerate");

    // (w_x - rho z f(z)) / (1 - rho) = h * f_u with h(x) = x f_xstar(x);
    // multiply its transform by i to land on (phi_xstar)' phi_u.
    GridFn h = scale(sub(*m.ftw_x, scale(*m.ft_zfz, cplx{rho, 0.0})), cplx{0.0, 1.0} / (1.0 - rho));

    MomentFns m3;
    m3.phi_z = m.phi_z;
    m3.eps_k.push_back(std::move(h));
    m3.noise_scale = m.noise_scale;
    ModelSolution sol = solve_model3_impl(m3, Variant::B, opts);
    sol.rho_hat = rho;
    sol.diagnostics["rho_hat"] = rho;
    return sol;
}

namespace {

// Left inverse of a tall full-rank matrix via the normal equations.
Mat left_inverse(const Mat& b, double* residual) {
    const std::size_t r = b.rows, c = b.cols;
    if (r < c) throw std::invalid_argument("left_inverse: matrix has fewer rows than columns");
    // g = b^T b
    std::vector<double> g(c * c, 0.0);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j)
            for (std::size_t k = 0; k < c; ++k) g[j * c + k] += b.at(i, j) * b.at(i, k);

    // invert g by Gauss-Jordan with partial pivoting
    std::vector<double> inv(c * c, 0.0);
    for (std::size_t i = 0; i < c; ++i) inv[i * c + i] = 1.0;
    for (std::size_t col = 0; col < c; ++col) {
        std::size_t piv = col;
        for (std::size_t row = col + 1; row < c; ++row)
            if (std::abs(g[row * c + col]) > std::abs(g[piv * c + col])) piv = row;
        if (std::abs(g[piv * c + col]) < 1e-12)
            throw NumericalError("reduce_factor_model: rank-deficient block");
        if (piv != col)
            for (std::size_t k = 0; k < c; ++k) {
                std::swap(g[piv * c + k], g[col * c + k]);
                std::swap(inv[piv * c + k], inv[col * c + k]);
            }
        const double d = g[col * c + col];
        for (std::size_t k = 0; k < c; ++k) {
            g[col * c + k] /= d;
            inv[col * c + k] /= d;
        }
        for (std::size_t row = 0; row < c; ++row) {
            if (row == col) continue;
            const double f = g[row * c + col];
            if (f == 0.0) continue;
            for (std::size_t k = 0; k < c; ++k) {
                g[row * c + k] -= f * g[col * c + k];
                inv[row * c + k] -= f * inv[col * c + k];
            }
        }
    }

    Mat t;
    t.rows = c;
    t.cols = r;
    t.a.assign(c * r, 0.0);
    for (std::size_t i = 0; i < c; ++i)
        for (std::size_t j = 0; j < r; ++j) {
            double acc = 0.0;
            for (std::size_t k = 0; k < c; ++k) acc += inv[i * c + k] * b.at(j, k);
            t.at(i, j) = acc;
        }

    double res = 0.0;
    for (std::size_t i = 0; i < c; ++i)
        for (std::size_t j = 0; j < c; ++j) {
            double acc = 0.0;
            for (std::size_t k = 0; k < r; ++k) acc += t.at(i, k) * b.at(k, j);
            const double want = i == j ? 1.0 : 0.0;
            res += (acc - want) * (acc - want);
        }
    if (residual) *residual = std::sqrt(res);
    return t;
}

}  // namespace

FactorReduction reduce_factor_model(const Mat& a, std::size_t split,
                                    const std::vector<double>& ztilde, std::size_t n) {
    const std::size_t m = a.rows, d = a.cols;
    if (split < d || m - split < d)
        throw std::invalid_argument("reduce_factor_model: each block needs at least d rows");
    if (ztilde.size() != n * m)
        throw std::invalid_argument("reduce_factor_model: sample shape mismatch");

    Mat a1, a2;
    a1.rows = split;
    a1.cols = d;
    a1.a.assign(a.a.begin(), a.a.begin() + static_cast<std::ptrdiff_t>(split * d));
    a2.rows = m - split;
    a2.cols = d;
    a2.a.assign(a.a.begin() + static_cast<std::ptrdiff_t>(split * d), a.a.end());

    FactorReduction out;
    out.t1 = left_inverse(a1, &out.residual1);
    out.t2 = left_inverse(a2, &out.residual2);
    if (out.residual1 > 1e-6 || out.residual2 > 1e-6)
        throw NumericalError("reduce_factor_model: left inverse residual too large (rank condition)");

    out.reduced.d = static_cast<int>(d);
    out.reduced.n = n;
    out.reduced.z.assign(n * d, 0.0);
    out.reduced.x.assign(n * d, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        const double* row = ztilde.data() + j * m;
        for (std::size_t i = 0; i < d; ++i) {
            double acc1 = 0.0, acc2 = 0.0;
            for (std::size_t k = 0; k < split; ++k) acc1 += out.t1.at(i, k) * row[k];
            for (std::size_t k = 0; k < m - split; ++k) acc2 += out.t2.at(i, k) * row[split + k];
            out.reduced.z[j * d + i] = acc1;
            out.reduced.x[j * d + i] = acc2;
        }
    }
    return out;
}

std::pair<GridFn, GridFn> identified_component(const GridFn& phi, const SupportMask& w_u) {
    if (phi.grid != w_u.grid) throw std::invalid_argument("identified_component: grid mismatch");
    if (w_u.zero_component < 0)
        throw NumericalError("identified_component: error-CF support does not contain 0");
    GridFn phi1 = make_fn(phi.grid, phi.hermitian);
    GridFn flag = make_fn(phi.grid, false);
    for (std::size_t i = 0; i < phi.values.size(); ++i) {
        if (w_u.component_id[i] == w_u.zero_component)
            phi1.values[i] = phi.values[i];
        else
            flag.values[i] = cplx{1.0, 0.0};
    }
    return {std::move(phi1), std::move(flag)};
}

double reconstruction_residual(const GridFn& a, const GridFn& b, const GridFn& c,
                               const SupportMask& mask) {
    double worst = 0.0, scale_c = 0.0;
    for (const auto& comp : mask.components) {
        if (!comp.identified) continue;
        for (std::size_t i : comp.indices) {
            worst = std::max(worst, std::abs(a.values[i] * b.values[i] - c.values[i]));
            scale_c = std::max(scale_c, std::abs(c.values[i]));
        }
    }
    return scale_c > 0.0 ? worst / scale_c : worst;
}

}  // namespace convlab
