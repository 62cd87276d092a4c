#include "convlab/regularization.hpp"

#include <algorithm>
#include <cmath>

namespace convlab {

namespace {

// simple least squares y ~ a + b*x
void line_fit(const std::vector<double>& x, const std::vector<double>& y, double* a, double* b,
              double* sse) {
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    const double det = n * sxx - sx * sx;
    *b = (n * sxy - sx * sy) / det;
    *a = (sy - *b * sx) / n;
    *sse = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = y[i] - (*a + *b * x[i]);
        *sse += r * r;
    }
}

}  // namespace

RegularityClass classify_smoothness(const GridFn& phi_u, double noise_floor) {
    if (phi_u.grid.dim != 1)
        throw std::invalid_argument("classify_smoothness: univariate only");
    RegularityClass rc;

    double min_abs = 1e300;
    for (const auto& v : phi_u.values) min_abs = std::min(min_abs, std::abs(v));

    // tail window |s| in [s_max/2, s_max]
    const Grid& g = phi_u.grid;
    std::vector<double> svals, logs;
    const double lo = g.extent() / 2.0;
    double tail_max = 0.0, tail_min = 1e300;
    for (int i = 0; i < g.n; ++i) {
        const double s = g.coord(i);
        if (std::abs(s) < lo || s == 0.0) continue;
        const double a = std::abs(phi_u.values[static_cast<std::size_t>(i)]);
        tail_max = std::max(tail_max, a);
        tail_min = std::min(tail_min, a);
    }

    // a mass-point floor keeps |phi| both bounded away from zero and flat
    if (min_abs >= 0.01 && tail_min > 0.0 && tail_max / tail_min <= 1.5) {
        rc.kind = RegularityClass::Kind::mass_point_mixture;
        rc.floor_lambda = min_abs;
        return rc;
    }
    const double floor_eff = std::max(noise_floor, 1e-290);
    if (tail_max <= 1e-250) {
        rc.kind = RegularityClass::Kind::bounded_support;
        return rc;
    }
    if (noise_floor > 0.0 && tail_max <= 3.0 * noise_floor) {
        rc.kind = RegularityClass::Kind::inconclusive;  // tail below the noise floor
        return rc;
    }

    for (int i = 0; i < g.n; ++i) {
        const double s = g.coord(i);
        if (std::abs(s) < lo || s == 0.0) continue;
        const double a = std::abs(phi_u.values[static_cast<std::size_t>(i)]);
        if (a <= floor_eff) continue;
        svals.push_back(std::abs(s));
        logs.push_back(std::log(a));
    }
    if (svals.size() < 8) {
        rc.kind = RegularityClass::Kind::inconclusive;
        return rc;
    }

    // ordinary smooth: log|phi| = a - p log|s|
    std::vector<double> xs(svals.size());
    for (std::size_t i = 0; i < svals.size(); ++i) xs[i] = std::log(svals[i]);
    double a_os, b_os, sse_os;
    line_fit(xs, logs, &a_os, &b_os, &sse_os);

    // supersmooth k: log|phi| = a - c |s|^k, k in {1, 2}
    double best_ss_sse = 1e300, best_c = 0.0;
    int best_k = 0;
    for (int k = 1; k <= 2; ++k) {
        for (std::size_t i = 0; i < svals.size(); ++i) xs[i] = std::pow(svals[i], k);
        double a_ss, b_ss, sse_ss;
        line_fit(xs, logs, &a_ss, &b_ss, &sse_ss);
        if (sse_ss < best_ss_sse && b_ss < 0.0) {
            best_ss_sse = sse_ss;
            best_k = k;
            best_c = -b_ss;
        }
    }

    if (best_k > 0 && best_ss_sse < sse_os) {
        rc.kind = RegularityClass::Kind::supersmooth;
        rc.k = best_k;
        rc.c = best_c;
        rc.fit_residual = best_ss_sse;
    } else {
        rc.kind = RegularityClass::Kind::ordinary_smooth;
        rc.p = -b_os;
        rc.fit_residual = sse_os;
    }
    return rc;
}

std::pair<bool, double> check_phi_class(const GridFn& b, const std::vector<int>& m,
                                        double v_bound) {
    if (static_cast<int>(m.size()) != b.grid.dim)
        throw std::invalid_argument("check_phi_class: multi-index size mismatch");
    const Grid& g = b.grid;
    double weight_el = 1.0;
    for (int k = 0; k < g.dim; ++k) weight_el *= g.step;

    double acc = 0.0;
    double coords[3];
    for (std::size_t i = 0; i < b.values.size(); ++i) {
        node_coords(g, i, coords);
        double w = 1.0;
        for (int k = 0; k < g.dim; ++k)
            w *= std::pow(1.0 / (1.0 + coords[k] * coords[k]), m[static_cast<std::size_t>(k)]);
        acc += w * std::abs(b.values[i]);
    }
    const double value = acc * weight_el;
    return {value < v_bound, value};
}

CutoffRule lemma2_cutoff(double r_n, int k, double safety) {
    if (!(r_n > 1.0)) throw std::invalid_argument("lemma2_cutoff: need r_n > 1");
    if (k < 1) throw std::invalid_argument("lemma2_cutoff: need k >= 1");
    if (!(safety > 0.0 && safety < 1.0))
        throw std::invalid_argument("lemma2_cutoff: safety must be in (0,1)");
    CutoffRule rule;
    rule.r_n = r_n;
    rule.k = k;
    rule.b_bar = safety * std::pow(std::log(r_n), 1.0 / static_cast<double>(k));
    return rule;
}

GridFn apply_cutoff(const GridFn& phi, const CutoffRule& rule) {
    GridFn out = phi;
    double coords[3];
    for (std::size_t i = 0; i < out.values.size(); ++i) {
        node_coords(out.grid, i, coords);
        double norm2 = 0.0;
        for (int k = 0; k < out.grid.dim; ++k) norm2 += coords[k] * coords[k];
        if (std::sqrt(norm2) >= rule.b_bar) out.values[i] = cplx{0.0, 0.0};
    }
    return out;
}

double heuristic_cutoff_radius(const GridFn& phi_u, double tau) {
    if (phi_u.grid.dim != 1)
        throw std::invalid_argument("heuristic_cutoff_radius: univariate only");
    const Grid& g = phi_u.grid;
    const int o = g.origin();
    double radius = 0.0;
    for (int t = 0;; ++t) {
        const int ip = o + t, im = o - t;
        if (ip >= g.n || im < 0) break;
        if (std::abs(phi_u.values[static_cast<std::size_t>(ip)]) <= tau ||
            std::abs(phi_u.values[static_cast<std::size_t>(im)]) <= tau)
            break;
        radius = g.coord(ip);
    }
    return radius;
}

}  // namespace convlab
