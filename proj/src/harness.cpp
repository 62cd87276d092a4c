#include "convlab/harness.hpp"

#include "convlab/io.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

namespace convlab {

ModelId parse_model(const std::string& text) {
    if (text == "1") return ModelId::m1;
    if (text == "2") return ModelId::m2;
    if (text == "3") return ModelId::m3;
    if (text == "4") return ModelId::m4;
    if (text == "4a") return ModelId::m4a;
    if (text == "5") return ModelId::m5;
    if (text == "6") return ModelId::m6;
    if (text == "7") return ModelId::m7;
    if (text == "ar1") return ModelId::ar1;
    if (text == "factor") return ModelId::factor;
    throw ConfigError("unknown model id: " + text);
}

std::string format_model(ModelId id) {
    switch (id) {
        case ModelId::m1: return "1";
        case ModelId::m2: return "2";
        case ModelId::m3: return "3";
        case ModelId::m4: return "4";
        case ModelId::m4a: return "4a";
        case ModelId::m5: return "5";
        case ModelId::m6: return "6";
        case ModelId::m7: return "7";
        case ModelId::ar1: return "ar1";
        case ModelId::factor: return "factor";
    }
    return "?";
}

namespace {

const DistSpec& need_dist(const std::optional<DistSpec>& d, const char* name) {
    if (!d) throw ConfigError(std::string("model requires distribution '") + name + "'");
    return *d;
}

void need_d1(const ModelSpec& spec) {
    if (spec.d != 1) throw ConfigError("regression models are univariate (d=1)");
}

}  // namespace

Sample generate(const ModelSpec& spec, std::size_t n, std::uint64_t seed, Truth* truth) {
    if (n < 2) throw ConfigError("generate: need n >= 2");
    Rng rng(seed);
    Sample s;
    s.d = spec.d;
    s.n = n;
    const std::size_t nd = n * static_cast<std::size_t>(spec.d);
    Truth local;
    Truth& tr = truth ? *truth : local;

    auto draw_vec = [&](const DistSpec& d) {
        double acc = dist_draw(d, rng);
        return acc;
    };

    switch (spec.model) {
        case ModelId::m1: {
            const DistSpec& dx = need_dist(spec.xstar, "xstar");
            const DistSpec& du = need_dist(spec.u, "u");
            s.z.resize(nd);
            tr.xstar.resize(nd);
            tr.u.resize(nd);
            for (std::size_t i = 0; i < nd; ++i) {
                tr.xstar[i] = draw_vec(dx);
                tr.u[i] = draw_vec(du);
                s.z[i] = tr.xstar[i] + tr.u[i];
            }
            break;
        }
        case ModelId::m2: {
            const DistSpec& dz = need_dist(spec.z, "z");
            const DistSpec& du = need_dist(spec.u, "u");
            s.z.resize(nd);
            tr.xstar.resize(nd);
            tr.u.resize(nd);
            for (std::size_t i = 0; i < nd; ++i) {
                s.z[i] = draw_vec(dz);
                tr.u[i] = draw_vec(du);
                tr.xstar[i] = s.z[i] - tr.u[i];
            }
            break;
        }
        case ModelId::m3:
        case ModelId::m4:
        case ModelId::m4a: {
            const DistSpec& dx = need_dist(spec.xstar, "xstar");
            const DistSpec& du = need_dist(spec.u, "u");
            const DistSpec& dux = need_dist(spec.ux, "ux");
            s.z.resize(nd);
            s.x.resize(nd);
            tr.xstar.resize(nd);
            tr.u.resize(nd);
            tr.ux.resize(nd);
            for (std::size_t i = 0; i < nd; ++i) {
                tr.xstar[i] = draw_vec(dx);
                tr.u[i] = draw_vec(du);
                tr.ux[i] = draw_vec(dux);
                s.z[i] = tr.xstar[i] + tr.u[i];
                s.x[i] = tr.xstar[i] + tr.ux[i];
            }
            break;
        }
        case ModelId::m5: {
            need_d1(spec);
            const DistSpec& dx = need_dist(spec.xstar, "xstar");
            const DistSpec& du = need_dist(spec.u, "u");
            const DistSpec& dux = need_dist(spec.ux, "ux");
            const DistSpec& dv = need_dist(spec.v, "v");
            if (!spec.g) throw ConfigError("model 5 requires g");
            s.z.resize(n);
            s.x.resize(n);
            s.y.resize(n);
            tr.xstar.resize(n);
            tr.u.resize(n);
            tr.ux.resize(n);
            tr.v.resize(n);
            for (std::size_t i = 0; i < n; ++i) {
                tr.xstar[i] = draw_vec(dx);
                tr.u[i] = draw_vec(du);
                tr.ux[i] = draw_vec(dux);
                tr.v[i] = draw_vec(dv);
                s.z[i] = tr.xstar[i] + tr.u[i];
                s.x[i] = tr.xstar[i] + tr.ux[i];
                s.y[i] = g_eval(*spec.g, tr.xstar[i]) + tr.v[i];
            }
            break;
        }
        case ModelId::m6: {
            need_d1(spec);
            const DistSpec& dz = need_dist(spec.z, "z");
            const DistSpec& du = need_dist(spec.u, "u");
            const DistSpec& dv = need_dist(spec.v, "v");
            if (!spec.g) throw ConfigError("model 6 requires g");
            s.z.resize(n);
            s.x.resize(n);
            s.y.resize(n);
            tr.xstar.resize(n);
            tr.u.resize(n);
            tr.v.resize(n);
            for (std::size_t i = 0; i < n; ++i) {
                s.z[i] = draw_vec(dz);
                tr.u[i] = draw_vec(du);
                tr.v[i] = draw_vec(dv);
                const double x = s.z[i] - tr.u[i];
                tr.xstar[i] = x;
                s.x[i] = x;
                s.y[i] = g_eval(*spec.g, x) + tr.v[i];
            }
            break;
        }
        case ModelId::m7: {
            need_d1(spec);
            const DistSpec& dz = need_dist(spec.z, "z");
            const DistSpec& du = need_dist(spec.u, "u");
            const DistSpec& dux = need_dist(spec.ux, "ux");
            const DistSpec& dv = need_dist(spec.v, "v");
            if (!spec.g) throw ConfigError("model 7 requires g");
            s.z.resize(n);
            s.x.resize(n);
            s.y.resize(n);
            tr.xstar.resize(n);
            tr.u.resize(n);
            tr.ux.resize(n);
            tr.v.resize(n);
            for (std::size_t i = 0; i < n; ++i) {
                s.z[i] = draw_vec(dz);
                tr.u[i] = draw_vec(du);
                tr.ux[i] = draw_vec(dux);
                tr.v[i] = draw_vec(dv);
                const double xs = s.z[i] - tr.u[i];
                tr.xstar[i] = xs;
                s.x[i] = xs + tr.ux[i];
                s.y[i] = g_eval(*spec.g, xs) + tr.v[i];
            }
            break;
        }
        case ModelId::ar1: {
            need_d1(spec);
            const DistSpec& dx = need_dist(spec.xstar, "xstar");
            const DistSpec& du = need_dist(spec.u, "u");
            const DistSpec& de = need_dist(spec.eta, "eta");
            const DistSpec& de1 = need_dist(spec.eta1, "eta1");
            s.z.resize(n);
            s.x.resize(n);
            s.y.resize(n);
            tr.xstar.resize(n);
            tr.u.resize(n);
            tr.ux.resize(n);
            tr.uy.resize(n);
            for (std::size_t i = 0; i < n; ++i) {
                tr.xstar[i] = draw_vec(dx);
                tr.u[i] = draw_vec(du);
                tr.ux[i] = spec.rho * tr.u[i] + draw_vec(de);
                tr.uy[i] = spec.rho * tr.ux[i] + draw_vec(de1);
                s.z[i] = tr.xstar[i] + tr.u[i];
                s.x[i] = tr.xstar[i] + tr.ux[i];
                s.y[i] = tr.xstar[i] + tr.uy[i];
            }
            break;
        }
        case ModelId::factor: {
            const DistSpec& dx = need_dist(spec.xstar, "xstar");
            const DistSpec& du = need_dist(spec.u, "u");
            const std::size_t m = spec.a.rows, d = spec.a.cols;
            if (m == 0 || d == 0) throw ConfigError("factor model requires A");
            s.d = static_cast<int>(m);
            s.z.resize(n * m);
            tr.xstar.resize(n * d);
            tr.u.resize(n * m);
            for (std::size_t j = 0; j < n; ++j) {
                for (std::size_t k = 0; k < d; ++k) tr.xstar[j * d + k] = draw_vec(dx);
                for (std::size_t r = 0; r < m; ++r) {
                    double acc = 0.0;
                    for (std::size_t k = 0; k < d; ++k) acc += spec.a.at(r, k) * tr.xstar[j * d + k];
                    tr.u[j * m + r] = draw_vec(du);
                    s.z[j * m + r] = acc + tr.u[j * m + r];
                }
            }
            break;
        }
    }
    validate_sample(s);
    return s;
}

GridFn truth_phi_xstar(const ModelSpec& spec, const Grid& freq) {
    switch (spec.model) {
        case ModelId::m2:
        case ModelId::m7: {
            // x* = z - u with z independent of u
            GridFn fz = true_cf(need_dist(spec.z, "z"), freq);
            GridFn fu = true_cf(need_dist(spec.u, "u"), freq);
            return mul(fz, conj_fn(fu));
        }
        case ModelId::m6:
            throw ConfigError("model 6 has no latent x*");
        default:
            return true_cf(need_dist(spec.xstar, "xstar"), freq);
    }
}

GridFn truth_phi_u(const ModelSpec& spec, const Grid& freq) {
    return true_cf(need_dist(spec.u, "u"), freq);
}

CfMetrics metric_cf(const GridFn& est, const GridFn& truth, const SupportMask& mask) {
    if (est.grid != truth.grid || est.grid != mask.grid)
        throw std::invalid_argument("metric_cf: grid mismatch");
    double weight = 1.0;
    for (int k = 0; k < est.grid.dim; ++k) weight *= est.grid.step;
    CfMetrics out;
    for (const auto& comp : mask.components) {
        if (!comp.identified) continue;
        for (std::size_t i : comp.indices) {
            const double e = std::abs(est.values[i] - truth.values[i]);
            out.sup_error = std::max(out.sup_error, e);
            out.ise += e * e * weight;
        }
    }
    return out;
}

double mass_point_estimate(const GridFn& phi, double x0) {
    if (phi.grid.domain != Domain::frequency)
        throw std::invalid_argument("mass_point_estimate: need a frequency grid");
    if (phi.grid.dim != 1)
        throw std::invalid_argument("mass_point_estimate: univariate only");
    cplx acc{0.0, 0.0};
    for (int i = 0; i < phi.grid.n; ++i) {
        const double s = phi.grid.coord(i);
        acc += phi.values[static_cast<std::size_t>(i)] * std::exp(cplx{0.0, -s * x0});
    }
    const double t = phi.grid.extent();
    return (acc * phi.grid.step / (2.0 * t)).real();
}

double density_ise_smoothed(const GridFn& phi_est, const GridFn& phi_true,
                            const SupportMask& mask) {
    GridFn a = phi_est, b = phi_true;
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        if (!mask.in(i)) {
            a.values[i] = cplx{0.0, 0.0};
            b.values[i] = cplx{0.0, 0.0};
        }
    }
    GridFn fa = inverse_transform(a);
    GridFn fb = inverse_transform(b);
    double ise = 0.0, w = 1.0;
    for (int k = 0; k < fa.grid.dim; ++k) w *= fa.grid.step;
    for (std::size_t i = 0; i < fa.values.size(); ++i) ise += std::norm(fa.values[i] - fb.values[i]) * w;
    return ise;
}

namespace {

void apply_cutoff_to_solution(ModelSolution& sol, const GridPair& grids, double radius) {
    std::vector<std::uint8_t> ball(grids.freq.size(), 0);
    double coords[3];
    for (std::size_t i = 0; i < ball.size(); ++i) {
        node_coords(grids.freq, i, coords);
        double n2 = 0.0;
        for (int k = 0; k < grids.freq.dim; ++k) n2 += coords[k] * coords[k];
        ball[i] = std::sqrt(n2) < radius ? 1 : 0;
    }
    sol.identified = intersect_mask(sol.identified, ball);
    auto cut = [&](std::optional<GridFn>& f) {
        if (!f) return;
        for (std::size_t i = 0; i < f->values.size(); ++i)
            if (!ball[i]) f->values[i] = cplx{0.0, 0.0};
    };
    cut(sol.phi_xstar);
    cut(sol.phi_u);
    cut(sol.phi_ux);
    cut(sol.ft_g);
    if (sol.phi_xstar) sol.f_xstar = inverse_transform(*sol.phi_xstar);
    if (sol.ft_g && sol.g_hat && sol.g_hat->grid.domain == Domain::space &&
        sol.phi_xstar == std::nullopt) {
        GridFn g = inverse_transform(*sol.ft_g);
        for (auto& v : g.values) v = cplx{v.real(), 0.0};
        sol.g_hat = std::move(g);
    }
}

}  // namespace

EstimateResult estimate_from_sample(const Sample& s, const ModelSpec& known,
                                    const EstimateConfig& cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    EstimateResult res;

    int dim = s.d;
    if (known.model == ModelId::factor) dim = static_cast<int>(known.a.cols);
    res.grids = make_grids(dim, cfg.grid_n, cfg.s_max);
    const Grid& freq = res.grids.freq;

    SolveOptions opts;
    opts.tau = cfg.tau;
    const double noise = sigma_ecf(s.n, freq.size());
    const double bw = cfg.bandwidth > 0.0 ? cfg.bandwidth : silverman_bandwidth(s);

    std::optional<GridFn> phi_u_known;
    switch (known.model) {
        case ModelId::m1: {
            phi_u_known = true_cf(need_dist(known.u, "u"), freq);
            GridFn phi_z = ecf(s.z, s.d, freq);
            res.solution = solve_model1(phi_z, *phi_u_known, opts);
            break;
        }
        case ModelId::m2: {
            phi_u_known = true_cf(need_dist(known.u, "u"), freq);
            GridFn phi_z = ecf(s.z, s.d, freq);
            res.solution = solve_model2(phi_z, *phi_u_known);
            break;
        }
        case ModelId::m3: {
            MomentFns m = moments_model3(s, freq);
            res.solution = solve_model3(m, cfg.variant, opts);
            break;
        }
        case ModelId::m4: {
            MomentFns m = moments_model3(s, freq);
            res.solution = solve_model4(m, cfg.variant, opts);
            break;
        }
        case ModelId::m4a: {
            MomentFns m = moments_model4a(s, freq);
            res.solution = solve_model4a(m, cfg.variant, opts);
            break;
        }
        case ModelId::m5: {
            MomentFns m = moments_model5(s, freq);
            res.solution = solve_model5(m, cfg.variant, opts);
            break;
        }
        case ModelId::m6: {
            if (opts.tau <= 0.0) opts.tau = 3.0 * noise;
            GridFn phi_z = ecf(s.z, s.d, freq);
            GridFn phi_x = ecf(s.x, s.d, freq);
            std::vector<double> y = s.y;
            CondMean w = conditional_mean_on_grid(y, s, res.grids.space, bw);
            res.solution = solve_model6(phi_z, phi_x, w.values, opts);
            break;
        }
        case ModelId::m7: {
            MomentFns m = moments_model7(s, res.grids, bw);
            res.solution = solve_model7(m, cfg.variant, opts);
            break;
        }
        case ModelId::ar1: {
            MomentFns m = moments_ar1(s, freq);
            res.solution = solve_ar1(m, opts);
            break;
        }
        case ModelId::factor: {
            FactorReduction fr =
                reduce_factor_model(known.a, known.split, s.z, s.n);
            MomentFns m = moments_model3(fr.reduced, freq);
            res.solution = solve_model3(m, cfg.variant, opts);
            res.solution.diagnostics["t1_residual"] = fr.residual1;
            res.solution.diagnostics["t2_residual"] = fr.residual2;
            break;
        }
    }

    // spectral cut-off
    if (cfg.cutoff == CutoffMode::lemma2) {
        const double rn = cfg.r_n > 0.0 ? cfg.r_n : std::sqrt(static_cast<double>(s.n));
        const CutoffRule rule = lemma2_cutoff(rn, cfg.lemma2_k, cfg.safety);
        res.cutoff_radius = rule.b_bar;
        apply_cutoff_to_solution(res.solution, res.grids, rule.b_bar);
    } else if (cfg.cutoff == CutoffMode::heuristic) {
        const GridFn* pu = phi_u_known ? &*phi_u_known
                          : res.solution.phi_u ? &*res.solution.phi_u : nullptr;
        if (!pu) throw NumericalError("heuristic cutoff: no error CF available");
        res.cutoff_radius = heuristic_cutoff_radius(*pu, 3.0 * noise);
        if (res.cutoff_radius <= 0.0) throw NumericalError("heuristic cutoff: empty radius");
        apply_cutoff_to_solution(res.solution, res.grids, res.cutoff_radius);
    }

    if (freq.dim == 1) {
        const GridFn* pu = phi_u_known ? &*phi_u_known
                          : res.solution.phi_u ? &*res.solution.phi_u : nullptr;
        if (pu) res.smoothness = classify_smoothness(*pu, phi_u_known ? 0.0 : noise);
    }

    const auto t1 = std::chrono::steady_clock::now();
    res.runtime_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
    return res;
}

namespace {

struct KvLine {
    std::string key, val;
    std::size_t line;
};

std::vector<KvLine> read_kv_lines(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config: " + path);
    std::vector<KvLine> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        const auto b = line.find_first_not_of(" \t\r");
        if (b == std::string::npos) continue;
        const auto e = line.find_last_not_of(" \t\r");
        line = line.substr(b, e - b + 1);
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key=value");
        std::string key = line.substr(0, eq), val = line.substr(eq + 1);
        key = key.substr(0, key.find_last_not_of(" \t") + 1);
        const auto vb = val.find_first_not_of(" \t");
        val = vb == std::string::npos ? "" : val.substr(vb);
        out.push_back(KvLine{key, val, lineno});
    }
    return out;
}

Mat parse_matrix(const std::string& text, const std::string& where) {
    // rows:cols:v,v,v,... row major
    const auto c1 = text.find(':');
    const auto c2 = text.find(':', c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos)
        throw ConfigError(where + ": matrix format is rows:cols:v,v,...");
    Mat m;
    m.rows = std::stoul(text.substr(0, c1));
    m.cols = std::stoul(text.substr(c1 + 1, c2 - c1 - 1));
    std::istringstream vs(text.substr(c2 + 1));
    std::string tok;
    while (std::getline(vs, tok, ',')) m.a.push_back(std::stod(tok));
    if (m.a.size() != m.rows * m.cols)
        throw ConfigError(where + ": matrix needs rows*cols entries");
    return m;
}

std::string format_matrix(const Mat& m) {
    std::ostringstream os;
    os.precision(17);
    os << m.rows << ":" << m.cols << ":";
    for (std::size_t i = 0; i < m.a.size(); ++i) {
        if (i) os << ",";
        os << m.a[i];
    }
    return os.str();
}

}  // namespace

std::map<std::string, std::string> spec_to_kv(const ModelSpec& spec) {
    std::map<std::string, std::string> kv;
    kv["model"] = format_model(spec.model);
    kv["variant"] = spec.variant == Variant::A ? "A" : "B";
    kv["d"] = std::to_string(spec.d);
    if (spec.xstar) kv["xstar"] = format_dist(*spec.xstar);
    if (spec.u) kv["u"] = format_dist(*spec.u);
    if (spec.ux) kv["ux"] = format_dist(*spec.ux);
    if (spec.v) kv["v"] = format_dist(*spec.v);
    if (spec.z) kv["z"] = format_dist(*spec.z);
    if (spec.eta) kv["eta"] = format_dist(*spec.eta);
    if (spec.eta1) kv["eta1"] = format_dist(*spec.eta1);
    if (spec.g) kv["g"] = format_g(*spec.g);
    if (spec.model == ModelId::ar1) kv["rho"] = format_double(spec.rho);
    if (spec.model == ModelId::factor) {
        kv["A"] = format_matrix(spec.a);
        kv["split"] = std::to_string(spec.split);
    }
    return kv;
}

ModelSpec spec_from_kv(const std::map<std::string, std::string>& kv, const std::string& where) {
    ModelSpec spec;
    auto get = [&](const char* key) -> std::optional<std::string> {
        const auto it = kv.find(key);
        if (it == kv.end()) return std::nullopt;
        return it->second;
    };
    if (auto v = get("model")) spec.model = parse_model(*v);
    if (auto v = get("variant")) {
        if (*v != "A" && *v != "B") throw ConfigError(where + ": variant must be A or B");
        spec.variant = *v == "A" ? Variant::A : Variant::B;
    }
    if (auto v = get("d")) spec.d = std::stoi(*v);
    try {
        if (auto v = get("xstar")) spec.xstar = parse_dist(*v);
        if (auto v = get("u")) spec.u = parse_dist(*v);
        if (auto v = get("ux")) spec.ux = parse_dist(*v);
        if (auto v = get("v")) spec.v = parse_dist(*v);
        if (auto v = get("z")) spec.z = parse_dist(*v);
        if (auto v = get("eta")) spec.eta = parse_dist(*v);
        if (auto v = get("eta1")) spec.eta1 = parse_dist(*v);
        if (auto v = get("g")) spec.g = parse_g(*v);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(where + ": " + e.what());
    }
    if (auto v = get("rho")) spec.rho = std::stod(*v);
    if (auto v = get("A")) spec.a = parse_matrix(*v, where);
    if (auto v = get("split")) spec.split = std::stoul(*v);
    return spec;
}

ExperimentConfig parse_experiment_config(const std::string& path) {
    static const std::vector<std::string> known_keys = {
        "model", "variant", "d", "n", "replications", "seed", "grid_n", "s_max",
        "cutoff", "bandwidth", "tau", "r_n", "safety", "out", "jobs",
        "xstar", "u", "ux", "v", "z", "eta", "eta1", "g", "rho", "A", "split"};

    const auto lines = read_kv_lines(path);
    std::map<std::string, std::string> kv;
    for (const auto& l : lines) {
        if (std::find(known_keys.begin(), known_keys.end(), l.key) == known_keys.end())
            throw ConfigError(path + ":" + std::to_string(l.line) + ": unknown key '" + l.key + "'");
        if (kv.count(l.key))
            throw ConfigError(path + ":" + std::to_string(l.line) + ": duplicate key '" + l.key + "'");
        kv[l.key] = l.val;
    }

    ExperimentConfig cfg;
    cfg.spec = spec_from_kv(kv, path);
    cfg.est.variant = cfg.spec.variant;

    auto get = [&](const char* key) -> std::optional<std::string> {
        const auto it = kv.find(key);
        if (it == kv.end()) return std::nullopt;
        return it->second;
    };
    if (auto v = get("n")) {
        cfg.ns.clear();
        std::istringstream ns(*v);
        std::string tok;
        while (std::getline(ns, tok, ',')) cfg.ns.push_back(std::stoul(tok));
        if (cfg.ns.empty()) throw ConfigError(path + ": empty n list");
    }
    if (auto v = get("replications")) cfg.replications = std::stoi(*v);
    if (auto v = get("seed")) cfg.seed = std::stoull(*v);
    if (auto v = get("grid_n")) cfg.est.grid_n = std::stoi(*v);
    if (auto v = get("s_max")) cfg.est.s_max = std::stod(*v);
    if (auto v = get("bandwidth")) cfg.est.bandwidth = std::stod(*v);
    if (auto v = get("tau")) cfg.est.tau = std::stod(*v);
    if (auto v = get("r_n")) cfg.est.r_n = std::stod(*v);
    if (auto v = get("safety")) cfg.est.safety = std::stod(*v);
    if (auto v = get("out")) cfg.out_dir = *v;
    if (auto v = get("jobs")) cfg.jobs = std::stoi(*v);
    if (auto v = get("cutoff")) {
        if (*v == "none") cfg.est.cutoff = CutoffMode::none;
        else if (*v == "heuristic") cfg.est.cutoff = CutoffMode::heuristic;
        else if (v->rfind("lemma2", 0) == 0) {
            cfg.est.cutoff = CutoffMode::lemma2;
            const auto colon = v->find(':');
            if (colon != std::string::npos) cfg.est.lemma2_k = std::stoi(v->substr(colon + 1));
        } else {
            throw ConfigError(path + ": cutoff must be none|heuristic|lemma2[:k]");
        }
    }
    if (cfg.replications < 0) throw ConfigError(path + ": replications must be >= 0");
    return cfg;
}

namespace {

// known-part subset the estimator is allowed to see
ModelSpec known_part(const ModelSpec& spec) {
    ModelSpec known;
    known.model = spec.model;
    known.variant = spec.variant;
    known.d = spec.d;
    switch (spec.model) {
        case ModelId::m1:
        case ModelId::m2:
            known.u = spec.u;
            break;
        case ModelId::factor:
            known.a = spec.a;
            known.split = spec.split;
            break;
        default:
            break;
    }
    return known;
}

std::map<std::string, double> score_run(const ModelSpec& spec, const EstimateResult& er) {
    std::map<std::string, double> m;
    for (const auto& [k, v] : er.solution.diagnostics) m[k] = v;
    m["cutoff_radius"] = er.cutoff_radius;

    const Grid& freq = er.grids.freq;
    const ModelSolution& sol = er.solution;

    const bool has_xstar_truth = spec.model != ModelId::m6;
    if (sol.phi_xstar && has_xstar_truth) {
        GridFn tx = truth_phi_xstar(spec, freq);
        const CfMetrics cm = metric_cf(*sol.phi_xstar, tx, sol.identified);
        m["cf_sup_error"] = cm.sup_error;
        m["cf_ise"] = cm.ise;
        m["density_ise_smoothed"] = density_ise_smoothed(*sol.phi_xstar, tx, sol.identified);
        if (spec.xstar && spec.xstar->kind == DistSpec::Kind::mixture)
            m["mass_point_estimate"] = mass_point_estimate(*sol.phi_xstar, spec.xstar->mix_at);
    }
    if (sol.phi_u && spec.u) {
        GridFn tu = true_cf(*spec.u, freq);
        const CfMetrics cm = metric_cf(*sol.phi_u, tu, sol.identified);
        m["cf_sup_error_u"] = cm.sup_error;
        m["cf_ise_u"] = cm.ise;
    }
    if (sol.phi_ux && spec.ux) {
        GridFn tux = true_cf(*spec.ux, freq);
        const CfMetrics cm = metric_cf(*sol.phi_ux, tux, sol.identified);
        m["cf_sup_error_ux"] = cm.sup_error;
    }
    if (sol.g_hat && spec.g) {
        // interior window of the spatial grid
        const Grid& sg = sol.g_hat->grid;
        double worst = 0.0;
        for (int i = 0; i < sg.n; ++i) {
            const double x = sg.coord(i);
            if (std::abs(x) > 2.0) continue;
            const double gv = sol.g_hat->values[static_cast<std::size_t>(i)].real();
            if (gv == 0.0) continue;  // off the spatial mask
            worst = std::max(worst, std::abs(gv - g_eval(*spec.g, x)));
        }
        m["g_sup_error_interior"] = worst;
    }
    if (sol.rho_hat) {
        m["rho_hat"] = *sol.rho_hat;
        m["rho_abs_error"] = std::abs(*sol.rho_hat - spec.rho);
    }
    return m;
}

void write_run_outputs(const std::string& dir, const EstimateResult& er,
                       const std::map<std::string, double>& metrics) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    const ModelSolution& sol = er.solution;
    if (sol.phi_xstar) write_gridfn_csv(*sol.phi_xstar, dir + "/phi_xstar.csv");
    if (sol.phi_u) write_gridfn_csv(*sol.phi_u, dir + "/phi_u.csv");
    if (sol.phi_ux) write_gridfn_csv(*sol.phi_ux, dir + "/phi_ux.csv");
    if (sol.ft_g) write_gridfn_csv(*sol.ft_g, dir + "/ft_g.csv");
    if (sol.g_hat) write_gridfn_csv(*sol.g_hat, dir + "/g_hat.csv");
    if (sol.f_xstar) write_gridfn_csv(*sol.f_xstar, dir + "/f_xstar.csv");
    write_mask_csv(sol.identified, dir + "/mask.csv");

    std::map<std::string, std::string> report;
    for (const auto& [k, v] : metrics) report[k] = format_double(v);
    report["runtime_ms"] = format_double(er.runtime_ms);
    if (er.smoothness) {
        const auto& rc = *er.smoothness;
        const char* kind = rc.kind == RegularityClass::Kind::ordinary_smooth ? "ordinary_smooth"
                           : rc.kind == RegularityClass::Kind::supersmooth   ? "supersmooth"
                           : rc.kind == RegularityClass::Kind::bounded_support ? "bounded_support"
                           : rc.kind == RegularityClass::Kind::mass_point_mixture
                               ? "mass_point_mixture"
                               : "inconclusive";
        report["smoothness_kind"] = kind;
        report["p_or_k"] = format_double(rc.kind == RegularityClass::Kind::ordinary_smooth
                                             ? rc.p
                                             : static_cast<double>(rc.k));
    }
    write_report(report, dir + "/report.txt");
}

}  // namespace

std::vector<RunOutcome> run_experiment(const ExperimentConfig& cfg, bool write_files) {
    const std::size_t total = cfg.ns.size() * static_cast<std::size_t>(cfg.replications);
    std::vector<RunOutcome> results(total);
    if (total == 0) {
        if (write_files && !cfg.out_dir.empty()) {
            std::filesystem::create_directories(cfg.out_dir);
            write_report({}, cfg.out_dir + "/summary.txt");
        }
        return results;
    }

    std::vector<EstimateResult> ers(total);
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::string first_error;
    std::mutex err_mu;

    auto worker = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= total || failed.load()) break;
            const std::size_t n = cfg.ns[i / static_cast<std::size_t>(cfg.replications)];
            const int rep = static_cast<int>(i % static_cast<std::size_t>(cfg.replications));
            try {
                Sample s = generate(cfg.spec, n, cfg.seed + static_cast<std::uint64_t>(rep));
                ers[i] = estimate_from_sample(s, known_part(cfg.spec), cfg.est);
                results[i].n = n;
                results[i].rep = rep;
                results[i].metrics = score_run(cfg.spec, ers[i]);
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> lk(err_mu);
                if (!failed.exchange(true)) first_error = e.what();
            }
        }
    };

    const int jobs = std::max(1, cfg.jobs);
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (failed.load()) throw NumericalError("run_experiment: " + first_error);

    if (write_files && !cfg.out_dir.empty()) {
        for (std::size_t i = 0; i < total; ++i) {
            const std::string dir = cfg.out_dir + "/n" + std::to_string(results[i].n) + "_rep" +
                                    std::to_string(results[i].rep);
            write_run_outputs(dir, ers[i], results[i].metrics);
        }
        // per-n medians
        std::map<std::string, std::string> summary;
        for (std::size_t ni = 0; ni < cfg.ns.size(); ++ni) {
            std::map<std::string, std::vector<double>> bykey;
            for (int rep = 0; rep < cfg.replications; ++rep) {
                const auto& mm = results[ni * static_cast<std::size_t>(cfg.replications) +
                                         static_cast<std::size_t>(rep)]
                                     .metrics;
                for (const auto& [k, v] : mm) bykey[k].push_back(v);
            }
            for (auto& [k, vs] : bykey) {
                std::sort(vs.begin(), vs.end());
                const double med = vs.size() % 2 ? vs[vs.size() / 2]
                                                 : 0.5 * (vs[vs.size() / 2 - 1] + vs[vs.size() / 2]);
                summary["n" + std::to_string(cfg.ns[ni]) + ".median_" + k] = format_double(med);
            }
        }
        std::filesystem::create_directories(cfg.out_dir);
        write_report(summary, cfg.out_dir + "/summary.txt");
    }
    return results;
}

}  // namespace convlab
