#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "convlab/harness.hpp"
#include "convlab/io.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

using namespace convlab;

namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

double col_mean(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m += x;
    return m / static_cast<double>(v.size());
}

double col_var(const std::vector<double>& v) {
    const double m = col_mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / static_cast<double>(v.size() - 1);
}

}  // namespace

TEST_CASE("generate: moment checks within 5 sigma / sqrt(n) for every model family") {
    const std::size_t n = 20000;

    ModelSpec m1;
    m1.model = ModelId::m1;
    m1.xstar = DistSpec::gaussian(0.5, 1.0);
    m1.u = DistSpec::laplace(0.5);
    Truth t1;
    Sample s1 = generate(m1, n, 11, &t1);
    const double sd_z = std::sqrt(1.0 + 2.0 * 0.25);
    CHECK(std::abs(col_mean(s1.z) - 0.5) < 5.0 * sd_z / std::sqrt(static_cast<double>(n)));
    CHECK(std::abs(col_var(t1.xstar) - 1.0) < 0.1);

    // degenerate error: z equals the latent draws exactly
    ModelSpec md;
    md.model = ModelId::m1;
    md.xstar = DistSpec::gaussian(0.0, 1.0);
    md.u = DistSpec::degenerate(0.0);
    Truth td;
    Sample sd = generate(md, 1000, 5, &td);
    for (std::size_t j = 0; j < sd.n; ++j) CHECK(sd.z[j] == td.xstar[j]);

    // ar1: E[u_x u] = rho Var(u) within Monte Carlo tolerance
    ModelSpec ma;
    ma.model = ModelId::ar1;
    ma.rho = 0.5;
    ma.xstar = DistSpec::gaussian(0.0, 1.0);
    ma.u = DistSpec::gaussian(0.0, 1.0);
    ma.eta = DistSpec::gaussian(0.0, 0.5);
    ma.eta1 = DistSpec::gaussian(0.0, 0.5);
    Truth ta;
    Sample sa = generate(ma, 100000, 17, &ta);
    double cross = 0.0;
    for (std::size_t j = 0; j < sa.n; ++j) cross += ta.ux[j] * ta.u[j];
    cross /= static_cast<double>(sa.n);
    CHECK(std::abs(cross - 0.5) < 0.02);

    // uniform latent: variance (b-a)^2/12
    ModelSpec mu;
    mu.model = ModelId::m1;
    mu.xstar = DistSpec::uniform(-1.0, 1.0);
    mu.u = DistSpec::gaussian(0.0, 0.1);
    Truth tu;
    generate(mu, n, 23, &tu);
    CHECK(std::abs(col_var(tu.xstar) - 1.0 / 3.0) < 0.02);

    // fejer latent: draws follow the Fejer density (check CF against truth)
    ModelSpec mf;
    mf.model = ModelId::m1;
    mf.xstar = DistSpec::fejer(2.0);
    mf.u = DistSpec::degenerate(0.0);
    Truth tf;
    Sample sf = generate(mf, 100000, 29, &tf);
    auto grids = make_grids(1, 256, 4.0);
    GridFn phi_hat = ecf(sf.z, 1, grids.freq);
    GridFn phi_true = true_cf(*mf.xstar, grids.freq);
    double worst = 0.0;
    for (std::size_t i = 0; i < phi_hat.values.size(); ++i)
        worst = std::max(worst, std::abs(phi_hat.values[i] - phi_true.values[i]));
    CHECK(worst < 0.02);

    CHECK_THROWS_AS(generate(ModelSpec{}, 1, 1), ConfigError);  // n too small
}

TEST_CASE("cantor distribution: product-formula CF matches direct enumeration and draws") {
    // direct enumeration of the 2^L support points at small L
    const int L = 10;
    auto grids = make_grids(1, 128, 8.0);
    GridFn prod = true_cf(DistSpec::cantor(L), grids.freq);
    for (int i = 0; i < grids.freq.n; i += 7) {
        const double s = grids.freq.coord(i);
        cplx acc{0.0, 0.0};
        for (int bits = 0; bits < (1 << L); ++bits) {
            double x = 0.0, p = 1.0 / 3.0;
            for (int j = 0; j < L; ++j) {
                x += ((bits >> j) & 1 ? 1.0 : -1.0) * p;
                p /= 3.0;
            }
            acc += std::exp(cplx{0.0, s * x});
        }
        acc /= static_cast<double>(1 << L);
        CHECK(std::abs(prod.values[static_cast<std::size_t>(i)] - acc) < 1e-12);
    }

    // deeper construction: sampled ECF tracks the L=20 product formula
    ModelSpec mc;
    mc.model = ModelId::m1;
    mc.xstar = DistSpec::cantor(20);
    mc.u = DistSpec::degenerate(0.0);
    Sample sc = generate(mc, 100000, 37);
    GridFn phi_hat = ecf(sc.z, 1, grids.freq);
    GridFn phi20 = true_cf(DistSpec::cantor(20), grids.freq);
    double worst = 0.0;
    for (std::size_t i = 0; i < phi_hat.values.size(); ++i)
        worst = std::max(worst, std::abs(phi_hat.values[i] - phi20.values[i]));
    CHECK(worst < 0.02);

    // L=20 truncation is already within 1e-6 of deeper constructions
    GridFn phi25 = true_cf(DistSpec::cantor(25), grids.freq);
    double trunc = 0.0;
    for (std::size_t i = 0; i < phi20.values.size(); ++i)
        trunc = std::max(trunc, std::abs(phi20.values[i] - phi25.values[i]));
    CHECK(trunc < 1e-6);
}

TEST_CASE("true_cf closed forms") {
    auto grids = make_grids(1, 256, 8.0);
    GridFn g = true_cf(DistSpec::gaussian(0.0, 1.0), grids.freq);
    GridFn u = true_cf(DistSpec::uniform(-1.0, 1.0), grids.freq);
    GridFn m = true_cf(DistSpec::mixture(0.3, 0.0, DistSpec::gaussian(0.0, 1.0)), grids.freq);
    for (int i = 0; i < grids.freq.n; ++i) {
        const double s = grids.freq.coord(i);
        const std::size_t fi = static_cast<std::size_t>(i);
        CHECK(std::abs(g.values[fi] - cplx{std::exp(-0.5 * s * s), 0.0}) < 1e-14);
        const double sinc = s == 0.0 ? 1.0 : std::sin(s) / s;
        CHECK(std::abs(u.values[fi] - cplx{sinc, 0.0}) < 1e-13);
        CHECK(std::abs(m.values[fi] - cplx{0.3 + 0.7 * std::exp(-0.5 * s * s), 0.0}) < 1e-14);
    }
    CHECK(value_at_origin(u) == cplx{1.0, 0.0});
}

TEST_CASE("metric_cf: zero on identical inputs, c^2 L for a masked constant shift") {
    auto grids = make_grids(1, 256, 8.0);
    GridFn phi = sample_fn1(grids.freq, [](double s) { return cplx{std::exp(-0.5 * s * s), 0.0}; }, true);
    SupportMask full = detect_support(sample_fn1(grids.freq, [](double) { return cplx{1.0, 0.0}; }), 0.5);

    CfMetrics same = metric_cf(phi, phi, full);
    CHECK(same.sup_error == 0.0);
    CHECK(same.ise == 0.0);

    const double c = 0.01;
    GridFn shifted = sample_fn1(grids.freq, [&](double s) {
        return cplx{std::exp(-0.5 * s * s) + c, 0.0};
    }, true);
    CfMetrics sh = metric_cf(shifted, phi, full);
    const double mask_measure = static_cast<double>(full.popcount()) * grids.freq.step;
    CHECK(sh.sup_error == doctest::Approx(c).epsilon(1e-12));
    CHECK(sh.ise == doctest::Approx(c * c * mask_measure).epsilon(1e-12));
}

TEST_CASE("mass_point_estimate: point mass, Gaussian decay, mixture, linearity") {
    auto grids = make_grids(1, 1024, 20.0);

    GridFn one = sample_fn1(grids.freq, [](double) { return cplx{1.0, 0.0}; }, true);
    CHECK(mass_point_estimate(one, 0.0) == doctest::Approx(1.0).epsilon(1e-12));

    GridFn gauss = sample_fn1(grids.freq, [](double s) { return cplx{std::exp(-0.5 * s * s), 0.0}; }, true);
    const double leak = mass_point_estimate(gauss, 0.0);
    // (2T)^{-1} integral of e^{-s^2/2} = sqrt(2 pi)/(2T), T = 20
    CHECK(leak == doctest::Approx(std::sqrt(kTwoPi) / 40.0).epsilon(1e-6));
    CHECK(leak < 0.07);

    GridFn mix = sample_fn1(grids.freq, [](double s) {
        return cplx{0.3 + 0.7 * std::exp(-0.5 * s * s), 0.0};
    }, true);
    CHECK(mass_point_estimate(mix, 0.0) ==
          doctest::Approx(0.3 + 0.7 * std::sqrt(kTwoPi) / 40.0).epsilon(1e-6));

    // linearity in phi
    const double a = mass_point_estimate(add(scale(gauss, cplx{2.0, 0.0}), mix), 0.0);
    CHECK(a == doctest::Approx(2.0 * leak + mass_point_estimate(mix, 0.0)).epsilon(1e-12));

    // off-center atom
    GridFn at1 = sample_fn1(grids.freq, [](double s) { return std::exp(cplx{0.0, s}); }, true);
    CHECK(mass_point_estimate(at1, 1.0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(mass_point_estimate(at1, 0.0)) < 0.05);
}

TEST_CASE("config parsing: line-precise unknown keys, lists, round trips") {
    TempDir tmp("convlab_cfg_test");
    const std::string path = (tmp.path / "config.txt").string();
    {
        std::ofstream out(path);
        out << "# comment line\n"
            << "model=3\n"
            << "xstar=gaussian:0:1\n"
            << "u=laplace:0.5\n"
            << "ux=gaussian:0:0.5\n"
            << "n=1000,2000\n"
            << "replications=3\n"
            << "seed=42\n"
            << "cutoff=lemma2:2\n";
    }
    ExperimentConfig cfg = parse_experiment_config(path);
    CHECK(cfg.spec.model == ModelId::m3);
    CHECK(cfg.ns == std::vector<std::size_t>{1000, 2000});
    CHECK(cfg.replications == 3);
    CHECK(cfg.est.cutoff == CutoffMode::lemma2);
    CHECK(cfg.est.lemma2_k == 2);

    {
        std::ofstream out(path, std::ios::app);
        out << "frobnicate=1\n";
    }
    try {
        parse_experiment_config(path);
        CHECK(false);
    } catch (const ConfigError& e) {
        const std::string msg = e.what();
        CHECK(msg.find(":10:") != std::string::npos);  // line-precise
        CHECK(msg.find("frobnicate") != std::string::npos);
    }

    // spec round trip through kv
    ModelSpec spec;
    spec.model = ModelId::ar1;
    spec.rho = 0.25;
    spec.xstar = DistSpec::gaussian(0.0, 1.0);
    spec.u = DistSpec::laplace(0.3);
    spec.eta = DistSpec::gaussian(0.0, 0.5);
    spec.eta1 = DistSpec::gaussian(0.0, 0.5);
    ModelSpec back = spec_from_kv(spec_to_kv(spec), "roundtrip");
    CHECK(back.model == ModelId::ar1);
    CHECK(back.rho == 0.25);
    CHECK(back.u->b == 0.3);
}

TEST_CASE("sample csv round trip") {
    TempDir tmp("convlab_sample_test");
    ModelSpec spec;
    spec.model = ModelId::m5;
    spec.xstar = DistSpec::gaussian(0.0, 1.0);
    spec.u = DistSpec::laplace(0.5);
    spec.ux = DistSpec::gaussian(0.0, 0.5);
    spec.v = DistSpec::gaussian(0.0, 0.2);
    spec.g = parse_g("quadratic");
    Sample s = generate(spec, 500, 7);
    const std::string path = (tmp.path / "sample.csv").string();
    write_sample_csv(s, path);
    Sample back = read_sample_csv(path);
    CHECK(back.n == s.n);
    CHECK(back.d == s.d);
    CHECK(back.z == s.z);
    CHECK(back.x == s.x);
    CHECK(back.y == s.y);
}

TEST_CASE("run_experiment: deterministic outputs independent of the job count") {
    TempDir tmp1("convlab_det_1");
    TempDir tmp8("convlab_det_8");

    ExperimentConfig cfg;
    cfg.spec.model = ModelId::m1;
    cfg.spec.xstar = DistSpec::gaussian(0.0, 1.0);
    cfg.spec.u = DistSpec::laplace(0.4);
    cfg.ns = {800, 1600};
    cfg.replications = 4;
    cfg.seed = 99;
    cfg.est.grid_n = 128;
    cfg.est.s_max = 10.0;

    cfg.out_dir = tmp1.path.string();
    cfg.jobs = 1;
    auto r1 = run_experiment(cfg);
    cfg.out_dir = tmp8.path.string();
    cfg.jobs = 8;
    auto r8 = run_experiment(cfg);

    CHECK(r1.size() == 8);
    for (std::size_t i = 0; i < r1.size(); ++i) {
        CHECK(r1[i].n == r8[i].n);
        for (const auto& [k, v] : r1[i].metrics) {
            REQUIRE(r8[i].metrics.count(k));
            CHECK(r8[i].metrics.at(k) == v);  // bitwise
        }
    }

    // byte-identical numeric CSVs
    std::size_t compared = 0;
    for (const auto& entry : fs::recursive_directory_iterator(tmp1.path)) {
        if (!entry.is_regular_file() || entry.path().extension() != ".csv") continue;
        const auto rel = fs::relative(entry.path(), tmp1.path);
        std::ifstream a(entry.path(), std::ios::binary);
        std::ifstream b(tmp8.path / rel, std::ios::binary);
        REQUIRE(b.good());
        std::string ca((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
        std::string cb((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
        CHECK(ca == cb);
        ++compared;
    }
    CHECK(compared > 0);

    // empty sweep: no runs, empty summary
    ExperimentConfig empty = cfg;
    empty.replications = 0;
    empty.out_dir.clear();
    CHECK(run_experiment(empty).empty());
}

TEST_CASE("estimate_from_sample end to end per model (smoke, small n)") {
    EstimateConfig ec;
    ec.grid_n = 256;
    ec.s_max = 10.0;

    ModelSpec m1;
    m1.model = ModelId::m1;
    m1.xstar = DistSpec::gaussian(0.0, 1.0);
    m1.u = DistSpec::laplace(0.4);
    Sample s1 = generate(m1, 5000, 3);
    EstimateResult r1 = estimate_from_sample(s1, m1, ec);
    CHECK(r1.solution.phi_xstar.has_value());
    CHECK(r1.smoothness.has_value());
    CHECK(r1.smoothness->kind == RegularityClass::Kind::ordinary_smooth);

    ModelSpec m4;
    m4.model = ModelId::m4;
    m4.xstar = DistSpec::gaussian(0.0, 1.0);
    m4.u = DistSpec::gaussian(0.0, 1.0);
    m4.ux = DistSpec::gaussian(0.0, 0.7);
    Sample s4 = generate(m4, 5000, 5);
    EstimateResult r4 = estimate_from_sample(s4, ModelSpec{.model = ModelId::m4}, ec);
    CHECK(r4.solution.phi_ux.has_value());

    ModelSpec m6;
    m6.model = ModelId::m6;
    m6.z = DistSpec::gaussian(0.0, 1.0);
    m6.u = DistSpec::gaussian(0.0, 0.3);
    m6.v = DistSpec::gaussian(0.0, 0.2);
    m6.g = parse_g("linear:0:1");
    Sample s6 = generate(m6, 20000, 7);
    EstimateResult r6 = estimate_from_sample(s6, ModelSpec{.model = ModelId::m6}, ec);
    CHECK(r6.solution.g_hat.has_value());

    // lemma2 cutoff shrinks the identified mask
    ModelSpec mg;
    mg.model = ModelId::m1;
    mg.xstar = DistSpec::gaussian(0.0, 1.0);
    mg.u = DistSpec::gaussian(0.0, 1.0);
    Sample sg = generate(mg, 5000, 9);
    EstimateConfig ecg = ec;
    ecg.cutoff = CutoffMode::lemma2;
    EstimateResult rg = estimate_from_sample(sg, mg, ecg);
    CHECK(rg.cutoff_radius > 0.0);
    EstimateResult rg0 = estimate_from_sample(sg, mg, ec);
    CHECK(rg.solution.identified.popcount() < rg0.solution.identified.popcount());

    // factor model reduces and solves as model 3
    ModelSpec mf;
    mf.model = ModelId::factor;
    mf.xstar = DistSpec::gaussian(0.0, 1.0);
    mf.u = DistSpec::gaussian(0.0, 0.5);
    mf.a.rows = 3;
    mf.a.cols = 1;
    mf.a.a = {2.0, 1.0, 1.0};
    mf.split = 1;
    Sample sf = generate(mf, 5000, 11);
    CHECK(sf.d == 3);
    EstimateResult rf = estimate_from_sample(sf, mf, ec);
    CHECK(rf.solution.diagnostics.at("t1_residual") < 1e-12);
    CHECK(rf.solution.phi_xstar.has_value());
}
