// convlab: frequency-domain solvers for convolution-equation measurement
// error models, with a synthetic-data harness.
//
// Exit codes: 0 ok, 2 config error, 3 numerical failure, 4 I/O error.

#include "convlab/harness.hpp"
#include "convlab/io.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

namespace {

using namespace convlab;

int cmd_simulate(const std::string& model, const std::string& spec_file, std::size_t n,
                 std::uint64_t seed, const std::string& out_dir) {
    auto kv = read_kv_file(spec_file);
    kv["model"] = model;  // CLI flag wins
    ModelSpec spec = spec_from_kv(kv, spec_file);
    spec.model = parse_model(model);

    Truth truth;
    Sample s = generate(spec, n, seed, &truth);

    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    write_sample_csv(s, out_dir + "/sample.csv");

    auto meta = spec_to_kv(spec);
    meta["n"] = std::to_string(n);
    meta["seed"] = std::to_string(seed);
    write_kv_file(meta, out_dir + "/meta.txt");

    // latent truths, for scoring only; estimation never reads these
    {
        std::ofstream out(out_dir + "/truth_latents.csv");
        if (!out) throw IoError("cannot open truth_latents.csv");
        const int d = (spec.model == ModelId::factor) ? static_cast<int>(spec.a.cols) : spec.d;
        bool first = true;
        auto col = [&](const std::string& c) { out << (first ? "" : ",") << c; first = false; };
        for (int k = 0; k < d; ++k) col("xstar" + std::to_string(k + 1));
        const int du = spec.model == ModelId::factor ? static_cast<int>(spec.a.rows) : spec.d;
        if (!truth.u.empty()) for (int k = 0; k < du; ++k) col("u" + std::to_string(k + 1));
        if (!truth.ux.empty()) for (int k = 0; k < spec.d; ++k) col("ux" + std::to_string(k + 1));
        if (!truth.uy.empty()) col("uy");
        if (!truth.v.empty()) col("v");
        out << "\n";
        for (std::size_t j = 0; j < n; ++j) {
            bool f2 = true;
            auto val = [&](double v) { out << (f2 ? "" : ",") << format_double(v); f2 = false; };
            for (int k = 0; k < d; ++k) val(truth.xstar[j * static_cast<std::size_t>(d) + static_cast<std::size_t>(k)]);
            if (!truth.u.empty()) for (int k = 0; k < du; ++k) val(truth.u[j * static_cast<std::size_t>(du) + static_cast<std::size_t>(k)]);
            if (!truth.ux.empty()) for (int k = 0; k < spec.d; ++k) val(truth.ux[j * static_cast<std::size_t>(spec.d) + static_cast<std::size_t>(k)]);
            if (!truth.uy.empty()) val(truth.uy[j]);
            if (!truth.v.empty()) val(truth.v[j]);
            out << "\n";
        }
    }
    std::cout << "wrote " << out_dir << "/sample.csv (n=" << n << ")\n";
    return 0;
}

int cmd_estimate(const std::string& model_flag, const std::string& in_dir,
                 const std::string& grid_arg, const std::string& variant,
                 const std::string& cutoff, double bandwidth, const std::string& out_dir) {
    auto meta = read_kv_file(in_dir + "/meta.txt");
    ModelSpec full = spec_from_kv(meta, in_dir + "/meta.txt");
    if (!model_flag.empty()) full.model = parse_model(model_flag);

    // the estimator sees only the model's known parts
    ModelSpec known;
    known.model = full.model;
    known.variant = full.variant;
    known.d = full.d;
    if (full.model == ModelId::m1 || full.model == ModelId::m2) known.u = full.u;
    if (full.model == ModelId::factor) {
        known.a = full.a;
        known.split = full.split;
    }

    EstimateConfig cfg;
    const auto colon = grid_arg.find(':');
    if (colon == std::string::npos) throw ConfigError("--grid must be <N>:<s_max>");
    cfg.grid_n = std::stoi(grid_arg.substr(0, colon));
    cfg.s_max = std::stod(grid_arg.substr(colon + 1));
    if (!variant.empty()) {
        if (variant != "A" && variant != "B") throw ConfigError("--variant must be A or B");
        cfg.variant = variant == "A" ? Variant::A : Variant::B;
    } else {
        cfg.variant = known.variant;
    }
    cfg.bandwidth = bandwidth;
    if (cutoff == "none" || cutoff.empty()) cfg.cutoff = CutoffMode::none;
    else if (cutoff == "heuristic") cfg.cutoff = CutoffMode::heuristic;
    else if (cutoff.rfind("lemma2", 0) == 0) {
        cfg.cutoff = CutoffMode::lemma2;
        const auto c = cutoff.find(':');
        if (c != std::string::npos) cfg.lemma2_k = std::stoi(cutoff.substr(c + 1));
    } else {
        throw ConfigError("--cutoff must be none|heuristic|lemma2[:k]");
    }

    Sample s = read_sample_csv(in_dir + "/sample.csv");
    EstimateResult er = estimate_from_sample(s, known, cfg);

    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    const ModelSolution& sol = er.solution;
    if (sol.phi_xstar) write_gridfn_csv(*sol.phi_xstar, out_dir + "/phi_xstar.csv");
    if (sol.phi_u) write_gridfn_csv(*sol.phi_u, out_dir + "/phi_u.csv");
    if (sol.phi_ux) write_gridfn_csv(*sol.phi_ux, out_dir + "/phi_ux.csv");
    if (sol.ft_g) write_gridfn_csv(*sol.ft_g, out_dir + "/ft_g.csv");
    if (sol.g_hat) write_gridfn_csv(*sol.g_hat, out_dir + "/g_hat.csv");
    if (sol.f_xstar) write_gridfn_csv(*sol.f_xstar, out_dir + "/f_xstar.csv");
    write_mask_csv(sol.identified, out_dir + "/mask.csv");

    std::map<std::string, std::string> report;
    for (const auto& [k, v] : sol.diagnostics) report[k] = format_double(v);
    if (sol.rho_hat) report["rho_hat"] = format_double(*sol.rho_hat);
    report["runtime_ms"] = format_double(er.runtime_ms);
    report["cutoff_radius"] = format_double(er.cutoff_radius);
    write_report(report, out_dir + "/report.txt");
    std::cout << "wrote estimates to " << out_dir << "\n";
    return 0;
}

int cmd_diagnose(const std::string& in_dir) {
    const std::string path = in_dir + "/phi_u.csv";
    GridFn phi_u = read_gridfn_csv(path);
    RegularityClass rc = classify_smoothness(phi_u);

    std::map<std::string, std::string> report;
    const char* kind = rc.kind == RegularityClass::Kind::ordinary_smooth ? "ordinary_smooth"
                       : rc.kind == RegularityClass::Kind::supersmooth   ? "supersmooth"
                       : rc.kind == RegularityClass::Kind::bounded_support ? "bounded_support"
                       : rc.kind == RegularityClass::Kind::mass_point_mixture ? "mass_point_mixture"
                                                                              : "inconclusive";
    report["smoothness_kind"] = kind;
    if (rc.kind == RegularityClass::Kind::ordinary_smooth) report["p_or_k"] = format_double(rc.p);
    else if (rc.kind == RegularityClass::Kind::supersmooth) report["p_or_k"] = format_double(rc.k);
    if (rc.kind == RegularityClass::Kind::mass_point_mixture)
        report["floor_lambda"] = format_double(rc.floor_lambda);

    std::cout << "smoothness_kind: " << kind << "\n";
    for (int m = 0; m <= 2; ++m) {
        const auto [ok, value] = check_phi_class(phi_u, {m}, 1e6);
        std::cout << "phi_class m=" << m << " value=" << format_double(value)
                  << " certificate=" << (ok ? "pass" : "fail") << "\n";
        report["phi_class_value_m" + std::to_string(m)] = format_double(value);
        report["phi_class_pass_m" + std::to_string(m)] = ok ? "1" : "0";
    }
    write_report(report, in_dir + "/diagnostics.txt");
    return 0;
}

int cmd_sweep(const std::string& config_path, int jobs) {
    ExperimentConfig cfg = parse_experiment_config(config_path);
    if (jobs > 0) cfg.jobs = jobs;
    auto results = run_experiment(cfg);
    std::cout << "completed " << results.size() << " runs";
    if (!cfg.out_dir.empty()) std::cout << ", outputs in " << cfg.out_dir;
    std::cout << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"convlab: convolution-equation measurement error models"};
    app.require_subcommand(1);

    std::string model, spec_file, out_dir, in_dir, grid_arg = "1024:20", variant, cutoff = "none",
                config_path;
    std::size_t n = 1000;
    std::uint64_t seed = 1;
    double bandwidth = 0.0;
    int jobs = 0;

    auto* sim = app.add_subcommand("simulate", "draw a synthetic sample");
    sim->add_option("--model", model, "model id (1,2,3,4,4a,5,6,7,ar1,factor)")->required();
    sim->add_option("--spec", spec_file, "distribution spec file")->required();
    sim->add_option("--n", n, "sample size")->required();
    sim->add_option("--seed", seed, "rng seed")->required();
    sim->add_option("--out", out_dir, "output directory")->required();

    auto* est = app.add_subcommand("estimate", "estimate from a simulated sample");
    est->add_option("--model", model, "model id (defaults to meta.txt)");
    est->add_option("--in", in_dir, "input directory (simulate output)")->required();
    est->add_option("--grid", grid_arg, "grid as <N>:<s_max>");
    est->add_option("--variant", variant, "assumption variant A|B");
    est->add_option("--cutoff", cutoff, "none|heuristic|lemma2[:k]");
    est->add_option("--bandwidth", bandwidth, "kernel bandwidth (0 = Silverman)");
    est->add_option("--out", out_dir, "output directory")->required();

    auto* diag = app.add_subcommand("diagnose", "regularity diagnostics for phi_u");
    diag->add_option("--in", in_dir, "directory containing phi_u.csv")->required();

    auto* sweep = app.add_subcommand("sweep", "run a replication sweep from a config file");
    sweep->add_option("--config", config_path, "flat key=value config")->required();
    sweep->add_option("--jobs", jobs, "worker threads");

    CLI11_PARSE(app, argc, argv);

    try {
        if (sim->parsed()) return cmd_simulate(model, spec_file, n, seed, out_dir);
        if (est->parsed()) return cmd_estimate(model, in_dir, grid_arg, variant, cutoff, bandwidth, out_dir);
        if (diag->parsed()) return cmd_diagnose(in_dir);
        if (sweep->parsed()) return cmd_sweep(config_path, jobs);
    } catch (const convlab::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const convlab::NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const convlab::IoError& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return 4;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
