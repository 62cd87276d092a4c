#pragma once

#include "convlab/distributions.hpp"
#include "convlab/regularization.hpp"
#include "convlab/solvers.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>

namespace convlab {

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

enum class ModelId { m1, m2, m3, m4, m4a, m5, m6, m7, ar1, factor };
ModelId parse_model(const std::string& text);
std::string format_model(ModelId id);

// Which model to simulate/estimate and the latent-variable families. For
// Berkson-type models (2, 6, 7) the observable z has its own family and the
// latent x* is induced.
struct ModelSpec {
    ModelId model = ModelId::m1;
    Variant variant = Variant::B;
    int d = 1;
    std::optional<DistSpec> xstar, u, ux, v, z, eta, eta1;
    std::optional<GSpec> g;
    double rho = 0.0;
    Mat a;                  // factor loading matrix
    std::size_t split = 0;  // rows of the first block
};

struct Truth {
    std::vector<double> xstar, u, ux, uy, v;
};

// Deterministic for (spec, n, seed); latent draws returned for scoring.
Sample generate(const ModelSpec& spec, std::size_t n, std::uint64_t seed,
                Truth* truth = nullptr);

// Ground-truth frequency functions implied by the spec (d=1 regression
// models; per-axis iid otherwise).
GridFn truth_phi_xstar(const ModelSpec& spec, const Grid& freq);
GridFn truth_phi_u(const ModelSpec& spec, const Grid& freq);

struct CfMetrics {
    double sup_error = 0.0;
    double ise = 0.0;
};
// Over the identified components of the mask.
CfMetrics metric_cf(const GridFn& est, const GridFn& truth, const SupportMask& mask);

// Cesaro CF-inversion estimate of the mass at x0: (2T)^{-1} integral of
// phi(s) e^{-i s x0} over the grid, T = grid extent. Linear in phi.
double mass_point_estimate(const GridFn& phi, double x0);

// ISE between the band-limited densities (both put through the same mask).
double density_ise_smoothed(const GridFn& phi_est, const GridFn& phi_true,
                            const SupportMask& mask);

enum class CutoffMode { none, heuristic, lemma2 };

struct EstimateConfig {
    int grid_n = 1024;
    double s_max = 20.0;
    CutoffMode cutoff = CutoffMode::none;
    int lemma2_k = 2;
    double safety = 0.9;
    double r_n = 0.0;      // 0 -> sqrt(n)
    double bandwidth = 0.0;  // 0 -> Silverman
    double tau = 0.0;        // 0 -> default policy
    Variant variant = Variant::B;
};

struct EstimateResult {
    ModelSolution solution;
    GridPair grids;
    double cutoff_radius = 0.0;  // 0 = no cutoff applied
    double runtime_ms = 0.0;
    std::optional<RegularityClass> smoothness;  // of the error CF when known/recovered
};

// Full per-sample pipeline: moments -> solve -> optional cutoff. `known`
// carries only what the model treats as known (error family for 1/2,
// loading matrix for factor, ...).
EstimateResult estimate_from_sample(const Sample& s, const ModelSpec& known,
                                    const EstimateConfig& cfg);

struct ExperimentConfig {
    ModelSpec spec;
    std::vector<std::size_t> ns{1000};
    int replications = 1;
    std::uint64_t seed = 1;
    EstimateConfig est;
    std::string out_dir;
    int jobs = 1;
};

ExperimentConfig parse_experiment_config(const std::string& path);

struct RunOutcome {
    std::size_t n = 0;
    int rep = 0;
    std::map<std::string, double> metrics;
};

// generate -> estimate -> score per (n, replication), seeds seed + rep.
// Replications run in parallel; outputs are written serially in a fixed
// order so reruns are byte-identical for any job count.
std::vector<RunOutcome> run_experiment(const ExperimentConfig& cfg, bool write_files = true);

// meta.txt round trip for the simulate/estimate handoff
std::map<std::string, std::string> spec_to_kv(const ModelSpec& spec);
ModelSpec spec_from_kv(const std::map<std::string, std::string>& kv, const std::string& where);

}  // namespace convlab
