#pragma once

#include "convlab/moments.hpp"
#include "convlab/support.hpp"

#include <map>
#include <optional>

namespace convlab {

// kappa_k = gamma_k / gamma on supp(gamma): the log-derivative field whose
// path integral reconstructs the differentiated factor up to its anchor.
struct KappaField {
    std::vector<GridFn> kappa;
    SupportMask domain;
    double curl_residual = 0.0;  // 0 for d=1
};

KappaField kappa_field(const std::vector<GridFn>& numerators, const GridFn& gamma,
                       const SupportMask& mask);

// anchor_value * exp of the trapezoid path integral of kappa from the
// component's anchor, along axis-parallel staircase paths for d >= 2
// (gated on curl_residual <= curl_tol). Zero outside the component.
GridFn path_exponential(const KappaField& kf, int component, cplx anchor_value,
                        double curl_tol = 1e-4, bool transpose_axes = false);

struct ModelSolution {
    std::optional<GridFn> phi_xstar;
    std::optional<GridFn> phi_u;
    std::optional<GridFn> phi_ux;
    std::optional<GridFn> ft_g;      // Ft(g) or Ft(g f_xstar), frequency domain
    std::optional<GridFn> g_hat;     // space domain
    std::optional<GridFn> f_xstar;   // space domain
    std::optional<double> rho_hat;
    SupportMask identified;
    std::map<std::string, double> diagnostics;
};

enum class Variant { A, B };

struct SolveOptions {
    double tau = 0.0;          // support threshold; 0 = pick by input kind
    double curl_tol = 1e-4;
    int max_zero_order = 4;
    bool swap_factors = false; // swap the phi_xstar / phi_u labels (model 3/4)
    double spatial_floor = 1e-3;  // model 5 step-3 mask, relative to max density
};

// Table 5 row 1: phi_xstar = phi_u^{-1} phi_z on supp(phi_u, d), components
// beyond finite-order zeros of phi_u marked identified via fit_zero.
ModelSolution solve_model1(const GridFn& phi_z, const GridFn& phi_u,
                           const SolveOptions& opts = {});

// Table 5 row 2: phi_xstar = phi_z * conj(phi_u); always well-posed.
ModelSolution solve_model2(const GridFn& phi_z, const GridFn& phi_u);

// Kotlyarski pair from {phi_xstar phi_u = phi_z, (phi_xstar)'_k phi_u = eps_k}.
// Variant B exponentiates eps_k/phi_z (yields phi_xstar, unit anchor);
// variant A exponentiates [(phi_z)'_k - eps_k]/phi_z (yields phi_u). The
// factor labels follow this algebra; Table 5's A/B naming is inconsistent
// with it, hence the swap_factors escape hatch.
ModelSolution solve_model3(const MomentFns& m, Variant variant,
                           const SolveOptions& opts = {});

// Model 3 plus phi_ux = phi_x / phi_xstar.
ModelSolution solve_model4(const MomentFns& m, Variant variant,
                           const SolveOptions& opts = {});

// Kotlyarski machinery on xi = z - x: recovers phi_u, phi_ux ahead of
// phi_xstar; then phi_xstar = phi_x / phi_ux.
ModelSolution solve_model4a(const MomentFns& m, Variant variant,
                            const SolveOptions& opts = {});

// Table 5 row 5, three steps. Variant A exponentiates eps_k/eps and needs
// the anchor Ft(g f_xstar)(0) = mean(y); variant B reaches phi_u first.
ModelSolution solve_model5(const MomentFns& m, Variant variant,
                           const SolveOptions& opts = {});

// Berkson regression: phi_u = conj(phi_x/phi_z), Ft(g) = eps/phi_u.
ModelSolution solve_model6(const GridFn& phi_z, const GridFn& phi_x,
                           const GridFn& w_on_space_grid,
                           const SolveOptions& opts = {});

// {Ft(g) phi_u = eps, (Ft g)'_k phi_u = eps_k}. Variant A anchors Ft(g) at
// eps(0) (valid when the identified component contains 0); an explicit
// anchor overrides for components that do not.
ModelSolution solve_model7(const MomentFns& m, Variant variant,
                           const SolveOptions& opts = {},
                           std::optional<cplx> ftg_anchor = std::nullopt);

// rho = (w_x - zf(z))^{-1} (w_y - w_x) aggregated by weighted median over
// the spatial window; exact in population, robust to denominator zeros.
double estimate_rho(const GridFn& w_x, const GridFn& w_y, const GridFn& zfz,
                    double window_halfwidth, double denom_floor_rel = 1e-8);

// AR(1)-correlated errors with a third measurement: estimate rho, correct
// the weighted moment back to the model-3 system, then solve as model 3 B.
ModelSolution solve_ar1(const MomentFns& m, const SolveOptions& opts = {});

// Small dense matrix, row major.
struct Mat {
    std::size_t rows = 0, cols = 0;
    std::vector<double> a;
    double& at(std::size_t i, std::size_t j) { return a[i * cols + j]; }
    double at(std::size_t i, std::size_t j) const { return a[i * cols + j]; }
};

struct FactorReduction {
    Sample reduced;        // z = T1 ztilde_1, x = T2 ztilde_2
    Mat t1, t2;            // left inverses of the two blocks
    double residual1 = 0;  // ||T1 A1 - I||_F
    double residual2 = 0;
};

// Lemma-1 reduction of ztilde = A x* + u with A = [A1; A2], both blocks of
// rank d. split = number of rows in A1.
FactorReduction reduce_factor_model(const Mat& a, std::size_t split,
                                    const std::vector<double>& ztilde, std::size_t n);

// Low-frequency identified part: phi restricted to the zero component of
// W_u, plus a flag function (1 where not identified).
std::pair<GridFn, GridFn> identified_component(const GridFn& phi, const SupportMask& w_u);

// Relative sup of |a*b - c| over the identified components of the mask.
double reconstruction_residual(const GridFn& a, const GridFn& b, const GridFn& c,
                               const SupportMask& mask);

}  // namespace convlab
