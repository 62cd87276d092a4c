#pragma once

#include "convlab/grid.hpp"

#include <optional>

namespace convlab {

// Raw observations. Column blocks are row-major n x d; y/y2 are scalar.
struct Sample {
    int d = 1;
    std::size_t n = 0;
    std::vector<double> z;   // n*d, always present
    std::vector<double> x;   // n*d or empty
    std::vector<double> y;   // n or empty
    std::vector<double> y2;  // n or empty (third measurement, ar1)

    bool has_x() const { return !x.empty(); }
    bool has_y() const { return !y.empty(); }
    double zv(std::size_t j, int k) const { return z[j * static_cast<std::size_t>(d) + static_cast<std::size_t>(k)]; }
    double xv(std::size_t j, int k) const { return x[j * static_cast<std::size_t>(d) + static_cast<std::size_t>(k)]; }
};

void validate_sample(const Sample& s);

// Empirical CF  phi(s) = n^{-1} sum_j e^{i s.z_j}  on a frequency grid.
// phi(0) = 1 exactly and the result is hermitian by construction (phases are
// accumulated symmetrically from the origin outward).
GridFn ecf(const std::vector<double>& data, int d, const Grid& freq);

// n^{-1} sum_j c_j e^{i s.z_j}; linear in the weights.
GridFn weighted_ecf(const std::vector<double>& weights, const std::vector<double>& data,
                    int d, const Grid& freq);

// eps_k = sign * i * n^{-1} sum_j x_{jk} e^{i s.z_j}. The default sign (+1)
// is pinned by the Gaussian oracle identity eps_k = (phi_xstar)'_k phi_u.
GridFn epsilon_k(const Sample& s, int k, const Grid& freq, int sign = +1);

// Exact derivative of the ECF: (phi_z)'_k(s) = i n^{-1} sum_j z_{jk} e^{i s.z_j}.
GridFn ecf_derivative(const Sample& s, int k, const Grid& freq);

// Uniform ECF fluctuation scale used for thresholds downstream.
double sigma_ecf(std::size_t n, std::size_t grid_points);

// Nadaraya-Watson estimate of E(c | z) at space-grid nodes, Gaussian kernel.
// Nodes with kernel density below floor_rel * max are flagged (value kept).
struct CondMean {
    GridFn values;                       // real-valued, on the space grid
    std::vector<std::uint8_t> flagged;   // 1 = local density too low
};
CondMean conditional_mean_on_grid(const std::vector<double>& c, const Sample& s,
                                  const Grid& space, double bandwidth,
                                  double floor_rel = 1e-3);

double silverman_bandwidth(const Sample& s);

// Frequency-domain known functions feeding the solvers. eps_k are the
// kappa-system numerators gamma_k, gamma_dk the exact derivative of the
// system's base function gamma (phi_z for model 3/4, phi_{z-x} for 4a,
// eps for 5/7).
struct MomentFns {
    GridFn phi_z;
    std::optional<GridFn> phi_x;
    std::optional<GridFn> phi_zx;
    std::optional<GridFn> eps;
    std::vector<GridFn> eps_k;
    std::vector<GridFn> gamma_dk;
    std::optional<GridFn> ftw_x, ftw_y, ft_zfz;  // ar1 weighted moments
    double mean_y = 0.0;
    double rms_y = 1.0;        // scale of the eps weights, for thresholds
    double noise_scale = 0.0;  // sigma_ecf for sampled input, 0 for exact
};

MomentFns moments_model3(const Sample& s, const Grid& freq);   // also model 4 (adds phi_x)
MomentFns moments_model4a(const Sample& s, const Grid& freq);
MomentFns moments_model5(const Sample& s, const Grid& freq);
MomentFns moments_model7(const Sample& s, const GridPair& grids, double bandwidth);
MomentFns moments_ar1(const Sample& s, const Grid& freq);

}  // namespace convlab
