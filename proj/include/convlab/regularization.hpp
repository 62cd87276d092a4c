#pragma once

#include "convlab/grid.hpp"

#include <vector>

namespace convlab {

// Tail behaviour of an error CF; decides between well-posed plug-in
// estimation and the spectral cut-off.
struct RegularityClass {
    enum class Kind {
        ordinary_smooth,     // |phi| ~ |s|^{-p}
        supersmooth,         // |phi| ~ exp(-c |s|^k)
        bounded_support,     // phi vanishes beyond a radius
        mass_point_mixture,  // |phi| floored at lambda > 0
        inconclusive
    };
    Kind kind = Kind::inconclusive;
    double p = 0.0;
    int k = 0;
    double c = 0.0;
    double floor_lambda = 0.0;
    double fit_residual = 0.0;
};

// Fit log|phi_u| on the tail window |s| in [s_max/2, s_max] against the
// ordinary-smooth and supersmooth (k = 1, 2) models; floor and bounded
// support are detected first.
RegularityClass classify_smoothness(const GridFn& phi_u, double noise_floor = 0.0);

// Weighted integral of Eq.-style class membership:
//   value = trapezoid of prod_i (1+t_i^2)^{-m_i} |b(t)| over the grid,
// certificate = value < V.
std::pair<bool, double> check_phi_class(const GridFn& b, const std::vector<int>& m, double v_bound);

struct CutoffRule {
    double r_n = 0.0;   // input-estimator rate
    int k = 1;          // supersmooth order
    double b_bar = 0.0; // ball radius
};

// B_bar = safety * (ln r_n)^{1/k}, strictly below the admissible bound.
CutoffRule lemma2_cutoff(double r_n, int k, double safety = 0.9);

// phi * I(||s|| < B_bar).
GridFn apply_cutoff(const GridFn& phi, const CutoffRule& rule);

// Labeled heuristic, not a paper rule: largest radius on which |phi_u|
// stays above tau everywhere.
double heuristic_cutoff_radius(const GridFn& phi_u, double tau);

}  // namespace convlab
