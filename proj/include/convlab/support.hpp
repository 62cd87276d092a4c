#pragma once

#include "convlab/grid.hpp"

#include <cstdint>
#include <optional>

namespace convlab {

// Numerical failure distinct from precondition violations; the CLI maps it
// to exit code 3.
struct NumericalError : std::runtime_error {
    explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

struct Component {
    std::vector<std::size_t> indices;        // members, ascending flat order
    std::size_t anchor_index = 0;
    cplx anchor_value{0.0, 0.0};
    bool anchor_known = false;
    bool identified = false;                 // reachable from the zero component
};

// Numerical support {s : |beta(s)| > tau} with its decomposition into
// face-adjacent connected components.
struct SupportMask {
    Grid grid;
    std::vector<std::uint8_t> mask;          // 1 in support
    std::vector<int> component_id;           // -1 off support
    std::vector<Component> components;
    int zero_component = -1;                 // component containing s=0, or -1

    bool in(std::size_t flat) const { return mask[flat] != 0; }
    std::size_t popcount() const;
};

SupportMask detect_support(const GridFn& beta, double tau);

// Build a mask from explicit bits (components labeled, zero component
// anchored at the origin when present).
SupportMask make_mask(const Grid& grid, std::vector<std::uint8_t> bits);

// Restrict a mask to nodes satisfying `keep`; components are recomputed.
SupportMask intersect_mask(const SupportMask& m, const std::vector<std::uint8_t>& keep);

// alpha = gamma/beta on the mask, 0 off it. Off-mask nodes are information,
// not failure; their count is reported through the mask itself.
GridFn safe_divide(const GridFn& gamma, const GridFn& beta, const SupportMask& mask);

enum class FitSide { both, left, right };

// Local polynomial model of beta near an (approximate) zero on a 1-d
// axis-aligned window: beta(t) ~ sum c_r (t - t0)^r with the root refined
// off-grid. order = lowest non-vanishing coefficient, eta = c_order.
struct ZeroFit {
    int axis = 0;
    double root = 0.0;                 // refined zero location (coordinate)
    std::size_t nearest_index = 0;     // grid node closest to the root
    int order = 0;                     // multiplicity m >= 1
    cplx eta{0.0, 0.0};                // beta / (t-root)^m at the root
    std::vector<cplx> poly;            // coefficients in (t - root)^r, r = 0..deg
    double window_halfwidth = 0.0;

    cplx eval(double t) const;         // evaluate the fitted polynomial at t
};

// Least-squares polynomial fit of beta on a window around x0 along `axis`;
// throws NumericalError when every order up to max_order vanishes
// (numerically infinite-order zero -- treat the point as a support boundary).
ZeroFit fit_zero(const GridFn& beta, std::size_t x0_flat, int axis, int max_order,
                 FitSide side = FitSide::both,
                 const std::vector<std::uint8_t>* valid = nullptr);

// Assign an anchor to `target_component` by continuing beta through the
// fitted zero: the anchor point is the in-mask node of the target nearest
// the root (at least min_offset cells away), its value the fit evaluated
// there. Returns the anchor index.
std::size_t extend_across_zero(const ZeroFit& fit, SupportMask& mask,
                               int target_component, int min_offset = 3);

// Least-squares polynomial fit v ~ sum c_r ((t - center)/scale)^r.
std::vector<cplx> poly_fit(const std::vector<double>& t, const std::vector<cplx>& v,
                           int degree, double center, double scale);
cplx poly_eval(const std::vector<cplx>& coeffs, double u);

}  // namespace convlab
