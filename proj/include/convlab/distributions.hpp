#pragma once

#include "convlab/grid.hpp"

#include <cstdint>
#include <memory>
#include <random>
#include <string>

namespace convlab {

// Deterministic RNG wrapper: explicit sampling algorithms on top of
// mt19937_64 so sequences do not depend on the standard library build.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    double uniform() {  // (0, 1)
        const std::uint64_t r = eng_();
        return (static_cast<double>(r >> 11) + 0.5) * (1.0 / 9007199254740992.0);
    }

    double normal() {  // Marsaglia polar
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double f = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * f;
        have_spare_ = true;
        return u * f;
    }

private:
    std::mt19937_64 eng_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

struct DistSpec {
    enum class Kind { gaussian, laplace, uniform, mixture, cantor, fejer, degenerate };
    Kind kind = Kind::gaussian;
    double a = 0.0;  // gaussian mu | uniform lower | degenerate point
    double b = 1.0;  // gaussian sigma | laplace scale | uniform upper | fejer bandwidth
    int levels = 20;             // cantor construction depth
    double mix_lambda = 0.0;     // mixture: mass at mix_at
    double mix_at = 0.0;
    std::shared_ptr<DistSpec> cont;  // mixture continuous part

    static DistSpec gaussian(double mu, double sigma);
    static DistSpec laplace(double scale);
    static DistSpec uniform(double lo, double hi);
    static DistSpec degenerate(double at);
    static DistSpec cantor(int levels);
    static DistSpec fejer(double bandwidth);
    static DistSpec mixture(double lambda, double at, DistSpec continuous);
};

cplx dist_cf(const DistSpec& d, double s);
double dist_mean(const DistSpec& d);
double dist_var(const DistSpec& d);
double dist_draw(const DistSpec& d, Rng& rng);

// CF on a frequency grid; multivariate components are iid per axis.
GridFn true_cf(const DistSpec& d, const Grid& freq);

// Parse "gaussian:0:1", "laplace:0.3", "uniform:-1:1", "degenerate:0",
// "cantor:20", "fejer:2", "mixture:0.3:0:gaussian:0:1".
DistSpec parse_dist(const std::string& text);
std::string format_dist(const DistSpec& d);

struct GSpec {
    enum class Kind { constant, linear, quadratic, indicator, bump_sum };
    Kind kind = Kind::constant;
    double a = 1.0, b = 0.0;       // constant:a | linear:a:b -> a + b*x
    double c1 = -1.0, c2 = 1.0;    // bump centers
    double width = 0.1;            // bump width
};

double g_eval(const GSpec& g, double x);
GSpec parse_g(const std::string& text);
std::string format_g(const GSpec& g);

}  // namespace convlab
