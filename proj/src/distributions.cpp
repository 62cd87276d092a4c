#include "convlab/distributions.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace convlab {

DistSpec DistSpec::gaussian(double mu, double sigma) {
    if (!(sigma > 0.0)) throw std::invalid_argument("gaussian: sigma must be positive");
    DistSpec d;
    d.kind = Kind::gaussian;
    d.a = mu;
    d.b = sigma;
    return d;
}
DistSpec DistSpec::laplace(double scale) {
    if (!(scale > 0.0)) throw std::invalid_argument("laplace: scale must be positive");
    DistSpec d;
    d.kind = Kind::laplace;
    d.b = scale;
    return d;
}
DistSpec DistSpec::uniform(double lo, double hi) {
    if (!(hi > lo)) throw std::invalid_argument("uniform: need hi > lo");
    DistSpec d;
    d.kind = Kind::uniform;
    d.a = lo;
    d.b = hi;
    return d;
}
DistSpec DistSpec::degenerate(double at) {
    DistSpec d;
    d.kind = Kind::degenerate;
    d.a = at;
    return d;
}
DistSpec DistSpec::cantor(int levels) {
    if (levels < 1 || levels > 40) throw std::invalid_argument("cantor: levels in 1..40");
    DistSpec d;
    d.kind = Kind::cantor;
    d.levels = levels;
    return d;
}
DistSpec DistSpec::fejer(double bandwidth) {
    if (!(bandwidth > 0.0)) throw std::invalid_argument("fejer: bandwidth must be positive");
    DistSpec d;
    d.kind = Kind::fejer;
    d.b = bandwidth;
    return d;
}
DistSpec DistSpec::mixture(double lambda, double at, DistSpec continuous) {
    if (!(lambda > 0.0 && lambda <= 1.0)) throw std::invalid_argument("mixture: lambda in (0,1]");
    DistSpec d;
    d.kind = Kind::mixture;
    d.mix_lambda = lambda;
    d.mix_at = at;
    d.cont = std::make_shared<DistSpec>(std::move(continuous));
    return d;
}

cplx dist_cf(const DistSpec& d, double s) {
    switch (d.kind) {
        case DistSpec::Kind::gaussian:
            return std::exp(cplx{-0.5 * d.b * d.b * s * s, d.a * s});
        case DistSpec::Kind::laplace:
            return cplx{1.0 / (1.0 + d.b * d.b * s * s), 0.0};
        case DistSpec::Kind::uniform: {
            if (s == 0.0) return cplx{1.0, 0.0};
            const cplx num = std::exp(cplx{0.0, s * d.b}) - std::exp(cplx{0.0, s * d.a});
            return num / (cplx{0.0, s} * (d.b - d.a));
        }
        case DistSpec::Kind::degenerate:
            return std::exp(cplx{0.0, s * d.a});
        case DistSpec::Kind::cantor: {
            cplx p{1.0, 0.0};
            double pow3 = 1.0 / 3.0;
            for (int j = 0; j < d.levels; ++j) {
                p *= std::cos(s * pow3);
                pow3 /= 3.0;
            }
            return p;
        }
        case DistSpec::Kind::fejer: {
            const double t = 1.0 - std::abs(s) / d.b;
            return cplx{t > 0.0 ? t : 0.0, 0.0};
        }
        case DistSpec::Kind::mixture:
            return d.mix_lambda * std::exp(cplx{0.0, s * d.mix_at}) +
                   (1.0 - d.mix_lambda) * dist_cf(*d.cont, s);
    }
    throw std::logic_error("dist_cf: unreachable");
}

double dist_mean(const DistSpec& d) {
    switch (d.kind) {
        case DistSpec::Kind::gaussian: return d.a;
        case DistSpec::Kind::laplace: return 0.0;
        case DistSpec::Kind::uniform: return 0.5 * (d.a + d.b);
        case DistSpec::Kind::degenerate: return d.a;
        case DistSpec::Kind::cantor: return 0.0;
        case DistSpec::Kind::fejer: return 0.0;
        case DistSpec::Kind::mixture:
            return d.mix_lambda * d.mix_at + (1.0 - d.mix_lambda) * dist_mean(*d.cont);
    }
    throw std::logic_error("dist_mean: unreachable");
}

double dist_var(const DistSpec& d) {
    switch (d.kind) {
        case DistSpec::Kind::gaussian: return d.b * d.b;
        case DistSpec::Kind::laplace: return 2.0 * d.b * d.b;
        case DistSpec::Kind::uniform: {
            const double w = d.b - d.a;
            return w * w / 12.0;
        }
        case DistSpec::Kind::degenerate: return 0.0;
        case DistSpec::Kind::cantor: {
            // sum of independent +-3^{-j}: sum 9^{-j}, j = 1..levels
            double v = 0.0, p = 1.0 / 9.0;
            for (int j = 0; j < d.levels; ++j) {
                v += p;
                p /= 9.0;
            }
            return v;
        }
        case DistSpec::Kind::fejer: return std::numeric_limits<double>::infinity();
        case DistSpec::Kind::mixture: {
            const double mu = dist_mean(d);
            const double m_at = d.mix_at - mu;
            const double mc = dist_mean(*d.cont) - mu;
            return d.mix_lambda * m_at * m_at +
                   (1.0 - d.mix_lambda) * (dist_var(*d.cont) + mc * mc);
        }
    }
    throw std::logic_error("dist_var: unreachable");
}

double dist_draw(const DistSpec& d, Rng& rng) {
    switch (d.kind) {
        case DistSpec::Kind::gaussian:
            return d.a + d.b * rng.normal();
        case DistSpec::Kind::laplace: {
            const double u = rng.uniform() - 0.5;
            return -d.b * (u < 0 ? -1.0 : 1.0) * std::log(1.0 - 2.0 * std::abs(u));
        }
        case DistSpec::Kind::uniform:
            return d.a + (d.b - d.a) * rng.uniform();
        case DistSpec::Kind::degenerate:
            return d.a;
        case DistSpec::Kind::cantor: {
            double x = 0.0, p = 1.0 / 3.0;
            for (int j = 0; j < d.levels; ++j) {
                x += (rng.uniform() < 0.5 ? -1.0 : 1.0) * p;
                p /= 3.0;
            }
            return x;
        }
        case DistSpec::Kind::fejer: {
            // rejection from min(B/2pi, 2/(pi B x^2)); crossover at |x| = 2/B
            const double bb = d.b;
            const double xc = 2.0 / bb;
            for (;;) {
                const double branch = rng.uniform();
                double x, env;
                if (branch < 0.5) {
                    x = (2.0 * rng.uniform() - 1.0) * xc;
                    env = bb / (2.0 * kPi);
                } else {
                    const double u = rng.uniform();
                    x = xc / u;
                    if (branch < 0.75) x = -x;
                    env = 2.0 / (kPi * bb * x * x);
                }
                const double t = bb * x;
                const double f = (1.0 - std::cos(t)) / (kPi * bb * x * x);
                if (rng.uniform() * env <= f) return x;
            }
        }
        case DistSpec::Kind::mixture:
            return rng.uniform() < d.mix_lambda ? d.mix_at : dist_draw(*d.cont, rng);
    }
    throw std::logic_error("dist_draw: unreachable");
}

GridFn true_cf(const DistSpec& d, const Grid& freq) {
    if (freq.domain != Domain::frequency)
        throw std::invalid_argument("true_cf: need a frequency grid");
    return sample_fn(freq, [&](const double* s) {
        cplx p{1.0, 0.0};
        for (int k = 0; k < freq.dim; ++k) p *= dist_cf(d, s[k]);
        return p;
    }, true);
}

namespace {

std::vector<std::string> split_colon(const std::string& text) {
    std::vector<std::string> parts;
    std::string cur;
    for (char ch : text) {
        if (ch == ':') {
            parts.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    parts.push_back(cur);
    return parts;
}

double to_real(const std::string& s) {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("bad number: " + s);
    return v;
}

}  // namespace

DistSpec parse_dist(const std::string& text) {
    const auto p = split_colon(text);
    const std::string& k = p[0];
    auto need = [&](std::size_t n) {
        if (p.size() != n + 1)
            throw std::invalid_argument("distribution '" + k + "' takes " + std::to_string(n) +
                                        " parameters: " + text);
    };
    if (k == "gaussian") {
        need(2);
        return DistSpec::gaussian(to_real(p[1]), to_real(p[2]));
    }
    if (k == "laplace") {
        need(1);
        return DistSpec::laplace(to_real(p[1]));
    }
    if (k == "uniform") {
        need(2);
        return DistSpec::uniform(to_real(p[1]), to_real(p[2]));
    }
    if (k == "degenerate") {
        need(1);
        return DistSpec::degenerate(to_real(p[1]));
    }
    if (k == "cantor") {
        need(1);
        return DistSpec::cantor(static_cast<int>(to_real(p[1])));
    }
    if (k == "fejer") {
        need(1);
        return DistSpec::fejer(to_real(p[1]));
    }
    if (k == "mixture") {
        if (p.size() < 4) throw std::invalid_argument("mixture needs lambda:at:continuous-spec");
        std::string rest;
        for (std::size_t i = 3; i < p.size(); ++i) {
            if (i > 3) rest += ":";
            rest += p[i];
        }
        return DistSpec::mixture(to_real(p[1]), to_real(p[2]), parse_dist(rest));
    }
    throw std::invalid_argument("unknown distribution: " + text);
}

std::string format_dist(const DistSpec& d) {
    std::ostringstream os;
    os.precision(17);
    switch (d.kind) {
        case DistSpec::Kind::gaussian: os << "gaussian:" << d.a << ":" << d.b; break;
        case DistSpec::Kind::laplace: os << "laplace:" << d.b; break;
        case DistSpec::Kind::uniform: os << "uniform:" << d.a << ":" << d.b; break;
        case DistSpec::Kind::degenerate: os << "degenerate:" << d.a; break;
        case DistSpec::Kind::cantor: os << "cantor:" << d.levels; break;
        case DistSpec::Kind::fejer: os << "fejer:" << d.b; break;
        case DistSpec::Kind::mixture:
            os << "mixture:" << d.mix_lambda << ":" << d.mix_at << ":" << format_dist(*d.cont);
            break;
    }
    return os.str();
}

double g_eval(const GSpec& g, double x) {
    switch (g.kind) {
        case GSpec::Kind::constant: return g.a;
        case GSpec::Kind::linear: return g.a + g.b * x;
        case GSpec::Kind::quadratic: return x * x;
        case GSpec::Kind::indicator: return x > 0.0 ? 1.0 : 0.0;
        case GSpec::Kind::bump_sum: {
            const double d1 = (x - g.c1) / g.width;
            const double d2 = (x - g.c2) / g.width;
            return std::exp(-0.5 * d1 * d1) + std::exp(-0.5 * d2 * d2);
        }
    }
    throw std::logic_error("g_eval: unreachable");
}

GSpec parse_g(const std::string& text) {
    const auto p = split_colon(text);
    GSpec g;
    if (p[0] == "constant") {
        g.kind = GSpec::Kind::constant;
        g.a = p.size() > 1 ? to_real(p[1]) : 1.0;
        return g;
    }
    if (p[0] == "linear") {
        if (p.size() != 3) throw std::invalid_argument("linear needs a:b");
        g.kind = GSpec::Kind::linear;
        g.a = to_real(p[1]);
        g.b = to_real(p[2]);
        return g;
    }
    if (p[0] == "quadratic") {
        g.kind = GSpec::Kind::quadratic;
        return g;
    }
    if (p[0] == "indicator") {
        g.kind = GSpec::Kind::indicator;
        return g;
    }
    if (p[0] == "bump_sum") {
        if (p.size() != 4) throw std::invalid_argument("bump_sum needs c1:c2:width");
        g.kind = GSpec::Kind::bump_sum;
        g.c1 = to_real(p[1]);
        g.c2 = to_real(p[2]);
        g.width = to_real(p[3]);
        if (!(g.width > 0.0)) throw std::invalid_argument("bump_sum width must be positive");
        return g;
    }
    throw std::invalid_argument("unknown regression function: " + text);
}

std::string format_g(const GSpec& g) {
    std::ostringstream os;
    os.precision(17);
    switch (g.kind) {
        case GSpec::Kind::constant: os << "constant:" << g.a; break;
        case GSpec::Kind::linear: os << "linear:" << g.a << ":" << g.b; break;
        case GSpec::Kind::quadratic: os << "quadratic"; break;
        case GSpec::Kind::indicator: os << "indicator"; break;
        case GSpec::Kind::bump_sum:
            os << "bump_sum:" << g.c1 << ":" << g.c2 << ":" << g.width;
            break;
    }
    return os.str();
}

}  // namespace convlab
