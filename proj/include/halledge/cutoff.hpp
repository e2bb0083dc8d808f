#pragma once

#include "core.hpp"

#include <sstream>

namespace halledge {

// Smooth cutoff: 1 on [0,1], 0 beyond 2, quintic smoothstep in between.
inline double smoothstep5(double t)
{
    if (t <= 0) return 0.0;
    if (t >= 1) return 1.0;
    return t * t * t * (t * (6 * t - 15) + 10);
}

inline double chi(double s) { return 1.0 - smoothstep5(std::abs(s) - 1.0); }

// Derivative of chi for s >= 0.
inline double chi_prime(double s)
{
    const double t = std::abs(s) - 1.0;
    if (t <= 0 || t >= 1) return 0.0;
    return -30.0 * t * t * (t - 1) * (t - 1);
}

// Gaussian mollification: chi^eps(t) = (1/sqrt(pi)) sum_i w_i chi(|t + sqrt(eps) x_i|).
class MollifiedCutoff {
public:
    explicit MollifiedCutoff(double eps = 0.0) : eps_(eps)
    {
        require(eps >= 0, ErrorKind::config, "mollification width must be >= 0");
        if (eps > 0) gauss_hermite(32, x_, w_);
    }

    double eps() const { return eps_; }

    double operator()(double t) const
    {
        if (eps_ == 0.0) return chi(t);
        double s = 0;
        const double se = std::sqrt(eps_);
        for (std::size_t i = 0; i < x_.size(); ++i) s += w_[i] * chi(std::abs(t + se * x_[i]));
        return s / std::sqrt(pi);
    }

private:
    double eps_;
    std::vector<double> x_, w_;
};

// ||k||_omega = sqrt(k0^2 + v^2 k1^2).
inline double channel_norm(double k0, double k1, double v) { return std::hypot(k0, v * k1); }

// chi_{[h,N]} as a function of the channel norm r: infrared hole below 2^h, ultraviolet cutoff at 2^N.
inline double chi_band(double r, int h, int N)
{
    return (1.0 - chi(std::ldexp(r, -h))) * chi(std::ldexp(r, -N));
}

inline double chi_band(double r, int h, int N, const MollifiedCutoff& c)
{
    return (1.0 - c(std::ldexp(r, -h))) * c(std::ldexp(r, -N));
}

// Single-scale support f_h = chi_{[hmin,h]} - chi_{[hmin,h-1]}, living on 2^{h-1} <= r <= 2^{h+1}.
inline double shell(double r, int h, int hmin)
{
    return chi_band(r, hmin, h) - chi_band(r, hmin, h - 1);
}

// ---------------------------------------------------------------------------
// Polar tensor quadrature: Gauss-Legendre 4 points per cell in r and theta.

struct QuadratureSpec {
    int r_cells = 8;     // per radial segment
    int theta_cells = 16;
    double tol = 1e-10;  // relative change between successive halvings
    int max_levels = 8;
};

struct QuadratureResult {
    cplx value;
    double error = 0;
    int levels = 0;
    long nodes = 0;
};

// Integral over the region centered at c with radii in [bp.front(), bp.back()] of f(k0, k1) d^2k,
// with the radial breakpoints bp treated as cell boundaries.
template <class F>
cplx polar_cells(double c0, double c1, const std::vector<double>& bp, int nr, int nt, F&& f, long* nodes = nullptr)
{
    static const auto gl = [] {
        std::pair<std::vector<double>, std::vector<double>> q;
        gauss_legendre(4, q.first, q.second);
        return q;
    }();
    const auto& [x, w] = gl;
    auto per_theta = parallel_map<cplx>(std::size_t(nt), [&](std::size_t it) {
        const double t0 = two_pi * double(it) / nt, t1 = two_pi * double(it + 1) / nt;
        cplx acc = 0;
        for (std::size_t seg = 0; seg + 1 < bp.size(); ++seg) {
            const double ra = bp[seg], rb = bp[seg + 1];
            for (int ir = 0; ir < nr; ++ir) {
                const double r0 = ra + (rb - ra) * ir / nr, r1 = ra + (rb - ra) * (ir + 1) / nr;
                for (int a = 0; a < 4; ++a) {
                    const double r = 0.5 * (r0 + r1) + 0.5 * (r1 - r0) * x[a];
                    const double wr = 0.5 * (r1 - r0) * w[a] * r;
                    for (int b = 0; b < 4; ++b) {
                        const double th = 0.5 * (t0 + t1) + 0.5 * (t1 - t0) * x[b];
                        const double wt = 0.5 * (t1 - t0) * w[b];
                        acc += wr * wt * f(c0 + r * std::cos(th), c1 + r * std::sin(th));
                    }
                }
            }
        }
        return acc;
    });
    cplx s = 0;
    for (const auto& v : per_theta) s += v;
    if (nodes) *nodes += long(nt) * long(bp.size() - 1) * nr * 16;
    return s;
}

// Halves cells until successive estimates agree to spec.tol (relative, floor `scale`).
template <class F>
QuadratureResult polar_refine(double c0, double c1, const std::vector<double>& bp, const QuadratureSpec& spec, F&& f,
                              double scale = 1.0)
{
    QuadratureResult res;
    int nr = spec.r_cells, nt = spec.theta_cells;
    cplx prev = polar_cells(c0, c1, bp, nr, nt, f, &res.nodes);
    for (int lvl = 1; lvl <= spec.max_levels; ++lvl) {
        nr *= 2;
        nt *= 2;
        cplx cur = polar_cells(c0, c1, bp, nr, nt, f, &res.nodes);
        res.error = std::abs(cur - prev);
        res.value = cur;
        res.levels = lvl;
        if (res.error <= spec.tol * std::max(scale, std::abs(cur))) return res;
        prev = cur;
    }
    std::ostringstream os;
    os << "quadrature did not converge: estimate " << res.value << ", last change " << res.error;
    throw Error(ErrorKind::convergence, os.str());
}

} // namespace halledge
