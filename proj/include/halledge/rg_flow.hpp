#pragma once

#include "luttinger.hpp"

#include <array>
#include <optional>

namespace halledge {

// Interaction convention: the Grassmann weight is exp(-V) with
//   V = sum_{a<b} U_ab sum_{k1-k2+k3-k4=0} psi+_{k1,a} psi-_{k2,a} psi+_{k3,b} psi-_{k4,b},
// U_ab = lambda_ab Z_a Z_b, and <psi-_k psi+_k> = g(k) = f(k) / (Z D(k)).
// Kernels below are coefficients in -W, with exp(-W(phi)) = int P(dpsi) exp(-V(psi + phi));
// contractions inside a single vertex are excluded (normal ordering).

struct ScaleShell {
    int h = 0;
    int hmin = -40;

    double operator()(double k0, double k1, double v) const { return shell(channel_norm(k0, k1, v), h, hmin); }
};

struct FlowState {
    int h = 0;
    RVec Z, v;
    RMat lambda;
    RVec nu;

    int channels() const { return int(v.size()); }

    double U(int a, int b) const { return lambda(a, b) * Z(a) * Z(b); }

    static FlowState initial(const RVec& v, const RMat& lambda)
    {
        FlowState s;
        s.v = v;
        s.Z = RVec::Ones(v.size());
        s.lambda = lambda;
        s.nu = RVec::Zero(v.size());
        return s;
    }

    void validate() const
    {
        const int n = channels();
        require(n >= 1 && Z.size() == n && lambda.rows() == n && lambda.cols() == n, ErrorKind::config,
                "flow state sizes disagree");
        for (int a = 0; a < n; ++a) {
            require(v(a) != 0.0 && Z(a) > 0, ErrorKind::validation, "flow state needs v != 0 and Z > 0");
            require(lambda(a, a) == 0.0, ErrorKind::validation, "couplings must have zero diagonal");
            for (int b = 0; b < n; ++b)
                require(lambda(a, b) == lambda(b, a), ErrorKind::validation, "couplings must be symmetric");
        }
    }
};

// f_h(k) / (Z (-i k0 + v k1)); Z, v are the state's values on scale h-1.
inline cplx single_scale_propagator(int h, int w, double k0, double k1, const FlowState& s, int hmin = -40)
{
    const double f = ScaleShell{h, hmin}(k0, k1, s.v(w));
    if (f == 0.0) return 0.0;
    return f / (s.Z(w) * D(k0, k1, s.v(w)));
}

// Position-space single-scale propagator by a direct Fourier sum over the box [-2^{h+1}, 2^{h+1}]^2
// (in rescaled units k1 -> v k1); the integrand is smooth and compactly supported, so the sum is
// spectrally accurate for |x| well below the aliasing period.
inline cplx single_scale_position(int h, int w, double x0, double x1, const FlowState& s, int n_grid = 256,
                                  int hmin = -40)
{
    const double R = std::ldexp(1.0, h + 1), dk = 2 * R / n_grid;
    const double v = s.v(w);
    std::vector<cplx> rows = parallel_map<cplx>(std::size_t(n_grid), [&](std::size_t i) {
        const double q0 = -R + (i + 0.5) * dk;
        cplx acc = 0;
        for (int j = 0; j < n_grid; ++j) {
            const double q1 = -R + (j + 0.5) * dk; // rescaled k1
            const double f = shell(std::hypot(q0, q1), h, hmin);
            if (f == 0.0) continue;
            acc += std::polar(1.0, -(q0 * x0 + q1 / v * x1)) * f / (s.Z(w) * cplx(q1, -q0));
        }
        return acc;
    });
    cplx sum = 0;
    for (const auto& r : rows) sum += r;
    return sum * dk * dk / (4 * pi * pi * std::abs(v));
}

struct DecayBound {
    double C = 0; // max_x |g(x)| (1 + (2^h |x|)^3) / (2^h / Z)
    double sup_momentum = 0; // max_k |g(k)| * 2^h * Z
};

inline DecayBound single_scale_bounds(int h, int w, const FlowState& s, int n_grid = 256)
{
    DecayBound b;
    const double sc = std::ldexp(1.0, h);
    for (double r : {0.0, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0})
        for (int ang = 0; ang < 8; ++ang) {
            const double th = two_pi * ang / 8;
            const double x0 = r / sc * std::cos(th), x1 = r / sc * std::sin(th) * std::abs(s.v(w));
            const double val = std::abs(single_scale_position(h, w, x0, x1, s, n_grid));
            b.C = std::max(b.C, val * (1 + std::pow(r, 3)) / (sc / s.Z(w)));
        }
    for (int i = 0; i <= 400; ++i) {
        const double r = sc * (0.5 + 1.5 * i / 400.0);
        for (int ang = 0; ang < 16; ++ang) {
            const double th = two_pi * ang / 16;
            const double k0 = r * std::cos(th), k1 = r * std::sin(th) / s.v(w);
            b.sup_momentum = std::max(b.sup_momentum, std::abs(single_scale_propagator(h, w, k0, k1, s)) * sc * s.Z(w));
        }
    }
    return b;
}

// ---------------------------------------------------------------------------
// Discrete-measure evaluator on an n x n fermionic torus: k = c (m + 1/2),
// index arithmetic mod n with representatives in [-n/2, n/2), unit measure.

struct DiscreteGrid {
    int n = 16;
    double c = 0.3;
    int shell_h = 0;
    int hmin = -40;

    int wrap(int m) const
    {
        int r = ((m % n) + n) % n;
        return r >= n / 2 ? r - n : r;
    }
    double momentum(int m) const { return c * (wrap(m) + 0.5); }
};

using GridIndex = std::array<int, 2>;

inline cplx grid_propagator(const DiscreteGrid& G, const FlowState& s, int w, GridIndex m)
{
    const double k0 = G.momentum(m[0]), k1 = G.momentum(m[1]);
    return single_scale_propagator(G.shell_h, w, k0, k1, s, G.hmin);
}

// Pi_alpha(p) = sum_q g(q) g(q + p) with p a bosonic index.
inline cplx grid_bubble(const DiscreteGrid& G, const FlowState& s, int alpha, GridIndex p)
{
    cplx acc = 0;
    for (int a = -G.n / 2; a < G.n / 2; ++a)
        for (int b = -G.n / 2; b < G.n / 2; ++b)
            acc += grid_propagator(G, s, alpha, {a, b}) * grid_propagator(G, s, alpha, {a + p[0], b + p[1]});
    return acc;
}

// Second-order four-point kernel: coefficient of phi+_{k1,a} phi-_{k2,a} phi+_{k3,b} phi-_{k4,b} in -W
// (a < b, k1 - k2 + k3 - k4 = 0):
//   - sum_{alpha != a,b} U_{a alpha} U_{alpha b} Pi_alpha(k1 - k2)
//   + U_ab^2 [ sum_p g_a(k1 - p) g_b(k3 + p) + sum_p g_a(k1 - p) g_b(k4 - k1 + p) ... ]
// written below with explicit index arithmetic.
inline cplx grid_gamma2(const DiscreteGrid& G, const FlowState& s, int a, int b, GridIndex k1, GridIndex k2,
                        GridIndex k3, GridIndex /*k4*/)
{
    cplx out = 0;
    const GridIndex q{k1[0] - k2[0], k1[1] - k2[1]};
    for (int al = 0; al < s.channels(); ++al) {
        if (al == a || al == b) continue;
        out -= s.U(a, al) * s.U(al, b) * grid_bubble(G, s, al, q);
    }
    cplx ladder = 0;
    for (int p0 = -G.n / 2; p0 < G.n / 2; ++p0)
        for (int p1 = -G.n / 2; p1 < G.n / 2; ++p1) {
            const cplx ga = grid_propagator(G, s, a, {k1[0] - p0, k1[1] - p1});
            if (ga == 0.0) continue;
            ladder += ga * grid_propagator(G, s, b, {k3[0] + p0, k3[1] + p1});
            ladder += ga * grid_propagator(G, s, b, {k1[0] + k3[0] - k2[0] - p0, k1[1] + k3[1] - k2[1] - p1});
        }
    return out + s.U(a, b) * s.U(a, b) * ladder;
}

// Second-order self-energy: coefficient of phi+_{k,w} phi-_{k,w} in -W,
//   Sigma_w(k) = - sum_alpha U_{w alpha}^2 sum_p g_w(k - p) Pi_alpha(p).
inline cplx grid_self_energy(const DiscreteGrid& G, const FlowState& s, int w, GridIndex k)
{
    cplx out = 0;
    for (int al = 0; al < s.channels(); ++al) {
        if (al == w || s.U(w, al) == 0.0) continue;
        cplx acc = 0;
        for (int p0 = -G.n / 2; p0 < G.n / 2; ++p0)
            for (int p1 = -G.n / 2; p1 < G.n / 2; ++p1) {
                const cplx gw = grid_propagator(G, s, w, {k[0] - p0, k[1] - p1});
                if (gw == 0.0) continue;
                acc += gw * grid_bubble(G, s, al, {p0, p1});
            }
        out -= s.U(w, al) * s.U(w, al) * acc;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Continuum evaluation by shell quadrature.

// Pi_alpha(p) with cutoffs removed: -(1/Z^2) (i p0 + v p1) / (4 pi |v| (-i p0 + v p1)).
inline cplx bubble_full(double p0, double p1, double v, double Z)
{
    return -bubble_closed(p0, p1, v) / (D(p0, p1, v) * Z * Z);
}

// Sunset self-energy with g_w on the single shell h and the closed-form inner bubble.
inline cplx self_energy(const FlowState& s, int w, int h, double k0, double k1, const QuadratureSpec& quad,
                        int hmin = -40)
{
    const double vw = s.v(w);
    std::vector<double> bp = {std::ldexp(1.0, h - 1), std::ldexp(1.0, h), std::ldexp(1.0, h + 1)};
    cplx out = 0;
    for (int al = 0; al < s.channels(); ++al) {
        if (al == w || s.U(w, al) == 0.0) continue;
        // q = k - p in rescaled coordinates (q0, v_w q1), centered at the origin
        auto r = polar_refine(
            0, 0, bp, quad,
            [&](double q0, double q1r) {
                const double f = shell(std::hypot(q0, q1r), h, hmin);
                if (f == 0.0) return cplx(0.0);
                const double q1 = q1r / vw;
                const cplx g = f / (s.Z(w) * cplx(q1r, -q0));
                return g * bubble_full(k0 - q0, k1 - q1, s.v(al), s.Z(al));
            },
            std::ldexp(1.0, -h) * 1e-6);
        out -= s.U(w, al) * s.U(w, al) * r.value / (4 * pi * pi * std::abs(vw));
    }
    return out;
}

struct BetaEvaluation {
    int h = 0;
    RVec z0, z1;
    RMat beta_lambda;
    RVec beta_v;
    RMat shell_bubbles; // Pi^{(h)}_alpha(0) per channel (row 0), diagnostic
    double ladder_max = 0;
    double tolerance = 0; // quadrature noise floor for beta_lambda
};

inline BetaEvaluation beta_second_order(const FlowState& s, int h, const QuadratureSpec& quad = {})
{
    s.validate();
    const int n = s.channels();
    BetaEvaluation be;
    be.h = h;
    be.z0 = RVec::Zero(n);
    be.z1 = RVec::Zero(n);
    be.beta_lambda = RMat::Zero(n, n);
    be.beta_v = RVec::Zero(n);
    be.shell_bubbles = RMat::Zero(1, n);
    if (s.lambda.cwiseAbs().maxCoeff() == 0.0) return be;

    // Pi^{(h)}_alpha(0): shell pairs (h1, h2) with min(h1, h2) = h; disjoint shells vanish.
    std::vector<std::pair<int, int>> pairs = {{h, h}};
    if (h + 1 <= 0) pairs.insert(pairs.end(), {{h, h + 1}, {h + 1, h}});
    CVec Pi0 = CVec::Zero(n);
    double noise = 0;
    for (int al = 0; al < n; ++al) {
        cplx acc = 0;
        for (auto [h1, h2] : pairs) {
            auto r = same_chirality_bubble(h1, h2, s.v(al), quad);
            acc += r.value / (s.Z(al) * s.Z(al));
            noise += r.error / (s.Z(al) * s.Z(al));
        }
        Pi0(al) = acc;
        be.shell_bubbles(0, al) = std::abs(acc);
    }
    // Ladder terms at zero external momenta: g_a(-p) (g_b(p) + g_b(-p)), evaluated pointwise.
    for (int a = 0; a < n; ++a)
        for (int b = a + 1; b < n; ++b) {
            // rescaled coordinates (p0, v_a p1) so that the g_a support is the annulus [2^{h-1}, 2^{h+1}]
            const double va = s.v(a);
            auto lad = polar_refine(0, 0, {std::ldexp(1.0, h - 1), std::ldexp(1.0, h), std::ldexp(1.0, h + 1)}, quad,
                                    [&](double p0, double p1r) {
                                        const double p1 = p1r / va;
                                        const cplx ga = single_scale_propagator(h, a, -p0, -p1, s);
                                        cplx gb = 0;
                                        for (auto [h1, h2] : pairs) {
                                            if (h1 != h) continue;
                                            gb += single_scale_propagator(h2, b, p0, p1, s) +
                                                  single_scale_propagator(h2, b, -p0, -p1, s);
                                        }
                                        return ga * gb;
                                    });
            be.ladder_max = std::max(be.ladder_max, std::abs(lad.value));
            cplx gamma = s.U(a, b) * s.U(a, b) * lad.value / (4 * pi * pi * std::abs(va));
            for (int al = 0; al < n; ++al)
                if (al != a && al != b) gamma -= s.U(a, al) * s.U(al, b) * Pi0(al);
            be.beta_lambda(a, b) = be.beta_lambda(b, a) = -gamma.real() / (s.Z(a) * s.Z(b));
        }
    double umax = 0;
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) umax = std::max(umax, std::abs(s.U(a, b)));
    be.tolerance = std::max(1e-14, umax * umax * noise);

    // z0, z1 by symmetric differences of Sigma at k = 0 with step 2^{h-3}.
    const double d = std::ldexp(1.0, h - 3);
    for (int w = 0; w < n; ++w) {
        const cplx sp0 = self_energy(s, w, h, d, 0, quad), sm0 = self_energy(s, w, h, -d, 0, quad);
        const cplx sp1 = self_energy(s, w, h, 0, d, quad), sm1 = self_energy(s, w, h, 0, -d, quad);
        const cplx d0 = (sp0 - sm0) / (2 * d), d1 = (sp1 - sm1) / (2 * d);
        be.z0(w) = (d0 / (I * s.Z(w))).real();
        be.z1(w) = (-d1 / s.Z(w)).real();
        be.beta_v(w) = (s.v(w) + be.z1(w)) / (1 + be.z0(w)) - s.v(w);
    }
    return be;
}

// ---------------------------------------------------------------------------
// Flow iteration.

struct ContainmentBounds {
    double c = 1.0;  // |Z_h / Z_{h-1}| <= e^{c |lambda|}
    double C = 10.0; // |v_h - v_0| <= C |lambda|, |lambda_h| <= C |lambda|
};

struct FlowTrajectory {
    std::vector<FlowState> states; // h = 0, -1, ..., h_min
    std::vector<BetaEvaluation> betas;
};

inline FlowTrajectory flow_run(const FlowState& initial, int h_min, const ContainmentBounds& cb = {},
                               const QuadratureSpec& quad = {})
{
    require(h_min < 0, ErrorKind::config, "flow needs h_min < 0");
    initial.validate();
    const double lam = initial.lambda.cwiseAbs().maxCoeff();
    FlowTrajectory tr;
    FlowState s = initial;
    s.h = 0;
    tr.states.push_back(s);
    for (int h = 0; h > h_min; --h) {
        auto be = beta_second_order(s, h, quad);
        FlowState n = s;
        n.h = h - 1;
        for (int w = 0; w < s.channels(); ++w) {
            n.Z(w) = s.Z(w) * (1 + be.z0(w));
            n.v(w) = s.Z(w) * (s.v(w) + be.z1(w)) / n.Z(w);
        }
        n.lambda = s.lambda + be.beta_lambda;
        for (int w = 0; w < s.channels(); ++w) {
            const bool okZ = std::abs(std::log(n.Z(w) / s.Z(w))) <= cb.c * lam + 1e-15;
            const bool okv = std::abs(n.v(w) - initial.v(w)) <= cb.C * lam + 1e-15;
            if (!okZ || !okv)
                throw Error(ErrorKind::convergence, "flow left the containment region at scale h=" + std::to_string(h - 1) +
                                                        " (channel " + std::to_string(w) + ")");
        }
        if (n.lambda.cwiseAbs().maxCoeff() > cb.C * lam + 1e-15)
            throw Error(ErrorKind::convergence, "running coupling exceeded its bound at scale h=" + std::to_string(h - 1));
        tr.betas.push_back(be);
        tr.states.push_back(n);
        s = n;
    }
    return tr;
}

struct VanishingReport {
    bool vanishing_at_truncation = false; // |beta_lambda| below the noise floor at every scale
    std::optional<double> theta;          // fitted decay exponent when resolvable
    double max_beta_lambda = 0;
    double max_tolerance = 0;
    std::vector<double> eta;              // per channel, from Z_h ~ 2^{-eta h}
    double max_lambda_drift = 0;
    double max_v_drift = 0;
    double beta_v_max = 0;
    std::optional<double> theta_v;
    std::string summary;
};

inline VanishingReport vanishing_beta_report(const FlowTrajectory& tr)
{
    require(tr.betas.size() >= 10, ErrorKind::config, "vanishing-beta report needs at least 10 scales");
    VanishingReport r;
    const auto& s0 = tr.states.front();
    std::vector<double> hs, logb, logbv;
    bool all_below = true;
    for (const auto& b : tr.betas) {
        const double m = b.beta_lambda.cwiseAbs().maxCoeff();
        r.max_beta_lambda = std::max(r.max_beta_lambda, m);
        r.max_tolerance = std::max(r.max_tolerance, b.tolerance);
        if (m > b.tolerance) all_below = false;
        hs.push_back(b.h);
        logb.push_back(std::log2(std::max(m, 1e-300)));
        const double bv = b.beta_v.cwiseAbs().maxCoeff();
        r.beta_v_max = std::max(r.beta_v_max, bv);
        logbv.push_back(std::log2(std::max(bv, 1e-300)));
    }
    r.vanishing_at_truncation = all_below;
    if (!all_below) r.theta = fit_line(hs, logb).slope;
    // beta_v at the level of rounding carries no scaling information
    if (r.beta_v_max > 1e-12 * s0.v.cwiseAbs().maxCoeff()) r.theta_v = fit_line(hs, logbv).slope;
    for (const auto& st : tr.states) {
        r.max_lambda_drift = std::max(r.max_lambda_drift, (st.lambda - s0.lambda).cwiseAbs().maxCoeff());
        r.max_v_drift = std::max(r.max_v_drift, (st.v - s0.v).cwiseAbs().maxCoeff());
    }
    for (int w = 0; w < s0.channels(); ++w) {
        std::vector<double> x, y;
        for (const auto& st : tr.states) {
            x.push_back(st.h);
            y.push_back(std::log2(st.Z(w)));
        }
        r.eta.push_back(-fit_line(x, y).slope);
    }
    r.summary = all_below ? "vanishing at truncation order: |beta_lambda| below quadrature tolerance at all scales"
                          : "beta_lambda resolved above quadrature tolerance; fitted decay exponent reported";
    return r;
}

} // namespace halledge
