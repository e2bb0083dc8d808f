#pragma once

#include "cutoff.hpp"

#include <random>
#include <sstream>

namespace halledge {

// ---------------------------------------------------------------------------
// Parameters of the multi-channel reference model.

struct LuttingerParams {
    RVec v;          // channel velocities
    RVec Z;          // field strengths
    RMat Lambda;     // symmetric, zero diagonal
    double p_cut = 4.0;

    int channels() const { return int(v.size()); }

    // (Lambda_Z)_{w1 w2} = lambda_{w1 w2} Z_{w2} / Z_{w1}
    RMat lambda_Z() const
    {
        const int n = channels();
        RMat L(n, n);
        for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b) L(a, b) = Lambda(a, b) * Z(b) / Z(a);
        return L;
    }

    // kappa = diag(1 / (4 pi |v|))
    RMat kappa() const
    {
        RVec k(channels());
        for (int a = 0; a < channels(); ++a) k(a) = 1.0 / (4 * pi * std::abs(v(a)));
        return k.asDiagonal();
    }

    double spectral_radius() const
    {
        RMat K = kappa() * lambda_Z();
        return K.eigenvalues().cwiseAbs().maxCoeff();
    }

    void validate() const
    {
        const int n = channels();
        require(n >= 1, ErrorKind::config, "reference model needs at least one channel");
        require(Z.size() == n && Lambda.rows() == n && Lambda.cols() == n, ErrorKind::config,
                "v, Z and Lambda sizes disagree");
        for (int a = 0; a < n; ++a) {
            require(v(a) != 0.0, ErrorKind::validation, "channel velocities must be nonzero");
            require(Z(a) > 0.0, ErrorKind::validation, "field strengths must be positive");
            require(Lambda(a, a) == 0.0, ErrorKind::validation, "coupling matrix must have zero diagonal");
            for (int b = 0; b < n; ++b)
                require(Lambda(a, b) == Lambda(b, a), ErrorKind::validation, "coupling matrix must be symmetric");
        }
        require(p_cut > 0, ErrorKind::config, "form-factor cutoff must be positive");
        const double rho = spectral_radius();
        require(rho < 1.0, ErrorKind::validation,
                "inadmissible couplings: spectral radius of kappa*Lambda_Z is " + std::to_string(rho) + " >= 1");
    }
};

// Random admissible parameters: |v| in [0.3, 2] with random sign, Z in [0.5, 2],
// Lambda entries uniform in [-scale, scale], redrawn until the spectral radius is below `guard`.
inline LuttingerParams random_params(std::mt19937_64& rng, int n, double scale, double guard = 0.9)
{
    std::uniform_real_distribution<double> U(0.0, 1.0);
    LuttingerParams p;
    p.v.resize(n);
    p.Z.resize(n);
    for (int a = 0; a < n; ++a) {
        p.v(a) = (U(rng) < 0.5 ? -1.0 : 1.0) * (0.3 + 1.7 * U(rng));
        p.Z(a) = 0.5 + 1.5 * U(rng);
    }
    for (int attempt = 0; attempt < 1000; ++attempt) {
        p.Lambda = RMat::Zero(n, n);
        for (int a = 0; a < n; ++a)
            for (int b = a + 1; b < n; ++b) p.Lambda(a, b) = p.Lambda(b, a) = scale * (2 * U(rng) - 1);
        if (p.spectral_radius() < guard) return p;
    }
    throw Error(ErrorKind::config, "could not draw admissible couplings; reduce the coupling scale");
}

// ---------------------------------------------------------------------------
// Propagator denominators and the anomalous bubble.

inline cplx D(double p0, double p1, double v) { return cplx(v * p1, -p0); }

// D evaluated at p~ = (p0, -p1).
inline cplx D_tilde(double p0, double p1, double v) { return D(p0, -p1, v); }

inline cplx bubble_closed(double p0, double p1, double v)
{
    require(p0 != 0.0 || p1 != 0.0, ErrorKind::validation, "bubble needs p != 0");
    return -D_tilde(p0, p1, v) / (4 * pi * std::abs(v));
}

struct RegulatorConfig {
    int h = -12;
    int N = 12;
    double a = 0.0;   // lattice spacing; 0 selects the continuum
    double L_box = 0; // box size for the antiperiodic momentum grid
    double eps = 0.0; // mollification width
};

struct BubbleResult {
    cplx value;
    cplx uv, ir;
    double error = 0;
    long nodes = 0;
};

// B^{h,N}(p) = int d^2k/(2pi)^2 chi_{[h,N]}(k) (chi_{[h,N]}(k-p) - chi_{[h,N]}(k+p)) / D(k).
// In the rescaled variables (k0, v k1) the integrand is nonzero only on the
// ultraviolet annulus ||k|| ~ 2^N and on two infrared disks of radius 2^{h+1}
// around k = +-p; elsewhere both shifted cutoffs equal 1.
inline BubbleResult bubble_regularized(double p0, double p1, double v, const RegulatorConfig& reg,
                                       const QuadratureSpec& quad = {})
{
    const double q0 = p0, q1 = v * p1; // rescaled momentum
    const double pn = std::hypot(q0, q1);
    require(pn > 0, ErrorKind::validation, "bubble needs p != 0");
    require(std::ldexp(1.0, reg.h + 2) <= pn && pn <= std::ldexp(1.0, reg.N - 2), ErrorKind::config,
            "bubble quadrature requires 2^{h+2} <= ||p|| <= 2^{N-2}");
    const int h = reg.h, N = reg.N;
    auto Dr = [](double k0, double k1) { return cplx(k1, -k0); };
    const double norm = 1.0 / (4 * pi * pi * std::abs(v)); // (2pi)^-2 and the Jacobian of k1 -> v k1
    BubbleResult out;

    const double R0 = std::ldexp(1.0, N) - pn, R2 = std::ldexp(1.0, N + 1) + pn;
    auto uv = polar_refine(0, 0, {R0, std::ldexp(1.0, N), std::ldexp(1.0, N + 1), R2}, quad,
                           [&](double k0, double k1) {
                               const double c = chi(std::ldexp(std::hypot(k0, k1), -N));
                               if (c == 0.0) return cplx(0.0);
                               const double d = chi(std::ldexp(std::hypot(k0 - q0, k1 - q1), -N)) -
                                                chi(std::ldexp(std::hypot(k0 + q0, k1 + q1), -N));
                               return c * d / Dr(k0, k1);
                           });
    const double rh = std::ldexp(1.0, h), rh1 = std::ldexp(1.0, h + 1);
    // disk around +p: chi_{[h,N]}(k-p) = 1 - chi_h(k-p), the other two factors equal 1
    auto ir_plus = polar_refine(q0, q1, {0.0, rh, rh1}, quad, [&](double k0, double k1) {
        return -chi(std::ldexp(std::hypot(k0 - q0, k1 - q1), -h)) / Dr(k0, k1);
    });
    auto ir_minus = polar_refine(-q0, -q1, {0.0, rh, rh1}, quad, [&](double k0, double k1) {
        return chi(std::ldexp(std::hypot(k0 + q0, k1 + q1), -h)) / Dr(k0, k1);
    });
    out.uv = norm * uv.value;
    out.ir = norm * (ir_plus.value + ir_minus.value);
    out.value = out.uv + out.ir;
    out.error = norm * (uv.error + ir_plus.error + ir_minus.error);
    out.nodes = uv.nodes + ir_plus.nodes + ir_minus.nodes;
    return out;
}

// Free density-density function at finite cutoffs by direct quadrature:
// <n;n>(p) = -int d^2k/(2pi)^2 g(k) g(k-p), g = chi_{[h,N]}/D (Z = 1).
inline cplx density_density_direct(double p0, double p1, double v, int h, int N, const QuadratureSpec& quad = {})
{
    const double q0 = p0, q1 = v * p1;
    auto g = [&](double k0, double k1) {
        const double r = std::hypot(k0, k1);
        const double c = chi_band(r, h, N);
        return c == 0.0 ? cplx(0.0) : c / cplx(k1, -k0);
    };
    // dyadic radial breakpoints from 2^h to 2^{N+1}
    std::vector<double> bp;
    for (int j = h; j <= N + 1; ++j) bp.push_back(std::ldexp(1.0, j));
    auto r = polar_refine(0, 0, bp, quad, [&](double k0, double k1) { return g(k0, k1) * g(k0 - q0, k1 - q1); });
    return -r.value / (4 * pi * pi * std::abs(v));
}

// int d^2k/(2pi)^2 f_{h1}(k) f_{h2}(k) / D(k)^2; with `mutate` the denominator is |D(k)|^2.
inline QuadratureResult same_chirality_bubble(int h1, int h2, double v, const QuadratureSpec& quad = {},
                                              bool mutate = false, int hmin = -30)
{
    const int lo = std::min(h1, h2), hi = std::max(h1, h2);
    std::vector<double> bp;
    for (int j = lo - 1; j <= hi + 1; ++j) bp.push_back(std::ldexp(1.0, j));
    auto res = polar_refine(
        0, 0, bp, quad,
        [&](double k0, double k1) {
            const double r = std::hypot(k0, k1);
            const double f = shell(r, h1, hmin) * shell(r, h2, hmin);
            if (f == 0.0) return cplx(0.0);
            const cplx d(k1, -k0);
            return mutate ? cplx(f / std::norm(d)) : f / (d * d);
        },
        1.0);
    const double norm = 1.0 / (4 * pi * pi * std::abs(v));
    res.value *= norm;
    res.error *= norm;
    return res;
}

// Lattice-regularized propagator (1/Z) chi^eps_{[h,N]}(k) / D_a(k), D_a = -i sin(a k0)/a + v sin(a k1)/a.
inline cplx lattice_propagator(double k0, double k1, double v, double Z, const RegulatorConfig& reg,
                               const MollifiedCutoff& cut)
{
    const double r = channel_norm(k0, k1, v);
    const double c = chi_band(r, reg.h, reg.N, cut);
    if (c == 0.0) return 0.0;
    const cplx Da = reg.a > 0 ? cplx(v * std::sin(reg.a * k1) / reg.a, -std::sin(reg.a * k0) / reg.a) : D(k0, k1, v);
    require(std::abs(Da) > 1e-300, ErrorKind::numeric, "momentum at a singular point of the lattice propagator");
    return c / (Z * Da);
}

// Antiperiodic momentum grid (2pi/L_box)(n + 1/2), n in [-n_max, n_max).
inline std::vector<double> antiperiodic_grid(double L_box, int n_max)
{
    std::vector<double> k;
    for (int n = -n_max; n < n_max; ++n) k.push_back(two_pi / L_box * (n + 0.5));
    return k;
}

// ---------------------------------------------------------------------------
// Closed-form correlators and the conductance algebra.

inline double form_factor(double p0, double p1, double p_cut) { return chi(std::hypot(p0, p1) / p_cut); }

inline CMat bubble_over_D(double p0, double p1, const LuttingerParams& P)
{
    const int n = P.channels();
    CMat B = CMat::Zero(n, n);
    for (int a = 0; a < n; ++a) B(a, a) = bubble_closed(p0, p1, P.v(a)) / D(p0, p1, P.v(a));
    return B;
}

inline CMat T_matrix(double p0, double p1, const LuttingerParams& P)
{
    require(p0 != 0.0 || p1 != 0.0, ErrorKind::validation, "T-matrix needs p != 0");
    const int n = P.channels();
    CMat A = CMat::Identity(n, n) +
             bubble_over_D(p0, p1, P) * P.lambda_Z().cast<cplx>() * form_factor(p0, p1, P.p_cut);
    Eigen::JacobiSVD<CMat> svd(A);
    const double cond = svd.singularValues()(0) / svd.singularValues()(n - 1);
    if (!(cond < 1e12)) {
        std::ostringstream os;
        os << "T-matrix singular at p=(" << p0 << "," << p1 << "), condition number " << cond;
        throw Error(ErrorKind::numeric, os.str());
    }
    return A.inverse();
}

inline CMat density_density(double p0, double p1, const LuttingerParams& P)
{
    RVec z2 = P.Z.array().square().inverse();
    return T_matrix(p0, p1, P) * z2.cast<cplx>().asDiagonal() * bubble_over_D(p0, p1, P);
}

// Closed-form directional limits of T.
inline RMat T_limit_p1_first(const LuttingerParams& P) // lim_{p0->0} lim_{p1->0}
{
    const int n = P.channels();
    return (RMat::Identity(n, n) - P.kappa() * P.lambda_Z()).inverse();
}

inline RMat T_limit_p0_first(const LuttingerParams& P) // lim_{p1->0} lim_{p0->0}
{
    const int n = P.channels();
    return (RMat::Identity(n, n) + P.kappa() * P.lambda_Z()).inverse();
}

// Extrapolation to t = 0 of F(t) sampled along a path, by the quadratic through t = 1e-2, 1e-3, 1e-4.
template <class F>
CMat richardson_zero(F&& f)
{
    const double t[3] = {1e-2, 1e-3, 1e-4};
    CMat v[3] = {f(t[0]), f(t[1]), f(t[2])};
    CMat out = CMat::Zero(v[0].rows(), v[0].cols());
    for (int i = 0; i < 3; ++i) {
        double l = 1;
        for (int j = 0; j < 3; ++j)
            if (j != i) l *= (0 - t[j]) / (t[i] - t[j]);
        out += l * v[i];
    }
    return out;
}

// Path curvatures keeping c t |v|^{-1} and c t |v| small, so the quadratic extrapolation
// remainder stays far below the limit being measured.
inline double path_c_p1_first(const LuttingerParams& P) { return 0.1 / P.v.cwiseAbs().maxCoeff(); }
inline double path_c_p0_first(const LuttingerParams& P) { return 0.1 * P.v.cwiseAbs().minCoeff(); }

// Numerical directional limits along p = (t, c t^2) (p1 -> 0 first) and (c t^2, t) (p0 -> 0 first).
inline CMat T_numeric_p1_first(const LuttingerParams& P)
{
    const double c = path_c_p1_first(P);
    return richardson_zero([&](double t) { return T_matrix(t, c * t * t, P); });
}

inline CMat T_numeric_p0_first(const LuttingerParams& P)
{
    const double c = path_c_p0_first(P);
    return richardson_zero([&](double t) { return T_matrix(c * t * t, t, P); });
}

inline RMat discontinuity_matrix(const LuttingerParams& P)
{
    const int n = P.channels();
    RVec w(n);
    for (int a = 0; a < n; ++a) w(a) = 1.0 / (2 * pi * std::abs(P.v(a)) * P.Z(a) * P.Z(a));
    return T_limit_p0_first(P) * T_limit_p1_first(P) * RMat(w.asDiagonal());
}

// Same matrix as the difference of the two directional limits of the density-density function.
inline CMat discontinuity_numeric(const LuttingerParams& P)
{
    const double ca = path_c_p0_first(P), cb = path_c_p1_first(P);
    CMat a = richardson_zero([&](double t) { return density_density(ca * t * t, t, P); });
    CMat b = richardson_zero([&](double t) { return density_density(t, cb * t * t, P); });
    return a - b;
}

struct VertexRenormalizations {
    RVec Z0, Z1;
    RVec Z0_inverse_T, Z1_inverse_T; // (T^T)^{-1} forms at the two limits
};

inline VertexRenormalizations vertex_renormalizations(const LuttingerParams& P)
{
    const int n = P.channels();
    const RMat LtK = P.lambda_Z().transpose() * P.kappa();
    const RVec vZ = P.v.cwiseProduct(P.Z);
    VertexRenormalizations r;
    r.Z0 = (RMat::Identity(n, n) - LtK) * P.Z;
    r.Z1 = (RMat::Identity(n, n) + LtK) * vZ;
    r.Z0_inverse_T = T_limit_p1_first(P).transpose().inverse() * P.Z;
    r.Z1_inverse_T = T_limit_p0_first(P).transpose().inverse() * vZ;
    return r;
}

inline double edge_conductance_ref(const LuttingerParams& P)
{
    P.validate();
    const auto r = vertex_renormalizations(P);
    return r.Z0.dot(discontinuity_matrix(P) * r.Z1);
}

inline double chirality_sum(const LuttingerParams& P)
{
    double s = 0;
    for (int a = 0; a < P.channels(); ++a) s += sgn(P.v(a));
    return s;
}

// |Z D(p) S^0_{ww}(p) - B^{h,N}(p)/Z| with the free closed form for S^0.
inline double anomaly_residual(double p0, double p1, double v, double Z, const RegulatorConfig& reg,
                               const QuadratureSpec& quad = {})
{
    const cplx S0 = bubble_closed(p0, p1, v) / (D(p0, p1, v) * Z * Z);
    const cplx B = bubble_regularized(p0, p1, v, reg, quad).value;
    return std::abs(Z * D(p0, p1, v) * S0 - B / Z);
}

} // namespace halledge
