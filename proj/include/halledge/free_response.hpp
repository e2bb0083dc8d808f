#pragma once

#include "edge_spectrum.hpp"

#include <limits>

namespace halledge {

// ---------------------------------------------------------------------------
// Site-basis vertex operators on the fiber space.
//
// A term a+_{x+du} A a-_{x+dw} Fourier-summed with e^{i p x1} becomes
// sum_k c+_k A c_{k+p} e^{i k du1 - i (k+p) dw1}; all operators below are the
// (M*L2)x(M*L2) matrices between c+_k and c_{k+p}.

struct CurrentOptions {
    bool drop_diagonal = false; // mutation control: discard bonds with both offsets nonzero
};

// Density at row x2: the projector onto that row.
inline CMat density_operator(int M, int L2, int x2)
{
    CMat P = CMat::Zero(M * L2, M * L2);
    P.block(x2 * M, x2 * M, M, M).setIdentity();
    return P;
}

struct CurrentOperators {
    std::vector<CMat> j1; // j1[x2]: current along e1 attributed to row x2
    std::vector<CMat> j2; // j2[x2]: current along e2 across the line between rows x2 and x2+1
};

// Bond flows u -> w are split in half along the two L-shaped lattice paths,
// which reproduces the unit-bond plus half-weighted diagonal-bond current for
// range sqrt(2) and keeps the continuity equation exact for any range.
inline CurrentOperators current_operators(const LatticeHamiltonian& H, double k, double p,
                                          const CurrentOptions& opt = {})
{
    const int M = H.M(), L2 = H.L2(), n = H.dim();
    CurrentOperators J;
    J.j1.assign(L2, CMat::Zero(n, n));
    J.j2.assign(L2, CMat::Zero(n, n));
    auto phase = [&](int du1, int dw1) { return std::polar(1.0, k * du1 - (k + p) * dw1); };
    for (const auto& hb : H.blocks()) {
        const int z = hb.offset1, r = hb.row, c = hb.col;
        if (z == 0 && r == c) continue;
        if (opt.drop_diagonal && z != 0 && r != c) continue;
        // flow from P = (X, r) to Q = (X - z, c) carried by i a+_P B a-_Q
        const CMat iB = I * hb.block;
        if (z != 0) {
            cplx ph(0.0);
            double w;
            if (z < 0) { // Q to the right of P: lines x1 = X + m
                w = 0.5;
                for (int m = 0; m < -z; ++m) ph += phase(-m, -z - m);
            } else { // Q to the left: lines x1 = X - z + m, flow against e1
                w = -0.5;
                for (int m = 0; m < z; ++m) ph += phase(z - m, -m);
            }
            J.j1[r].block(r * M, c * M, M, M) += w * ph * iB;
            J.j1[c].block(r * M, c * M, M, M) += w * ph * iB;
        }
        if (r != c) {
            const double s = c > r ? 0.5 : -0.5;
            const cplx ph = phase(0, -z) + phase(z, 0); // columns P1 and Q1
            for (int line = std::min(r, c); line < std::max(r, c); ++line)
                J.j2[line].block(r * M, c * M, M, M) += s * ph * iB;
        }
    }
    return J;
}

// ---------------------------------------------------------------------------
// Eigenbases on the momentum grid 2 pi n / L1.

class FiberCache {
public:
    FiberCache(const LatticeHamiltonian& H, int L1) : H_(H), L1_(L1)
    {
        require(L1 >= 4, ErrorKind::config, "L1 must be >= 4");
        pairs_ = parallel_map<Eigenpairs>(std::size_t(L1), [&](std::size_t i) {
            return physical_eigenpairs(H.fiber(momentum(int(i))), H.M(), H.L2());
        });
    }

    const LatticeHamiltonian& hamiltonian() const { return H_; }
    int L1() const { return L1_; }
    double momentum(int n) const { return two_pi * double(((n % L1_) + L1_) % L1_) / L1_; }
    const Eigenpairs& at(int n) const { return pairs_[((n % L1_) + L1_) % L1_]; }

private:
    LatticeHamiltonian H_;
    int L1_;
    std::vector<Eigenpairs> pairs_;
};

struct Thermal {
    double mu = 0;
    double T = 0; // temperature; 0 selects the ground state

    double occupation(double e) const
    {
        if (T <= 0) return e < mu ? 1.0 : (e > mu ? 0.0 : 0.5);
        const double x = (e - mu) / T;
        if (x > 0) {
            const double ex = std::exp(-x);
            return ex / (1 + ex);
        }
        return 1.0 / (1.0 + std::exp(x));
    }
};

// Spectral weight for the pair (e_a at k, e_b at k+p):
// (n(e_a) - n(e_b)) / (i p0 + e_a - e_b) = (1/beta) sum_{k0} g_a(k0) g_b(k0 + p0),
// with g = (-i k0 + e - mu)^{-1}. With this sign a mode of velocity v = de/dk1
// contributes sgn(v)/2pi to the edge conductance.
inline cplx spectral_weight(const Thermal& th, double p0, double ea, double eb)
{
    const double na = th.occupation(ea), nb = th.occupation(eb);
    if (p0 == 0.0 && std::abs(ea - eb) < 1e-12) {
        if (th.T > 0) return -na * (1 - na) / th.T;
        if ((ea - th.mu) * (eb - th.mu) <= 0 && (std::abs(ea - th.mu) < 1e-12 || std::abs(eb - th.mu) < 1e-12))
            throw Error(ErrorKind::numeric,
                        "degenerate crossing at the chemical potential (e_a = e_b = mu at p0 = 0); shift mu or the "
                        "momentum grid");
        return 0.0;
    }
    return (na - nb) / (cplx(0.0, p0) + ea - eb);
}

// Row-resolved vertex in the band bases: phi(k)^dagger O phi(k+p).
inline CMat band_vertex(const Eigenpairs& left, const CMat& O, const Eigenpairs& right)
{
    return left.vectors.adjoint() * O * right.vectors;
}

enum class Channel { density = 0, current1 = 1, current2 = 2 };

inline std::vector<CMat> site_vertices(const LatticeHamiltonian& H, double k, double p, Channel ch,
                                       const CurrentOptions& opt = {})
{
    const int L2 = H.L2();
    if (ch == Channel::density) {
        std::vector<CMat> out;
        for (int x2 = 0; x2 < L2; ++x2) out.push_back(density_operator(H.M(), L2, x2));
        return out;
    }
    auto J = current_operators(H, k, p, opt);
    return ch == Channel::current1 ? J.j1 : J.j2;
}

struct VertexSet {
    std::vector<CMat> N;  // density vertex per row
    std::vector<CMat> J1; // current vertex per row
};

inline VertexSet build_vertices(const LatticeHamiltonian& H, double k1, double p1, const Eigenpairs& at_k,
                                const Eigenpairs& at_kp, const CurrentOptions& opt = {})
{
    require(at_k.vectors.rows() == H.dim() && at_kp.vectors.rows() == H.dim(), ErrorKind::validation,
            "fiber dimension mismatch between eigenbases and Hamiltonian");
    VertexSet vs;
    const int M = H.M();
    for (int x2 = 0; x2 < H.L2(); ++x2)
        vs.N.push_back(at_k.vectors.middleRows(x2 * M, M).adjoint() * at_kp.vectors.middleRows(x2 * M, M));
    auto J = current_operators(H, k1, p1, opt);
    for (int x2 = 0; x2 < H.L2(); ++x2) vs.J1.push_back(band_vertex(at_k, J.j1[x2], at_kp));
    return vs;
}

inline VertexSet build_vertices(const LatticeHamiltonian& H, double k1, double p1, const CurrentOptions& opt = {})
{
    auto a = physical_eigenpairs(H.fiber(k1), H.M(), H.L2());
    auto b = physical_eigenpairs(H.fiber(k1 + p1), H.M(), H.L2());
    return build_vertices(H, k1, p1, a, b, opt);
}

// ---------------------------------------------------------------------------
// Current-current correlation tables.

struct ResponseResult {
    double p0 = 0, p1 = 0;
    int mu_index = 0, nu_index = 0;
    std::vector<int> rows_x, rows_y;
    CMat table; // table(i, j) = S(p; rows_x[i], rows_y[j])
};

// (1/L1) sum_k sum_ab V^mu_ab(k,p;x2) V^nu_ba(k+p,-p;y2) F(e_a(k), e_b(k+p)),
// with p1 = 2 pi n_p / L1.
inline ResponseResult current_current(const FiberCache& fc, const Thermal& th, double p0, int n_p, Channel mu,
                                      Channel nu, const std::vector<int>& rows_x, const std::vector<int>& rows_y,
                                      const CurrentOptions& opt = {})
{
    const auto& H = fc.hamiltonian();
    const int L1 = fc.L1();
    const double p1 = two_pi * n_p / L1;
    ResponseResult res;
    res.p0 = p0;
    res.p1 = p1;
    res.mu_index = int(mu);
    res.nu_index = int(nu);
    res.rows_x = rows_x;
    res.rows_y = rows_y;
    auto per_k = parallel_map<CMat>(std::size_t(L1), [&](std::size_t i) {
        const int n = int(i);
        const double k = fc.momentum(n);
        const auto& A = fc.at(n);
        const auto& B = fc.at(n + n_p);
        auto Om = site_vertices(H, k, p1, mu, opt);
        auto On = site_vertices(H, k + p1, -p1, nu, opt);
        const int nb = int(A.energies.size());
        CMat F(nb, nb);
        for (int a = 0; a < nb; ++a)
            for (int b = 0; b < nb; ++b) F(a, b) = spectral_weight(th, p0, A.energies(a), B.energies(b));
        CMat out(rows_x.size(), rows_y.size());
        std::vector<CMat> Vy;
        for (int y : rows_y) Vy.push_back(band_vertex(B, On[y], A).transpose()); // (a,b) <- V^nu_ba
        for (std::size_t i2 = 0; i2 < rows_x.size(); ++i2) {
            CMat VF = band_vertex(A, Om[rows_x[i2]], B).cwiseProduct(F);
            for (std::size_t j2 = 0; j2 < rows_y.size(); ++j2) out(i2, j2) = VF.cwiseProduct(Vy[j2]).sum();
        }
        return out;
    });
    res.table = CMat::Zero(rows_x.size(), rows_y.size());
    for (const auto& m : per_k) res.table += m; // ascending k order
    res.table /= double(L1);
    return res;
}

inline std::vector<int> all_rows(int L2)
{
    std::vector<int> r(L2);
    for (int i = 0; i < L2; ++i) r[i] = i;
    return r;
}

struct WardResult {
    double residual = 0; // max over components
    double scale = 0;    // magnitude of the correlations entering the sum
};

// Charge-conservation sum rule: sum_{x2} S_{0,i}((p0,0); x2, y2) for i = 1, 2.
inline WardResult ward_sum_rule(const FiberCache& fc, const Thermal& th, double p0, int y2,
                                const CurrentOptions& opt = {})
{
    require(p0 != 0.0, ErrorKind::config, "sum rule needs a nonzero frequency p0");
    const int L2 = fc.hamiltonian().L2();
    WardResult w;
    for (Channel ch : {Channel::current1, Channel::current2}) {
        auto r = current_current(fc, th, p0, 0, Channel::density, ch, all_rows(L2), {y2}, opt);
        w.residual = std::max(w.residual, std::abs(r.table.col(0).sum()));
        w.scale = std::max(w.scale, r.table.cwiseAbs().maxCoeff());
    }
    return w;
}

// Free two-point function (-i k0 + H(k1) - mu)^{-1} on the physical rows.
inline CMat free_propagator(const LatticeHamiltonian& H, double mu, double k0, double k1)
{
    const int M = H.M(), n = M * (H.L2() - 2);
    CMat A = H.fiber(k1).block(M, M, n, n);
    A.diagonal().array() += cplx(-mu, -k0);
    return A.partialPivLu().inverse();
}

struct VertexWardResult {
    double residual = 0;     // summed identity
    double row_residual = 0; // row-resolved continuity with the transverse current
    double scale = 0;
};

// Vertex identity at lambda = 0 with S_{1,2;mu}(p,k; z2) = G(k) V_mu(k,p; z2) G(k+p):
//   p0 sum S_0 + (1 - e^{i p1}) sum S_1 = i G(k) - i G(k+p).
// The row-resolved form adds the e2-divergence: for every z2,
//   i (H(k) P_z - P_z H(k+p)) + (1 - e^{i p1}) J1(z) + J2(z) - J2(z-1) = 0.
inline VertexWardResult vertex_ward_check(const LatticeHamiltonian& H, double mu, double p0, double p1, double k0,
                                          double k1, const CurrentOptions& opt = {})
{
    const int M = H.M(), L2 = H.L2(), n = M * (L2 - 2);
    auto Gk = free_propagator(H, mu, k0, k1);
    auto Gkp = free_propagator(H, mu, k0 + p0, k1 + p1);
    auto J = current_operators(H, k1, p1, opt);
    CMat sumJ1 = CMat::Zero(H.dim(), H.dim());
    for (const auto& j : J.j1) sumJ1 += j;
    const CMat S0 = Gk * Gkp;
    const CMat S1 = Gk * sumJ1.block(M, M, n, n) * Gkp;
    const cplx f = 1.0 - std::polar(1.0, p1);
    const CMat R = p0 * S0 + f * S1 - I * Gk + I * Gkp;
    VertexWardResult out;
    out.scale = std::max({max_abs(Gk), max_abs(Gkp), 1.0});
    out.residual = max_abs(R) / out.scale;

    const CMat Hk = H.fiber(k1), Hkp = H.fiber(k1 + p1);
    double hs = std::max(1.0, max_abs(Hk));
    for (int z = 0; z < L2; ++z) {
        const CMat P = density_operator(M, L2, z);
        CMat C = I * (Hk * P - P * Hkp) + f * J.j1[z] + J.j2[z];
        if (z > 0) C -= J.j2[z - 1];
        out.row_residual = std::max(out.row_residual, max_abs(C) / hs);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Edge conductance of the free lattice model.

struct StripSweep {
    int a = 10;      // density strip x2 <= a
    int aprime = 5;  // current strip y2 <= a'
    int p1_count = 3;
};

struct ConductanceEstimate {
    std::vector<double> p1;
    std::vector<cplx> G;
    double G_extrapolated = 0;
    double imag_extrapolated = 0; // imaginary part carried through the same fit
    double stderr_extrapolation = 0;
    double max_imag = 0;
    double opposite_order = 0; // p1 -> 0 first at small p0 (diagnostic)
};

// sum_k sum_ab A_ab(k) B_ba(k) w(e_a(k), e_b(k+p)) / L1 for strip-summed vertices.
template <class W>
cplx strip_kernel(const FiberCache& fc, int n_p, Channel mu, int a, Channel nu, int aprime, W&& weight,
                  const CurrentOptions& opt = {})
{
    const auto& H = fc.hamiltonian();
    const int L1 = fc.L1();
    const double p1 = two_pi * n_p / L1;
    auto strip = [&](const std::vector<CMat>& ops, int upto) {
        CMat s = CMat::Zero(H.dim(), H.dim());
        for (int x2 = 0; x2 <= upto && x2 < int(ops.size()); ++x2) s += ops[x2];
        return s;
    };
    auto per_k = parallel_map<cplx>(std::size_t(L1), [&](std::size_t i) {
        const int n = int(i);
        const double k = fc.momentum(n);
        const auto& A = fc.at(n);
        const auto& B = fc.at(n + n_p);
        const CMat Va = band_vertex(A, strip(site_vertices(H, k, p1, mu, opt), a), B);
        const CMat Vb = band_vertex(B, strip(site_vertices(H, k + p1, -p1, nu, opt), aprime), A);
        cplx acc = 0;
        for (int x = 0; x < Va.rows(); ++x)
            for (int y = 0; y < Va.cols(); ++y)
                acc += Va(x, y) * Vb(y, x) * weight(A.energies(x), B.energies(y));
        return acc;
    });
    cplx sum = 0;
    for (const auto& v : per_k) sum += v;
    return sum / double(L1);
}

inline cplx strip_conductance(const FiberCache& fc, double mu, int n_p, int a, int aprime, double p0 = 0.0)
{
    Thermal th{mu, 0.0};
    return strip_kernel(fc, n_p, Channel::density, a, Channel::current1, aprime,
                        [&](double ea, double eb) { return spectral_weight(th, p0, ea, eb); });
}

inline ConductanceEstimate edge_conductance_free(const FiberCache& fc, double mu, const StripSweep& sw)
{
    require(sw.aprime < sw.a, ErrorKind::config, "strip widths must satisfy a' < a");
    require(sw.a < fc.hamiltonian().L2(), ErrorKind::config, "strip width a must be below L2");
    require(sw.p1_count >= 3, ErrorKind::config, "p1 extrapolation needs at least 3 momenta");
    ConductanceEstimate est;
    for (int n = 1; n <= sw.p1_count; ++n) {
        est.p1.push_back(two_pi * n / fc.L1());
        est.G.push_back(strip_conductance(fc, mu, n, sw.a, sw.aprime));
        est.max_imag = std::max(est.max_imag, std::abs(est.G.back().imag()));
    }
    std::vector<double> x(est.p1.begin(), est.p1.begin() + 3), y;
    for (int i = 0; i < 3; ++i) y.push_back(est.G[i].real());
    auto lf = fit_line(x, y);
    est.G_extrapolated = lf.intercept;
    std::vector<double> yi;
    for (int i = 0; i < 3; ++i) yi.push_back(est.G[i].imag());
    est.imag_extrapolated = fit_line(x, yi).intercept;
    double rss = 0;
    for (int i = 0; i < 3; ++i) rss += std::pow(y[i] - lf.intercept - lf.slope * x[i], 2);
    double mx = (x[0] + x[1] + x[2]) / 3, sxx = 0;
    for (double xi : x) sxx += (xi - mx) * (xi - mx);
    est.stderr_extrapolation = std::sqrt(rss / 1.0 * (1.0 / 3 + mx * mx / sxx));
    est.opposite_order = strip_conductance(fc, mu, 0, sw.a, sw.aprime, 1e-9).real();
    return est;
}

// ---------------------------------------------------------------------------
// Wick rotation: real-time commutator integral vs Euclidean correlation.

struct WickResult {
    cplx lhs, rhs;
    double residual = 0;
    double eta_beta = 0;
};

inline double nearest_bosonic(double eta, double beta)
{
    const double w = two_pi / beta;
    return w * std::round(eta / w);
}

// lhs = (1/L1) int_{-T}^0 dt e^{eta t} <[n^{<=a}_{p1}(t), j^{<=a'}_{1,-p1}]>, in closed form per eigenpair;
// rhs = the same integral continued to the imaginary axis at the bosonic frequency eta_beta, i.e.
// (1/L1) sum A_ab B_ba (n_a - n_b) / (eta_beta + i (e_a - e_b)), from the Gibbs-state spectral form.
inline WickResult wick_rotation_check(const FiberCache& fc, double mu, double beta, double T_horizon, double eta,
                                      int n_p, int a, int aprime)
{
    require(beta > 0 && std::isfinite(beta), ErrorKind::config, "Wick check needs a finite beta");
    require(eta > 0, ErrorKind::config, "Wick check needs eta > 0");
    WickResult w;
    w.eta_beta = nearest_bosonic(eta, beta);
    require(w.eta_beta != 0.0, ErrorKind::numeric,
            "nearest bosonic frequency to eta is zero: beta too small for the requested eta");
    Thermal th{mu, 1.0 / beta};
    w.lhs = strip_kernel(fc, n_p, Channel::density, a, Channel::current1, aprime, [&](double ea, double eb) {
        const cplx z(eta, ea - eb);
        return (th.occupation(ea) - th.occupation(eb)) * (1.0 - std::exp(-z * T_horizon)) / z;
    });
    w.rhs = strip_kernel(fc, n_p, Channel::density, a, Channel::current1, aprime, [&](double ea, double eb) {
        return (th.occupation(ea) - th.occupation(eb)) / cplx(w.eta_beta, ea - eb);
    });
    w.residual = std::abs(w.lhs - w.rhs);
    return w;
}

} // namespace halledge
