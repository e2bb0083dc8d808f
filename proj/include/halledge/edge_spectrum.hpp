#pragma once

#include "geometry.hpp"

#include <limits>
#include <optional>

namespace halledge {

// Eigenpairs of the fiber restricted to the physical rows 1..L2-2, with
// eigenvectors embedded back into the full (M*L2) index space. The inert
// Dirichlet rows never mix with physical states this way.
inline Eigenpairs physical_eigenpairs(const CMat& fiber, int M, int L2)
{
    const int n = M * (L2 - 2);
    Eigenpairs inner = diagonalize(fiber.block(M, M, n, n));
    Eigenpairs out;
    out.energies = inner.energies;
    out.vectors = CMat::Zero(fiber.rows(), n);
    out.vectors.block(M, 0, n, n) = inner.vectors;
    return out;
}

// Within (quasi-)degenerate eigenspaces the solver basis is arbitrary, and opposite-edge
// states split only by tunnelling across the strip mix freely; rotate the cluster so that
// the lower-half weight is diagonal, separating states of opposite edges.
inline void separate_degenerate(Eigenpairs& ep, int M, int L2, double tol = 1e-6)
{
    const int n = int(ep.energies.size());
    const int half = M * (L2 / 2);
    for (int i = 0; i < n;) {
        int j = i + 1;
        while (j < n && ep.energies(j) - ep.energies(j - 1) < tol) ++j;
        if (j - i > 1) {
            CMat V = ep.vectors.middleCols(i, j - i);
            CMat W = V.topRows(half).adjoint() * V.topRows(half);
            Eigen::SelfAdjointEigenSolver<CMat> es(W);
            ep.vectors.middleCols(i, j - i) = V * es.eigenvectors();
        }
        i = j;
    }
}

// Anything with a Bloch fiber: a lattice Hamiltonian or a synthetic test fiber.
struct FiberSource {
    int M = 1;
    int L2 = 1;
    std::function<Eigenpairs(double)> eig;

    // tunnel_tol: energy splitting below which states are treated as one degenerate cluster.
    static FiberSource from(const LatticeHamiltonian& H, double tunnel_tol = 1e-6)
    {
        FiberSource s;
        s.M = H.M();
        s.L2 = H.L2();
        s.eig = [H, tunnel_tol](double k) {
            auto ep = physical_eigenpairs(H.fiber(k), H.M(), H.L2());
            separate_degenerate(ep, H.M(), H.L2(), tunnel_tol);
            return ep;
        };
        return s;
    }

    // Synthetic source from a fiber function; every row is physical.
    static FiberSource synthetic(int M, int L2, std::function<CMat(double)> f)
    {
        FiberSource s;
        s.M = M;
        s.L2 = L2;
        s.eig = [f](double k) { return diagonalize(f(k)); };
        return s;
    }
};

struct ScanPoint {
    double k1 = 0;
    std::vector<double> energies; // ascending, inside the window
    std::vector<CVec> vectors;
};

struct BandScan {
    std::vector<ScanPoint> points;
    double lo = 0, hi = 0;

    bool empty() const
    {
        for (const auto& p : points)
            if (!p.energies.empty()) return false;
        return true;
    }
};

inline BandScan scan_spectrum(const FiberSource& src, int Nk, double lo, double hi)
{
    require(Nk >= 64, ErrorKind::config, "spectrum scan needs at least 64 momenta");
    require(lo < hi, ErrorKind::config, "energy window must satisfy lo < hi");
    BandScan scan;
    scan.lo = lo;
    scan.hi = hi;
    scan.points = parallel_map<ScanPoint>(std::size_t(Nk), [&](std::size_t i) {
        ScanPoint pt;
        pt.k1 = two_pi * double(i) / Nk;
        Eigenpairs ep;
        try {
            ep = src.eig(pt.k1);
        } catch (const Error& e) {
            throw Error(ErrorKind::numeric, "eigensolver failure at k1 index " + std::to_string(i) + ": " + e.what());
        }
        for (int q = 0; q < ep.energies.size(); ++q) {
            if (ep.energies(q) > lo && ep.energies(q) < hi) {
                pt.energies.push_back(ep.energies(q));
                pt.vectors.push_back(ep.vectors.col(q));
            }
        }
        return pt;
    });
    return scan;
}

enum class EdgeSide { lower, upper };

inline const char* side_name(EdgeSide s) { return s == EdgeSide::lower ? "lower" : "upper"; }

inline std::vector<double> row_weights(const CVec& v, int M, int L2)
{
    std::vector<double> w(L2, 0.0);
    for (int r = 0; r < L2; ++r)
        for (int a = 0; a < M; ++a) w[r] += std::norm(v(r * M + a));
    return w;
}

// Fraction of the weight on rows x2 < L2/2.
inline double lower_weight(const CVec& v, int M, int L2)
{
    auto w = row_weights(v, M, L2);
    double lo = 0, tot = 0;
    for (int r = 0; r < L2; ++r) {
        tot += w[r];
        if (2 * r < L2) lo += w[r];
    }
    return tot > 0 ? lo / tot : 0.5;
}

struct LocalizationFit {
    double rate = 0; // amplitude decay rate per row
    double r2 = 0;
};

// Log-linear fit of the row-weight envelope away from the edge it is attached to.
inline LocalizationFit fit_localization(const CVec& v, int M, int L2, EdgeSide side)
{
    auto w = row_weights(v, M, L2);
    std::vector<double> x, y;
    const double wmax = *std::max_element(w.begin(), w.end());
    // Envelope: running maximum from the far side, so sublattice oscillations do not spoil the fit.
    const int first = 1, last = L2 - 2;
    std::vector<double> env(L2, 0.0);
    if (side == EdgeSide::lower) {
        double run = 0;
        for (int r = last; r >= first; --r) env[r] = run = std::max(run, w[r]);
    } else {
        double run = 0;
        for (int r = first; r <= last; ++r) env[r] = run = std::max(run, w[r]);
    }
    for (int r = first; r <= last; ++r) {
        const int dist = side == EdgeSide::lower ? r : (L2 - 1 - r);
        if (2 * dist > L2) continue;
        if (env[r] <= wmax * 1e-26) continue;
        x.push_back(dist);
        y.push_back(std::log(env[r]));
    }
    LocalizationFit f;
    if (x.size() < 3) {
        f.rate = std::numeric_limits<double>::infinity();
        f.r2 = 1.0;
        return f;
    }
    auto lf = fit_line(x, y);
    f.rate = -0.5 * lf.slope;
    f.r2 = lf.r2;
    return f;
}

struct BranchSample {
    double k1 = 0; // unwrapped along the branch
    double energy = 0;
    CVec vector;
};

struct FermiCrossing {
    double kF = 0; // in [0, 2pi)
    double v = 0;
    double residual = 0;
};

struct EdgeBranch {
    int label = 0;
    EdgeSide side = EdgeSide::lower;
    std::vector<BranchSample> samples;
    std::vector<FermiCrossing> crossings; // filled by fermi_point
    double loc_rate = 0;
    double loc_r2 = 0;

    bool crosses(double mu) const
    {
        for (std::size_t i = 0; i + 1 < samples.size(); ++i)
            if ((samples[i].energy - mu) * (samples[i + 1].energy - mu) <= 0) return true;
        return false;
    }
};

struct EdgeOptions {
    double loc_threshold = 0.9;
    double overlap_threshold = 0.7;
    double v_min = 1e-3;
    double root_tol = 1e-10;
    double fd_step = 1e-4;
};

// Groups in-window states into branches by eigenvector-overlap continuation
// across adjacent momenta (periodic in k1) and assigns each to an edge side.
inline std::vector<EdgeBranch> extract_edge_branches(const BandScan& scan, int M, int L2, double mu,
                                                     const EdgeOptions& opt = {})
{
    (void)mu;
    const int Nk = int(scan.points.size());
    std::vector<EdgeBranch> out;
    if (scan.empty()) return out;

    // Side labels per state; a state failing both tests is a bulk state in the window.
    std::vector<std::vector<EdgeSide>> side(Nk);
    for (int i = 0; i < Nk; ++i) {
        const auto& pt = scan.points[i];
        for (std::size_t s = 0; s < pt.energies.size(); ++s) {
            const double lw = lower_weight(pt.vectors[s], M, L2);
            if (lw >= opt.loc_threshold) side[i].push_back(EdgeSide::lower);
            else if (1.0 - lw >= opt.loc_threshold) side[i].push_back(EdgeSide::upper);
            else {
                std::ostringstream os;
                os << "bulk state inside the edge window (no edge localization): k1=" << pt.k1
                   << " E=" << pt.energies[s] << " lower-half weight=" << lw;
                throw Error(ErrorKind::numeric, os.str());
            }
        }
    }

    // next[i][s] = index of the continuation at i+1 (mod Nk), or -1.
    std::vector<std::vector<int>> next(Nk), prev(Nk);
    for (int i = 0; i < Nk; ++i) {
        next[i].assign(scan.points[i].energies.size(), -1);
        prev[i].assign(scan.points[i].energies.size(), -1);
    }
    for (int i = 0; i < Nk; ++i) {
        const int j = (i + 1) % Nk;
        const auto& a = scan.points[i];
        const auto& b = scan.points[j];
        for (std::size_t s = 0; s < a.energies.size(); ++s) {
            int best = -1;
            double bo = opt.overlap_threshold;
            for (std::size_t t = 0; t < b.energies.size(); ++t) {
                const double o = std::abs(a.vectors[s].dot(b.vectors[t]));
                if (o >= bo && prev[j][t] < 0) {
                    bo = o;
                    best = int(t);
                }
            }
            if (best >= 0) {
                next[i][s] = best;
                prev[j][best] = int(s);
            }
        }
    }

    std::vector<std::vector<bool>> used(Nk);
    for (int i = 0; i < Nk; ++i) used[i].assign(scan.points[i].energies.size(), false);

    auto build = [&](int i0, int s0) {
        EdgeBranch br;
        br.side = side[i0][s0];
        int i = i0, s = s0;
        double kshift = 0;
        while (s >= 0 && !used[i][s]) {
            used[i][s] = true;
            const auto& pt = scan.points[i];
            br.samples.push_back({pt.k1 + kshift, pt.energies[s], pt.vectors[s]});
            const int ns = next[i][s];
            if (i == Nk - 1) kshift += two_pi;
            i = (i + 1) % Nk;
            s = ns;
        }
        // Closed loop: repeat the first sample one period later so crossings at the seam are seen.
        if (s >= 0 && i == i0 && s == s0 && !br.samples.empty()) {
            auto first = br.samples.front();
            first.k1 += two_pi;
            br.samples.push_back(first);
        }
        return br;
    };

    // Open chains start where there is no predecessor; then closed loops.
    for (int pass = 0; pass < 2; ++pass)
        for (int i = 0; i < Nk; ++i)
            for (std::size_t s = 0; s < scan.points[i].energies.size(); ++s) {
                if (used[i][s]) continue;
                if (pass == 0 && prev[i][s] >= 0) continue;
                out.push_back(build(i, int(s)));
            }

    int label = 0;
    for (auto& br : out) {
        br.label = label++;
        // Majority side over the branch (all samples agree for clean edge states).
        int lower = 0;
        for (const auto& smp : br.samples) lower += lower_weight(smp.vector, M, L2) >= 0.5;
        br.side = 2 * lower >= int(br.samples.size()) ? EdgeSide::lower : EdgeSide::upper;
    }
    return out;
}

namespace detail {

// Energy of the state continuing `ref` at momentum k, chosen by maximal overlap.
inline std::pair<double, CVec> track_state(const FiberSource& src, double k, const CVec& ref)
{
    Eigenpairs ep = src.eig(wrap_2pi(k));
    int best = 0;
    double bo = -1;
    for (int q = 0; q < ep.energies.size(); ++q) {
        const double o = std::abs(ref.dot(ep.vectors.col(q)));
        if (o > bo) {
            bo = o;
            best = q;
        }
    }
    return {ep.energies(best), ep.vectors.col(best)};
}

} // namespace detail

// Refines every crossing of the branch with mu by bisection on the exact fiber,
// then differentiates by a Richardson-extrapolated centred difference.
inline std::vector<FermiCrossing> fermi_point(const FiberSource& src, const EdgeBranch& br, double mu,
                                              const EdgeOptions& opt = {})
{
    std::vector<FermiCrossing> out;
    for (std::size_t i = 0; i + 1 < br.samples.size(); ++i) {
        const auto& A = br.samples[i];
        const auto& B = br.samples[i + 1];
        const double fa = A.energy - mu, fb = B.energy - mu;
        if (fa * fb > 0 || (fa == 0 && i > 0)) continue;
        double ka = A.k1, kb = B.k1, ga = fa;
        CVec ref = A.vector;
        double k = ka, fk = fa;
        if (fa == 0) k = ka;
        else if (fb == 0) k = kb, ref = B.vector, fk = 0;
        else {
            for (int it = 0; it < 200; ++it) {
                k = 0.5 * (ka + kb);
                auto [e, vec] = detail::track_state(src, k, ref);
                fk = e - mu;
                ref = vec;
                if (std::abs(fk) <= opt.root_tol || kb - ka < 1e-15) break;
                if ((fk > 0) == (ga > 0)) ka = k, ga = fk;
                else kb = k;
            }
        }
        require(std::abs(fk) <= std::max(opt.root_tol, 1e-9), ErrorKind::convergence,
                "Fermi-point bisection did not reach the root tolerance");
        auto deriv = [&](double h) {
            auto ep = detail::track_state(src, k + h, ref).first;
            auto em = detail::track_state(src, k - h, ref).first;
            return (ep - em) / (2 * h);
        };
        const double h = opt.fd_step;
        const double v = (4.0 * deriv(h / 2) - deriv(h)) / 3.0;
        if (std::abs(v) < opt.v_min) {
            std::ostringstream os;
            os << "edge branch tangent to the chemical potential at k1=" << wrap_2pi(k) << ": |dε/dk1|=" << std::abs(v)
               << " below v_min=" << opt.v_min << " (edge velocities must stay away from zero)";
            throw Error(ErrorKind::numeric, os.str());
        }
        out.push_back({wrap_2pi(k), v, std::abs(fk)});
    }
    require(!out.empty(), ErrorKind::numeric, "edge branch does not cross the chemical potential");
    return out;
}

struct AssumptionReport {
    double delta = 0;        // window used for the edge analysis
    double delta_tilde = 0;  // widest window around mu containing only edge states
    double gamma = std::numeric_limits<double>::infinity();
    bool a = true, b = true, c = true, d = true;
    std::vector<std::string> diagnostics;
    bool all() const { return a && b && c && d; }
};

// An edge mode: one crossing of one branch.
struct EdgeMode {
    int branch = 0;
    EdgeSide side = EdgeSide::lower;
    double kF = 0;
    double v = 0;
    double loc_rate = 0;
    double loc_r2 = 0;
};

inline AssumptionReport check_assumptions(const std::vector<EdgeMode>& modes, double gamma_min)
{
    AssumptionReport rep;
    // Separation conditions apply per edge.
    for (EdgeSide s : {EdgeSide::lower, EdgeSide::upper}) {
        std::vector<double> k;
        for (const auto& m : modes)
            if (m.side == s) k.push_back(m.kF);
        const int n = int(k.size());
        auto dist = [](double d) { return std::abs(std::remainder(d, two_pi)); };
        for (int w1 = 0; w1 < n; ++w1)
            for (int w2 = 0; w2 < n; ++w2) {
                if (w1 == w2) continue;
                rep.gamma = std::min(rep.gamma, dist(k[w1] - k[w2]));
            }
        for (int w1 = 0; w1 < n; ++w1)
            for (int w2 = 0; w2 < n; ++w2)
                for (int w3 = 0; w3 < n; ++w3)
                    for (int w4 = 0; w4 < n; ++w4) {
                        if ((w1 == w2 && w3 == w4) || (w1 == w3 && w2 == w4)) continue;
                        rep.gamma = std::min(rep.gamma, dist((k[w1] - k[w2]) - (k[w3] - k[w4])));
                    }
    }
    if (rep.gamma < gamma_min) {
        rep.d = false;
        rep.diagnostics.push_back("Fermi momenta not separated: gamma=" + std::to_string(rep.gamma) +
                                  " < gamma_min=" + std::to_string(gamma_min));
    }
    for (const auto& m : modes) {
        if (m.loc_r2 < 0.95) {
            rep.b = false;
            rep.diagnostics.push_back("branch " + std::to_string(m.branch) +
                                      ": localization fit R^2=" + std::to_string(m.loc_r2) + " < 0.95");
        }
    }
    return rep;
}

struct EdgeAnalysis {
    BandScan scan;
    std::vector<EdgeBranch> branches;
    std::vector<EdgeMode> modes;
    AssumptionReport report;

    int count(EdgeSide s) const
    {
        int n = 0;
        for (const auto& m : modes) n += m.side == s;
        return n;
    }

    // sum of sgn(v) over modes on one side
    int chirality(EdgeSide s) const
    {
        int n = 0;
        for (const auto& m : modes)
            if (m.side == s) n += sgn(m.v);
        return n;
    }
};

// Widest half-window around mu that contains only edge-localized states.
inline double widest_edge_window(const FiberSource& src, int Nk, double mu, double loc_threshold, double cap)
{
    double best = cap;
    for (int i = 0; i < Nk; ++i) {
        auto ep = src.eig(two_pi * i / Nk);
        for (int q = 0; q < ep.energies.size(); ++q) {
            const double lw = lower_weight(ep.vectors.col(q), src.M, src.L2);
            if (lw < loc_threshold && 1 - lw < loc_threshold) best = std::min(best, std::abs(ep.energies(q) - mu));
        }
    }
    return best;
}

// Full pipeline: scan the window (mu - delta, mu + delta), build branches, refine crossings, check assumptions.
inline EdgeAnalysis analyze_edges(const FiberSource& src, double mu, double delta, int Nk, double gamma_min = 1e-3,
                                  const EdgeOptions& opt = {})
{
    EdgeAnalysis an;
    an.report.delta = delta;
    an.scan = scan_spectrum(src, Nk, mu - delta, mu + delta);
    try {
        an.branches = extract_edge_branches(an.scan, src.M, src.L2, mu, opt);
    } catch (const Error& e) {
        an.report.a = false;
        an.report.diagnostics.push_back(e.what());
        return an;
    }
    for (auto& br : an.branches) {
        if (!br.crosses(mu)) continue;
        br.crossings = fermi_point(src, br, mu, opt);
        // Localization measured on the sample closest to mu.
        std::size_t best = 0;
        for (std::size_t i = 0; i < br.samples.size(); ++i)
            if (std::abs(br.samples[i].energy - mu) < std::abs(br.samples[best].energy - mu)) best = i;
        auto lf = fit_localization(br.samples[best].vector, src.M, src.L2, br.side);
        br.loc_rate = lf.rate;
        br.loc_r2 = lf.r2;
        for (const auto& c : br.crossings) an.modes.push_back({br.label, br.side, c.kF, c.v, lf.rate, lf.r2});
        if (br.crossings.size() > 1) {
            an.report.d = false;
            an.report.diagnostics.push_back("branch " + std::to_string(br.label) + " crosses mu " +
                                            std::to_string(br.crossings.size()) + " times");
        }
    }
    auto rep = check_assumptions(an.modes, gamma_min);
    an.report.gamma = rep.gamma;
    an.report.b = rep.b;
    an.report.d = an.report.d && rep.d;
    for (auto& d : rep.diagnostics) an.report.diagnostics.push_back(d);
    for (const auto& m : an.modes)
        if (std::abs(m.v) <= opt.v_min) an.report.c = false;
    an.report.delta_tilde = widest_edge_window(src, std::min(Nk, 128), mu, opt.loc_threshold, 10.0);
    if (an.report.delta_tilde <= delta) {
        an.report.a = false;
        an.report.diagnostics.push_back("bulk states within the requested window");
    }
    return an;
}

} // namespace halledge
