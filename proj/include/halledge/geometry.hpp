#pragma once

#include "core.hpp"

#include <array>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <sstream>
#include <tuple>

namespace halledge {

struct CylinderGeometry {
    int L1 = 16; // periodic direction
    int L2 = 16; // Dirichlet direction, rows 0 and L2-1 are inert
    int M = 1;   // internal degrees of freedom per site

    void validate() const
    {
        require(L1 >= 4 && L2 >= 4 && M >= 1, ErrorKind::validation,
                "geometry requires L1>=4, L2>=4, M>=1 (got L1=" + std::to_string(L1) +
                    ", L2=" + std::to_string(L2) + ", M=" + std::to_string(M) + ")");
    }

    int fiber_dim() const { return M * L2; }

    // Periodic distance in x1, plain distance in x2.
    double distance(int x1, int x2, int y1, int y2) const
    {
        int d1 = std::abs(x1 - y1) % L1;
        d1 = std::min(d1, L1 - d1);
        return std::hypot(double(d1), double(x2 - y2));
    }
};

// Block of H(x;y) for x1-y1 = offset1, x2 = row, y2 = col.
struct HoppingBlock {
    int offset1 = 0;
    int row = 0;
    int col = 0;
    CMat block;
};

class LatticeHamiltonian {
public:
    LatticeHamiltonian() = default;
    LatticeHamiltonian(CylinderGeometry g, double range) : geom_(g), range_(range) { geom_.validate(); }

    const CylinderGeometry& geometry() const { return geom_; }
    double range() const { return range_; }
    int L1() const { return geom_.L1; }
    int M() const { return geom_.M; }
    int L2() const { return geom_.L2; }
    int dim() const { return geom_.fiber_dim(); }

    // Adds `amp` to the (rho, rho') entry of H(x;y), x1-y1 = offset1, x2 = row, y2 = col.
    // Callers add both Hermitian partners explicitly or use add_bond.
    void add_entry(int offset1, int row, int col, int rho, int rhop, cplx amp)
    {
        check_placement(offset1, row, col);
        auto& b = slot(offset1, row, col);
        b(rho, rhop) += amp;
    }

    // Adds the hopping term amp * a+_{x,rho} a-_{y,rho'} together with its Hermitian conjugate.
    void add_bond(int offset1, int row, int col, int rho, int rhop, cplx amp)
    {
        if (offset1 == 0 && row == col && rho == rhop) {
            require(std::abs(amp.imag()) == 0.0, ErrorKind::validation, "on-site energy must be real");
            add_entry(0, row, row, rho, rho, amp);
            return;
        }
        add_entry(offset1, row, col, rho, rhop, amp);
        add_entry(-offset1, col, row, rhop, rho, std::conj(amp));
    }

    void add_block(const HoppingBlock& hb)
    {
        check_placement(hb.offset1, hb.row, hb.col);
        require(hb.block.rows() == M() && hb.block.cols() == M(), ErrorKind::validation,
                "hopping block must be M x M");
        slot(hb.offset1, hb.row, hb.col) += hb.block;
    }

    std::vector<HoppingBlock> blocks() const
    {
        std::vector<HoppingBlock> out;
        out.reserve(blocks_.size());
        for (const auto& [key, b] : blocks_) {
            auto [z, r, c] = key;
            out.push_back({z, r, c, b});
        }
        return out;
    }

    // Hermiticity across blocks: block(z; r,c) = block(-z; c,r)^dagger.
    void validate(double tol = 1e-14) const
    {
        for (const auto& [key, b] : blocks_) {
            auto [z, r, c] = key;
            auto it = blocks_.find({-z, c, r});
            const double scale = std::max(1.0, max_abs(b));
            double err = it == blocks_.end() ? max_abs(b) : max_abs(b - it->second.adjoint());
            if (err > tol * scale) {
                std::ostringstream os;
                os << "non-Hermitian Hamiltonian: block (offset1=" << z << ", x2=" << r << ", y2=" << c
                   << ") does not match the adjoint of block (offset1=" << -z << ", x2=" << c << ", y2=" << r
                   << "), mismatch " << err;
                throw Error(ErrorKind::validation, os.str());
            }
        }
    }

    // Bloch fiber sum_z e^{i k1 z} H(z; x2, y2), index x2*M + rho.
    CMat fiber(double k1) const
    {
        const int m = M();
        CMat F = CMat::Zero(dim(), dim());
        for (const auto& [key, b] : blocks_) {
            auto [z, r, c] = key;
            F.block(r * m, c * m, m, m) += std::polar(1.0, k1 * z) * b;
        }
        return F;
    }

    // Matrix dump: one line per nonzero entry: offset1 x2 y2 rho rho' re im.
    void write_dump(std::ostream& os) const
    {
        os << std::setprecision(17);
        os << "# L1 " << geom_.L1 << " L2 " << geom_.L2 << " M " << geom_.M << " range " << range_ << "\n";
        for (const auto& [key, b] : blocks_) {
            auto [z, r, c] = key;
            for (int i = 0; i < b.rows(); ++i)
                for (int j = 0; j < b.cols(); ++j)
                    if (b(i, j) != cplx(0.0))
                        os << z << ' ' << r << ' ' << c << ' ' << i << ' ' << j << ' ' << b(i, j).real() << ' '
                           << b(i, j).imag() << "\n";
        }
    }

    static LatticeHamiltonian read_dump(std::istream& is)
    {
        std::string line;
        CylinderGeometry g;
        double range = 0;
        bool have_header = false;
        std::vector<std::tuple<int, int, int, int, int, cplx>> entries;
        while (std::getline(is, line)) {
            if (line.empty()) continue;
            std::istringstream ls(line);
            if (line[0] == '#') {
                std::string tag, key;
                ls >> tag;
                while (ls >> key) {
                    if (key == "L1") ls >> g.L1;
                    else if (key == "L2") ls >> g.L2;
                    else if (key == "M") ls >> g.M;
                    else if (key == "range") ls >> range;
                }
                have_header = true;
                continue;
            }
            int z, r, c, i, j;
            double re, im;
            require(static_cast<bool>(ls >> z >> r >> c >> i >> j >> re >> im), ErrorKind::config,
                    "malformed matrix dump line: " + line);
            entries.emplace_back(z, r, c, i, j, cplx(re, im));
        }
        require(have_header, ErrorKind::config, "matrix dump lacks the '# L1 .. L2 .. M .. range ..' header");
        LatticeHamiltonian h(g, range);
        for (auto& [z, r, c, i, j, v] : entries) h.add_entry(z, r, c, i, j, v);
        h.validate(1e-12);
        return h;
    }

private:
    using Key = std::tuple<int, int, int>;

    void check_placement(int offset1, int row, int col) const
    {
        const int L2 = geom_.L2;
        require(row >= 0 && row < L2 && col >= 0 && col < L2, ErrorKind::validation, "row index out of range");
        require(row != 0 && row != L2 - 1 && col != 0 && col != L2 - 1, ErrorKind::validation,
                "hopping blocks must vanish on the Dirichlet rows x2=0 and x2=L2-1");
        const double len = std::hypot(double(offset1), double(row - col));
        require(len <= range_ + 1e-12, ErrorKind::validation,
                "hopping beyond the declared range D=" + std::to_string(range_) + " (offset1=" +
                    std::to_string(offset1) + ", x2-y2=" + std::to_string(row - col) + ")");
        require(2 * std::abs(offset1) < geom_.L1, ErrorKind::validation, "hopping range must be below L1/2");
    }

    CMat& slot(int offset1, int row, int col)
    {
        auto it = blocks_.find({offset1, row, col});
        if (it == blocks_.end()) it = blocks_.emplace(Key{offset1, row, col}, CMat::Zero(M(), M())).first;
        return it->second;
    }

    CylinderGeometry geom_;
    double range_ = 1.0;
    std::map<Key, CMat> blocks_;
};

struct Eigenpairs {
    RVec energies; // ascending
    CMat vectors;  // columns
};

inline Eigenpairs diagonalize(const CMat& F)
{
    Eigen::SelfAdjointEigenSolver<CMat> es(F);
    require(es.info() == Eigen::Success, ErrorKind::numeric, "Hermitian eigensolver did not converge");
    return {es.eigenvalues(), es.eigenvectors()};
}

// ---------------------------------------------------------------------------
// Builtin models

struct HaldaneParams {
    double t1 = 1.0;
    double t2 = 0.2;
    double phi = -pi / 2; // lower edge carries the positive-velocity mode
    double m = 0.0;
};

// Honeycomb embedded with sublattices A (rho=0), B (rho=1) per site x = x1 e1 + x2 e2.
// Nearest neighbours of A(x): B(x), B(x-e1), B(x-e2); second neighbours along
// e1, e2, e1-e2 carry the flux phases (opposite orientation on B).
inline LatticeHamiltonian haldane_cylinder(int L1, int L2, const HaldaneParams& p)
{
    LatticeHamiltonian h({L1, L2, 2}, std::sqrt(2.0));
    auto inside = [&](int r) { return r >= 1 && r <= L2 - 2; };
    for (int x2 = 1; x2 <= L2 - 2; ++x2) {
        h.add_bond(0, x2, x2, 0, 0, p.m);
        h.add_bond(0, x2, x2, 1, 1, -p.m);
        h.add_bond(0, x2, x2, 0, 1, -p.t1);
        h.add_bond(1, x2, x2, 0, 1, -p.t1);
        if (inside(x2 - 1)) h.add_bond(0, x2, x2 - 1, 0, 1, -p.t1);
        if (p.t2 == 0.0) continue;
        // <y+d|H|y> = t2 e^{i nu(d) phi} on A, conjugate orientation on B.
        const std::pair<std::array<int, 2>, int> nnn[] = {{{1, 0}, -1}, {{0, 1}, +1}, {{1, -1}, +1}};
        for (const auto& [d, nu] : nnn) {
            const int r = x2 + d[1];
            if (!inside(r)) continue;
            h.add_bond(d[0], r, x2, 0, 0, p.t2 * std::polar(1.0, nu * p.phi));
            h.add_bond(d[0], r, x2, 1, 1, p.t2 * std::polar(1.0, -nu * p.phi));
        }
    }
    return h;
}

struct HofstadterParams {
    int p = 1;
    int q = 3;
    double t = 1.0;
};

// Landau gauge along x1: hopping x -> x+e1 carries e^{2 pi i (p/q) x2}.
inline LatticeHamiltonian hofstadter_cylinder(int L1, int L2, const HofstadterParams& hp)
{
    require(hp.q >= 2, ErrorKind::validation, "Hofstadter flux denominator q must be >= 2");
    require(std::gcd(hp.p, hp.q) == 1, ErrorKind::validation,
            "Hofstadter flux p/q must be in lowest terms (p=" + std::to_string(hp.p) + ", q=" + std::to_string(hp.q) +
                ")");
    LatticeHamiltonian h({L1, L2, 1}, 1.0);
    const double alpha = double(hp.p) / hp.q;
    for (int x2 = 1; x2 <= L2 - 2; ++x2) {
        h.add_bond(1, x2, x2, 0, 0, -hp.t * std::polar(1.0, two_pi * alpha * x2));
        if (x2 + 1 <= L2 - 2) h.add_bond(0, x2 + 1, x2, 0, 0, -hp.t);
    }
    return h;
}

// Direct sum of copies, copy i shifted by shifts[i] * identity on the physical rows.
inline LatticeHamiltonian stacked_shifted(const std::vector<LatticeHamiltonian>& copies,
                                          const std::vector<double>& shifts)
{
    require(!copies.empty() && copies.size() == shifts.size(), ErrorKind::validation,
            "stacked model needs a nonempty shift list, one shift per copy");
    const auto g0 = copies.front().geometry();
    int Mtot = 0;
    double range = 0;
    for (const auto& c : copies) {
        require(c.geometry().L1 == g0.L1 && c.geometry().L2 == g0.L2, ErrorKind::validation,
                "stacked copies must share the cylinder size");
        Mtot += c.M();
        range = std::max(range, c.range());
    }
    LatticeHamiltonian h({g0.L1, g0.L2, Mtot}, range);
    int off = 0;
    for (std::size_t i = 0; i < copies.size(); ++i) {
        const int m = copies[i].M();
        for (const auto& b : copies[i].blocks())
            for (int a = 0; a < m; ++a)
                for (int c = 0; c < m; ++c)
                    if (b.block(a, c) != cplx(0.0)) h.add_entry(b.offset1, b.row, b.col, off + a, off + c, b.block(a, c));
        if (shifts[i] != 0.0)
            for (int x2 = 1; x2 <= g0.L2 - 2; ++x2)
                for (int a = 0; a < m; ++a) h.add_entry(0, x2, x2, off + a, off + a, shifts[i]);
        off += m;
    }
    return h;
}

inline LatticeHamiltonian stacked_shifted(const LatticeHamiltonian& base, const std::vector<double>& shifts)
{
    return stacked_shifted(std::vector<LatticeHamiltonian>(shifts.size(), base), shifts);
}

} // namespace halledge
