#include <catch2/catch_amalgamated.hpp>

#include "honeycomb_oracle.hpp"

#include <halledge/model_file.hpp>

#include <random>

using namespace halledge;
using Catch::Matchers::ContainsSubstring;

namespace {

double herm_err(const CMat& F) { return max_abs(F - F.adjoint()) / std::max(1.0, max_abs(F)); }

std::vector<LatticeHamiltonian> builtin_models()
{
    std::vector<LatticeHamiltonian> out;
    out.push_back(haldane_cylinder(12, 10, {}));
    out.push_back(haldane_cylinder(12, 10, {1.0, 0.3, 0.7, 0.2}));
    out.push_back(hofstadter_cylinder(12, 10, {1, 3, 1.0}));
    out.push_back(hofstadter_cylinder(12, 10, {2, 5, 0.8}));
    out.push_back(stacked_shifted(haldane_cylinder(12, 10, {}), {0.0, 0.1, -0.1}));
    return out;
}

} // namespace

TEST_CASE("geometry invariants are enforced", "[geometry]")
{
    CHECK_THROWS_AS(CylinderGeometry({3, 8, 1}).validate(), Error);
    CHECK_THROWS_AS(CylinderGeometry({8, 3, 1}).validate(), Error);
    CHECK_THROWS_AS(CylinderGeometry({8, 8, 0}).validate(), Error);
    CylinderGeometry g{10, 8, 1};
    CHECK(g.distance(0, 1, 9, 1) == Catch::Approx(1.0));
    CHECK(g.distance(0, 1, 5, 4) == Catch::Approx(std::hypot(5.0, 3.0)));
}

TEST_CASE("chain along e1 gives a fiber diagonal in the rows", "[geometry]")
{
    const double t = 0.7;
    LatticeHamiltonian h({8, 6, 1}, 1.0);
    for (int x2 = 1; x2 <= 4; ++x2) h.add_bond(1, x2, x2, 0, 0, -t);
    for (double k : {0.0, 0.4, 2.5, 5.9}) {
        const CMat F = h.fiber(k);
        CMat expect = CMat::Zero(6, 6);
        for (int x2 = 1; x2 <= 4; ++x2) expect(x2, x2) = -2 * t * std::cos(k);
        CHECK(max_abs(F - expect) < 1e-15);
    }
}

TEST_CASE("zero Hamiltonian has a zero fiber", "[geometry]")
{
    LatticeHamiltonian h({8, 6, 2}, 1.0);
    CHECK(max_abs(h.fiber(1.3)) == 0.0);
}

TEST_CASE("Haldane fiber matches a real-space honeycomb construction", "[geometry]")
{
    const int L1 = 6, L2 = 6;
    for (auto p : {HaldaneParams{}, HaldaneParams{1.0, 0.3, 0.7, 0.25}, HaldaneParams{0.8, 0.15, -2.1, -0.4}}) {
        const auto H = haldane_cylinder(L1, L2, p);
        const CMat R = oracle::haldane_real_space(L1, L2, p.t1, p.t2, p.phi, p.m);
        REQUIRE(herm_err(R) < 1e-14);
        for (int n = 0; n < L1; ++n) {
            const double k = two_pi * n / L1;
            CHECK(max_abs(H.fiber(k) - oracle::bloch_project(R, L1, L2, k)) < 1e-13);
        }
    }
}

TEST_CASE("Hamiltonian fibers are Hermitian, periodic, with sorted real spectra", "[geometry]")
{
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> U(0.0, two_pi);
    for (const auto& H : builtin_models()) {
        H.validate();
        for (int i = 0; i < 64; ++i) {
            const double k = U(rng);
            const CMat F = H.fiber(k);
            CHECK(herm_err(F) <= 1e-13);
            CHECK(max_abs(F - H.fiber(k + two_pi)) <= 1e-13 * std::max(1.0, max_abs(F)));
        }
        const auto ep = diagonalize(H.fiber(0.37));
        for (int q = 1; q < ep.energies.size(); ++q) CHECK(ep.energies(q) >= ep.energies(q - 1));
    }
}

TEST_CASE("finite range and Dirichlet rows are enforced at construction", "[geometry]")
{
    LatticeHamiltonian h({10, 8, 1}, std::sqrt(2.0));
    CHECK_THROWS_WITH(h.add_bond(2, 3, 3, 0, 0, 1.0), ContainsSubstring("range"));
    CHECK_THROWS_WITH(h.add_bond(1, 2, 4, 0, 0, 1.0), ContainsSubstring("range"));
    CHECK_THROWS_WITH(h.add_bond(0, 0, 1, 0, 0, 1.0), ContainsSubstring("Dirichlet"));
    CHECK_THROWS_WITH(h.add_bond(0, 7, 6, 0, 0, 1.0), ContainsSubstring("Dirichlet"));
    CHECK_NOTHROW(h.add_bond(1, 3, 2, 0, 0, 1.0));
}

TEST_CASE("non-Hermitian input names the offending block pair", "[geometry]")
{
    LatticeHamiltonian h({10, 8, 1}, 1.0);
    h.add_entry(1, 3, 3, 0, 0, 0.5);
    h.add_entry(-1, 3, 3, 0, 0, 0.4);
    try {
        h.validate();
        FAIL("expected a validation error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::validation);
        CHECK_THAT(std::string(e.what()), ContainsSubstring("offset1=1") && ContainsSubstring("offset1=-1"));
    }
}

TEST_CASE("Hofstadter fiber carries the Landau-gauge phases", "[geometry]")
{
    const int L2 = 9;
    const double t = 1.0;
    const auto H = hofstadter_cylinder(12, L2, {1, 3, t});
    CHECK(H.M() == 1);
    for (double k : {0.0, 0.9, 3.3}) {
        const CMat F = H.fiber(k);
        for (int x2 = 1; x2 <= L2 - 2; ++x2) {
            CHECK(std::abs(F(x2, x2) - cplx(-2 * t * std::cos(k + two_pi * x2 / 3.0))) < 1e-14);
            if (x2 + 1 <= L2 - 2) CHECK(std::abs(F(x2 + 1, x2) + t) < 1e-15);
        }
    }
    // Flux per plaquette from the real-space blocks: hop x -> x+e1 -> x+e1+e2 -> x+e2 -> x.
    std::map<std::tuple<int, int, int>, cplx> amp;
    for (const auto& b : H.blocks()) amp[{b.offset1, b.row, b.col}] = b.block(0, 0);
    for (int x2 = 1; x2 + 1 <= L2 - 2; ++x2) {
        const cplx loop = amp[{1, x2, x2}] * amp[{0, x2 + 1, x2}] * amp[{-1, x2 + 1, x2 + 1}] * amp[{0, x2, x2 + 1}];
        CHECK(std::abs(std::arg(loop) - (-two_pi / 3.0)) < 1e-12);
    }
}

TEST_CASE("Hofstadter rejects invalid flux fractions", "[geometry]")
{
    CHECK_THROWS_WITH(hofstadter_cylinder(12, 8, {2, 4, 1.0}), ContainsSubstring("lowest terms"));
    CHECK_THROWS_AS(hofstadter_cylinder(12, 8, {1, 1, 1.0}), Error);
}

TEST_CASE("Haldane without second-neighbour hopping is bipartite", "[geometry]")
{
    const auto H = haldane_cylinder(12, 8, {1.0, 0.0, 0.3, 0.0});
    for (double k : {0.2, 1.7, 4.0}) {
        const CMat F = H.fiber(k);
        CHECK(herm_err(F) < 1e-15);
        for (int i = 0; i < F.rows(); ++i)
            for (int j = 0; j < F.cols(); ++j)
                if (i % 2 == j % 2) CHECK(F(i, j) == cplx(0.0));
        // chiral symmetry: the physical spectrum is symmetric about zero
        const RVec e = diagonalize(F.block(2, 2, 12, 12)).energies;
        for (int q = 0; q < e.size(); ++q) CHECK(std::abs(e(q) + e(e.size() - 1 - q)) < 1e-12);
    }
}

TEST_CASE("stacked copies form a block-diagonal shifted sum", "[geometry]")
{
    const auto base = haldane_cylinder(12, 8, {});
    const std::vector<double> shifts{0.0, 0.05, -0.2};
    const auto S = stacked_shifted(base, shifts);
    CHECK(S.M() == 6);
    CHECK_THROWS_AS(stacked_shifted(base, {}), Error);
    const double k = 1.1;
    const CMat Fb = base.fiber(k), Fs = S.fiber(k);
    for (int c = 0; c < 3; ++c)
        for (int r = 0; r < 8; ++r)
            for (int q = 0; q < 8; ++q)
                for (int a = 0; a < 2; ++a)
                    for (int b = 0; b < 2; ++b) {
                        cplx expect = Fb(r * 2 + a, q * 2 + b);
                        if (r == q && a == b && r >= 1 && r <= 6) expect += shifts[c];
                        CHECK(std::abs(Fs(r * 6 + 2 * c + a, q * 6 + 2 * c + b) - expect) < 1e-15);
                    }
    // no coupling between copies
    CHECK(std::abs(Fs(3 * 6 + 0, 3 * 6 + 2)) == 0.0);
}

TEST_CASE("matrix dump round-trips", "[geometry]")
{
    const auto H = haldane_cylinder(10, 8, {1.0, 0.25, 0.9, 0.1});
    std::stringstream ss;
    H.write_dump(ss);
    const auto G = LatticeHamiltonian::read_dump(ss);
    CHECK(G.geometry().L1 == 10);
    CHECK(G.M() == 2);
    for (double k : {0.0, 2.2}) CHECK(max_abs(G.fiber(k) - H.fiber(k)) == 0.0);
    std::stringstream bad("1 2 3\n");
    CHECK_THROWS_AS(LatticeHamiltonian::read_dump(bad), Error);
}

TEST_CASE("model files build the builtin models", "[geometry][config]")
{
    const auto kv = KeyValueFile::parse_string("[geometry]\nL1 = 12\nL2 = 10\n[model]\ntype = \"haldane\"\n"
                                               "t2 = 0.3\nm = 0.1\n");
    const auto H = model_from_keys(kv);
    HaldaneParams p;
    p.t2 = 0.3;
    p.m = 0.1;
    CHECK(max_abs(H.fiber(0.5) - haldane_cylinder(12, 10, p).fiber(0.5)) == 0.0);

    const auto st = model_from_keys(KeyValueFile::parse_string(
        "[geometry]\nL1 = 12\nL2 = 10\n[model]\ntype = \"stacked\"\nshifts = [0.0, 0.1]\n"
        "chirality = [1, -1]\n"));
    CHECK(st.M() == 4);
    CHECK_THROWS_WITH(model_from_keys(KeyValueFile::parse_string("[model]\ntype = \"square\"\n")),
                      ContainsSubstring("unknown model type"));
    CHECK_THROWS_AS(model_from_keys(KeyValueFile::parse_string("[geometry]\nL1 = 12\n")), Error);
}
