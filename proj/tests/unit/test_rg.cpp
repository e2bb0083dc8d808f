#include <catch2/catch_amalgamated.hpp>

#include <halledge/rg_flow.hpp>

#include "wick_oracle.hpp"

using namespace halledge;
using Catch::Matchers::ContainsSubstring;

namespace {

FlowState state(std::vector<double> v, double lam)
{
    const int n = int(v.size());
    RMat L = RMat::Constant(n, n, lam);
    L.diagonal().setZero();
    return FlowState::initial(Eigen::Map<RVec>(v.data(), n), L);
}

// One-scale field renormalization of an opposite-chirality pair, from the logarithmic
// shell integral of the mixed-chirality sunset: ln2 lambda^2 / (2 pi^2 (|v_w| + |v_alpha|)^2).
double z0_closed(const FlowState& s, int w)
{
    double z = 0;
    for (int a = 0; a < s.channels(); ++a)
        if (a != w && s.v(a) * s.v(w) < 0) {
            const double l = s.lambda(w, a), sv = std::abs(s.v(w)) + std::abs(s.v(a));
            z += std::log(2.0) * l * l / (2 * pi * pi * sv * sv);
        }
    return z;
}

} // namespace

TEST_CASE("single-scale shells partition the band", "[rg]")
{
    for (double r : {1e-6, 0.01, 0.3, 0.9, 1.0, 1.7, 3.9}) {
        double sum = 0;
        for (int h = -30; h <= 3; ++h) sum += shell(r, h, -40);
        CHECK(std::abs(sum - chi_band(r, -40, 3)) <= 1e-12);
        CHECK(std::abs(sum - 1.0) <= 1e-12);
    }
    for (int h : {0, -3})
        for (double r : {0.4, 2.1}) CHECK(shell(std::ldexp(r, h), h, -40) == 0.0);

    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> logr(-20.0, 0.5), ang(0.0, two_pi);
    double worst = 0;
    for (int i = 0; i < 1000; ++i) {
        const double r = std::exp2(logr(rng)), t = ang(rng), v = 0.7;
        const double k0 = r * std::cos(t), k1 = r * std::sin(t) / v;
        double sum = 0;
        for (int h = -30; h <= 1; ++h) sum += ScaleShell{h}(k0, k1, v);
        worst = std::max(worst, std::abs(sum - 1.0));
    }
    CHECK(worst <= 1e-12);
}

TEST_CASE("single-scale propagator values", "[rg]")
{
    const auto s = state({1, -1}, 0.0);
    CHECK(single_scale_propagator(-2, 0, 3.0, 0.0, s) == 0.0);
    CHECK(single_scale_propagator(-2, 0, 0.05, 0.05, s) == 0.0);
    // f_h = 1 at ||k|| = 2^h
    const double r = 0.25, k0 = r * 0.6, k1 = r * 0.8;
    CHECK(std::abs(single_scale_propagator(-2, 0, k0, k1, s) - 1.0 / cplx(k1, -k0)) < 1e-15);
}

TEST_CASE("single-scale propagator bounds", "[rg]")
{
    const auto s = state({1, -0.6}, 0.05);
    // parity g(-k) = -g(k)
    for (auto [k0, k1] : {std::pair{0.3, 0.9}, std::pair{-1.1, 0.2}})
        CHECK(std::abs(single_scale_propagator(0, 1, -k0, -k1, s) + single_scale_propagator(0, 1, k0, k1, s)) < 1e-15);
    // scale-covariant bounds: the constants do not drift with h
    const auto b0 = single_scale_bounds(0, 0, s, 128);
    for (int h : {-2, -4}) {
        const auto b = single_scale_bounds(h, 0, s, 128);
        CHECK(b.C == Catch::Approx(b0.C).epsilon(1e-6));
        CHECK(b.sup_momentum == Catch::Approx(b0.sup_momentum).epsilon(1e-12));
    }
    CHECK(b0.C < 10.0);
    CHECK(b0.sup_momentum <= 2.0 + 1e-12);
}

TEST_CASE("second-order kernels agree with brute-force Wick enumeration", "[rg][wick]")
{
    RVec v(3);
    v << 1, -1, 1;
    RMat lam(3, 3);
    lam << 0, 0.1, -0.07, 0.1, 0, 0.05, -0.07, 0.05, 0;
    auto s = FlowState::initial(v, lam);
    s.Z << 1.1, 0.9, 1.3;
    const DiscreteGrid G;
    for (auto [a, b] : {std::pair{0, 1}, std::pair{0, 2}, std::pair{1, 2}}) {
        const GridIndex k1{1, 2}, k2{-3, 0}, k3{2, -1}, k4{6, 1};
        const cplx o = wick::second_order_coefficient(G, s, {{a, 1, k1}, {a, -1, k2}, {b, 1, k3}, {b, -1, k4}});
        const cplx e = grid_gamma2(G, s, a, b, k1, k2, k3, k4);
        CHECK(std::abs(o - e) <= 1e-6 * std::max(1.0, std::abs(o)));
        const GridIndex z{0, 0}, m{-1, -1};
        const cplx oz = wick::second_order_coefficient(G, s, {{a, 1, z}, {a, -1, z}, {b, 1, m}, {b, -1, m}});
        CHECK(std::abs(oz - grid_gamma2(G, s, a, b, z, z, m, m)) <= 1e-6 * std::max(1.0, std::abs(oz)));
    }
    for (int w = 0; w < 3; ++w) {
        const GridIndex k{1, -2};
        const cplx o = wick::second_order_coefficient(G, s, {{w, 1, k}, {w, -1, k}});
        CHECK(std::abs(o - grid_self_energy(G, s, w, k)) <= 1e-6 * std::max(1.0, std::abs(o)));
        CHECK(std::abs(o) > 1e-6);
    }
}

TEST_CASE("free flow is stationary", "[rg]")
{
    const auto s = state({1, -1}, 0.0);
    const auto be = beta_second_order(s, -3);
    CHECK(be.beta_lambda.cwiseAbs().maxCoeff() == 0.0);
    CHECK(be.z0.cwiseAbs().maxCoeff() == 0.0);
    CHECK(be.beta_v.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("coupling beta function vanishes at second order", "[rg]")
{
    for (const auto& s : {state({1, -1}, 0.1), state({1, -0.5}, 0.1), state({1, -1, 0.7}, 0.05)}) {
        const auto be = beta_second_order(s, -5);
        CHECK(be.beta_lambda.cwiseAbs().maxCoeff() <= 1e-7);
        CHECK(be.beta_lambda.cwiseAbs().maxCoeff() <= be.tolerance);
        for (int w = 0; w < s.channels(); ++w) {
            CHECK(be.z0(w) > 0);
            CHECK(be.z0(w) == Catch::Approx(z0_closed(s, w)).epsilon(1e-6));
            // Lorentz covariance of each channel: velocity stays fixed
            CHECK(be.z1(w) == Catch::Approx(s.v(w) * be.z0(w)).epsilon(1e-6));
            CHECK(std::abs(be.beta_v(w)) <= 1e-12);
        }
    }
    // same chirality everywhere: no field renormalization either
    const auto same = beta_second_order(state({1, 0.6}, 0.1), -2);
    CHECK(same.z0.cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("flow stays contained and reports the anomalous dimension", "[rg]")
{
    const auto s = state({1, -1}, 0.05);
    const auto tr = flow_run(s, -12);
    REQUIRE(tr.states.size() == 13);
    const auto rep = vanishing_beta_report(tr);
    CHECK(rep.vanishing_at_truncation);
    CHECK_FALSE(rep.theta.has_value());
    CHECK(rep.max_lambda_drift <= 1e-12);
    CHECK(rep.max_v_drift <= 1e-12);
    const double eta = std::log2(1 + z0_closed(s, 0));
    for (double e : rep.eta) CHECK(e == Catch::Approx(eta).epsilon(1e-5));
    CHECK(tr.states.back().Z(0) > 1.0);

    CHECK_THROWS_WITH(vanishing_beta_report(flow_run(s, -3)), ContainsSubstring("10 scales"));
    CHECK_THROWS_AS(flow_run(s, 0), Error);
}

TEST_CASE("free and strongly coupled flows", "[rg]")
{
    const auto free = flow_run(state({1, -1}, 0.0), -10);
    for (const auto& st : free.states) {
        CHECK(st.Z == RVec::Ones(2));
        CHECK(st.v == free.states.front().v);
        CHECK(st.lambda.cwiseAbs().maxCoeff() == 0.0);
    }
    const auto fr = vanishing_beta_report(free);
    CHECK(fr.vanishing_at_truncation);
    CHECK(fr.eta == std::vector<double>{0.0, 0.0});

    // containment over 30 scales at the largest coupling considered
    const auto s = state({1, -0.5, 0.8}, 0.1);
    const auto tr = flow_run(s, -30);
    const auto rep = vanishing_beta_report(tr);
    CHECK(rep.vanishing_at_truncation);
    CHECK(rep.max_lambda_drift <= std::pow(0.1, 1.5));
    CHECK(rep.max_v_drift <= std::sqrt(0.1));
    for (double e : rep.eta) {
        CHECK(e > 0);
        CHECK(e <= 10 * 0.01);
    }
    CHECK(rep.beta_v_max <= 1e-12);
    CHECK_FALSE(rep.theta_v.has_value());
}

TEST_CASE("containment breach names the scale", "[rg]")
{
    const auto s = state({1, -1}, 0.05);
    ContainmentBounds tight;
    tight.c = 1e-6;
    try {
        flow_run(s, -4, tight);
        FAIL("expected a containment error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::convergence);
        CHECK_THAT(std::string(e.what()), ContainsSubstring("h=-1"));
    }
}

TEST_CASE("flow state validation", "[rg]")
{
    auto s = state({1, -1}, 0.1);
    s.lambda(0, 1) = 0.2;
    CHECK_THROWS_WITH(s.validate(), ContainsSubstring("symmetric"));
    auto t = state({1, 0}, 0.1);
    CHECK_THROWS_AS(t.validate(), Error);
}
