#pragma once

#include <halledge/rg_flow.hpp>

#include <algorithm>
#include <functional>

namespace wick {

using halledge::cplx;
using halledge::DiscreteGrid;
using halledge::FlowState;
using halledge::GridIndex;

// Grassmann symbol: channel, +1 for psi+ / -1 for psi-, momentum index.
struct Field {
    int channel;
    int sigma;
    GridIndex k;
};

// Coefficient of the ordered monomial `ext` in (1/2) E^T(V; V) by brute-force enumeration of
// Wick contractions: every vertex field is either matched to an external symbol or contracted
// with a field of the other vertex; internal momenta are summed over the torus.
inline cplx second_order_coefficient(const DiscreteGrid& G, const FlowState& s, const std::vector<Field>& ext)
{
    const int nch = s.channels(), n = G.n;
    auto wrap = [&](int m) { return ((m % n) + n) % n; };
    cplx total = 0;
    for (int c1 = 0; c1 < nch; ++c1)
        for (int d1 = c1 + 1; d1 < nch; ++d1)
            for (int c2 = 0; c2 < nch; ++c2)
                for (int d2 = c2 + 1; d2 < nch; ++d2) {
                    const cplx U = s.U(c1, d1) * s.U(c2, d2);
                    if (U == 0.0) continue;
                    // slots 0..3 belong to vertex 1, 4..7 to vertex 2
                    const int ch[8] = {c1, c1, d1, d1, c2, c2, d2, d2};
                    const int sg[8] = {+1, -1, +1, -1, +1, -1, +1, -1};
                    std::vector<int> slot_of_ext(ext.size());
                    std::function<void(std::size_t, unsigned)> assign = [&](std::size_t e, unsigned used) {
                        if (e < ext.size()) {
                            for (int sl = 0; sl < 8; ++sl)
                                if (!(used >> sl & 1u) && ch[sl] == ext[e].channel && sg[sl] == ext[e].sigma) {
                                    slot_of_ext[e] = sl;
                                    assign(e + 1, used | (1u << sl));
                                }
                            return;
                        }
                        // contract the remaining slots: each psi- with a psi+ of the same channel on the other vertex
                        std::vector<int> minus, plus;
                        for (int sl = 0; sl < 8; ++sl)
                            if (!(used >> sl & 1u)) (sg[sl] < 0 ? minus : plus).push_back(sl);
                        if (minus.size() != plus.size()) return;
                        std::sort(plus.begin(), plus.end());
                        do {
                            bool ok = true;
                            for (std::size_t i = 0; i < minus.size() && ok; ++i)
                                ok = ch[minus[i]] == ch[plus[i]] && (minus[i] < 4) != (plus[i] < 4);
                            if (!ok) continue;
                            // permutation parity: target order = externals, then (minus, plus) per line
                            std::vector<int> order;
                            for (int sl : slot_of_ext) order.push_back(sl);
                            for (std::size_t i = 0; i < minus.size(); ++i) {
                                order.push_back(minus[i]);
                                order.push_back(plus[i]);
                            }
                            int inversions = 0;
                            for (std::size_t i = 0; i < order.size(); ++i)
                                for (std::size_t j = i + 1; j < order.size(); ++j) inversions += order[i] > order[j];
                            const double sign = inversions % 2 ? -1.0 : 1.0;
                            // momenta: enumerate all lines but the last, solve the last from vertex 1
                            const std::size_t L = minus.size();
                            std::vector<GridIndex> mom(8);
                            for (std::size_t e = 0; e < ext.size(); ++e) mom[slot_of_ext[e]] = ext[e].k;
                            long count = 1;
                            for (std::size_t i = 0; i + 1 < L; ++i) count *= long(n) * n;
                            cplx acc = 0;
                            for (long idx = 0; idx < count; ++idx) {
                                long rem = idx;
                                std::vector<GridIndex> line(L);
                                for (std::size_t i = 0; i + 1 < L; ++i) {
                                    line[i] = {int(rem % n), int(rem / n % n)};
                                    rem /= long(n) * n;
                                }
                                // vertex-1 conservation with the last line unknown
                                GridIndex sum{0, 0};
                                int coef = 0;
                                for (int sl = 0; sl < 4; ++sl) {
                                    const int sgn = (sl % 2 == 0) ? 1 : -1; // k1 - k2 + k3 - k4
                                    bool last = false;
                                    GridIndex k{};
                                    bool found = false;
                                    for (std::size_t i = 0; i < L; ++i)
                                        if (minus[i] == sl || plus[i] == sl) {
                                            if (i + 1 == L) last = true;
                                            else k = line[i];
                                            found = true;
                                        }
                                    if (!found) k = mom[sl];
                                    if (last) coef += sgn;
                                    else {
                                        sum[0] += sgn * k[0];
                                        sum[1] += sgn * k[1];
                                    }
                                }
                                if (coef == 0) continue; // cannot happen for inter-vertex lines
                                line[L - 1] = {wrap(-coef * sum[0]), wrap(-coef * sum[1])};
                                for (std::size_t i = 0; i < L; ++i) mom[minus[i]] = mom[plus[i]] = line[i];
                                GridIndex s2{0, 0};
                                for (int sl = 4; sl < 8; ++sl) {
                                    const int sgn = (sl % 2 == 0) ? 1 : -1;
                                    s2[0] += sgn * mom[sl][0];
                                    s2[1] += sgn * mom[sl][1];
                                }
                                if (wrap(s2[0]) != 0 || wrap(s2[1]) != 0) continue;
                                cplx prod = 1;
                                for (std::size_t i = 0; i < L; ++i) prod *= halledge::grid_propagator(G, s, ch[minus[i]], line[i]);
                                acc += prod;
                            }
                            total += 0.5 * U * sign * acc;
                        } while (std::next_permutation(plus.begin(), plus.end()));
                    };
                    assign(0, 0u);
                }
    return total;
}

} // namespace wick
