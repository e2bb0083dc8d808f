#pragma once

#include "geometry.hpp"
#include "ini.hpp"

namespace halledge {

// Builds a Hamiltonian from the [geometry] and [model] sections.
//   [model] type = haldane | hofstadter | stacked | dump
//   haldane:    model.t1, t2, phi, m
//   hofstadter: model.p, q, t
//   stacked:    Haldane copies; model.shifts = [..], model.chirality = [+1/-1 ..] (flips phi)
//   dump:       model.file = path to a matrix dump
inline LatticeHamiltonian model_from_keys(const KeyValueFile& kv)
{
    const int L1 = int(kv.get_int("geometry.L1", 16));
    const int L2 = int(kv.get_int("geometry.L2", 16));
    const std::string type = kv.get_string("model.type", "");
    require(!type.empty(), ErrorKind::config, "model file lacks [model] type");

    auto haldane = [&] {
        HaldaneParams p;
        p.t1 = kv.get_double("model.t1", p.t1);
        p.t2 = kv.get_double("model.t2", p.t2);
        p.phi = kv.get_double("model.phi", p.phi);
        p.m = kv.get_double("model.m", p.m);
        return p;
    };

    if (type == "haldane") return haldane_cylinder(L1, L2, haldane());
    if (type == "hofstadter") {
        HofstadterParams hp;
        hp.p = int(kv.get_int("model.p", hp.p));
        hp.q = int(kv.get_int("model.q", hp.q));
        hp.t = kv.get_double("model.t", hp.t);
        return hofstadter_cylinder(L1, L2, hp);
    }
    if (type == "stacked") {
        const auto shifts = kv.get_doubles("model.shifts", {});
        const auto chir = kv.get_doubles("model.chirality", std::vector<double>(shifts.size(), 1.0));
        require(!shifts.empty(), ErrorKind::config, "stacked model needs model.shifts");
        require(chir.size() == shifts.size(), ErrorKind::config, "model.chirality must match model.shifts");
        std::vector<LatticeHamiltonian> copies;
        for (double c : chir) {
            auto p = haldane();
            if (c < 0) p.phi = -p.phi;
            copies.push_back(haldane_cylinder(L1, L2, p));
        }
        return stacked_shifted(copies, shifts);
    }
    if (type == "dump") {
        std::ifstream in(kv.get_string("model.file", ""));
        require(in.good(), ErrorKind::config, "cannot open matrix dump " + kv.get_string("model.file", ""));
        return LatticeHamiltonian::read_dump(in);
    }
    throw Error(ErrorKind::config, "unknown model type '" + type + "'");
}

inline LatticeHamiltonian load_model_file(const std::string& path)
{
    return model_from_keys(KeyValueFile::parse_file(path));
}

} // namespace halledge
