#include <halledge/edge_spectrum.hpp>
#include <halledge/free_response.hpp>
#include <halledge/model_file.hpp>
#include <halledge/rg_flow.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <filesystem>
#include <iostream>
#include <set>

using namespace halledge;
using json = nlohmann::ordered_json;

namespace {

constexpr int exit_ok = 0, exit_usage = 1, exit_failed = 2;

// A flag that overrides one config key when given on the command line.
struct Override {
    std::string key;
    std::vector<std::string> values;
    CLI::Option* opt = nullptr;
};

struct Command {
    std::string name;
    CLI::App* app = nullptr;
    std::vector<std::unique_ptr<Override>> overrides;
    bool needs_model = false;

    void add(const std::string& flag, const std::string& key, const std::string& help, bool list = false)
    {
        auto o = std::make_unique<Override>();
        o->key = key;
        o->opt = app->add_option(flag, o->values, help + "  [" + key + "]");
        if (list)
            o->opt->delimiter(',');
        else
            o->opt->expected(1);
        overrides.push_back(std::move(o));
    }
};

struct Check {
    std::string name;
    double value;
    double tolerance;
    std::string relation; // "<=", ">=" or ">"
    bool pass;
};

class Report {
public:
    Report(std::string command, const KeyValueFile& kv, unsigned long seed) : command_(std::move(command))
    {
        j_["command"] = command_;
        j_["seed"] = seed;
        json in = json::object();
        for (const auto& [k, v] : kv.entries()) in[k] = v.size() == 1 ? json(v.front()) : json(v);
        j_["inputs"] = in;
        j_["results"] = json::object();
    }

    json& results() { return j_["results"]; }

    void check_le(const std::string& name, double value, double tol) { add({name, value, tol, "<=", value <= tol}); }
    void check_ge(const std::string& name, double value, double tol) { add({name, value, tol, ">=", value >= tol}); }
    void check_gt(const std::string& name, double value, double bound) { add({name, value, bound, ">", value > bound}); }
    void check_true(const std::string& name, bool ok) { add({name, ok ? 1.0 : 0.0, 1.0, ">=", ok}); }

    bool pass() const
    {
        for (const auto& c : checks_)
            if (!c.pass) return false;
        return true;
    }

    json finish() const
    {
        json j = j_;
        json cs = json::array();
        for (const auto& c : checks_)
            cs.push_back({{"name", c.name}, {"value", c.value}, {"relation", c.relation}, {"tolerance", c.tolerance},
                          {"pass", c.pass}});
        j["checks"] = cs;
        j["pass"] = pass();
        return j;
    }

    const std::vector<Check>& checks() const { return checks_; }

private:
    void add(Check c) { checks_.push_back(std::move(c)); }

    std::string command_;
    json j_;
    std::vector<Check> checks_;
};

class Csv {
public:
    Csv(const std::filesystem::path& path, const std::vector<std::string>& header) : out_(path)
    {
        require(out_.good(), ErrorKind::config, "cannot write " + path.string());
        out_ << std::setprecision(17);
        row_strings(header);
    }

    template <class... T>
    void row(const T&... cols)
    {
        bool first = true;
        ((out_ << (first ? "" : ",") << cols, first = false), ...);
        out_ << '\n';
    }

private:
    void row_strings(const std::vector<std::string>& cols)
    {
        for (std::size_t i = 0; i < cols.size(); ++i) out_ << (i ? "," : "") << cols[i];
        out_ << '\n';
    }

    std::ofstream out_;
};

struct Run {
    KeyValueFile kv;
    std::filesystem::path out;
    unsigned long seed = 0;

    double num(const std::string& key, double def) const { return kv.get_double(key, def); }
    int integer(const std::string& key, long def) const { return int(kv.get_int(key, def)); }
    std::string model_name() const { return kv.get_string("model.type", ""); }
    std::filesystem::path file(const std::string& name) const { return out / name; }
};

json complex_json(cplx z) { return {{"re", z.real()}, {"im", z.imag()}}; }

// ---------------------------------------------------------------------------

void cmd_spectrum(const Run& r, Report& rep)
{
    const auto H = model_from_keys(r.kv);
    const int Nk = r.integer("run.Nk", 64);
    require(Nk >= 2, ErrorKind::config, "run.Nk must be >= 2");
    const std::string model = r.model_name();
    Csv csv(r.file("spectrum.csv"), {"model", "L1", "L2", "k1", "band", "energy", "lower_weight"});
    std::ofstream dat(r.file("spectrum.dat"));
    dat << std::setprecision(17) << "# k1 energies...\n";
    double herm = 0, emin = 1e300, emax = -1e300;
    auto eps = parallel_map<Eigenpairs>(std::size_t(Nk), [&](std::size_t i) {
        return physical_eigenpairs(H.fiber(two_pi * double(i) / Nk), H.M(), H.L2());
    });
    for (int i = 0; i < Nk; ++i) {
        const double k = two_pi * i / Nk;
        const CMat F = H.fiber(k);
        herm = std::max(herm, max_abs(F - F.adjoint()));
        dat << k;
        for (int q = 0; q < eps[i].energies.size(); ++q) {
            const double e = eps[i].energies(q);
            emin = std::min(emin, e);
            emax = std::max(emax, e);
            csv.row(model, H.L1(), H.L2(), k, q, e, lower_weight(eps[i].vectors.col(q), H.M(), H.L2()));
            dat << ' ' << e;
        }
        dat << '\n';
    }
    rep.results() = {{"bands", eps.front().energies.size()}, {"Nk", Nk}, {"energy_min", emin}, {"energy_max", emax},
                     {"hermiticity_residual", herm}};
    rep.check_le("fiber_hermiticity", herm, r.num("tolerances.hermiticity", 1e-12));
}

EdgeAnalysis edge_analysis(const Run& r, const LatticeHamiltonian& H, double mu)
{
    return analyze_edges(FiberSource::from(H), mu, r.num("run.delta", 0.3), r.integer("run.Nk", 128),
                         r.num("tolerances.gamma_min", 1e-3));
}

void cmd_edges(const Run& r, Report& rep)
{
    const auto H = model_from_keys(r.kv);
    const double mu = r.num("run.mu", 0.05);
    const auto an = edge_analysis(r, H, mu);
    Csv csv(r.file("edges.csv"), {"model", "L1", "L2", "mu", "branch", "side", "kF", "velocity", "loc_rate", "loc_r2"});
    json modes = json::array();
    for (const auto& m : an.modes) {
        csv.row(r.model_name(), H.L1(), H.L2(), mu, m.branch, side_name(m.side), m.kF, m.v, m.loc_rate, m.loc_r2);
        modes.push_back({{"branch", m.branch}, {"side", side_name(m.side)}, {"kF", m.kF}, {"velocity", m.v},
                         {"loc_rate", m.loc_rate}, {"loc_r2", m.loc_r2}});
    }
    const auto& a = an.report;
    rep.results() = {{"modes", modes},
                     {"lower_count", an.count(EdgeSide::lower)},
                     {"upper_count", an.count(EdgeSide::upper)},
                     {"lower_chirality", an.chirality(EdgeSide::lower)},
                     {"upper_chirality", an.chirality(EdgeSide::upper)},
                     {"assumptions", {{"a", a.a}, {"b", a.b}, {"c", a.c}, {"d", a.d}}},
                     {"gamma", std::isfinite(a.gamma) ? json(a.gamma) : json(nullptr)},
                     {"delta", a.delta},
                     {"delta_tilde", a.delta_tilde},
                     {"diagnostics", a.diagnostics}};
    rep.check_true("assumptions_hold", a.all());
}

void cmd_conductance(const Run& r, Report& rep)
{
    const auto H = model_from_keys(r.kv);
    const double mu = r.num("run.mu", 0.05);
    StripSweep sw;
    sw.a = r.integer("run.a", H.L2() / 2 - 2);
    sw.aprime = r.integer("run.aprime", H.L2() / 4);
    sw.p1_count = r.integer("run.p1_count", 3);
    const FiberCache fc(H, H.L1());
    const auto est = edge_conductance_free(fc, mu, sw);
    const auto an = edge_analysis(r, H, mu);
    const int chir = an.chirality(EdgeSide::lower);
    const double target = chir / two_pi;

    Csv csv(r.file("conductance.csv"), {"model", "L1", "L2", "mu", "a", "aprime", "p1", "G_re", "G_im"});
    json rows = json::array();
    for (std::size_t i = 0; i < est.p1.size(); ++i) {
        csv.row(r.model_name(), H.L1(), H.L2(), mu, sw.a, sw.aprime, est.p1[i], est.G[i].real(), est.G[i].imag());
        rows.push_back({{"p1", est.p1[i]}, {"G", complex_json(est.G[i])}});
    }
    const double err = std::abs(two_pi * est.G_extrapolated - chir);
    rep.results() = {{"G_extrapolated", est.G_extrapolated},
                     {"two_pi_G", two_pi * est.G_extrapolated},
                     {"target", target},
                     {"lower_edge_chirality", chir},
                     {"absolute_error_two_pi_G", err},
                     {"relative_error", chir != 0 ? json(err / std::abs(chir)) : json(nullptr)},
                     {"imag_extrapolated", est.imag_extrapolated},
                     {"extrapolation_stderr", est.stderr_extrapolation},
                     {"opposite_order", est.opposite_order},
                     {"edge_assumptions_hold", an.report.all()},
                     {"samples", rows}};
    rep.check_le("two_pi_G_vs_chirality_sum", err, r.num("tolerances.conductance", 0.05));
    rep.check_le("imag_extrapolated", std::abs(est.imag_extrapolated), r.num("tolerances.conductance_imag", 1e-2));
}

void cmd_wick(const Run& r, Report& rep)
{
    const auto H = model_from_keys(r.kv);
    const double mu = r.num("run.mu", 0.05);
    const double eta = r.num("run.eta", two_pi * (6 + 1.0 / 3) / 20);
    const int n_p = r.integer("run.p1_index", 1), a = r.integer("run.a", 5), ap = r.integer("run.aprime", 2);
    const auto betas = r.kv.get_doubles("run.betas", {20, 40, 80});
    const auto horizons = r.kv.get_doubles("run.horizons", {1, 2, 4, 8, 16});
    const double T_long = r.num("run.T_horizon", 200);
    require(betas.size() >= 2 && horizons.size() >= 3, ErrorKind::config, "wick needs >= 2 betas and >= 3 horizons");
    const FiberCache fc(H, H.L1());
    Csv csv(r.file("wick.csv"), {"model", "L1", "L2", "mu", "eta", "a", "aprime", "p1_index", "beta", "T", "eta_beta",
                                 "lhs_re", "lhs_im", "rhs_re", "rhs_im", "residual"});
    auto run = [&](double beta, double T) {
        const auto w = wick_rotation_check(fc, mu, beta, T, eta, n_p, a, ap);
        csv.row(r.model_name(), H.L1(), H.L2(), mu, eta, a, ap, n_p, beta, T, w.eta_beta, w.lhs.real(), w.lhs.imag(),
                w.rhs.real(), w.rhs.imag(), w.residual);
        return w.residual;
    };
    std::vector<double> rb, rt;
    for (double b : betas) rb.push_back(run(b, T_long));
    const double beta_mid = betas[betas.size() / 2];
    for (double T : horizons) rt.push_back(run(beta_mid, T));
    double min_ratio = 1e300;
    for (std::size_t i = 0; i + 1 < rb.size(); ++i) min_ratio = std::min(min_ratio, rb[i] / rb[i + 1]);
    // the e^{-eta T} part must shrink toward the 1/beta plateau
    const double plateau = rt.back();
    bool decaying = true;
    for (std::size_t i = 0; i + 2 < rt.size(); ++i) decaying = decaying && (rt[i] - plateau > rt[i + 1] - plateau);
    rep.results() = {{"eta", eta},
                     {"residual_vs_beta", rb},
                     {"residual_vs_T", rt},
                     {"beta_for_T_sweep", beta_mid},
                     {"min_beta_doubling_ratio", min_ratio},
                     {"plateau", plateau}};
    rep.check_ge("beta_doubling_ratio", min_ratio, r.num("tolerances.wick_ratio", 1.8));
    rep.check_true("horizon_term_decays_to_plateau", decaying);
}

void cmd_ref_check(const Run& r, Report& rep)
{
    const int fixed = r.integer("reference.channels", 0);
    const int size = r.integer("reference.ensemble_size", 500);
    const double scale = r.num("reference.scale", 0.5);
    require(size >= 1, ErrorKind::config, "reference.ensemble_size must be >= 1");
    require(fixed >= 0 && fixed <= 16, ErrorKind::config, "reference.channels must be in [1, 16] (0 cycles 1..4)");
    std::mt19937_64 rng(r.seed);
    Csv csv(r.file("ref-check.csv"), {"seed", "member", "channels", "chirality_sum", "two_pi_G", "abs_error"});
    double worst = 0;
    for (int i = 0; i < size; ++i) {
        const int n = fixed > 0 ? fixed : 1 + i % 4;
        const auto P = random_params(rng, n, scale);
        const double g = two_pi * edge_conductance_ref(P), s = chirality_sum(P);
        worst = std::max(worst, std::abs(g - s));
        csv.row(r.seed, i, n, s, g, std::abs(g - s));
    }
    rep.results() = {{"ensemble_size", size}, {"max_abs_error", worst}};
    rep.check_le("max_abs_error", worst, r.num("tolerances.reference", 1e-9));
}

void cmd_bubble(const Run& r, Report& rep)
{
    const RegulatorConfig reg{r.integer("reference.h", -12), r.integer("reference.N", 12)};
    const double p0 = r.num("reference.p0", 0), p1 = r.num("reference.p1", 1), v = r.num("reference.v", 1);
    const auto b = bubble_regularized(p0, p1, v, reg);
    const cplx exact = bubble_closed(p0, p1, v);
    const double err = std::abs(b.value - exact);
    Csv csv(r.file("bubble.csv"), {"h", "N", "p0", "p1", "v", "value_re", "value_im", "closed_re", "closed_im",
                                   "abs_error", "quadrature_error"});
    csv.row(reg.h, reg.N, p0, p1, v, b.value.real(), b.value.imag(), exact.real(), exact.imag(), err, b.error);
    rep.results() = {{"value", complex_json(b.value)},
                     {"closed_form", complex_json(exact)},
                     {"abs_error", err},
                     {"quadrature_error", b.error},
                     {"nodes", b.nodes}};
    rep.check_le("bubble_vs_closed_form", err, r.num("tolerances.bubble", 1e-3));
}

void cmd_rg(const Run& r, Report& rep)
{
    const auto vs = r.kv.get_doubles("rg.v", {1, -1});
    const double lam = r.num("rg.lambda", 0.05);
    const int scales = r.integer("rg.scales", 30);
    const int n = int(vs.size());
    RMat L = RMat::Constant(n, n, lam);
    L.diagonal().setZero();
    const auto s0 = FlowState::initial(Eigen::Map<const RVec>(vs.data(), n), L);
    const auto tr = flow_run(s0, -scales);
    const auto rep_v = vanishing_beta_report(tr);

    std::vector<std::string> header{"h"};
    for (int w = 0; w < n; ++w) header.push_back("Z_" + std::to_string(w));
    for (int w = 0; w < n; ++w) header.push_back("v_" + std::to_string(w));
    for (auto c : {"lambda_drift", "max_beta_lambda", "tolerance"}) header.push_back(c);
    std::ofstream csv_out(r.file("rg.csv"));
    csv_out << std::setprecision(17);
    for (std::size_t i = 0; i < header.size(); ++i) csv_out << (i ? "," : "") << header[i];
    csv_out << '\n';
    for (std::size_t i = 0; i < tr.states.size(); ++i) {
        const auto& st = tr.states[i];
        csv_out << st.h;
        for (int w = 0; w < n; ++w) csv_out << ',' << st.Z(w);
        for (int w = 0; w < n; ++w) csv_out << ',' << st.v(w);
        csv_out << ',' << (st.lambda - s0.lambda).cwiseAbs().maxCoeff();
        if (i < tr.betas.size())
            csv_out << ',' << tr.betas[i].beta_lambda.cwiseAbs().maxCoeff() << ',' << tr.betas[i].tolerance;
        else
            csv_out << ",,";
        csv_out << '\n';
    }

    const double eta_max = *std::max_element(rep_v.eta.begin(), rep_v.eta.end());
    const double eta_min = *std::min_element(rep_v.eta.begin(), rep_v.eta.end());
    rep.results() = {{"scales", scales},
                     {"lambda", lam},
                     {"vanishing_at_truncation", rep_v.vanishing_at_truncation},
                     {"theta", rep_v.theta ? json(*rep_v.theta) : json(nullptr)},
                     {"max_beta_lambda", rep_v.max_beta_lambda},
                     {"max_tolerance", rep_v.max_tolerance},
                     {"eta", rep_v.eta},
                     {"max_lambda_drift", rep_v.max_lambda_drift},
                     {"max_v_drift", rep_v.max_v_drift},
                     {"beta_v_max", rep_v.beta_v_max},
                     {"theta_v", rep_v.theta_v ? json(*rep_v.theta_v) : json(nullptr)},
                     {"summary", rep_v.summary}};
    const double al = std::abs(lam);
    rep.check_le("lambda_drift", rep_v.max_lambda_drift, std::pow(al, 1.5));
    rep.check_le("velocity_drift", rep_v.max_v_drift, std::sqrt(al));
    rep.check_le("eta_max", eta_max, 10 * lam * lam);
    rep.check_gt("eta_min", eta_min, 0.0);
    rep.check_true("beta_lambda_below_tolerance", rep_v.vanishing_at_truncation);
}

} // namespace

// ---------------------------------------------------------------------------

int main(int argc, char** argv)
{
    CLI::App app{"Edge transport of 2D lattice fermions: spectra, free response, reference model and RG flow"};
    app.require_subcommand(1);
    std::string config_path, out_dir = ".";
    int threads = 0;
    unsigned long seed = 7;
    app.add_option("--config", config_path, "Config file ([run] [geometry] [model] [reference] [rg] [tolerances])");
    app.add_option("--threads", threads, "Worker threads (overrides HALLEDGE_THREADS)")->check(CLI::PositiveNumber);
    app.add_option("--out", out_dir, "Directory for CSV/JSON outputs");

    std::vector<std::unique_ptr<Command>> cmds;
    auto make = [&](const std::string& name, const std::string& help, bool model) {
        auto c = std::make_unique<Command>();
        c->name = name;
        c->needs_model = model;
        c->app = app.add_subcommand(name, help);
        c->app->add_option("--seed", seed, "RNG seed (recorded in every report)");
        if (model) {
            c->add("--model", "model.type", "haldane | hofstadter | stacked | dump");
            c->add("--L1", "geometry.L1", "Period along the cylinder axis");
            c->add("--L2", "geometry.L2", "Rows, including the two Dirichlet rows");
            c->add("--m", "model.m", "Haldane staggered mass");
            c->add("--phi", "model.phi", "Haldane flux phase");
            c->add("--t2", "model.t2", "Haldane second-neighbour amplitude");
            c->add("--flux-p", "model.p", "Hofstadter flux numerator");
            c->add("--flux-q", "model.q", "Hofstadter flux denominator");
            c->add("--shifts", "model.shifts", "Stacked copies: energy shifts", true);
            c->add("--chirality", "model.chirality", "Stacked copies: +1/-1 per copy", true);
            c->add("--dump", "model.file", "Matrix dump path for --model dump");
        }
        cmds.push_back(std::move(c));
        return cmds.back().get();
    };

    auto* spectrum = make("spectrum", "Fiber spectrum on a k1 grid", true);
    spectrum->add("--Nk", "run.Nk", "Number of k1 points");

    auto* edges = make("edges", "Edge-state extraction and assumption checks", true);
    edges->add("--mu", "run.mu", "Chemical potential");
    edges->add("--delta", "run.delta", "Half-width of the energy window");
    edges->add("--Nk", "run.Nk", "Number of k1 points in the scan");

    auto* cond = make("conductance", "Free edge conductance with p1 -> 0 extrapolation", true);
    cond->add("--mu", "run.mu", "Chemical potential");
    cond->add("--a", "run.a", "Density strip width");
    cond->add("--aprime", "run.aprime", "Current strip width");
    cond->add("--p1-count", "run.p1_count", "Number of smallest nonzero p1 used");
    cond->add("--delta", "run.delta", "Edge-analysis window half-width");
    cond->add("--Nk", "run.Nk", "Edge-analysis k1 points");
    bool topological = false, trivial = false;
    cond->app->add_flag("--topological", topological, "Haldane with m = 0");
    cond->app->add_flag("--trivial", trivial, "Haldane with m = 2 (no edge modes)");

    auto* wick = make("wick", "Real-time vs Euclidean Wick-rotation residual sweep", true);
    wick->add("--mu", "run.mu", "Chemical potential");
    wick->add("--eta", "run.eta", "Regularization eta");
    wick->add("--betas", "run.betas", "Inverse temperatures", true);
    wick->add("--horizons", "run.horizons", "Real-time horizons T", true);
    wick->add("--T", "run.T_horizon", "Horizon used in the beta sweep");
    wick->add("--p1", "run.p1_index", "p1 index on the 2 pi / L1 grid");
    wick->add("--a", "run.a", "Density strip width");
    wick->add("--aprime", "run.aprime", "Current strip width");

    auto* ref = make("ref-check", "Reference-model conductance over a random ensemble", false);
    ref->add("--channels", "reference.channels", "Channels per member (0 cycles 1..4)");
    ref->add("--ensemble-size", "reference.ensemble_size", "Ensemble size");
    ref->add("--scale", "reference.scale", "Coupling scale of random members");

    auto* bubble = make("bubble", "Regularized anomalous bubble vs closed form", false);
    bubble->add("--ir-scale", "reference.h", "Infrared scale h");
    bubble->add("--uv-scale", "reference.N", "Ultraviolet scale N");
    bubble->add("--p0", "reference.p0", "External frequency");
    bubble->add("--p1", "reference.p1", "External momentum");
    bubble->add("--v", "reference.v", "Channel velocity");

    auto* rg = make("rg", "Second-order RG flow and vanishing-beta report", false);
    rg->add("--v", "rg.v", "Channel velocities", true);
    rg->add("--lambda", "rg.lambda", "Off-diagonal coupling");
    rg->add("--scales", "rg.scales", "Number of scales");

    try {
        app.parse(argc, argv);
    } catch (const CLI::Error& e) {
        const int code = app.exit(e);
        return code == 0 ? exit_ok : exit_usage;
    }

    const auto start = std::chrono::steady_clock::now();
    Command* cmd = nullptr;
    for (auto& c : cmds)
        if (c->app->parsed()) cmd = c.get();
    try {
        if (threads > 0) thread_count() = threads;
        Run run;
        run.kv = config_path.empty() ? KeyValueFile{} : KeyValueFile::parse_file(config_path);
        run.seed = run.kv.has("run.seed") ? (unsigned long)run.kv.get_int("run.seed", 7) : 7;
        if (cmd->app->count("--seed")) run.seed = seed;
        std::set<std::string> known = {"run.seed",          "tolerances.hermiticity", "tolerances.gamma_min",
                                       "tolerances.conductance", "tolerances.conductance_imag", "tolerances.wick_ratio",
                                       "tolerances.reference",   "tolerances.bubble",        "model.t1",
                                       "model.t"};
        for (const auto& c : cmds)
            for (const auto& o : c->overrides) known.insert(o->key);
        for (const auto& k : run.kv.keys())
            require(known.count(k) > 0, ErrorKind::config, "unknown config key '" + k + "' (see schema/config_schema.md)");
        for (const auto& o : cmd->overrides)
            if (o->opt->count()) run.kv.set(o->key, o->values);
        if (topological) run.kv.set("model.m", {"0"});
        if (trivial) run.kv.set("model.m", {"2"});
        run.kv.set("run.seed", {std::to_string(run.seed)});
        if (cmd->needs_model && !run.kv.has("model.type")) {
            std::cerr << "error: --model is required (or [model] type in the config file)\n\n"
                      << cmd->app->help();
            return exit_usage;
        }
        run.out = out_dir;
        std::filesystem::create_directories(run.out);

        Report rep(cmd->name, run.kv, run.seed);
        if (cmd == spectrum) cmd_spectrum(run, rep);
        else if (cmd == edges) cmd_edges(run, rep);
        else if (cmd == cond) cmd_conductance(run, rep);
        else if (cmd == wick) cmd_wick(run, rep);
        else if (cmd == ref) cmd_ref_check(run, rep);
        else if (cmd == bubble) cmd_bubble(run, rep);
        else if (cmd == rg) cmd_rg(run, rep);

        const json report = rep.finish();
        {
            std::ofstream out(run.file(cmd->name + ".json"));
            out << report.dump(2) << '\n';
        }
        const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        {
            std::ofstream out(run.file(cmd->name + ".timing.json"));
            out << json{{"command", cmd->name}, {"wall_seconds", wall}, {"threads", thread_count()}}.dump(2) << '\n';
        }
        for (const auto& c : rep.checks())
            std::cout << (c.pass ? "PASS " : "FAIL ") << cmd->name << ' ' << c.name << ": " << c.value << ' '
                      << c.relation << ' ' << c.tolerance << '\n';
        std::cout << "report: " << run.file(cmd->name + ".json").string() << '\n';
        return rep.pass() ? exit_ok : exit_failed;
    } catch (const Error& e) {
        std::cerr << "error [" << cmd->name << "]: " << e.what() << '\n';
        const bool usage = e.kind() == ErrorKind::config || e.kind() == ErrorKind::validation;
        return usage ? exit_usage : exit_failed;
    }
}
