#include <catch2/catch_amalgamated.hpp>

#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <sys/wait.h>
#include <unistd.h>

namespace fs = std::filesystem;
using Catch::Matchers::ContainsSubstring;

namespace {

struct Result {
    int code = -1;
    std::string output;
};

// Per-process scratch directory, removed at exit.
struct Scratch {
    fs::path dir = fs::temp_directory_path() / ("halledge_cli_" + std::to_string(::getpid()));
    Scratch()
    {
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
    ~Scratch() { fs::remove_all(dir); }
};

const fs::path& scratch()
{
    static const Scratch s;
    return s.dir;
}

Result run(const std::string& args)
{
    const fs::path log = scratch() / "log.txt";
    const std::string cmd = "\"" + std::string(HALLEDGE_CLI) + "\" " + args + " > \"" + log.string() + "\" 2>&1";
    const int status = std::system(cmd.c_str());
    std::ifstream in(log);
    std::stringstream ss;
    ss << in.rdbuf();
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, ss.str()};
}

nlohmann::json report(const fs::path& p)
{
    std::ifstream in(p);
    return nlohmann::json::parse(in);
}

std::string first_line(const fs::path& p)
{
    std::ifstream in(p);
    std::string s;
    std::getline(in, s);
    return s;
}

std::string config(const std::string& name) { return (fs::path(HALLEDGE_CONFIGS) / name).string(); }

} // namespace

TEST_CASE("usage errors exit with code 1", "[cli]")
{
    const auto missing = run("spectrum");
    CHECK(missing.code == 1);
    CHECK_THAT(missing.output, ContainsSubstring("--model is required"));
    CHECK_THAT(missing.output, ContainsSubstring("Usage"));
    CHECK(run("").code == 1);
    CHECK(run("no-such-command").code == 1);
    CHECK(run("ref-check --ensemble-size abc").code == 1);
    CHECK(run("--config /nonexistent/file.ini ref-check").code == 1);

    const fs::path bad = scratch() / "bad.ini";
    std::ofstream(bad) << "[run]\nmuu = 3\n";
    const auto unknown = run("--config " + bad.string() + " ref-check");
    CHECK(unknown.code == 1);
    CHECK_THAT(unknown.output, ContainsSubstring("run.muu"));
    CHECK(run("conductance --model haldane --L1 12 --L2 12 --a 3 --aprime 5").code == 1);
    CHECK(run("--help").code == 0);
}

TEST_CASE("reference ensemble report", "[cli]")
{
    const fs::path out = scratch() / "ref";
    const auto r = run("--out " + out.string() + " ref-check --channels 3 --ensemble-size 500 --seed 7");
    REQUIRE(r.code == 0);
    const auto j = report(out / "ref-check.json");
    CHECK(j["seed"] == 7);
    CHECK(j["results"]["max_abs_error"].get<double>() <= 1e-9);
    CHECK(j["pass"] == true);
    CHECK(first_line(out / "ref-check.csv") == "seed,member,channels,chirality_sum,two_pi_G,abs_error");
    CHECK(fs::exists(out / "ref-check.timing.json"));
    CHECK_FALSE(j.contains("wall_seconds"));
}

TEST_CASE("failed numerical check exits with code 2", "[cli]")
{
    const fs::path cfg = scratch() / "strict.ini";
    std::ofstream(cfg) << "[reference]\nensemble_size = 20\n[tolerances]\nreference = -1\n";
    const fs::path out = scratch() / "strict";
    const auto r = run("--config " + cfg.string() + " --out " + out.string() + " ref-check");
    CHECK(r.code == 2);
    CHECK_THAT(r.output, ContainsSubstring("FAIL"));
    CHECK(report(out / "ref-check.json")["pass"] == false);
}

TEST_CASE("flags override config keys", "[cli]")
{
    const fs::path out = scratch() / "override";
    const auto r =
        run("--config " + config("hofstadter_edges.ini") + " --out " + out.string() + " spectrum --L1 8 --Nk 6");
    REQUIRE(r.code == 0);
    const auto j = report(out / "spectrum.json");
    CHECK(j["inputs"]["geometry.L1"] == "8");
    CHECK(j["inputs"]["geometry.L2"] == "24");
    CHECK(j["inputs"]["model.type"] == "hofstadter");
    CHECK(j["results"]["Nk"] == 6);
    CHECK(first_line(out / "spectrum.csv") == "model,L1,L2,k1,band,energy,lower_weight");
    std::ifstream dat(out / "spectrum.dat");
    std::string line;
    int rows = 0;
    while (std::getline(dat, line))
        if (!line.empty() && line[0] != '#') ++rows;
    CHECK(rows == 6);
}

TEST_CASE("shipped configs run and pass", "[cli]")
{
    const std::pair<std::string, std::string> cases[] = {{"reference.ini", "ref-check"},
                                                         {"bubble.ini", "bubble"},
                                                         {"wick.ini", "wick"},
                                                         {"hofstadter_edges.ini", "edges"},
                                                         {"rg.ini", "rg"},
                                                         {"haldane_conductance.ini", "conductance"},
                                                         {"counterpropagating_stack.ini", "conductance"}};
    for (const auto& [file, cmd] : cases) {
        const fs::path out = scratch() / ("cfg_" + file);
        const auto r = run("--config " + config(file) + " --out " + out.string() + " " + cmd);
        INFO(file << ": " << r.output);
        CHECK(r.code == 0);
        CHECK(report(out / (cmd + ".json"))["pass"] == true);
    }
}

TEST_CASE("reports are byte-identical across runs and thread counts", "[cli]")
{
    std::string text[2];
    for (int i = 0; i < 2; ++i) {
        const fs::path out = scratch() / ("repro" + std::to_string(i));
        REQUIRE(run("--threads " + std::to_string(i + 1) + " --out " + out.string() +
                    " --config " + config("wick.ini") + " wick")
                    .code == 0);
        std::ifstream in(out / "wick.json", std::ios::binary);
        text[i].assign(std::istreambuf_iterator<char>(in), {});
    }
    CHECK(!text[0].empty());
    CHECK(text[0] == text[1]);
}
