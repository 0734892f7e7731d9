#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <sstream>

#include "hsl_cli.hpp"
#include "testing.hpp"

using namespace hsl;
namespace fs = std::filesystem;
using io::json;

namespace {

struct Run {
    int code;
    std::string out, err;
};

Run invoke(std::vector<std::string> args) {
    args.insert(args.begin(), "hsl");
    std::vector<char const*> argv;
    for (auto const& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    int const code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::string tmp(std::string const& name) {
    auto const dir = fs::temp_directory_path() / "hsl_test_cli";
    fs::create_directories(dir);
    return (dir / name).string();
}

json load(std::string const& path) { return json::parse(io::read_file(path)); }

}  // namespace

TEST(Cli, Genus0ThenVerify) {
    auto const mesh = tmp("g0.csv"), rep = tmp("g0.json"), recon = tmp("g0_recon.json");
    auto const r = invoke({"genus0", "--a", "0.5", "--grid", "48", "--out", mesh, "--report", rep, "--recon", recon});
    ASSERT_EQ(r.code, 0) << r.err;
    auto const j = load(rep);
    EXPECT_LT(j.at("identity_residual").get<double>(), 1e-10);
    EXPECT_LT(j.at("periodicity").get<double>(), 1e-8);
    EXPECT_EQ(j.at("maslov_coordinate_scale").get<double>(), kMaslovCoordinate);
    auto const v = invoke({"verify", "--mesh", mesh, "--report", tmp("v.json")});
    EXPECT_EQ(v.code, 0) << v.err;
    EXPECT_TRUE(load(tmp("v.json")).at("pass").get<bool>());
    auto const t = invoke({"theta-map", "--data", recon, "--grid", "9", "--size", "0.3", "--out", tmp("theta.csv")});
    EXPECT_EQ(t.code, 0) << t.err;
    EXPECT_EQ(io::read_mesh(tmp("theta.csv")).grid.nu, 9);
}

TEST(Cli, OutputsAreReproducible) {
    auto const a = tmp("rep_a.csv"), b = tmp("rep_b.csv");
    ASSERT_EQ(invoke({"genus0", "--a", "0.3,0.4", "--grid", "16", "--out", a, "--report", a + ".json"}).code, 0);
    ASSERT_EQ(invoke({"genus0", "--a", "0.3,0.4", "--grid", "16", "--out", b, "--report", b + ".json"}).code, 0);
    EXPECT_EQ(io::read_file(a), io::read_file(b));
    EXPECT_EQ(io::read_file(a + ".json"), io::read_file(b + ".json"));
    auto const la = tmp("lax_a.json"), lb = tmp("lax_b.json");
    ASSERT_EQ(invoke({"--seed", "5", "lax", "--d", "0", "--steps", "10", "--out", la}).code, 0);
    ASSERT_EQ(invoke({"--seed", "5", "lax", "--d", "0", "--steps", "10", "--out", lb}).code, 0);
    EXPECT_EQ(io::read_file(la), io::read_file(lb));
}

TEST(Cli, InvalidInputs) {
    auto const r = invoke({"--json-errors", "genus0", "--a", "1.5"});
    EXPECT_EQ(r.code, 2);
    auto const e = json::parse(r.err);
    EXPECT_EQ(e.at("error").at("code").get<int>(), 2);
    EXPECT_EQ(e.at("error").at("kind").get<std::string>(), "invalid_input");
    EXPECT_EQ(invoke({"genus0", "--a", "0.5x"}).code, 2);
    EXPECT_EQ(invoke({"verify", "--mesh", tmp("missing.csv")}).code, 2);
    EXPECT_EQ(invoke({"verify"}).code, 2);
    EXPECT_EQ(invoke({}).code, 2);
    EXPECT_EQ(invoke({"frobnicate"}).code, 2);
    EXPECT_EQ(invoke({"--modes", "4", "genus0"}).code, 2);
    auto const u = invoke({"--json-errors", "genus0", "--bogus"});
    EXPECT_EQ(u.code, 2);
    EXPECT_EQ(json::parse(u.err).at("error").at("kind").get<std::string>(), "usage");
}

TEST(Cli, Help) {
    auto const r = invoke({"--help"});
    EXPECT_EQ(r.code, 0);
    EXPECT_NE(r.out.find("genus0"), std::string::npos);
    EXPECT_EQ(invoke({"dress", "--help"}).code, 0);
}

TEST(Cli, ConfigPrecedence) {
    auto const cfg = tmp("cfg.json");
    io::write_file(cfg, R"({"grid": 32, "tolerances": {"identity": 1e-9}})");
    auto const rep = tmp("cfg_rep.json");
    ASSERT_EQ(invoke({"--config", cfg, "genus0", "--report", rep}).code, 0);
    EXPECT_EQ(load(rep).at("grid").at("nu").get<int>(), 32);
    ASSERT_EQ(invoke({"--config", cfg, "genus0", "--grid", "36", "--report", rep}).code, 0);
    EXPECT_EQ(load(rep).at("grid").at("nu").get<int>(), 36);
    io::write_file(cfg, R"({"gird": 12})");
    auto const bad = invoke({"--json-errors", "--config", cfg, "genus0"});
    EXPECT_EQ(bad.code, 2);
    EXPECT_NE(bad.err.find("gird"), std::string::npos);
}

TEST(Cli, UnderResolvedGridIsRejected) {
    auto const r = invoke({"--json-errors", "genus0", "--grid", "12"});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("does not resolve"), std::string::npos) << r.err;
}

TEST(Cli, VerifyThresholdsFromConfig) {
    auto const mesh = tmp("thr.csv");
    ASSERT_EQ(invoke({"genus0", "--grid", "24", "--out", mesh}).code, 0);
    auto const cfg = tmp("thr.json");
    io::write_file(cfg, R"({"tolerances": {"conformality": 1e-30}})");
    auto const r = invoke({"--json-errors", "--config", cfg, "verify", "--mesh", mesh});
    EXPECT_EQ(r.code, 4);
    EXPECT_EQ(json::parse(r.err).at("error").at("kind").get<std::string>(), "verification_failure");
}

TEST(Cli, FactorizeRoundTrip) {
    std::mt19937_64 rng(91);
    auto const g = fixtures::random_group_loop(rng, 16, 0.5);
    auto const in = tmp("fac_in.json"), out = tmp("fac_out.json");
    io::write_loop(in, g);
    auto const r = invoke({"factorize", "--in", in, "--out", out});
    ASSERT_EQ(r.code, 0) << r.err;
    auto const j = load(out);
    auto const e = io::loop_from_json(j.at("e_part")), i = io::loop_from_json(j.at("i_part"));
    EXPECT_LT(sampled_distance(multiply(e, i), g), 1e-8);
    EXPECT_LT(unitarity_defect(e), 1e-9);
    EXPECT_LT(negative_mode_mass(i), 1e-10);
    EXPECT_EQ(invoke({"factorize", "--in", in}).code, 2);
}

TEST(Cli, SymesLaxAndDress) {
    auto const s = invoke({"symes", "--grid", "9", "--size", "0.3", "--report", tmp("sy.json")});
    ASSERT_EQ(s.code, 0) << s.err;
    auto const l = invoke({"lax", "--d", "1", "--steps", "20", "--report", tmp("lx.json")});
    ASSERT_EQ(l.code, 0) << l.err;
    EXPECT_LT(load(tmp("lx.json")).at("char_poly_drift").get<double>(), 1e-8);
    auto const d = invoke({"dress", "--grid", "9", "--report", tmp("dr.json"), "--out", tmp("dr.csv")});
    ASSERT_EQ(d.code, 0) << d.err;
    auto const j = load(tmp("dr.json"));
    EXPECT_LT(j.at("factorization_residual").get<double>(), 1e-9);
    EXPECT_EQ(io::read_mesh(tmp("dr.csv")).grid.nu, 9);
    io::write_file(tmp("neg.json"), io::loop_to_json(TwistedLoop::monomial(-2, fixtures::dressing_vacuum().A(), 16)).dump());
    EXPECT_EQ(invoke({"dress", "--grid", "9", "--modes", "16", "--potential", tmp("neg.json")}).code, 2);
    // N = 16 cannot hold the dressed frames to the factorization tolerance
    auto const c = invoke({"--json-errors", "dress", "--grid", "9", "--modes", "16"});
    EXPECT_EQ(c.code, 3);
    EXPECT_EQ(json::parse(c.err).at("error").at("kind").get<std::string>(), "convergence_failure");
}

// the installed binary maps failures to process exit codes
TEST(Cli, BinaryExitCodes) {
    std::string const tool = HSL_TOOL_PATH;
    auto status = [](std::string const& cmd) {
        int const s = std::system((cmd + " >/dev/null 2>&1").c_str());
        return WIFEXITED(s) ? WEXITSTATUS(s) : -1;
    };
    EXPECT_EQ(status(tool + " --help"), 0);
    EXPECT_EQ(status(tool + " genus0 --grid 32"), 0);
    EXPECT_EQ(status(tool + " genus0 --grid 12"), 2);
    EXPECT_EQ(status(tool + " genus0 --a 2"), 2);
    EXPECT_EQ(status(tool + " verify --mesh " + tmp("nope.csv")), 2);
}
