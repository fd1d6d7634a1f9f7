#include <gtest/gtest.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {

struct Result {
    int code = -1;
    std::string out;
    std::map<std::string, std::string> kv;
};

std::string sample(const std::string& name) { return std::string(EBSP_SAMPLES_DIR) + "/" + name; }

Result cli(const std::string& args) {
    std::string cmd = std::string(EBSP_CLI_PATH) + " " + args + " 2>/dev/null";
    Result r;
    FILE* p = popen(cmd.c_str(), "r");
    if (!p) return r;
    std::array<char, 4096> buf;
    while (auto n = std::fread(buf.data(), 1, buf.size(), p)) r.out.append(buf.data(), n);
    int status = pclose(p);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    std::istringstream is(r.out);
    for (std::string line; std::getline(is, line);) {
        auto eq = line.find('=');
        if (eq != std::string::npos && line.find(' ') > eq) r.kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return r;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

fs::path scratch(const std::string& name) {
    auto d = fs::temp_directory_path() / ("ebsp_cli_" + name);
    fs::remove_all(d);
    return d;
}

}  // namespace

TEST(Cli, EvalPrintsStructure) {
    auto r = cli("eval --alphabet " + sample("unions.alpha") + " --tree " + sample("union20.sexp"));
    EXPECT_EQ(r.code, 0);
    EXPECT_NE(r.out.find("universe 20"), std::string::npos);
}

TEST(Cli, EquivK3AgainstP3) {
    // one variable sees no edges without loops; two variables find the non-edge of P3
    auto one = cli("equiv --a " + sample("k3.str") + " --b " + sample("p3.str") + " -m 1");
    auto two = cli("equiv --a " + sample("k3.str") + " --b " + sample("p3.str") + " -m 2");
    EXPECT_EQ(one.code, 0);
    EXPECT_EQ(one.out.substr(0, 4), "true");
    EXPECT_EQ(two.out.substr(0, 5), "false");
}

TEST(Cli, TypeDigestsAgreeWithEquiv) {
    auto p3 = cli("type --structure " + sample("p3.str") + " -m 2");
    auto star = cli("type --structure " + sample("star.str") + " -m 2");
    auto k3 = cli("type --structure " + sample("k3.str") + " -m 2");
    EXPECT_EQ(p3.kv["schema"], "1");
    EXPECT_EQ(p3.kv["digest"], star.kv["digest"]);
    EXPECT_NE(p3.kv["digest"], k3.kv["digest"]);
}

TEST(Cli, KernelReportAndArtifacts) {
    auto dir = scratch("kernel");
    auto r = cli("kernel --alphabet " + sample("unions.alpha") + " --tree " + sample("union20.sexp") +
                 " -m 2 --config " + sample("run.cfg") + " --out " + dir.string());
    ASSERT_EQ(r.code, 0);
    // a rank-2 sentence over a bare set counts up to 2
    EXPECT_EQ(r.kv["size_a"], "20");
    EXPECT_EQ(r.kv["size_b"], "2");
    for (auto k : {"accepted", "substructure", "contains_w", "within_bound", "delta1_preserved", "certificate_ok"})
        EXPECT_EQ(r.kv[k], "true") << k;
    EXPECT_TRUE(fs::exists(dir / "kernel.sexp"));
    EXPECT_TRUE(fs::exists(dir / "kernel.str"));
    auto cfg = slurp(dir / "config.txt");
    EXPECT_NE(cfg.find("fo_max_size=12"), std::string::npos);
    EXPECT_NE(cfg.find("seed=7"), std::string::npos);
    EXPECT_EQ(slurp(dir / "report.txt").substr(0, 9), "schema=1\n");
}

TEST(Cli, KernelOracleWithinCap) {
    auto r = cli("kernel --alphabet " + sample("cographs.alpha") + " --tree " + sample("cograph.sexp") +
                 " -m 1 --logic fo --protect 1,5");
    ASSERT_EQ(r.code, 0);
    EXPECT_EQ(r.kv["oracle_checked"], "true");
    EXPECT_EQ(r.kv["oracle_equal"], "true");
    EXPECT_EQ(r.kv["protected"], "2");
}

TEST(Cli, ScaleLandsInInterval) {
    auto r = cli("scale --alphabet " + sample("words.alpha") + " --tree " + sample("word12.sexp") +
                 " -m 1 --min 30 --max 32");
    ASSERT_EQ(r.code, 0);
    auto n = std::stoul(r.kv["output_size"]);
    EXPECT_GE(n, 30u);
    EXPECT_LE(n, 32u);
    EXPECT_EQ(r.kv["direction"], "up");
    EXPECT_EQ(r.kv["ok"], "true");
}

TEST(Cli, ScaleInfeasibleIsViolation) {
    // growing cannot reach an interval below the input size
    auto r = cli("scale --alphabet " + sample("unions.alpha") + " --tree " + sample("union20.sexp") +
                 " -m 1 --min 3 --max 5 --direction up");
    EXPECT_EQ(r.code, 1);
    EXPECT_TRUE(r.kv.count("infeasible"));
}

TEST(Cli, PscVerdicts) {
    auto f = sample("two_vertices.fo");
    auto yes = cli("psc-check --formula " + f + " --k 2 --max-size 5 --simple-graphs");
    auto no = cli("psc-check --formula " + f + " --k 1 --max-size 5 --simple-graphs");
    EXPECT_EQ(yes.code, 0);
    EXPECT_EQ(yes.kv["verdict"], "TRUE-UP-TO-5");
    EXPECT_EQ(no.code, 1);
    EXPECT_EQ(no.kv["verdict"], "FALSE");
    EXPECT_EQ(no.kv["counterexample_size"], "2");
}

TEST(Cli, PceCounterexampleWritten) {
    auto dir = scratch("pce");
    auto r = cli("pce-check --formula " + sample("clique.fo") + " --k 1 --max-size 3 --simple-graphs --out " +
                 dir.string());
    // single vertices are cliques and cover any graph; two non-adjacent vertices are not a clique
    EXPECT_EQ(r.code, 1);
    EXPECT_EQ(r.kv["verdict"], "FALSE");
    EXPECT_TRUE(fs::exists(dir / "counterexample.str"));
    EXPECT_TRUE(fs::exists(dir / "cover1.str"));
}

TEST(Cli, CruxOfStar) {
    auto r = cli("crux --formula " + sample("dominating.fo") + " --structure " + sample("star.str") + " --k 1");
    EXPECT_EQ(r.code, 0);
    EXPECT_EQ(r.kv["crux"], "1");
    auto none = cli("crux --formula " + sample("dominating.fo") + " --structure " + sample("p3.str") + " --k 0");
    EXPECT_EQ(none.code, 1);
    EXPECT_EQ(none.kv["found"], "false");
}

TEST(Cli, ModelcheckAgreesWithFullStructure) {
    for (auto f : {"two_vertices.fo", "clique.fo", "dominating.fo", "no_isolated.fo"}) {
        auto r = cli("modelcheck --formula " + sample(f) + " --alphabet " + sample("cographs.alpha") + " --tree " +
                     sample("cograph.sexp") + " --full");
        EXPECT_EQ(r.code, 0) << f;
        EXPECT_EQ(r.kv["agree"], "true") << f;
    }
}

TEST(Cli, VerifyFvc) {
    auto r = cli("verify-fvc --alphabet " + sample("cographs.alpha") + " --op bip -m 1 --logic mso --trials 20");
    EXPECT_EQ(r.code, 0);
    EXPECT_EQ(r.kv["passed"], "20");
}

TEST(Cli, GenCorpusIsSeeded) {
    auto a = cli("gen-corpus --alphabet " + sample("cographs.alpha") + " --count 5 --seed 9");
    auto b = cli("gen-corpus --alphabet " + sample("cographs.alpha") + " --count 5 --seed 9");
    auto c = cli("gen-corpus --alphabet " + sample("cographs.alpha") + " --count 5 --seed 10");
    EXPECT_EQ(a.code, 0);
    EXPECT_EQ(a.out, b.out);
    EXPECT_NE(a.out, c.out);
}

TEST(Cli, ReportsAreDeterministic) {
    auto d1 = scratch("det1"), d2 = scratch("det2");
    auto args = "scale --alphabet " + sample("words.alpha") + " --tree " + sample("word12.sexp") +
                " -m 1 --min 20 --max 25 --seed 3 --out ";
    ASSERT_EQ(cli(args + d1.string()).code, 0);
    ASSERT_EQ(cli(args + d2.string()).code, 0);
    for (auto f : {"config.txt", "report.txt", "scaled.sexp", "scaled.str"})
        EXPECT_EQ(slurp(d1 / f), slurp(d2 / f)) << f;
}

TEST(Cli, ExitCodes) {
    EXPECT_EQ(cli("").code, 2);
    EXPECT_EQ(cli("frobnicate").code, 2);
    EXPECT_EQ(cli("type --structure " + sample("clique.fo")).code, 2);                  // parse error
    EXPECT_EQ(cli("type --structure /nonexistent.str").code, 2);                         // unreadable
    EXPECT_EQ(cli("kernel --alphabet " + sample("cographs.alpha") + " --tree " + sample("cograph.sexp") +
                  " --protect 99").code, 2);                                              // domain
    EXPECT_EQ(cli("kernel --alphabet " + sample("cographs.alpha") + " --tree " + sample("cograph.sexp") +
                  " -m 2 --logic mso").code, 3);                                          // over the MSO cap
    EXPECT_EQ(cli("--help").code, 0);
}

#include "ebsp/config.hpp"

TEST(Config, ParsesKeysOverBase) {
    ebsp::RunConfig base;
    base.seed = 99;
    auto c = ebsp::parse_config("fo_max_size = 14 # wider\n\nenumeration_budget=5\n", base);
    EXPECT_EQ(c.limits.fo_max_size, 14u);
    EXPECT_EQ(c.enumeration_budget, 5u);
    EXPECT_EQ(c.seed, 99u);
    EXPECT_EQ(ebsp::parse_config(c.to_text()).to_text(), c.to_text());
}

TEST(Config, Rejects) {
    EXPECT_THROW(ebsp::parse_config("fo_max_size 3\n"), ebsp::ParseError);
    EXPECT_THROW(ebsp::parse_config("colour = red\n"), ebsp::ParseError);
    EXPECT_THROW(ebsp::parse_config("seed = -1\n"), ebsp::ParseError);
    EXPECT_THROW(ebsp::parse_config("fo_max_size = 0\n"), ebsp::DomainError);
    EXPECT_THROW(ebsp::parse_config("jobs = 0\n"), ebsp::DomainError);
}
