#include <catch_amalgamated.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>

#include "nvmsim/config.hpp"
#include "support.hpp"

using namespace nvmsim;
namespace fs = std::filesystem;

namespace {

struct Result {
    int rc = -1;
    std::string out;
    std::string err;
};

fs::path scratch() {
    static const fs::path dir = [] {
        fs::path d = fs::temp_directory_path() / "nvmsim_cli_test";
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

Result cli(const std::string& args, const std::string& env = "") {
    const fs::path out = scratch() / "stdout", err = scratch() / "stderr";
    const std::string cmd = env + (env.empty() ? "" : " ") + "'" + NVMSIM_BIN + "' " + args + " > '" + out.string() +
                            "' 2> '" + err.string() + "'";
    const int status = std::system(cmd.c_str());
    Result r;
    r.rc = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = testing::slurp(out.string());
    r.err = testing::slurp(err.string());
    return r;
}

std::string config(const std::string& name) { return std::string(NVMSIM_CONFIG_DIR) + "/" + name; }

std::size_t count_lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

} // namespace

TEST_CASE("help lists every config key") {
    const Result r = cli("--help");
    CHECK(r.rc == 0);
    for (const auto& k : schema()) CHECK(r.out.find(k.key) != std::string::npos);
    for (const char* sub : {"run", "compare", "sweep", "gen-trace", "calibrate"}) CHECK(r.out.find(sub) != std::string::npos);
}

TEST_CASE("usage errors exit with 2") {
    CHECK(cli("").rc == 2);
    CHECK(cli("frobnicate").rc == 2);
    CHECK(cli("run --no-such-flag").rc == 2);

    const Result typo = cli("run --set scheduler.th_agin=3");
    CHECK(typo.rc == 2);
    CHECK(typo.err.find("scheduler.th_aging") != std::string::npos);

    CHECK(cli("run --set scheduler.tDSI=abc").rc == 2);
    CHECK(cli("run -c /nonexistent/x.cfg").rc == 2);
    CHECK(cli("run --trace /nonexistent/t.trace").rc == 2);
    CHECK(cli("run --policy fifo").rc == 2);
    CHECK(cli("calibrate --set calibration.reads=0 --set calibration.writes=0").rc == 2);
    CHECK(cli("calibrate --target-years -1").rc == 2);
}

TEST_CASE("run prints one CSV row") {
    const Result r = cli("run --set workload.requests=2000 --policy laser");
    REQUIRE(r.rc == 0);
    std::istringstream in(r.out);
    const auto rows = parse_report_csv(in);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].policy == "laser");
    CHECK(rows[0].workload == "microbenchmark");
    CHECK(rows[0].cycles > 0);

    const Result text = cli("run --set workload.requests=200 --format text");
    CHECK(text.rc == 0);
    CHECK(text.out.find("mttf_est (years)") != std::string::npos);
}

TEST_CASE("flags beat --set, which beats the config file") {
    const fs::path cfg = scratch() / "prec.cfg";
    {
        std::ofstream f(cfg);
        f << "[scheduler]\npolicy = laser\n[workload]\nrequests = 300\nseed = 5\n";
    }
    auto policy_of = [](const Result& r) {
        std::istringstream in(r.out);
        return parse_report_csv(in).at(0).policy;
    };
    CHECK(policy_of(cli("run -c '" + cfg.string() + "'")) == "laser");
    CHECK(policy_of(cli("run -c '" + cfg.string() + "' --set scheduler.policy=baseline")) == "baseline");
    CHECK(policy_of(cli("run -c '" + cfg.string() + "' --set scheduler.policy=baseline --policy decoupled-laser")) ==
          "decoupled-laser");
    CHECK(policy_of(cli("run", "NVMSIM_CONFIG='" + cfg.string() + "'")) == "laser");

    const Result seeded = cli("run -c '" + cfg.string() + "' --seed 9 --set workload.kind=uniform");
    const Result same = cli("run -c '" + cfg.string() + "' --set workload.seed=9 --set workload.kind=uniform");
    const Result other = cli("run -c '" + cfg.string() + "' --set workload.kind=uniform");
    CHECK(seeded.out == same.out);
    CHECK(seeded.out != other.out);
}

TEST_CASE("compare runs every policy in order and is reproducible") {
    const std::string args = "compare -c '" + config("desk-scale.cfg") + "' --set workload.requests=3000 --jobs 3";
    const Result a = cli(args);
    REQUIRE(a.rc == 0);
    CHECK(count_lines(a.out) == 4);
    CHECK(a.out.find("\nbaseline,") != std::string::npos);
    CHECK(a.out.find("\nlaser,") < a.out.find("\ndecoupled-laser,"));
    CHECK(cli(args).out == a.out);
    CHECK(cli("compare -c '" + config("desk-scale.cfg") + "' --set workload.requests=3000 --jobs 1").out == a.out);
}

TEST_CASE("sweep writes one row per value and policy") {
    const Result r = cli("sweep --axis tDSI --values 10,100 --set workload.requests=1000");
    REQUIRE(r.rc == 0);
    CHECK(count_lines(r.out) == 7);
    CHECK(r.out.rfind("axis,value,policy,", 0) == 0);
    CHECK(r.out.find("tDSI,10,baseline,") != std::string::npos);
    CHECK(r.out.find("tDSI,100,decoupled-laser,") != std::string::npos);
    CHECK(cli("sweep --axis bogus --values 1").rc == 2);
}

TEST_CASE("gen-trace output replays") {
    const fs::path trace = scratch() / "gen.trace.gz";
    const Result g = cli("gen-trace --set workload.kind=mixed --set workload.requests=500 -o '" + trace.string() + "'");
    REQUIRE(g.rc == 0);
    const auto records = read_trace_file(trace.string());
    CHECK(records.size() == 500);
    const Result from_file = cli("run --trace '" + trace.string() + "' --set workload.name=mixed");
    const Result generated = cli("run --set workload.kind=mixed --set workload.requests=500");
    REQUIRE(from_file.rc == 0);
    CHECK(from_file.out == generated.out);
}

TEST_CASE("calibrate writes a config that reproduces the target") {
    for (double years : {2.0, 4.0}) {
        const fs::path out = scratch() / "cal.cfg";
        const Result r = cli("calibrate --target-years " + format_number(years) + " -o '" + out.string() + "'");
        REQUIRE(r.rc == 0);
        CHECK(r.out.find("aging.A = ") != std::string::npos);
        Settings s;
        load_config_file(s, out.string());
        CHECK_FALSE(s.auto_material);
        const double mttf = ns_to_years(
            profile_mttf(calibration_profile(s), s.sim.voltages, s.sim.aging, s.sim.recovery));
        CHECK(mttf == Catch::Approx(years).epsilon(1e-9));
    }
}

TEST_CASE("action log is written on request") {
    const fs::path log = scratch() / "actions.csv";
    const Result r = cli("run --policy laser --set workload.requests=200 --action-log '" + log.string() + "'");
    REQUIRE(r.rc == 0);
    const std::string text = testing::slurp(log.string());
    CHECK(text.rfind("cycle,bank,action,detail\n", 0) == 0);
    CHECK(count_lines(text) == 201);
}
