#include <catch_amalgamated.hpp>

#include "nvmsim/config.hpp"
#include "support.hpp"

using namespace nvmsim;

TEST_CASE("schema keys are unique and match the documented list") {
    std::vector<std::string> keys;
    for (const auto& k : schema()) keys.push_back(k.key);
    auto sorted = keys;
    std::sort(sorted.begin(), sorted.end());
    CHECK(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end());

    std::istringstream in(testing::slurp(testing::golden_path("config_keys.txt")));
    std::vector<std::string> golden;
    for (std::string line; std::getline(in, line);)
        if (!line.empty()) golden.push_back(line);
    CHECK(keys == golden);
}

TEST_CASE("every key round trips through get and set") {
    Settings s;
    for (const auto& k : schema()) {
        const std::string v = k.get(s);
        Settings t;
        set_value(t, k.key, v);
        CHECK(get_value(t, k.key) == v);
    }
}

TEST_CASE("config text round trip") {
    Settings s;
    set_value(s, "scheduler.policy", "decoupled-laser");
    set_value(s, "scheduler.th_aging", "1234.5");
    set_value(s, "aging.temperature", "337.25");
    set_value(s, "workload.kind", "mixed");
    set_value(s, "sweep.values", "1,2.5,3");
    set_value(s, "sweep.policies", "laser,baseline");
    set_value(s, "recovery.scale", "inf");
    std::ostringstream out;
    write_config(out, s);
    Settings t;
    std::istringstream in(out.str());
    load_config(t, in);
    for (const auto& k : schema()) CHECK(k.get(t) == k.get(s));
}

TEST_CASE("config file syntax") {
    Settings s;
    std::istringstream in(R"(# comment
aging.temperature = 310   # trailing comment

[scheduler]
policy = laser
th_aging=500
[workload]
  kind = uniform
)");
    load_config(s, in, "x.cfg");
    CHECK(s.sim.aging.temperature == 310);
    CHECK(s.sim.scheduler.policy == Policy::Laser);
    CHECK(s.sim.scheduler.th_aging == 500);
    CHECK(s.sim.workload.kind == WorkloadKind::UniformRandom);
}

TEST_CASE("config errors carry the source line and a suggestion") {
    auto message = [](const std::string& text) {
        Settings s;
        std::istringstream in(text);
        try {
            load_config(s, in, "x.cfg");
        } catch (const ConfigError& e) {
            return std::string(e.what());
        }
        return std::string();
    };
    const std::string m = message("\n[scheduler]\nth_agin = 5\n");
    CHECK(m.rfind("x.cfg:3:", 0) == 0);
    CHECK(m.find("scheduler.th_aging") != std::string::npos);
    CHECK(message("[scheduler\n").rfind("x.cfg:1:", 0) == 0);
    CHECK(message("just words\n").rfind("x.cfg:1:", 0) == 0);
    CHECK(message("scheduler.tDSI = -4\n").find("x.cfg:1:") == 0);
    CHECK(message("scheduler.tDSI = 1.5\n") != "");
    CHECK(message("aging.temperature = warm\n") != "");
    CHECK(message("scheduler.background_sweep = maybe\n") != "");
    CHECK(message("scheduler.policy = fifo\n") != "");
}

TEST_CASE("overrides") {
    Settings s;
    apply_override(s, "scheduler.tDSI=10");
    apply_override(s, " aging.A = 5 ");
    CHECK(s.sim.scheduler.tDSI == 10);
    CHECK(s.sim.aging.material_constant == 5);
    CHECK_FALSE(s.auto_material);
    apply_override(s, "aging.A=auto");
    CHECK(s.auto_material);
    CHECK_THROWS_AS(apply_override(s, "scheduler.tDSI"), ConfigError);
    CHECK_THROWS_AS(apply_override(s, "nope=1"), ConfigError);
}

TEST_CASE("nearest key suggestions") {
    CHECK(nearest_key("scheduler.th_agng") == "scheduler.th_aging");
    CHECK(nearest_key("timing.tdsc") == "timing.tDSC");
    CHECK(nearest_key("workload.sed") == "workload.seed");
}

TEST_CASE("sweep axes") {
    CHECK(sweep_key("th_aging") == "scheduler.th_aging");
    CHECK(sweep_key("tDSI") == "scheduler.tDSI");
    CHECK(sweep_key("temperature") == "aging.temperature");
    CHECK(sweep_key("recovery.kappa") == "recovery.kappa");
    CHECK_THROWS_AS(sweep_key("kappa"), ConfigError);
}

TEST_CASE("resolve fills in the material constant") {
    Settings s;
    const SimConfig c = resolve(s);
    CHECK(c.aging.material_constant == calibrated_aging(s).material_constant);
    CHECK(c.aging.material_constant > 1);

    // a run temperature away from the calibration point keeps A
    Settings hot = s;
    hot.sim.aging.temperature = 350;
    CHECK(resolve(hot).aging.material_constant == c.aging.material_constant);
    CHECK(resolve(hot).aging.temperature == 350);

    Settings fixed = s;
    set_value(fixed, "aging.A", "3.5");
    CHECK(resolve(fixed).aging.material_constant == 3.5);
}

TEST_CASE("invalid settings are rejected at resolve") {
    auto rejects = [](const std::string& key, const std::string& value) {
        Settings s;
        set_value(s, key, value);
        CHECK_THROWS_AS(resolve(s), ConfigError);
    };
    rejects("aging.Vth", "0.5");
    rejects("aging.temperature", "0");
    rejects("recovery.kappa", "1.5");
    rejects("geometry.channels", "0");
    rejects("voltage.destress.PS", "1.0");
    rejects("workload.read_fraction", "2");
    rejects("workload.write_cache_hit_rate", "1.5");
    rejects("sim.sample_interval", "0");
}

TEST_CASE("calibration run reproduces the target") {
    Settings s;
    const SimStats st = calibration_run(s);
    AgingParams at_ref = resolve(s).aging;
    const double years = ns_to_years(estimate_mttf(st, at_ref, s.sim.recovery));
    CHECK(years == Catch::Approx(2.0).epsilon(0.01));
}

TEST_CASE("shipped configs load") {
    for (const char* name : {"defaults.cfg", "desk-scale.cfg"}) {
        Settings s;
        load_config_file(s, std::string(NVMSIM_GOLDEN_DIR) + "/../../configs/" + name);
        CHECK_NOTHROW(resolve(s));
    }
    Settings d;
    load_config_file(d, std::string(NVMSIM_GOLDEN_DIR) + "/../../configs/defaults.cfg");
    Settings plain;
    for (const auto& k : schema())
        if (k.key.rfind("output.", 0) != 0 && k.key.rfind("sweep.", 0) != 0 && k.key.rfind("workload.", 0) != 0)
            CHECK(k.get(d) == k.get(plain));
}
