#include <catch_amalgamated.hpp>

#include <algorithm>
#include <numbers>
#include <random>

#include "nvmsim/aging.hpp"
#include "nvmsim/config.hpp"
#include "support.hpp"

using namespace nvmsim;
using Catch::Approx;
using testing::rel_close;

namespace {

// Straight transcription of the Weibull scale in long double.
long double oracle_alpha(long double v, const AgingParams& p) {
    return static_cast<long double>(p.material_constant) / std::pow(v, (long double)p.voltage_exponent) *
           std::exp((long double)p.activation_energy / ((long double)p.boltzmann * p.temperature)) /
           std::tgamma(1.0L + 1.0L / p.weibull_beta);
}

long double oracle_sum(const std::vector<VoltageSegment>& segs, const AgingParams& p) {
    long double s = 0;
    for (const auto& g : segs) s += g.duration_ns / oracle_alpha(g.overdrive_voltage, p);
    return s;
}

} // namespace

TEST_CASE("gamma factor matches known values") {
    CHECK(weibull_gamma_factor(2.0) == Approx(std::sqrt(std::numbers::pi) / 2).epsilon(1e-15));
    CHECK(weibull_gamma_factor(1.0) == Approx(1.0).epsilon(1e-15));
    CHECK(weibull_gamma_factor(1.5) == Approx(0.9027452929509336).epsilon(1e-14));
    CHECK(weibull_gamma_factor(3.0) == Approx(0.8929795115692492).epsilon(1e-14));
}

TEST_CASE("scale parameter agrees with a long double oracle") {
    AgingParams p;
    p.material_constant = 121.45;
    for (double v : {0.05, 0.35, 1.0, 2.0, 2.85, 4.0})
        CHECK(rel_close(scale_parameter(v, p), static_cast<double>(oracle_alpha(v, p)), 1e-13));
    p.temperature = 350;
    p.weibull_beta = 1.5;
    CHECK(rel_close(scale_parameter(1.3, p), static_cast<double>(oracle_alpha(1.3, p)), 1e-13));
}

TEST_CASE("voltage acceleration follows the power law") {
    AgingParams p;
    CHECK(scale_parameter(2.0, p) / scale_parameter(1.0, p) == Approx(std::pow(2.0, -6.0)).epsilon(1e-14));
    double prev = scale_parameter(0.01, p);
    for (double v = 0.02; v < 4; v += 0.01) {
        double a = scale_parameter(v, p);
        CHECK(a < prev);
        prev = a;
    }
}

TEST_CASE("scale parameter falls with temperature") {
    AgingParams p;
    double prev = scale_parameter(1.0, p);
    for (double t = 310; t <= 400; t += 10) {
        p.temperature = t;
        double a = scale_parameter(1.0, p);
        CHECK(a < prev);
        prev = a;
    }
}

TEST_CASE("non-positive overdrive voltage is rejected") {
    AgingParams p;
    CHECK_THROWS_AS(scale_parameter(0.0, p), DomainError);
    CHECK_THROWS_AS(scale_parameter(-0.3, p), DomainError);
    CHECK_THROWS_AS(scale_parameter(std::nan(""), p), DomainError);
}

TEST_CASE("constant-voltage MTTF") {
    AgingParams p;
    p.material_constant = 3.0;
    const double direct = 3.0 / std::pow(0.5, 6.0) * std::exp(0.1 / (8.617333262e-5 * 300.0));
    CHECK(mttf_constant_voltage(0.5, p) == Approx(direct).epsilon(1e-14));
    CHECK(mttf_constant_voltage(0.5, p) ==
          Approx(scale_parameter(0.5, p) * weibull_gamma_factor(2.0)).epsilon(1e-15));

    // raising Ea/KT by ln 2 doubles the lifetime
    AgingParams hot = p;
    const double x = p.activation_energy / (p.boltzmann * p.temperature);
    hot.temperature = p.activation_energy / (p.boltzmann * (x + std::log(2.0)));
    CHECK(mttf_constant_voltage(0.5, hot) / mttf_constant_voltage(0.5, p) == Approx(2.0).epsilon(1e-12));
}

TEST_CASE("reliability from aging") {
    AgingParams p;
    CHECK(reliability_from_aging(0, p) == 1.0);
    CHECK(reliability_from_aging(1, p) == Approx(std::exp(-1.0)).epsilon(1e-15));
    double prev = 1.0;
    for (double a = 0.05; a < 4; a += 0.05) {
        double r = reliability_from_aging(a, p);
        CHECK(r <= prev);
        CHECK(r >= 0.0);
        prev = r;
    }
    CHECK_THROWS_AS(reliability_from_aging(-1e-9, p), DomainError);

    // five segments: exponent is the sum of dt / alpha
    std::vector<VoltageSegment> segs{{10, 0.35}, {200, 2.85}, {5, 2.0}, {1000, 0.35}, {57, 2.0}};
    p.material_constant = 50;
    const long double sum = oracle_sum(segs, p);
    CHECK(reliability_from_aging(piecewise_aging(segs, p), p) ==
          Approx(static_cast<double>(std::exp(-std::pow(sum, 2.0L)))).epsilon(1e-12));
}

TEST_CASE("piecewise aging basics") {
    AgingParams p;
    CHECK(piecewise_aging({}, p) == 0.0);
    std::vector<VoltageSegment> one{{42, 1.5}};
    CHECK(piecewise_aging(one, p) == Approx(42 / scale_parameter(1.5, p)).epsilon(1e-15));
    std::vector<VoltageSegment> with_zero{{42, 1.5}, {0, 0.7}};
    CHECK(piecewise_aging(with_zero, p) == piecewise_aging(one, p));
    std::vector<VoltageSegment> neg{{-1, 1.0}};
    CHECK_THROWS_AS(piecewise_aging(neg, p), DomainError);
    std::vector<VoltageSegment> bad_v{{1, 0.0}};
    CHECK_THROWS_AS(piecewise_aging(bad_v, p), DomainError);
}

TEST_CASE("piecewise aging is order independent") {
    AgingParams p;
    p.material_constant = 121.45;
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> dur(0.0, 1e4), volt(0.05, 3.0);
    std::uniform_int_distribution<int> count(1, 7);
    for (int trial = 0; trial < 40; ++trial) {
        std::vector<VoltageSegment> segs(count(rng));
        for (auto& s : segs) s = {dur(rng), volt(rng)};
        const double ref = piecewise_aging(segs, p);
        CHECK(rel_close(ref, static_cast<double>(oracle_sum(segs, p)), 1e-12));
        std::sort(segs.begin(), segs.end(), [](auto& a, auto& b) {
            return std::tie(a.duration_ns, a.overdrive_voltage) < std::tie(b.duration_ns, b.overdrive_voltage);
        });
        do {
            REQUIRE(rel_close(piecewise_aging(segs, p), ref, 1e-12));
        } while (std::next_permutation(segs.begin(), segs.end(), [](auto& a, auto& b) {
            return std::tie(a.duration_ns, a.overdrive_voltage) < std::tie(b.duration_ns, b.overdrive_voltage);
        }));
    }
}

TEST_CASE("counters agree with the segment sum") {
    Settings s;
    AgingParams p = calibrated_aging(s);
    const TimingParams& t = s.sim.timing;
    const VoltageTable& v = s.sim.voltages;
    for (Block b : kAllBlocks) {
        const UnitAging u = compute_unit_aging(b, t, v, p);
        CHECK(accumulate_counters(0, 0, 0, u) == 0.0);
        CHECK(accumulate_counters(1, 0, 0, u) == u.u_read);
        CHECK(accumulate_counters(0, 1, 0, u) == u.u_write);
        CHECK(accumulate_counters(0, 0, 1, u) == u.u_idle);
        const VoltageSegment rd{static_cast<double>(t.read_cycles()), p.stress_voltage(v.at(Mode::Read, b))};
        const VoltageSegment wr{static_cast<double>(t.write_cycles()), p.stress_voltage(v.at(Mode::Write, b))};
        const VoltageSegment id{1.0, p.stress_voltage(v.at(Mode::Idle, b))};
        for (std::uint64_t nr = 0; nr <= 8; ++nr)
            for (std::uint64_t nw = 0; nw <= 8; ++nw)
                for (std::uint64_t ni : {0, 1, 7, 64, 255, 256}) {
                    std::vector<VoltageSegment> segs;
                    for (std::uint64_t i = 0; i < nr; ++i) segs.push_back(rd);
                    for (std::uint64_t i = 0; i < nw; ++i) segs.push_back(wr);
                    for (std::uint64_t i = 0; i < ni; ++i) segs.push_back(id);
                    REQUIRE(rel_close(accumulate_counters(nr, nw, ni, u), piecewise_aging(segs, p), 1e-12));
                }

        // 3 reads, 2 writes and 100 idle cycles in any interleaving
        std::vector<VoltageSegment> segs{rd, rd, rd, wr, wr};
        for (int i = 0; i < 100; ++i) segs.push_back(id);
        std::mt19937 rng(11);
        const double counted = accumulate_counters(3, 2, 100, u);
        for (int k = 0; k < 50; ++k) {
            std::shuffle(segs.begin(), segs.end(), rng);
            CHECK(rel_close(piecewise_aging(segs, p), counted, 1e-12));
        }
    }
}

TEST_CASE("unit aging of the default voltages") {
    Settings s;
    AgingParams p = calibrated_aging(s);
    const UnitAging ps = compute_unit_aging(Block::PS, s.sim.timing, s.sim.voltages, p);
    const UnitAging sa = compute_unit_aging(Block::SA, s.sim.timing, s.sim.voltages, p);
    CHECK(ps.u_write > ps.u_read);
    CHECK(sa.u_read > sa.u_write);
    for (Block b : kAllBlocks) {
        const UnitAging u = compute_unit_aging(b, s.sim.timing, s.sim.voltages, p);
        CHECK(u.u_read > 0);
        CHECK(u.u_write > 0);
        CHECK(u.u_idle > 0);
    }
    CHECK_THROWS_AS(compute_unit_aging(static_cast<Block>(7), s.sim.timing, s.sim.voltages, p), DomainError);

    // a block whose idle voltage is not above V_th cannot be modeled
    VoltageTable low = s.sim.voltages;
    low.at(Mode::Idle, Block::PS) = 0.8;
    CHECK_THROWS_AS(compute_unit_aging(Block::PS, s.sim.timing, low, p), DomainError);
}

TEST_CASE("calibrated defaults match the high-precision reference") {
    const auto golden = testing::read_golden_values("calibrated_defaults.txt");
    Settings s;
    const AgingParams p = calibrated_aging(s);
    CHECK(rel_close(p.material_constant, golden.at("A")[0], 1e-12));
    CHECK(rel_close(scale_parameter(3.7 - 0.85, p), golden.at("alpha_write_PS")[0], 1e-12));
    for (Block b : kAllBlocks) {
        const auto& g = golden.at("unit_" + std::string(to_string(b)));
        const UnitAging u = compute_unit_aging(b, s.sim.timing, s.sim.voltages, p);
        CHECK(rel_close(u.u_read, g[0], 1e-12));
        CHECK(rel_close(u.u_write, g[1], 1e-12));
        CHECK(rel_close(u.u_idle, g[2], 1e-12));
    }
}

TEST_CASE("overall aging is the worst block") {
    CHECK(overall_aging(2, 2, 2) == 2);
    CHECK(overall_aging(1, 2, 3) == 3);
    CHECK(overall_aging(5, 0, 1) == 5);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> d(0, 1e3);
    for (int i = 0; i < 500; ++i) {
        std::array<double, 3> a{d(rng), d(rng), d(rng)};
        const double m = *std::max_element(a.begin(), a.end());
        CHECK(overall_aging(a[0], a[1], a[2]) == m);
        CHECK(overall_aging(a[2], a[0], a[1]) == m);
    }
}

TEST_CASE("de-stress with the linear rule") {
    RecoveryPolicy lin{0.05};
    BlockAging b{1000, 0};
    BlockAging after = apply_destress(b, lin);
    CHECK(after.recoverable == 0);
    CHECK(after.permanent == Approx(50).epsilon(1e-15));
    after.recoverable = 1000;
    after = apply_destress(after, lin);
    CHECK(after.permanent == Approx(100).epsilon(1e-15));

    RecoveryPolicy none{0.0};
    CHECK(apply_destress(BlockAging{500, 7}, none).total() == 7);
    CHECK(apply_destress(BlockAging{500, 7}, none).permanent == 7);

    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> d(0, 1e4), k(0, 1);
    for (int i = 0; i < 300; ++i) {
        BlockAging x{d(rng), d(rng)};
        RecoveryPolicy pol{k(rng), i % 2 ? 800.0 : std::numeric_limits<double>::infinity()};
        CHECK(apply_destress(x, pol).total() <= x.total() + 1e-9);
        CHECK(apply_destress(x, pol).permanent >= x.permanent);
    }
}

TEST_CASE("convex recovery keeps more of a larger shift") {
    RecoveryPolicy conv{0.05, 800};
    CHECK(conv.permanent_share(0) == Approx(0.05));
    CHECK(conv.permanent_share(800) == Approx(0.10));
    double prev = 0;
    for (double r = 0; r < 5e5; r += 997) {
        double s = conv.permanent_share(r);
        CHECK(s >= prev);
        CHECK(s <= 1.0);
        prev = s;
    }
    CHECK(conv.permanent_share(1e9) == 1.0);
    CHECK_THROWS_AS((RecoveryPolicy{1.5}.validate()), ConfigError);
    CHECK_THROWS_AS((RecoveryPolicy{0.05, 0}.validate()), ConfigError);
}

TEST_CASE("calibration round trip") {
    Settings s;
    const BaselineProfile prof = calibration_profile(s);
    const double target = years_to_ns(2.0);
    for (double scale : {std::numeric_limits<double>::infinity(), 800.0, 50.0}) {
        RecoveryPolicy rec{0.05, scale};
        AgingParams p = calibrate(target, prof, s.sim.voltages, s.sim.aging, rec);
        CHECK(rel_close(profile_mttf(prof, s.sim.voltages, p, rec), target, 1e-9));
    }
}

TEST_CASE("doubling the target doubles A under the linear rule") {
    Settings s;
    const BaselineProfile prof = calibration_profile(s);
    RecoveryPolicy lin{0.05};
    const double a2 = calibrate(years_to_ns(2), prof, s.sim.voltages, s.sim.aging, lin).material_constant;
    const double a4 = calibrate(years_to_ns(4), prof, s.sim.voltages, s.sim.aging, lin).material_constant;
    CHECK(a4 / a2 == Approx(2.0).epsilon(1e-12));
}

TEST_CASE("calibration rejects unusable inputs") {
    Settings s;
    const BaselineProfile prof = calibration_profile(s);
    RecoveryPolicy lin{0.05};
    CHECK_THROWS_AS(calibrate(0, prof, s.sim.voltages, s.sim.aging, lin), DomainError);
    CHECK_THROWS_AS(calibrate(-1, prof, s.sim.voltages, s.sim.aging, lin), DomainError);
    CHECK_THROWS_AS(calibrate(1e9, prof, s.sim.voltages, s.sim.aging, RecoveryPolicy{0.0}), DomainError);
    CHECK_THROWS_AS(profile_from_window(0, 0, 0, s.sim.timing), DomainError);
    BaselineProfile bad = prof;
    bad.duty[0].read += 0.5;
    CHECK_THROWS_AS(calibrate(1e9, bad, s.sim.voltages, s.sim.aging, lin), DomainError);
}

TEST_CASE("kappa zero gives an unbounded MTTF") {
    Settings s;
    const BaselineProfile prof = calibration_profile(s);
    CHECK(std::isinf(profile_mttf(prof, s.sim.voltages, s.sim.aging, RecoveryPolicy{0.0})));
}
