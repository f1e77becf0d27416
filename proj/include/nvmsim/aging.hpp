#pragma once

// BTI aging model for the peripheral circuitry of a PCM bank.
//
// A transistor held at gate overdrive V for time t has Weibull reliability
//
//     R(t) = exp(-(t / alpha(V))^beta),
//     alpha(V) = (A / V^gamma) * exp(Ea / (K T)) / Gamma(1 + 1/beta),
//
// so its mean time to failure is alpha(V) * Gamma(1 + 1/beta). Under a
// piecewise-constant voltage profile the exponent becomes the sum of
// dt_i / alpha(V_i); that sum is the block's "aging". Because the sum does
// not depend on the order of the intervals, aging can be tracked with per
// read / per write / per idle-cycle increments (UnitAging) and counters.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "common.hpp"
#include "timing.hpp"

namespace nvmsim {

struct AgingParams {
    /// Material constant A. Arbitrary units; normally produced by calibrate().
    double material_constant = 1.0;
    /// Voltage acceleration exponent gamma.
    double voltage_exponent = 6.0;
    /// Activation energy (eV).
    double activation_energy = 0.1;
    /// Boltzmann constant (eV/K).
    double boltzmann = 8.617333262e-5;
    /// Operating temperature (K).
    double temperature = 300.0;
    /// Weibull slope.
    double weibull_beta = 2.0;
    /// Threshold voltage (V).
    double threshold_voltage = 0.85;
    /// Feed alpha() the operating voltage instead of the overdrive voltage.
    bool use_operating_voltage = false;
    /// Accrued permanent aging at which a block is considered failed
    /// (the level that corresponds to a 10% V_th shift).
    double failure_aging = 4.2e14;

    void validate() const {
        if (!(material_constant > 0) || !(voltage_exponent > 0) || !(activation_energy > 0) ||
            !(temperature > 0) || !(weibull_beta > 0) || !(boltzmann > 0))
            throw ConfigError("aging: A, gamma, Ea, K, T and beta must all be positive");
        if (threshold_voltage < 0.7 || threshold_voltage > 1.0)
            throw ConfigError("aging: threshold voltage must lie in [0.7, 1.0] V");
        if (!(failure_aging > 0)) throw ConfigError("aging: failure_aging must be positive");
    }

    /// Voltage handed to alpha() for a block operating at `operating_voltage`.
    double stress_voltage(double operating_voltage) const {
        return use_operating_voltage ? operating_voltage : operating_voltage - threshold_voltage;
    }
};

inline double weibull_gamma_factor(double beta) { return std::tgamma(1.0 + 1.0 / beta); }

/// Weibull scale alpha(V) in ns.
inline double scale_parameter(double overdrive_voltage, const AgingParams& p) {
    if (!(overdrive_voltage > 0))
        throw DomainError("scale_parameter: overdrive voltage must be positive");
    return p.material_constant / std::pow(overdrive_voltage, p.voltage_exponent) *
           std::exp(p.activation_energy / (p.boltzmann * p.temperature)) / weibull_gamma_factor(p.weibull_beta);
}

/// MTTF of a transistor held at a constant overdrive voltage (ns).
inline double mttf_constant_voltage(double overdrive_voltage, const AgingParams& p) {
    return scale_parameter(overdrive_voltage, p) * weibull_gamma_factor(p.weibull_beta);
}

inline double reliability_from_aging(double aging, const AgingParams& p) {
    if (aging < 0 || std::isnan(aging)) throw DomainError("reliability_from_aging: aging must be non-negative");
    return std::exp(-std::pow(aging, p.weibull_beta));
}

struct VoltageSegment {
    double duration_ns = 0;
    double overdrive_voltage = 0;
};

/// Sum of duration / alpha(V) over the segments. Zero-length segments
/// contribute nothing.
inline double piecewise_aging(std::span<const VoltageSegment> segments, const AgingParams& p) {
    // Neumaier summation keeps the result order-independent to a few ulp
    double sum = 0, comp = 0;
    for (const auto& s : segments) {
        if (s.duration_ns < 0) throw DomainError("piecewise_aging: negative segment duration");
        double term = s.duration_ns / scale_parameter(s.overdrive_voltage, p);
        double t = sum + term;
        if (std::abs(sum) >= std::abs(term))
            comp += (sum - t) + term;
        else
            comp += (term - t) + sum;
        sum = t;
    }
    return sum + comp;
}

/// Aging accrued by one logic block per read, per write and per idle cycle.
struct UnitAging {
    double u_read = 0;
    double u_write = 0;
    double u_idle = 0;
};

inline UnitAging compute_unit_aging(Block block, const TimingParams& timing, const VoltageTable& volts,
                                    const AgingParams& p) {
    if (index(block) >= kBlockCount) throw DomainError("compute_unit_aging: unknown block");
    const double clk = timing.clock_period_ns;
    UnitAging u;
    u.u_read = static_cast<double>(timing.read_cycles()) * clk /
               scale_parameter(p.stress_voltage(volts.at(Mode::Read, block)), p);
    u.u_write = static_cast<double>(timing.write_cycles()) * clk /
                scale_parameter(p.stress_voltage(volts.at(Mode::Write, block)), p);
    u.u_idle = clk / scale_parameter(p.stress_voltage(volts.at(Mode::Idle, block)), p);
    return u;
}

inline double accumulate_counters(std::uint64_t n_read, std::uint64_t n_write, std::uint64_t n_idle_cycles,
                                  const UnitAging& u) {
    return static_cast<double>(n_read) * u.u_read + static_cast<double>(n_write) * u.u_write +
           static_cast<double>(n_idle_cycles) * u.u_idle;
}

/// Series system: the circuit fails with its first block.
inline double overall_aging(double ps, double vr, double sa) { return std::max({ps, vr, sa}); }

struct BlockAging {
    double recoverable = 0;
    double permanent = 0;

    double total() const { return recoverable + permanent; }
};

/// How much of the recoverable aging survives a de-stress.
///
/// The surviving share is kappa * (1 + recoverable / recovery_scale), capped
/// at 1: a block that was stressed harder since its last de-stress keeps a
/// larger part of its shift. With the default infinite scale the rule is the
/// plain linear one (a fixed share kappa survives).
struct RecoveryPolicy {
    double kappa = 0.05;
    double recovery_scale = std::numeric_limits<double>::infinity();

    void validate() const {
        if (!(kappa >= 0 && kappa <= 1)) throw ConfigError("recovery: kappa must lie in [0, 1]");
        if (!(recovery_scale > 0)) throw ConfigError("recovery: recovery_scale must be positive");
    }

    double permanent_share(double recoverable) const {
        if (kappa == 0) return 0;
        return std::min(1.0, kappa * (1.0 + recoverable / recovery_scale));
    }
};

inline BlockAging apply_destress(const BlockAging& b, const RecoveryPolicy& policy) {
    BlockAging out;
    out.permanent = b.permanent + policy.permanent_share(b.recoverable) * b.recoverable;
    out.recoverable = 0;
    return out;
}

/// Permanent aging a block would carry if it were de-stressed right now.
inline double permanent_equivalent(const BlockAging& b, const RecoveryPolicy& policy) {
    return apply_destress(b, policy).permanent;
}

/// Fraction of a de-stress window a block spends in each mode.
struct DutyCycle {
    double read = 0;
    double write = 0;
    double idle = 0;
    double destress = 0;

    double sum() const { return read + write + idle + destress; }
};

/// Steady-state stress profile of the baseline system: every block repeats
/// the same de-stress window of length window_ns.
struct BaselineProfile {
    std::array<DutyCycle, kBlockCount> duty{};
    double window_ns = 0;

    void validate() const {
        if (!(window_ns > 0)) throw DomainError("baseline profile: window length must be positive");
        for (const auto& d : duty) {
            if (d.read < 0 || d.write < 0 || d.idle < 0 || d.destress < 0)
                throw DomainError("baseline profile: negative duty fraction");
            if (std::abs(d.sum() - 1.0) > 1e-9) throw DomainError("baseline profile: duty cycles must sum to 1");
        }
    }
};

/// Profile of a window made of `reads` reads, `writes` writes and
/// `idle_cycles` idle cycles followed by one tDSC de-stress. Every block
/// takes part in every access.
inline BaselineProfile profile_from_window(std::uint64_t reads, std::uint64_t writes, std::uint64_t idle_cycles,
                                           const TimingParams& timing) {
    const double clk = timing.clock_period_ns;
    const double r = static_cast<double>(reads * timing.read_cycles()) * clk;
    const double w = static_cast<double>(writes * timing.write_cycles()) * clk;
    const double i = static_cast<double>(idle_cycles) * clk;
    const double d = static_cast<double>(timing.tDSC) * clk;
    if (r + w + i == 0) throw DomainError("baseline profile: window has no stress time");
    BaselineProfile p;
    p.window_ns = r + w + i + d;
    for (auto& duty : p.duty) duty = DutyCycle{r / p.window_ns, w / p.window_ns, i / p.window_ns, d / p.window_ns};
    return p;
}

/// Aging a block accrues over one window of the profile.
inline double window_aging(const BaselineProfile& prof, Block b, const VoltageTable& volts, const AgingParams& p) {
    const auto& d = prof.duty[index(b)];
    double a = 0;
    if (d.read > 0) a += d.read * prof.window_ns / scale_parameter(p.stress_voltage(volts.at(Mode::Read, b)), p);
    if (d.write > 0) a += d.write * prof.window_ns / scale_parameter(p.stress_voltage(volts.at(Mode::Write, b)), p);
    if (d.idle > 0) a += d.idle * prof.window_ns / scale_parameter(p.stress_voltage(volts.at(Mode::Idle, b)), p);
    return a;
}

/// Closed-form MTTF (ns) of the worst block under a periodic profile.
inline double profile_mttf(const BaselineProfile& prof, const VoltageTable& volts, const AgingParams& p,
                           const RecoveryPolicy& rec) {
    prof.validate();
    double worst = 0;
    for (Block b : kAllBlocks) {
        double w = window_aging(prof, b, volts, p);
        worst = std::max(worst, rec.permanent_share(w) * w);
    }
    if (worst == 0) return std::numeric_limits<double>::infinity();
    return p.failure_aging * prof.window_ns / worst;
}

/// Solve for the material constant A so that the worst block of the baseline
/// profile accrues `failure_aging` of permanent aging in exactly
/// `target_mttf_ns`. Every other field of `params` is kept.
///
/// Window aging scales as c / A. The permanent part of one window is
/// share(w) * w = kappa * (w + w^2 / scale) below the cap and w above it, so
/// w follows from a quadratic and A = c / w.
inline AgingParams calibrate(double target_mttf_ns, const BaselineProfile& prof, const VoltageTable& volts,
                             AgingParams params, const RecoveryPolicy& rec) {
    if (!(target_mttf_ns > 0)) throw DomainError("calibrate: target MTTF must be positive");
    prof.validate();
    rec.validate();
    if (rec.kappa == 0) throw DomainError("calibrate: kappa = 0 never accrues permanent aging");

    params.material_constant = 1.0;
    double c = 0;
    for (Block b : kAllBlocks) c = std::max(c, window_aging(prof, b, volts, params));
    if (!(c > 0)) throw DomainError("calibrate: degenerate profile accrues no aging");

    // permanent aging needed per window
    const double q = params.failure_aging * prof.window_ns / target_mttf_ns;
    const double k = rec.kappa;
    const double inv_s = 1.0 / rec.recovery_scale;
    double w = 2.0 * q / (k + std::sqrt(k * k + 4.0 * k * q * inv_s));
    if (k * (1.0 + w * inv_s) > 1.0) w = q;

    params.material_constant = c / w;
    return params;
}

} // namespace nvmsim
