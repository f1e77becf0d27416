#pragma once

// Key-value configuration.
//
//     # comment
//     [scheduler]
//     policy = laser
//     th_aging = 1000
//     aging.gamma = 6        # dotted keys work outside sections too
//
// A `[section]` header prefixes every following key with "section.".
// Unknown keys are errors and come with the nearest known key as a hint.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "engine.hpp"

namespace nvmsim {

/// The stress window the material constant is fitted to.
struct CalibrationSpec {
    double target_mttf_years = 2.0;
    std::uint64_t reads_per_window = 50;
    std::uint64_t writes_per_window = 50;
    std::uint64_t idle_cycles_per_window = 0;
    /// Temperature the target MTTF refers to (K).
    double temperature = 300.0;
};

struct Settings {
    SimConfig sim;
    /// Solve aging.A from the calibration section when the config is resolved.
    bool auto_material = true;
    CalibrationSpec calibration;

    std::string output = "-";
    std::string action_log;
    std::string format = "csv";
    /// Parallel sweep workers; 0 means one per hardware thread.
    unsigned jobs = 0;
    std::string sweep_axis = "th_aging";
    std::vector<double> sweep_values{500, 1000, 2000};
    std::vector<Policy> policies{Policy::Baseline, Policy::Laser, Policy::DecoupledLaser};

    /// Recovery scale of the shipped configuration: a block de-stressed with
    /// one calibration window of recoverable aging keeps about twice kappa.
    static constexpr double kDefaultRecoveryScale = 800.0;

    Settings() {
        sim.scheduler.policy = Policy::Baseline;
        sim.workload.kind = WorkloadKind::Microbenchmark;
        sim.recovery.recovery_scale = kDefaultRecoveryScale;
    }
};

struct SchemaKey {
    std::string key;
    std::string type;
    std::string doc;
    std::function<std::string(const Settings&)> get;
    std::function<void(Settings&, const std::string&)> set;
};

namespace detail {

inline std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
}

inline std::string trim_copy(std::string_view s) {
    return std::string(trim(s));
}

inline double to_double(const std::string& key, const std::string& v) {
    const char* b = v.c_str();
    char* e = nullptr;
    double d = std::strtod(b, &e);
    if (e == b || *e != '\0' || std::isnan(d)) throw ConfigError(key + ": expected a number, got '" + v + "'");
    return d;
}

inline std::uint64_t to_uint(const std::string& key, const std::string& v) {
    std::uint64_t u = 0;
    if (!parse_uint(std::string_view(v), u, 10)) {
        // accept integral values written in exponent form, e.g. 1e5
        double d = 0;
        try {
            d = to_double(key, v);
        } catch (const ConfigError&) {
            throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
        }
        if (d < 0 || d != std::floor(d) || d > 1.8e19)
            throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
        u = static_cast<std::uint64_t>(d);
    }
    return u;
}

inline bool to_bool(const std::string& key, const std::string& v) {
    const std::string l = lower(v);
    if (l == "true" || l == "1" || l == "yes" || l == "on") return true;
    if (l == "false" || l == "0" || l == "no" || l == "off") return false;
    throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

inline std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(v);
    while (std::getline(in, cur, ',')) {
        cur = trim_copy(cur);
        if (!cur.empty()) out.push_back(cur);
    }
    return out;
}

inline std::string num(double v) { return format_number(v); }

inline std::size_t edit_distance(std::string_view a, std::string_view b) {
    std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j)
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

} // namespace detail

inline const std::vector<SchemaKey>& schema() {
    using namespace detail;
    static const std::vector<SchemaKey> keys = [] {
        std::vector<SchemaKey> k;
        auto add = [&k](std::string key, std::string type, std::string doc, auto get, auto set) {
            k.push_back({std::move(key), std::move(type), std::move(doc), get, set});
        };
        // Helpers binding a key to a field reached through an accessor.
        auto add_real = [&add](std::string key, std::string doc, auto field) {
            add(key, "real", std::move(doc), [field](const Settings& s) { return num(field(const_cast<Settings&>(s))); },
                [field, key](Settings& s, const std::string& v) { field(s) = to_double(key, v); });
        };
        auto add_uint = [&add](std::string key, std::string doc, auto field) {
            add(key, "integer", std::move(doc),
                [field](const Settings& s) { return std::to_string(field(const_cast<Settings&>(s))); },
                [field, key](Settings& s, const std::string& v) {
                    using T = std::remove_reference_t<decltype(field(s))>;
                    std::uint64_t u = to_uint(key, v);
                    if (u > std::numeric_limits<T>::max()) throw ConfigError(key + ": value out of range");
                    field(s) = static_cast<T>(u);
                });
        };
        auto add_bool = [&add](std::string key, std::string doc, auto field) {
            add(key, "bool", std::move(doc),
                [field](const Settings& s) { return std::string(field(const_cast<Settings&>(s)) ? "true" : "false"); },
                [field, key](Settings& s, const std::string& v) { field(s) = to_bool(key, v); });
        };
        auto add_string = [&add](std::string key, std::string doc, auto field) {
            add(key, "string", std::move(doc), [field](const Settings& s) { return field(const_cast<Settings&>(s)); },
                [field](Settings& s, const std::string& v) { field(s) = v; });
        };

        // geometry
        add_uint("geometry.channels", "memory channels", [](Settings& s) -> auto& { return s.sim.geometry.channels; });
        add_uint("geometry.ranks_per_channel", "ranks per channel",
                 [](Settings& s) -> auto& { return s.sim.geometry.ranks_per_channel; });
        add_uint("geometry.banks_per_rank", "banks per rank",
                 [](Settings& s) -> auto& { return s.sim.geometry.banks_per_rank; });
        add_uint("geometry.partitions_per_bank", "partitions per bank",
                 [](Settings& s) -> auto& { return s.sim.geometry.partitions_per_bank; });
        add_uint("geometry.rows_per_partition", "rows per partition",
                 [](Settings& s) -> auto& { return s.sim.geometry.rows_per_partition; });
        add_uint("geometry.lines_per_row", "cache lines per row",
                 [](Settings& s) -> auto& { return s.sim.geometry.lines_per_row; });
        add_uint("geometry.line_bytes", "bytes per cache line",
                 [](Settings& s) -> auto& { return s.sim.geometry.line_bytes; });

        // timing
        add_real("timing.clock_ns", "memory clock period (ns per cycle)",
                 [](Settings& s) -> auto& { return s.sim.timing.clock_period_ns; });
        add_real("timing.read.tRCD", "read tRCD (ns)", [](Settings& s) -> auto& { return s.sim.timing.read.tRCD; });
        add_real("timing.read.tRAS", "read tRAS (ns)", [](Settings& s) -> auto& { return s.sim.timing.read.tRAS; });
        add_real("timing.read.tRP", "read tRP (ns)", [](Settings& s) -> auto& { return s.sim.timing.read.tRP; });
        add_real("timing.read.tRC", "read tRC, the bank occupancy of a read (ns)",
                 [](Settings& s) -> auto& { return s.sim.timing.read.tRC; });
        add_real("timing.write.tRCD", "write tRCD (ns)", [](Settings& s) -> auto& { return s.sim.timing.write.tRCD; });
        add_real("timing.write.tBURST", "write tBURST (ns)",
                 [](Settings& s) -> auto& { return s.sim.timing.write.tBURST; });
        add_real("timing.write.tWR", "write tWR (ns)", [](Settings& s) -> auto& { return s.sim.timing.write.tWR; });
        add_real("timing.write.tRP", "write tRP (ns)", [](Settings& s) -> auto& { return s.sim.timing.write.tRP; });
        add_real("timing.write.tRC", "write tRC, the bank occupancy of a write (ns)",
                 [](Settings& s) -> auto& { return s.sim.timing.write.tRC; });
        add_real("timing.write.tVERIFY", "verify step at the end of a write (ns)",
                 [](Settings& s) -> auto& { return s.sim.timing.write.tVERIFY; });
        add_uint("timing.tDSC", "de-stress duration (cycles)", [](Settings& s) -> auto& { return s.sim.timing.tDSC; });

        // voltages
        for (Mode m : {Mode::Read, Mode::Write, Mode::Idle, Mode::DeStress}) {
            static const char* names[] = {"read", "write", "idle", "destress"};
            for (Block b : kAllBlocks) {
                std::string key = std::string("voltage.") + names[static_cast<int>(m)] + "." + std::string(to_string(b));
                add_real(key, std::string(names[static_cast<int>(m)]) + "-mode voltage of " + std::string(to_string(b)) + " (V)",
                         [m, b](Settings& s) -> auto& { return s.sim.voltages.at(m, b); });
            }
        }

        // aging model
        add("aging.A", "real|auto", "material constant; 'auto' solves it from the calibration section",
            [](const Settings& s) { return s.auto_material ? std::string("auto") : num(s.sim.aging.material_constant); },
            [](Settings& s, const std::string& v) {
                if (lower(v) == "auto") {
                    s.auto_material = true;
                    return;
                }
                s.sim.aging.material_constant = to_double("aging.A", v);
                s.auto_material = false;
            });
        add_real("aging.gamma", "voltage acceleration exponent",
                 [](Settings& s) -> auto& { return s.sim.aging.voltage_exponent; });
        add_real("aging.Ea", "activation energy (eV)",
                 [](Settings& s) -> auto& { return s.sim.aging.activation_energy; });
        add_real("aging.K", "Boltzmann constant (eV/K)", [](Settings& s) -> auto& { return s.sim.aging.boltzmann; });
        add_real("aging.temperature", "operating temperature (K)",
                 [](Settings& s) -> auto& { return s.sim.aging.temperature; });
        add_real("aging.beta", "Weibull slope", [](Settings& s) -> auto& { return s.sim.aging.weibull_beta; });
        add_real("aging.Vth", "threshold voltage (V)", [](Settings& s) -> auto& { return s.sim.aging.threshold_voltage; });
        add_bool("aging.use_operating_voltage", "feed alpha() the operating voltage instead of the overdrive",
                 [](Settings& s) -> auto& { return s.sim.aging.use_operating_voltage; });
        add_real("aging.failure_aging", "permanent aging that counts as failure",
                 [](Settings& s) -> auto& { return s.sim.aging.failure_aging; });

        add_real("recovery.kappa", "share of recoverable aging made permanent at each de-stress",
                 [](Settings& s) -> auto& { return s.sim.recovery.kappa; });
        add("recovery.scale", "real|inf", "recoverable aging at which the permanent share doubles",
            [](const Settings& s) { return num(s.sim.recovery.recovery_scale); },
            [](Settings& s, const std::string& v) {
                s.sim.recovery.recovery_scale = lower(v) == "inf" ? std::numeric_limits<double>::infinity()
                                                                  : to_double("recovery.scale", v);
            });

        add_real("calibration.target_mttf_years", "baseline MTTF the material constant is fitted to (years)",
                 [](Settings& s) -> auto& { return s.calibration.target_mttf_years; });
        add_uint("calibration.reads", "reads per calibration window",
                 [](Settings& s) -> auto& { return s.calibration.reads_per_window; });
        add_uint("calibration.writes", "writes per calibration window",
                 [](Settings& s) -> auto& { return s.calibration.writes_per_window; });
        add_uint("calibration.idle_cycles", "idle cycles per calibration window",
                 [](Settings& s) -> auto& { return s.calibration.idle_cycles_per_window; });
        add_real("calibration.temperature", "temperature of the calibration point (K)",
                 [](Settings& s) -> auto& { return s.calibration.temperature; });

        // scheduler
        add("scheduler.policy", "baseline|laser|decoupled-laser", "scheduling policy",
            [](const Settings& s) { return std::string(to_string(s.sim.scheduler.policy)); },
            [](Settings& s, const std::string& v) { s.sim.scheduler.policy = parse_policy(v); });
        add_uint("scheduler.tDSI", "baseline: requests between de-stress operations",
                 [](Settings& s) -> auto& { return s.sim.scheduler.tDSI; });
        add_real("scheduler.th_aging", "aging threshold (aging units)",
                 [](Settings& s) -> auto& { return s.sim.scheduler.th_aging; });
        add_uint("scheduler.th_idle", "idle threshold (cycles)", [](Settings& s) -> auto& { return s.sim.scheduler.th_idle; });
        add_uint("scheduler.th_backlog", "backlogging threshold (cycles)",
                 [](Settings& s) -> auto& { return s.sim.scheduler.th_backlog; });
        add_uint("scheduler.queue_capacity", "read-write queue entries",
                 [](Settings& s) -> auto& { return s.sim.scheduler.queue_capacity; });
        add_bool("scheduler.background_sweep", "de-stress over-threshold banks that have no queued request",
                 [](Settings& s) -> auto& { return s.sim.scheduler.background_sweep; });

        // workload
        add("workload.kind", "microbenchmark|uniform|read-heavy|write-heavy|mixed", "synthetic workload",
            [](const Settings& s) { return std::string(to_string(s.sim.workload.kind)); },
            [](Settings& s, const std::string& v) { s.sim.workload.kind = parse_workload_kind(v); });
        add_string("workload.trace", "trace file to replay instead of a synthetic workload (.gz accepted)",
                   [](Settings& s) -> auto& { return s.sim.trace_path; });
        add_string("workload.name", "label used in reports", [](Settings& s) -> auto& { return s.sim.workload_name; });
        add_uint("workload.requests", "synthetic request count",
                 [](Settings& s) -> auto& { return s.sim.workload.request_count; });
        add_real("workload.interarrival", "mean cycles between arrivals (0: all at cycle 0)",
                 [](Settings& s) -> auto& { return s.sim.workload.interarrival; });
        add("workload.arrival", "fixed|geometric", "inter-arrival process",
            [](const Settings& s) {
                return std::string(s.sim.workload.arrival == ArrivalProcess::Fixed ? "fixed" : "geometric");
            },
            [](Settings& s, const std::string& v) {
                if (v == "fixed")
                    s.sim.workload.arrival = ArrivalProcess::Fixed;
                else if (v == "geometric")
                    s.sim.workload.arrival = ArrivalProcess::Geometric;
                else
                    throw ConfigError("workload.arrival: expected fixed or geometric, got '" + v + "'");
            });
        add_real("workload.read_fraction", "read share of the uniform mix",
                 [](Settings& s) -> auto& { return s.sim.workload.read_fraction; });
        add_uint("workload.phase_length", "mixed: requests per read-heavy / write-heavy phase",
                 [](Settings& s) -> auto& { return s.sim.workload.phase_length; });
        add_uint("workload.seed", "random seed", [](Settings& s) -> auto& { return s.sim.workload.seed; });
        add_real("workload.write_cache_hit_rate", "share of requests absorbed by the eDRAM write cache",
                 [](Settings& s) -> auto& { return s.sim.write_cache_hit_rate; });

        // run control and output
        add_uint("sim.max_cycles", "stop after this many cycles (0: run until the trace drains)",
                 [](Settings& s) -> auto& { return s.sim.max_cycles; });
        add_uint("sim.sample_interval", "cycles between aging samples",
                 [](Settings& s) -> auto& { return s.sim.sample_interval; });
        add_bool("sim.fast_forward", "skip idle stretches instead of stepping them cycle by cycle",
                 [](Settings& s) -> auto& { return s.sim.fast_forward; });
        add_string("sim.action_log", "write the controller action log to this file",
                   [](Settings& s) -> auto& { return s.action_log; });
        add_string("output.path", "report destination ('-' for stdout)", [](Settings& s) -> auto& { return s.output; });
        add("output.format", "csv|text", "report format", [](const Settings& s) { return s.format; },
            [](Settings& s, const std::string& v) {
                if (v != "csv" && v != "text") throw ConfigError("output.format: expected csv or text, got '" + v + "'");
                s.format = v;
            });
        add_uint("sweep.jobs", "parallel sweep workers (0: one per hardware thread)",
                 [](Settings& s) -> auto& { return s.jobs; });
        add_string("sweep.axis", "th_aging, tDSI, temperature or any numeric key",
                   [](Settings& s) -> auto& { return s.sweep_axis; });
        add("sweep.values", "list", "comma-separated sweep values",
            [](const Settings& s) {
                std::string out;
                for (double v : s.sweep_values) out += (out.empty() ? "" : ",") + num(v);
                return out;
            },
            [](Settings& s, const std::string& v) {
                s.sweep_values.clear();
                for (const auto& f : split_list(v)) s.sweep_values.push_back(to_double("sweep.values", f));
            });
        add("sweep.policies", "list", "policies run by compare and sweep",
            [](const Settings& s) {
                std::string out;
                for (Policy p : s.policies) out += (out.empty() ? "" : ",") + std::string(to_string(p));
                return out;
            },
            [](Settings& s, const std::string& v) {
                s.policies.clear();
                for (const auto& f : split_list(v)) s.policies.push_back(parse_policy(f));
                if (s.policies.empty()) throw ConfigError("sweep.policies: list is empty");
            });
        return k;
    }();
    return keys;
}

inline const SchemaKey* find_key(std::string_view key) {
    for (const auto& k : schema())
        if (k.key == key) return &k;
    return nullptr;
}

inline std::string nearest_key(std::string_view key) {
    std::string best;
    std::size_t best_d = std::numeric_limits<std::size_t>::max();
    for (const auto& k : schema()) {
        std::size_t d = detail::edit_distance(key, k.key);
        if (d < best_d) {
            best_d = d;
            best = k.key;
        }
    }
    return best;
}

inline void set_value(Settings& s, const std::string& key, const std::string& value) {
    const SchemaKey* k = find_key(key);
    if (!k) throw ConfigError("unknown config key '" + key + "' (did you mean '" + nearest_key(key) + "'?)");
    k->set(s, value);
}

inline std::string get_value(const Settings& s, const std::string& key) {
    const SchemaKey* k = find_key(key);
    if (!k) throw ConfigError("unknown config key '" + key + "' (did you mean '" + nearest_key(key) + "'?)");
    return k->get(s);
}

/// Apply a `key=value` override.
inline void apply_override(Settings& s, std::string_view assignment) {
    auto eq = assignment.find('=');
    if (eq == std::string_view::npos)
        throw ConfigError("override '" + std::string(assignment) + "' is not of the form key=value");
    set_value(s, detail::trim_copy(assignment.substr(0, eq)), detail::trim_copy(assignment.substr(eq + 1)));
}

inline void load_config(Settings& s, std::istream& in, const std::string& source = "<config>") {
    std::string line, section;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        std::string_view v = line;
        if (auto hash = v.find('#'); hash != std::string_view::npos) v = v.substr(0, hash);
        v = detail::trim(v);
        if (v.empty()) continue;
        try {
            if (v.front() == '[') {
                if (v.back() != ']') throw ConfigError("unterminated section header");
                section = detail::trim_copy(v.substr(1, v.size() - 2));
                continue;
            }
            auto eq = v.find('=');
            if (eq == std::string_view::npos) throw ConfigError("expected 'key = value'");
            std::string key = detail::trim_copy(v.substr(0, eq));
            if (!section.empty()) key = section + "." + key;
            set_value(s, key, detail::trim_copy(v.substr(eq + 1)));
        } catch (const ConfigError& e) {
            throw ConfigError(source + ":" + std::to_string(n) + ": " + e.what());
        }
    }
}

inline void load_config_file(Settings& s, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    load_config(s, in, path);
}

/// Write every key, grouped by section, in a form load_config() accepts.
inline void write_config(std::ostream& os, const Settings& s) {
    std::string section;
    for (const auto& k : schema()) {
        auto dot = k.key.find('.');
        std::string sec = k.key.substr(0, dot);
        if (sec != section) {
            os << (section.empty() ? "" : "\n") << '[' << sec << "]\n";
            section = sec;
        }
        os << k.key.substr(dot + 1) << " = " << k.get(s) << '\n';
    }
}

/// Map the short sweep axis names to schema keys.
inline std::string sweep_key(const std::string& axis) {
    if (axis == "th_aging") return "scheduler.th_aging";
    if (axis == "tDSI") return "scheduler.tDSI";
    if (axis == "temperature") return "aging.temperature";
    if (!find_key(axis)) throw ConfigError("unknown sweep axis '" + axis + "' (did you mean '" + nearest_key(axis) + "'?)");
    return axis;
}

// ---------------------------------------------------------------------------
// Calibration

inline BaselineProfile calibration_profile(const Settings& s) {
    return profile_from_window(s.calibration.reads_per_window, s.calibration.writes_per_window,
                               s.calibration.idle_cycles_per_window, s.sim.timing);
}

/// Aging parameters with A solved from the calibration section. The target
/// refers to the calibration temperature; the run temperature is kept.
inline AgingParams calibrated_aging(const Settings& s) {
    AgingParams p = s.sim.aging;
    p.temperature = s.calibration.temperature;
    const AgingParams solved = calibrate(years_to_ns(s.calibration.target_mttf_years), calibration_profile(s),
                                         s.sim.voltages, p, s.sim.recovery);
    AgingParams out = s.sim.aging;
    out.material_constant = solved.material_constant;
    return out;
}

/// The simulator configuration with every `auto` value filled in.
inline SimConfig resolve(const Settings& s) {
    SimConfig c = s.sim;
    if (s.auto_material) c.aging = calibrated_aging(s);
    c.validate();
    return c;
}

/// Simulate the calibration window on a single bank under the baseline
/// policy: every window's requests arrive together after the window's idle
/// gap, and the bank is de-stressed after each window.
inline SimStats calibration_run(const Settings& s, std::uint64_t windows = 20) {
    SimConfig c = resolve(s);
    c.aging.temperature = s.calibration.temperature;
    c.geometry = MemoryGeometry{1, 1, 1, 1, 1u << 20, 1, 64};
    c.scheduler = SchedulerConfig{};
    c.scheduler.policy = Policy::Baseline;
    const std::uint64_t per_window = s.calibration.reads_per_window + s.calibration.writes_per_window;
    if (per_window == 0) throw DomainError("calibration window has no requests");
    c.scheduler.tDSI = per_window;
    c.scheduler.queue_capacity = std::max<std::size_t>(per_window, 1);
    c.record_actions = false;
    c.trace_path.clear();

    const Cycle busy = s.calibration.reads_per_window * c.timing.read_cycles() +
                       s.calibration.writes_per_window * c.timing.write_cycles() + c.timing.tDSC;
    std::vector<TraceRecord> trace;
    Cycle start = s.calibration.idle_cycles_per_window;
    for (std::uint64_t w = 0; w < windows; ++w) {
        for (std::uint64_t i = 0; i < s.calibration.reads_per_window; ++i) trace.push_back({start, 0, OpKind::Read});
        for (std::uint64_t i = 0; i < s.calibration.writes_per_window; ++i) trace.push_back({start, 0, OpKind::Write});
        // one cycle between arrival and issue
        start += 1 + busy + s.calibration.idle_cycles_per_window;
    }
    return run(c, trace);
}

inline unsigned worker_count(unsigned jobs) {
    if (jobs > 0) return jobs;
    unsigned hw = std::thread::hardware_concurrency();
    return hw ? hw : 1;
}

} // namespace nvmsim
