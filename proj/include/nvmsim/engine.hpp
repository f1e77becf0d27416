#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "aging.hpp"
#include "bank.hpp"
#include "controller.hpp"
#include "timing.hpp"
#include "workload.hpp"

namespace nvmsim {

struct SimConfig {
    MemoryGeometry geometry;
    TimingParams timing;
    VoltageTable voltages;
    AgingParams aging;
    RecoveryPolicy recovery;
    SchedulerConfig scheduler;
    GeneratorSpec workload;
    /// Read the trace from this file instead of generating it.
    std::string trace_path;
    /// Label for reports; defaults to the generator kind or the trace file.
    std::string workload_name;
    double write_cache_hit_rate = 0;
    /// Stop after this many cycles; 0 runs until the trace drains.
    Cycle max_cycles = 0;
    Cycle sample_interval = 10000;
    bool record_actions = false;
    bool record_timeline = false;
    /// Jump over stretches where nothing but idle counting happens.
    bool fast_forward = true;

    void validate() const {
        geometry.validate();
        timing.validate();
        voltages.validate(aging.threshold_voltage);
        aging.validate();
        recovery.validate();
        scheduler.validate();
        if (trace_path.empty()) workload.validate();
        if (!(write_cache_hit_rate >= 0 && write_cache_hit_rate <= 1))
            throw ConfigError("workload: write cache hit rate must lie in [0, 1]");
        if (sample_interval == 0) throw ConfigError("sim: sample interval must be positive");
        if (!aging.use_operating_voltage)
            for (Block b : kAllBlocks)
                for (Mode m : {Mode::Read, Mode::Write, Mode::Idle})
                    if (!(voltages.at(m, b) > aging.threshold_voltage))
                        throw ConfigError("voltages: every operating voltage must exceed V_th");
    }

    std::string label() const {
        if (!workload_name.empty()) return workload_name;
        if (!trace_path.empty()) return trace_path;
        return std::string(to_string(workload.kind));
    }
};

inline std::array<UnitAging, kBlockCount> unit_aging_table(const SimConfig& c) {
    return {compute_unit_aging(Block::PS, c.timing, c.voltages, c.aging),
            compute_unit_aging(Block::VR, c.timing, c.voltages, c.aging),
            compute_unit_aging(Block::SA, c.timing, c.voltages, c.aging)};
}

struct BlockStats {
    BlockAging aging;
    double gross_aging = 0;
    double peak_recoverable = 0;
    Cycle serving_cycles = 0;
    Cycle idle_cycles = 0;
    Cycle destress_cycles = 0;
    std::uint64_t destress_count = 0;
    std::vector<TimelineRun> timeline;
};

struct BankStats {
    std::array<BlockStats, kBlockCount> blocks;
    std::uint64_t served = 0;
    std::uint64_t full_destress_count = 0;
    Cycle destress_busy_cycles = 0;
};

struct AgingSample {
    Cycle cycle = 0;
    /// [bank][block] recoverable + permanent aging, counters included.
    std::vector<std::array<double, kBlockCount>> aging;
};

struct RequestOutcome {
    std::uint64_t id = 0;
    std::uint64_t bank = 0;
    OpKind kind = OpKind::Read;
    Cycle arrival = 0;
    Cycle issue = 0;
    Cycle completion = 0;

    Cycle wait() const { return issue - arrival; }
};

struct WaitStats {
    double min = 0;
    double mean = 0;
    double max = 0;
    double p99 = 0;
};

struct SimStats {
    std::string policy;
    std::string workload;
    double clock_period_ns = 1.0;
    Cycle cycles_elapsed = 0;
    /// Cycle at which the last request completed.
    Cycle exec_time_cycles = 0;
    std::uint64_t trace_length = 0;
    std::uint64_t reads_served = 0;
    std::uint64_t writes_served = 0;
    /// De-stress operations started (one per pump discharge).
    std::uint64_t destress_ops = 0;
    std::vector<BankStats> banks;
    std::vector<AgingSample> samples;
    std::vector<RequestOutcome> requests;
    WaitStats wait;
    std::vector<ActionLogEntry> actions;

    std::uint64_t requests_served() const { return reads_served + writes_served; }
    double exec_time_ns() const { return static_cast<double>(exec_time_cycles) * clock_period_ns; }

    Cycle destress_busy_cycles() const {
        Cycle c = 0;
        for (const auto& b : banks) c += b.destress_busy_cycles;
        return c;
    }

    /// Largest accrued (recoverable + permanent) aging of any block.
    double max_aging() const {
        double m = 0;
        for (const auto& b : banks)
            for (const auto& blk : b.blocks) m = std::max(m, blk.aging.total());
        return m;
    }
};

inline WaitStats wait_stats(const std::vector<RequestOutcome>& reqs) {
    WaitStats w;
    if (reqs.empty()) return w;
    std::vector<Cycle> waits;
    waits.reserve(reqs.size());
    for (const auto& r : reqs) waits.push_back(r.wait());
    std::sort(waits.begin(), waits.end());
    long double sum = 0;
    for (Cycle c : waits) sum += c;
    w.min = static_cast<double>(waits.front());
    w.max = static_cast<double>(waits.back());
    w.mean = static_cast<double>(sum / waits.size());
    // nearest-rank percentile
    std::size_t rank = static_cast<std::size_t>(std::ceil(0.99 * static_cast<double>(waits.size())));
    w.p99 = static_cast<double>(waits[std::max<std::size_t>(rank, 1) - 1]);
    return w;
}

struct PreparedRequest {
    TraceRecord record;
    std::uint64_t bank = 0;
    std::uint64_t row = 0;
};

inline std::vector<TraceRecord> load_workload(const SimConfig& cfg) {
    std::vector<TraceRecord> trace =
        cfg.trace_path.empty() ? generate(cfg.workload, cfg.geometry) : read_trace_file(cfg.trace_path);
    if (cfg.write_cache_hit_rate > 0) trace = write_cache_filter(trace, cfg.write_cache_hit_rate, cfg.workload.seed);
    return trace;
}

class Simulator {
  public:
    Simulator(const SimConfig& cfg, const std::vector<TraceRecord>& trace)
        : cfg_(cfg), controller_(cfg.scheduler, cfg.record_actions) {
        cfg_.validate();
        const auto units = UnitAgingTable::build(unit_aging_table(cfg_)).units();
        BankSetup setup = BankSetup::from(cfg_.timing, units, cfg_.recovery);
        setup.record_timeline = cfg_.record_timeline;
        const std::uint64_t n = cfg_.geometry.bank_count();
        banks_.reserve(n);
        for (std::uint64_t i = 0; i < n; ++i) banks_.emplace_back(i, setup);
        requests_.reserve(trace.size());
        for (std::size_t i = 0; i < trace.size(); ++i) {
            if (i > 0 && trace[i].arrival_cycle < trace[i - 1].arrival_cycle)
                throw ConfigError("trace arrival cycles must not decrease (record " + std::to_string(i) + ")");
            const DecodedAddress d = decode_address(trace[i].address, cfg_.geometry);
            requests_.push_back({trace[i], flat_bank(d, cfg_.geometry), d.row * cfg_.geometry.partitions_per_bank + d.partition});
        }
    }

    const std::vector<BankState>& banks() const { return banks_; }

    SimStats run() {
        SimStats s;
        s.policy = std::string(to_string(cfg_.scheduler.policy));
        s.workload = cfg_.label();
        s.clock_period_ns = cfg_.timing.clock_period_ns;
        s.trace_length = requests_.size();
        s.requests.reserve(requests_.size());

        Cycle now = 0;
        std::size_t next = 0;
        for (;;) {
            if (next == requests_.size() && drained(now)) break;
            if (cfg_.max_cycles && now >= cfg_.max_cycles) break;

            while (next < requests_.size() && requests_[next].record.arrival_cycle <= now && !controller_.queue().full()) {
                const auto& p = requests_[next];
                Request r{next, p.record.kind, p.bank, p.row, p.record.arrival_cycle, now, std::nullopt};
                (void)controller_.queue().enqueue(r);
                ++next;
            }

            if (auto issued = controller_.tick(banks_, now)) {
                const Request& r = issued->request;
                s.requests.push_back({r.id, r.bank, r.kind, r.arrival_cycle, *r.issue_cycle, issued->completion});
                (r.kind == OpKind::Read ? s.reads_served : s.writes_served) += 1;
                s.exec_time_cycles = std::max(s.exec_time_cycles, issued->completion);
            }
            for (auto& b : banks_) b.tick(now);
            maybe_sample(s, now);

            if (cfg_.fast_forward && next < requests_.size() && controller_.queue().empty() && drained(now + 1)) {
                Cycle target = requests_[next].record.arrival_cycle;
                if (target > now + 1) {
                    Cycle k = std::min(target - now - 1, idle_horizon());
                    const Cycle boundary = (now + 1) / cfg_.sample_interval * cfg_.sample_interval +
                                           cfg_.sample_interval - 1; // last cycle of the current sample period
                    if (boundary > now) k = std::min(k, boundary - now);
                    if (cfg_.max_cycles) k = std::min(k, cfg_.max_cycles > now + 1 ? cfg_.max_cycles - now - 1 : 0);
                    if (k > 0) {
                        for (auto& b : banks_) b.tick_idle(now + 1, k);
                        now += k;
                        maybe_sample(s, now);
                    }
                }
            }
            ++now;
        }

        s.cycles_elapsed = now;
        finish(s);
        return s;
    }

  private:
    bool drained(Cycle now) const {
        if (!controller_.queue().empty()) return false;
        for (const auto& b : banks_)
            if (b.busy(now) || b.any_destressing()) return false;
        return !controller_.owes_destress(banks_);
    }

    /// Idle cycles that can be skipped without a threshold firing in between.
    Cycle idle_horizon() const {
        if (cfg_.scheduler.policy == Policy::Baseline || !cfg_.scheduler.background_sweep)
            return std::numeric_limits<Cycle>::max();
        Cycle h = std::numeric_limits<Cycle>::max();
        for (const auto& bank : banks_) {
            for (Block b : kAllBlocks) {
                const auto& blk = bank.block(b);
                if (blk.idle_since_service >= cfg_.scheduler.th_idle) return 0;
                h = std::min(h, cfg_.scheduler.th_idle - blk.idle_since_service);
                const double u = bank.setup().units[index(b)].u_idle;
                const double room = cfg_.scheduler.th_aging - bank.tracked_aging(b);
                if (room <= 0) return 0;
                const double steps = std::floor(room / u) - 1;
                if (steps < 1) return 0;
                if (steps < static_cast<double>(h)) h = static_cast<Cycle>(steps);
            }
        }
        return h;
    }

    void maybe_sample(SimStats& s, Cycle now) {
        if ((now + 1) % cfg_.sample_interval != 0) return;
        AgingSample smp;
        smp.cycle = now + 1;
        smp.aging.reserve(banks_.size());
        for (const auto& b : banks_) {
            std::array<double, kBlockCount> a{};
            for (Block blk : kAllBlocks) a[index(blk)] = b.tracked_aging(blk) + b.block(blk).aging.permanent;
            smp.aging.push_back(a);
        }
        s.samples.push_back(std::move(smp));
    }

    void finish(SimStats& s) {
        s.destress_ops = controller_.destress_ops();
        s.actions = controller_.log();
        s.wait = wait_stats(s.requests);
        s.banks.reserve(banks_.size());
        for (auto& b : banks_) {
            b.flush_all();
            BankStats bs;
            bs.served = b.served();
            bs.full_destress_count = b.full_destress_count();
            bs.destress_busy_cycles = b.destress_busy_cycles();
            for (Block blk : kAllBlocks) {
                const auto& src = b.block(blk);
                auto& dst = bs.blocks[index(blk)];
                dst.aging = src.aging;
                dst.gross_aging = src.gross_aging;
                dst.peak_recoverable = src.peak_recoverable;
                dst.serving_cycles = src.serving_cycles;
                dst.idle_cycles = src.idle_cycles;
                dst.destress_cycles = src.destress_cycles;
                dst.destress_count = src.destress_count;
                dst.timeline = src.timeline;
            }
            s.banks.push_back(std::move(bs));
        }
    }

    SimConfig cfg_;
    Controller controller_;
    std::vector<BankState> banks_;
    std::vector<PreparedRequest> requests_;
};

inline SimStats run(const SimConfig& cfg, const std::vector<TraceRecord>& trace) {
    return Simulator(cfg, trace).run();
}

inline SimStats run(const SimConfig& cfg) {
    cfg.validate();
    return run(cfg, load_workload(cfg));
}

/// De-stress cycles spent on the critical path per served request. For the
/// baseline this is tDSC / tDSI.
inline double destress_overhead(const SimStats& s) {
    if (s.cycles_elapsed == 0) throw DomainError("destress_overhead: zero-length run");
    const Cycle busy = s.destress_busy_cycles();
    if (busy == 0) return 0;
    if (s.requests_served() == 0) return std::numeric_limits<double>::infinity();
    return static_cast<double>(busy) / static_cast<double>(s.requests_served());
}

/// Share of bank time spent de-stressing on the critical path.
inline double destress_time_fraction(const SimStats& s) {
    if (s.cycles_elapsed == 0 || s.banks.empty()) throw DomainError("destress_time_fraction: zero-length run");
    return static_cast<double>(s.destress_busy_cycles()) /
           (static_cast<double>(s.cycles_elapsed) * static_cast<double>(s.banks.size()));
}

/// Worst block's permanent-equivalent aging.
inline double worst_permanent_aging(const SimStats& s, const RecoveryPolicy& rec) {
    double m = 0;
    for (const auto& b : s.banks)
        for (const auto& blk : b.blocks) m = std::max(m, permanent_equivalent(blk.aging, rec));
    return m;
}

/// Extrapolated MTTF in ns: time for the worst block to accrue failure_aging
/// of permanent aging at the simulated rate. +inf when nothing accrues.
inline double estimate_mttf(const SimStats& s, const AgingParams& p, const RecoveryPolicy& rec) {
    if (s.cycles_elapsed == 0) throw DomainError("estimate_mttf: zero-length run");
    const double worst = worst_permanent_aging(s, rec);
    if (!(worst > 0)) return std::numeric_limits<double>::infinity();
    const double elapsed_ns = static_cast<double>(s.cycles_elapsed) * s.clock_period_ns;
    return p.failure_aging * elapsed_ns / worst;
}

inline double ns_to_years(double ns) { return ns / kNsPerYear; }
inline double years_to_ns(double y) { return y * kNsPerYear; }

// ---------------------------------------------------------------------------
// Reports

struct ReportRow {
    std::string policy;
    std::string workload;
    Cycle cycles = 0;
    double exec_time_ns = 0;
    /// Years; +inf when no permanent aging accrued.
    double mttf_est = 0;
    double destress_overhead = 0;
    double max_aging = 0;
    double mean_wait = 0;
    double p99_wait = 0;
    std::uint64_t destress_count = 0;

    bool operator==(const ReportRow&) const = default;
};

inline constexpr std::string_view kReportHeader =
    "policy,workload,cycles,exec_time_ns,mttf_est,destress_overhead,max_aging,mean_wait,p99_wait,destress_count";

inline ReportRow make_report_row(const SimStats& s, const AgingParams& p, const RecoveryPolicy& rec) {
    ReportRow r;
    r.policy = s.policy;
    r.workload = s.workload;
    r.cycles = s.cycles_elapsed;
    r.exec_time_ns = s.exec_time_ns();
    r.mttf_est = s.cycles_elapsed ? ns_to_years(estimate_mttf(s, p, rec)) : std::numeric_limits<double>::infinity();
    r.destress_overhead = s.cycles_elapsed ? destress_overhead(s) : 0;
    r.max_aging = s.max_aging();
    r.mean_wait = s.wait.mean;
    r.p99_wait = s.wait.p99;
    r.destress_count = s.destress_ops;
    return r;
}

inline std::string format_number(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (std::isnan(v)) return "nan";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline double parse_number(const std::string& s) {
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw Error("bad number '" + s + "' in report");
    return v;
}

/// Field quoting for workload labels that contain commas or quotes.
inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(std::move(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(std::move(cur));
    return out;
}

inline void write_report_row(std::ostream& os, const ReportRow& r) {
    os << csv_field(r.policy) << ',' << csv_field(r.workload) << ',' << r.cycles << ',' << format_number(r.exec_time_ns)
       << ',' << format_number(r.mttf_est) << ',' << format_number(r.destress_overhead) << ','
       << format_number(r.max_aging) << ',' << format_number(r.mean_wait) << ',' << format_number(r.p99_wait) << ','
       << r.destress_count;
}

inline void write_report_csv(std::ostream& os, const std::vector<ReportRow>& rows) {
    os << kReportHeader << '\n';
    for (const auto& r : rows) {
        write_report_row(os, r);
        os << '\n';
    }
}

inline ReportRow parse_report_fields(const std::vector<std::string>& f, std::size_t line) {
    if (f.size() < 10) throw Error("report line " + std::to_string(line) + ": expected 10 columns");
    ReportRow r;
    r.policy = f[0];
    r.workload = f[1];
    r.cycles = std::stoull(f[2]);
    r.exec_time_ns = parse_number(f[3]);
    r.mttf_est = parse_number(f[4]);
    r.destress_overhead = parse_number(f[5]);
    r.max_aging = parse_number(f[6]);
    r.mean_wait = parse_number(f[7]);
    r.p99_wait = parse_number(f[8]);
    r.destress_count = std::stoull(f[9]);
    return r;
}

inline std::vector<ReportRow> parse_report_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line.rfind(kReportHeader, 0) != 0) throw Error("report: missing header row");
    std::vector<ReportRow> rows;
    std::size_t n = 1;
    while (std::getline(in, line)) {
        ++n;
        if (line.empty()) continue;
        rows.push_back(parse_report_fields(split_csv_line(line), n));
    }
    return rows;
}

inline void write_report_text(std::ostream& os, const ReportRow& r) {
    auto kv = [&os](const char* k, const std::string& v) { os << std::left << std::setw(19) << k << v << '\n'; };
    kv("policy", r.policy);
    kv("workload", r.workload);
    kv("cycles", std::to_string(r.cycles));
    kv("exec_time_ns", format_number(r.exec_time_ns));
    kv("mttf_est (years)", std::isinf(r.mttf_est) ? "exceeds horizon" : format_number(r.mttf_est));
    kv("destress_overhead", format_number(r.destress_overhead));
    kv("max_aging", format_number(r.max_aging));
    kv("mean_wait", format_number(r.mean_wait));
    kv("p99_wait", format_number(r.p99_wait));
    kv("destress_count", std::to_string(r.destress_count));
}

/// Compare table: the report columns plus exec time, MTTF and overhead
/// normalized to the first row (the baseline).
inline void write_compare_csv(std::ostream& os, const std::vector<ReportRow>& rows) {
    os << kReportHeader << ",exec_time_norm,mttf_norm,overhead_norm\n";
    if (rows.empty()) return;
    const ReportRow& base = rows.front();
    auto norm = [](double v, double b) {
        if (b == 0) return v == 0 ? 1.0 : std::numeric_limits<double>::infinity();
        if (std::isinf(b)) return std::isinf(v) ? 1.0 : 0.0;
        return v / b;
    };
    for (const auto& r : rows) {
        write_report_row(os, r);
        os << ',' << format_number(norm(r.exec_time_ns, base.exec_time_ns)) << ','
           << format_number(norm(r.mttf_est, base.mttf_est)) << ','
           << format_number(norm(r.destress_overhead, base.destress_overhead)) << '\n';
    }
}

inline void write_action_log(std::ostream& os, const std::vector<ActionLogEntry>& log) {
    os << "cycle,bank,action,detail\n";
    for (const auto& e : log) os << e << '\n';
}

} // namespace nvmsim
