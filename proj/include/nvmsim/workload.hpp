#pragma once

// Trace records, the text trace format and synthetic generators.
//
// Trace format, one record per line:
//
//     <arrival_cycle> <R|W> <address>
//
// The address is hexadecimal with an optional 0x prefix. '#' starts a
// comment that runs to the end of the line; blank lines are ignored.
// Arrival cycles must not decrease. Files whose name ends in .gz are read
// through zlib.

#include <zlib.h>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "common.hpp"
#include "timing.hpp"

namespace nvmsim {

struct TraceRecord {
    Cycle arrival_cycle = 0;
    std::uint64_t address = 0;
    OpKind kind = OpKind::Read;

    bool operator==(const TraceRecord&) const = default;
};

class TraceError : public Error {
  public:
    TraceError(const std::string& source, std::size_t line, const std::string& what)
        : Error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const { return line_; }

  private:
    std::size_t line_;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

inline std::string_view next_field(std::string_view& s) {
    s = trim(s);
    std::size_t n = 0;
    while (n < s.size() && !std::isspace(static_cast<unsigned char>(s[n]))) ++n;
    auto f = s.substr(0, n);
    s.remove_prefix(n);
    return f;
}

template <class T>
bool parse_uint(std::string_view s, T& out, int base) {
    if (s.empty()) return false;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out, base);
    return ec == std::errc{} && p == s.data() + s.size();
}

} // namespace detail

/// Parse one non-empty, comment-stripped line. Returns false for blank lines.
inline bool parse_trace_line(std::string_view line, TraceRecord& rec, std::string& err) {
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) return false;
    auto f_cycle = detail::next_field(line);
    auto f_kind = detail::next_field(line);
    auto f_addr = detail::next_field(line);
    if (f_addr.empty()) {
        err = "expected '<arrival_cycle> <R|W> <hex address>'";
        return true;
    }
    if (!detail::trim(line).empty()) {
        err = "trailing characters after the address";
        return true;
    }
    if (!detail::parse_uint(f_cycle, rec.arrival_cycle, 10)) {
        err = "bad arrival cycle '" + std::string(f_cycle) + "'";
        return true;
    }
    if (f_kind == "R" || f_kind == "r")
        rec.kind = OpKind::Read;
    else if (f_kind == "W" || f_kind == "w")
        rec.kind = OpKind::Write;
    else {
        err = "bad op kind '" + std::string(f_kind) + "' (expected R or W)";
        return true;
    }
    if (f_addr.size() > 2 && f_addr[0] == '0' && (f_addr[1] == 'x' || f_addr[1] == 'X')) f_addr.remove_prefix(2);
    if (!detail::parse_uint(f_addr, rec.address, 16)) {
        err = "bad address '" + std::string(f_addr) + "'";
        return true;
    }
    return true;
}

/// Incremental parser; feed lines in order.
class TraceParser {
  public:
    explicit TraceParser(std::string source = "<trace>") : source_(std::move(source)) {}

    void feed(std::string_view line, std::vector<TraceRecord>& out) {
        ++line_no_;
        TraceRecord r;
        std::string err;
        if (!parse_trace_line(line, r, err)) return;
        if (!err.empty()) throw TraceError(source_, line_no_, err);
        if (!out.empty() && r.arrival_cycle < out.back().arrival_cycle)
            throw TraceError(source_, line_no_,
                             "arrival cycle " + std::to_string(r.arrival_cycle) + " is earlier than the previous record (" +
                                 std::to_string(out.back().arrival_cycle) + ")");
        out.push_back(r);
    }

  private:
    std::string source_;
    std::size_t line_no_ = 0;
};

inline std::vector<TraceRecord> parse_trace(std::istream& in, const std::string& source = "<trace>") {
    std::vector<TraceRecord> out;
    TraceParser p(source);
    std::string line;
    while (std::getline(in, line)) p.feed(line, out);
    return out;
}

inline std::vector<TraceRecord> parse_trace(std::string_view text, const std::string& source = "<trace>") {
    std::istringstream in{std::string(text)};
    return parse_trace(in, source);
}

inline bool ends_with(std::string_view s, std::string_view suffix) {
    return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

inline std::vector<TraceRecord> read_trace_file(const std::string& path) {
    if (!ends_with(path, ".gz")) {
        std::ifstream in(path);
        if (!in) throw Error("cannot open trace file '" + path + "'");
        return parse_trace(in, path);
    }
    gzFile gz = gzopen(path.c_str(), "rb");
    if (!gz) throw Error("cannot open trace file '" + path + "'");
    std::vector<TraceRecord> out;
    TraceParser p(path);
    std::string pending;
    char buf[1 << 16];
    int n;
    try {
        while ((n = gzread(gz, buf, sizeof buf)) > 0) {
            pending.append(buf, static_cast<std::size_t>(n));
            std::size_t start = 0, nl;
            while ((nl = pending.find('\n', start)) != std::string::npos) {
                p.feed(std::string_view(pending).substr(start, nl - start), out);
                start = nl + 1;
            }
            pending.erase(0, start);
        }
        if (n < 0) throw Error("gzip read error in '" + path + "'");
        if (!pending.empty()) p.feed(pending, out);
    } catch (...) {
        gzclose(gz);
        throw;
    }
    gzclose(gz);
    return out;
}

inline void write_trace(std::ostream& os, const std::vector<TraceRecord>& records) {
    char buf[64];
    for (const auto& r : records) {
        int n = std::snprintf(buf, sizeof buf, "%llu %s 0x%llx\n", static_cast<unsigned long long>(r.arrival_cycle),
                              r.kind == OpKind::Read ? "R" : "W", static_cast<unsigned long long>(r.address));
        os.write(buf, n);
    }
}

inline void write_trace_file(const std::string& path, const std::vector<TraceRecord>& records) {
    std::ostringstream ss;
    write_trace(ss, records);
    const std::string text = ss.str();
    if (ends_with(path, ".gz")) {
        gzFile gz = gzopen(path.c_str(), "wb");
        if (!gz) throw Error("cannot write '" + path + "'");
        int ok = text.empty() || gzwrite(gz, text.data(), static_cast<unsigned>(text.size())) > 0;
        if (gzclose(gz) != Z_OK || !ok) throw Error("cannot write '" + path + "'");
        return;
    }
    std::ofstream out(path, std::ios::binary);
    out << text;
    if (!out) throw Error("cannot write '" + path + "'");
}

// ---------------------------------------------------------------------------
// Generators

enum class WorkloadKind : std::uint8_t { Microbenchmark, UniformRandom, ReadHeavy, WriteHeavy, Mixed, Scripted };

inline constexpr std::string_view to_string(WorkloadKind k) {
    switch (k) {
    case WorkloadKind::Microbenchmark: return "microbenchmark";
    case WorkloadKind::UniformRandom: return "uniform";
    case WorkloadKind::ReadHeavy: return "read-heavy";
    case WorkloadKind::WriteHeavy: return "write-heavy";
    case WorkloadKind::Mixed: return "mixed";
    case WorkloadKind::Scripted: return "scripted";
    }
    return "?";
}

inline WorkloadKind parse_workload_kind(std::string_view s) {
    for (auto k : {WorkloadKind::Microbenchmark, WorkloadKind::UniformRandom, WorkloadKind::ReadHeavy,
                   WorkloadKind::WriteHeavy, WorkloadKind::Mixed, WorkloadKind::Scripted})
        if (s == to_string(k)) return k;
    throw ConfigError("unknown workload kind '" + std::string(s) +
                      "' (expected microbenchmark, uniform, read-heavy, write-heavy, mixed or scripted)");
}

enum class ArrivalProcess : std::uint8_t { Fixed, Geometric };

/// Read fraction of the read-heavy and write-heavy mixes.
inline constexpr double kReadHeavyFraction = 0.9;
inline constexpr double kWriteHeavyFraction = 0.2;

struct GeneratorSpec {
    WorkloadKind kind = WorkloadKind::Microbenchmark;
    std::uint64_t request_count = 10000;
    /// Mean cycles between arrivals; 0 puts every request at cycle 0.
    double interarrival = 0;
    ArrivalProcess arrival = ArrivalProcess::Fixed;
    std::uint64_t seed = 1;
    /// Read share for UniformRandom.
    double read_fraction = 0.5;
    /// Mixed: requests per phase; phases alternate read-heavy / write-heavy.
    std::uint64_t phase_length = 5000;
    /// Scripted: the records themselves.
    std::vector<TraceRecord> script;

    void validate() const {
        if (kind != WorkloadKind::Scripted && request_count == 0)
            throw ConfigError("workload: request count must be at least 1");
        if (!(read_fraction >= 0 && read_fraction <= 1)) throw ConfigError("workload: read_fraction must lie in [0, 1]");
        if (!(interarrival >= 0)) throw ConfigError("workload: inter-arrival time must be non-negative");
        if (kind == WorkloadKind::Mixed && phase_length == 0)
            throw ConfigError("workload: phase length must be at least 1");
        if (arrival == ArrivalProcess::Geometric && interarrival > 0 && interarrival < 1)
            throw ConfigError("workload: geometric inter-arrival mean must be at least 1 cycle");
    }
};

inline double read_fraction_of(const GeneratorSpec& s, std::uint64_t i) {
    switch (s.kind) {
    case WorkloadKind::ReadHeavy: return kReadHeavyFraction;
    case WorkloadKind::WriteHeavy: return kWriteHeavyFraction;
    case WorkloadKind::Mixed: return (i / s.phase_length) % 2 == 0 ? kReadHeavyFraction : kWriteHeavyFraction;
    default: return s.read_fraction;
    }
}

/// Line-aligned addresses drawn uniformly over the whole capacity.
inline std::vector<TraceRecord> generate(const GeneratorSpec& spec, const MemoryGeometry& g) {
    spec.validate();
    if (spec.kind == WorkloadKind::Scripted) return spec.script;
    std::mt19937_64 rng(spec.seed);
    const std::uint64_t lines = g.capacity_bytes() / g.line_bytes;
    std::uniform_int_distribution<std::uint64_t> line_dist(0, lines - 1);
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    std::geometric_distribution<std::uint64_t> gap_dist(spec.interarrival >= 1 ? 1.0 / spec.interarrival : 1.0);

    std::vector<TraceRecord> out;
    out.reserve(spec.request_count);
    double t = 0;
    Cycle clock = 0;
    for (std::uint64_t i = 0; i < spec.request_count; ++i) {
        TraceRecord r;
        if (i > 0 && spec.interarrival > 0) {
            if (spec.arrival == ArrivalProcess::Fixed) {
                t += spec.interarrival;
                clock = static_cast<Cycle>(std::floor(t));
            } else {
                // failures before the first success, shifted so the mean is 1/p
                clock += gap_dist(rng) + 1;
            }
        }
        r.arrival_cycle = clock;
        if (spec.kind == WorkloadKind::Microbenchmark)
            r.kind = i % 2 == 0 ? OpKind::Read : OpKind::Write;
        else
            r.kind = coin(rng) < read_fraction_of(spec, i) ? OpKind::Read : OpKind::Write;
        r.address = line_dist(rng) * g.line_bytes;
        out.push_back(r);
    }
    return out;
}

/// eDRAM write cache as a pass-through filter: each record is absorbed with
/// probability `hit_rate`.
inline std::vector<TraceRecord> write_cache_filter(const std::vector<TraceRecord>& records, double hit_rate,
                                                   std::uint64_t seed) {
    if (!(hit_rate >= 0 && hit_rate <= 1)) throw ConfigError("write cache hit rate must lie in [0, 1]");
    if (hit_rate == 0) return records;
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
    std::bernoulli_distribution hit(hit_rate);
    std::vector<TraceRecord> out;
    for (const auto& r : records)
        if (!hit(rng)) out.push_back(r);
    return out;
}

} // namespace nvmsim
