#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>

#include "common.hpp"

namespace nvmsim {

/// Channel/rank/bank/partition hierarchy. Defaults follow a 2-channel,
/// 1-rank, 8-bank, 64-partition PCM module with 128 tiles x 4096 rows per
/// partition and 256-byte rows (128 GB in total).
struct MemoryGeometry {
    std::uint64_t channels = 2;
    std::uint64_t ranks_per_channel = 1;
    std::uint64_t banks_per_rank = 8;
    std::uint64_t partitions_per_bank = 64;
    std::uint64_t rows_per_partition = 128 * 4096;
    std::uint64_t lines_per_row = 4;
    std::uint64_t line_bytes = 64;

    std::uint64_t bank_count() const { return channels * ranks_per_channel * banks_per_rank; }

    std::uint64_t capacity_bytes() const {
        return line_bytes * channels * banks_per_rank * ranks_per_channel * partitions_per_bank *
               lines_per_row * rows_per_partition;
    }

    void validate() const {
        if (channels == 0 || ranks_per_channel == 0 || banks_per_rank == 0 || partitions_per_bank == 0 ||
            rows_per_partition == 0 || lines_per_row == 0 || line_bytes == 0)
            throw ConfigError("geometry: every count must be at least 1");
        // capacity must fit in 64 bits
        long double cap = static_cast<long double>(line_bytes) * channels * banks_per_rank *
                          ranks_per_channel * partitions_per_bank * lines_per_row * rows_per_partition;
        if (cap > 1.8e19L) throw ConfigError("geometry: capacity exceeds the 64-bit address space");
    }
};

/// Decoded location of a physical address. `bank` is the bank index inside
/// its rank; flat_bank() gives the controller-wide index.
struct DecodedAddress {
    std::uint64_t channel = 0;
    std::uint64_t rank = 0;
    std::uint64_t bank = 0;
    std::uint64_t partition = 0;
    std::uint64_t row = 0;
    std::uint64_t column = 0;
    std::uint64_t offset = 0;

    bool operator==(const DecodedAddress&) const = default;
};

inline std::uint64_t flat_bank(const DecodedAddress& d, const MemoryGeometry& g) {
    return (d.channel * g.ranks_per_channel + d.rank) * g.banks_per_rank + d.bank;
}

/// Mixed-radix decode, least significant field first:
/// offset | channel | bank | rank | partition | column | row.
inline DecodedAddress decode_address(std::uint64_t addr, const MemoryGeometry& g) {
    if (addr >= g.capacity_bytes())
        throw DomainError("address 0x" + [&] {
            char buf[32];
            std::snprintf(buf, sizeof buf, "%llx", static_cast<unsigned long long>(addr));
            return std::string(buf);
        }() + " is outside the configured capacity");
    DecodedAddress d;
    auto take = [&addr](std::uint64_t radix) {
        std::uint64_t v = addr % radix;
        addr /= radix;
        return v;
    };
    d.offset = take(g.line_bytes);
    d.channel = take(g.channels);
    d.bank = take(g.banks_per_rank);
    d.rank = take(g.ranks_per_channel);
    d.partition = take(g.partitions_per_bank);
    d.column = take(g.lines_per_row);
    d.row = addr;
    return d;
}

inline std::uint64_t encode_address(const DecodedAddress& d, const MemoryGeometry& g) {
    std::uint64_t a = d.row;
    a = a * g.lines_per_row + d.column;
    a = a * g.partitions_per_bank + d.partition;
    a = a * g.ranks_per_channel + d.rank;
    a = a * g.banks_per_rank + d.bank;
    a = a * g.channels + d.channel;
    a = a * g.line_bytes + d.offset;
    return a;
}

struct ReadTiming {
    double tRCD = 3.75;
    double tRAS = 55.25;
    double tRP = 1.0;
    double tRC = 56.25;
};

struct WriteTiming {
    double tRCD = 75.0;
    double tBURST = 15.0;
    double tWR = 190.0;
    double tRP = 1.0;
    double tRC = 209.75;
    /// Duration of the verify step at the tail of a write. Only matters when
    /// the verify step is split off (decoupled de-stress of VR/SA).
    double tVERIFY = 15.0;
};

/// PCM timing in ns. tRC is the authoritative bank occupancy; the other
/// sub-phases are carried as metadata.
struct TimingParams {
    ReadTiming read;
    WriteTiming write;
    double clock_period_ns = 1.0;
    Cycle tDSC = 10;

    static Cycle to_cycles(double ns, double clock) {
        // tolerate representation error in values such as 56.25 / 0.25
        return static_cast<Cycle>(std::ceil(ns / clock - 1e-9));
    }

    Cycle read_cycles() const { return to_cycles(read.tRC, clock_period_ns); }
    Cycle write_cycles() const { return to_cycles(write.tRC, clock_period_ns); }
    Cycle verify_cycles() const { return to_cycles(write.tVERIFY, clock_period_ns); }
    Cycle program_cycles() const { return write_cycles() - verify_cycles(); }
    Cycle access_cycles(OpKind k) const { return k == OpKind::Read ? read_cycles() : write_cycles(); }

    void validate() const {
        if (!(clock_period_ns > 0)) throw ConfigError("timing: clock period must be positive");
        for (double v : {read.tRCD, read.tRAS, read.tRP, write.tRCD, write.tBURST, write.tWR, write.tRP})
            if (v < 0) throw ConfigError("timing: sub-phase latencies must be non-negative");
        if (!(read.tRC > 0) || !(write.tRC > 0)) throw ConfigError("timing: tRC must be positive");
        if (!(write.tVERIFY > 0) || verify_cycles() >= write_cycles())
            throw ConfigError("timing: write verify step must be positive and shorter than write tRC");
        if (tDSC == 0) throw ConfigError("timing: tDSC must be at least one cycle");
    }
};

enum class Mode : std::uint8_t { Read = 0, Write = 1, Idle = 2, DeStress = 3 };

/// Operating voltage of each logic block in each mode (V). Defaults are the
/// PCM peripheral-circuit voltages; de-stress is any value below V_th.
struct VoltageTable {
    // [mode][block], block order PS, VR, SA
    std::array<std::array<double, kBlockCount>, 4> volts{{
        {1.2, 1.2, 2.85}, // read
        {3.7, 2.85, 1.2}, // write (program)
        {1.2, 1.2, 1.2},  // idle
        {0.0, 0.0, 0.0},  // de-stress
    }};

    double at(Mode m, Block b) const { return volts[static_cast<std::size_t>(m)][index(b)]; }
    double& at(Mode m, Block b) { return volts[static_cast<std::size_t>(m)][index(b)]; }

    void validate(double vth) const {
        for (Block b : kAllBlocks) {
            if (!(at(Mode::DeStress, b) < vth))
                throw ConfigError("voltages: de-stress voltage must be below V_th");
            for (Mode m : {Mode::Read, Mode::Write, Mode::Idle})
                if (!(at(m, b) > 0)) throw ConfigError("voltages: operating voltages must be positive");
        }
    }
};

} // namespace nvmsim
