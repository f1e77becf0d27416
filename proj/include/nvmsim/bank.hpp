#pragma once

#include <algorithm>
#include <array>
#include <optional>
#include <string>
#include <vector>

#include "aging.hpp"
#include "common.hpp"
#include "timing.hpp"

namespace nvmsim {

enum class PumpState : std::uint8_t { Active, Discharged };

/// Charge pump control. The read pump feeds VR and SA, the write pump feeds
/// PS; discharging a pump de-stresses every block it feeds.
struct PumpControl {
    PumpState read_pump = PumpState::Active;
    PumpState write_pump = PumpState::Active;

    bool operator==(const PumpControl&) const = default;
};

enum class Architecture : std::uint8_t { Coupled, Decoupled };

/// Which blocks de-stress for a pump setting.
inline std::array<bool, kBlockCount> destressed_blocks(PumpControl pumps) {
    const bool read_off = pumps.read_pump == PumpState::Discharged;
    const bool write_off = pumps.write_pump == PumpState::Discharged;
    return {write_off, read_off, read_off};
}

/// Smallest pump setting that de-stresses every block in `wanted`.
inline PumpControl pumps_covering(const std::array<bool, kBlockCount>& wanted) {
    PumpControl p;
    if (wanted[index(Block::PS)]) p.write_pump = PumpState::Discharged;
    if (wanted[index(Block::VR)] || wanted[index(Block::SA)]) p.read_pump = PumpState::Discharged;
    return p;
}

inline bool pumps_allowed(PumpControl p, Architecture arch) {
    // with the blocks coupled only "all on" and "all off" exist
    return arch == Architecture::Decoupled || p.read_pump == p.write_pump;
}

/// Hardware width of the per-block activity counters. Counters are folded
/// into the aging accumulator when any of them reaches its maximum.
inline constexpr std::uint64_t kReadCounterMax = 15;
inline constexpr std::uint64_t kWriteCounterMax = 15;
inline constexpr std::uint64_t kIdleCounterMax = 65535;

struct BlockCounters {
    std::uint64_t n_read = 0;
    std::uint64_t n_write = 0;
    /// Verify steps performed without the matching program step (split writes).
    std::uint64_t n_verify = 0;
    /// Program steps whose verify step ran without this block (PS released early).
    std::uint64_t n_program = 0;
    std::uint64_t n_idle_cycles = 0;
};

/// Per-bank constants shared by every block.
struct BankSetup {
    Cycle read_cycles = 57;
    Cycle write_cycles = 210;
    Cycle verify_cycles = 15;
    Cycle tDSC = 10;
    std::array<UnitAging, kBlockCount> units{};
    RecoveryPolicy recovery{};
    bool record_timeline = false;

    Cycle program_cycles() const { return write_cycles - verify_cycles; }

    static BankSetup from(const TimingParams& t, const std::array<UnitAging, kBlockCount>& units,
                          const RecoveryPolicy& rec) {
        BankSetup s;
        s.read_cycles = t.read_cycles();
        s.write_cycles = t.write_cycles();
        s.verify_cycles = t.verify_cycles();
        s.tDSC = t.tDSC;
        s.units = units;
        s.recovery = rec;
        return s;
    }
};

/// One run of identical cycles in a block's voltage history.
struct TimelineRun {
    Mode mode;
    Cycle cycles;
};

struct LogicBlockState {
    Block id = Block::PS;
    /// Cycles of de-stress left; non-zero means the block is de-stressing.
    Cycle destress_remaining = 0;
    BlockAging aging;
    BlockCounters counters;
    /// Idle cycles since the block last served a request or was de-stressed.
    Cycle idle_since_service = 0;

    // accounting
    Cycle serving_cycles = 0;
    Cycle idle_cycles = 0;
    Cycle destress_cycles = 0;
    std::uint64_t destress_count = 0;
    /// Every bit of stress ever accrued, recovery ignored.
    double gross_aging = 0;
    /// Largest recoverable aging seen at a de-stress.
    double peak_recoverable = 0;

    std::vector<TimelineRun> timeline;

    bool destressing() const { return destress_remaining > 0; }

    double pending_aging(const UnitAging& u, Cycle verify_cycles, Cycle write_cycles) const {
        const double w = static_cast<double>(write_cycles), v = static_cast<double>(verify_cycles);
        return accumulate_counters(counters.n_read, counters.n_write, counters.n_idle_cycles, u) +
               static_cast<double>(counters.n_verify) * u.u_write * v / w +
               static_cast<double>(counters.n_program) * u.u_write * (w - v) / w;
    }
};

/// An access occupying a bank. A write whose verify step is deferred has an
/// empty gap between program_end and verify_start.
struct Access {
    OpKind kind = OpKind::Read;
    Cycle start = 0;
    Cycle program_end = 0;
    Cycle verify_start = 0;
    Cycle end = 0;
    std::array<bool, kBlockCount> in_program{};
    std::array<bool, kBlockCount> in_verify{};
    /// Decoupled writes only: PS starts a de-stress when the program step ends.
    std::optional<Cycle> ps_destress_at;

    /// True when the verify step is deferred: it starts late or some block
    /// joins the write only for it.
    bool split() const {
        if (verify_start > program_end) return true;
        for (std::size_t i = 0; i < kBlockCount; ++i)
            if (in_verify[i] && !in_program[i]) return true;
        return false;
    }
};

class BankState {
  public:
    BankState() = default;
    BankState(std::uint64_t id, const BankSetup& setup) : id_(id), setup_(setup) {
        for (Block b : kAllBlocks) blocks_[index(b)].id = b;
    }

    std::uint64_t id() const { return id_; }
    const BankSetup& setup() const { return setup_; }
    Cycle busy_until() const { return busy_until_; }
    bool busy(Cycle now) const { return now < busy_until_; }
    const LogicBlockState& block(Block b) const { return blocks_[index(b)]; }
    const std::array<LogicBlockState, kBlockCount>& blocks() const { return blocks_; }
    const std::optional<Access>& access() const { return access_; }

    /// Completion cycle of a deferred verify step, if one is outstanding.
    std::optional<Cycle> pending_verify() const {
        if (access_ && access_->split()) return access_->end;
        return std::nullopt;
    }

    bool any_destressing() const {
        return std::any_of(blocks_.begin(), blocks_.end(), [](const auto& b) { return b.destressing(); });
    }

    /// Recoverable aging of a block, including what is still in its counters.
    double tracked_aging(Block b) const {
        const auto& blk = blocks_[index(b)];
        return blk.aging.recoverable + blk.pending_aging(setup_.units[index(b)], setup_.verify_cycles,
                                                         setup_.write_cycles);
    }

    double tracked_overall_aging() const {
        return overall_aging(tracked_aging(Block::PS), tracked_aging(Block::VR), tracked_aging(Block::SA));
    }

    /// Idle cycles since the bank served a request or was de-stressed (max over blocks).
    Cycle idle_since_service() const {
        Cycle m = 0;
        for (const auto& b : blocks_) m = std::max(m, b.idle_since_service);
        return m;
    }

    std::optional<std::uint64_t> last_row() const { return last_row_; }
    std::uint64_t served_since_destress() const { return served_since_destress_; }
    std::uint64_t served() const { return served_; }
    Cycle destress_busy_cycles() const { return destress_busy_cycles_; }
    std::uint64_t full_destress_count() const { return full_destress_count_; }

    /// True when `kind` could start now.
    bool can_issue(OpKind kind, Cycle now) const {
        if (busy(now)) return false;
        if (kind == OpKind::Read) return !block(Block::SA).destressing();
        return !block(Block::PS).destressing();
    }

    /// Start a read or write. A write that finds VR de-stressing runs its
    /// program step now and its verify step once the de-stress is over.
    /// `release_ps` (decoupled writes) hands PS over to a de-stress as soon
    /// as the program step is done; the verify step runs without it.
    void issue_access(OpKind kind, Cycle now, std::optional<std::uint64_t> row = std::nullopt,
                      bool release_ps = false) {
        if (busy(now)) throw SchedulingError("bank " + std::to_string(id_) + " is busy");
        Access a;
        a.kind = kind;
        a.start = now;
        if (kind == OpKind::Read) {
            if (block(Block::SA).destressing())
                throw SchedulingError("read issued while the sense amplifier is de-stressing");
            a.program_end = a.verify_start = a.end = now + setup_.read_cycles;
            for (Block b : kAllBlocks) a.in_program[index(b)] = a.in_verify[index(b)] = !block(b).destressing();
        } else {
            if (block(Block::PS).destressing())
                throw SchedulingError("write issued while the pulse shaper is de-stressing");
            Cycle resume = now;
            for (Block b : {Block::VR, Block::SA})
                if (block(b).destressing()) resume = std::max(resume, now + block(b).destress_remaining);
            a.program_end = now + setup_.program_cycles();
            a.verify_start = std::max(a.program_end, resume);
            a.end = a.verify_start + setup_.verify_cycles;
            for (Block b : kAllBlocks) a.in_program[index(b)] = !block(b).destressing();
            a.in_verify.fill(true);
            if (release_ps) {
                a.in_verify[index(Block::PS)] = false;
                a.ps_destress_at = a.program_end;
            }
        }
        if (release_ps && kind != OpKind::Write)
            throw SchedulingError("only a write can release the pulse shaper early");
        for (Block b : kAllBlocks) {
            auto& blk = blocks_[index(b)];
            const bool prog = a.in_program[index(b)], ver = a.in_verify[index(b)];
            if (!prog && !ver) continue;
            if (kind == OpKind::Read)
                ++blk.counters.n_read;
            else if (prog && ver)
                ++blk.counters.n_write;
            else if (prog)
                ++blk.counters.n_program;
            else
                continue; // verify-only blocks are booked when the verify step starts
            blk.idle_since_service = 0;
            flush_if_saturated(blk);
        }
        busy_until_ = a.end;
        access_ = a;
        last_row_ = row;
        ++served_;
        ++served_since_destress_;
    }

    /// Discharge pumps: every block fed by a discharged pump starts a tDSC
    /// de-stress. Blocks that the in-flight access still needs cannot be
    /// de-stressed.
    void begin_destress(PumpControl pumps, Architecture arch, Cycle now) {
        if (!pumps_allowed(pumps, arch))
            throw SchedulingError("pump setting not available with coupled peripheral circuits");
        const auto which = destressed_blocks(pumps);
        for (Block b : kAllBlocks) {
            if (!which[index(b)]) continue;
            if (block(b).destressing()) throw SchedulingError("block is already de-stressing");
            if (!can_destress(b, now)) throw SchedulingError("cannot de-stress a block the in-flight access needs");
        }
        bool all = true;
        for (Block b : kAllBlocks) {
            if (which[index(b)])
                blocks_[index(b)].destress_remaining = setup_.tDSC;
            else
                all = false;
        }
        if (all) {
            served_since_destress_ = 0;
            ++full_destress_count_;
        }
    }

    /// True when a tDSC de-stress of `b` starting now would not collide with
    /// the in-flight access: the block is not serving, its verify step (if
    /// any) starts after the de-stress, and it is not already scheduled for
    /// one.
    bool can_destress(Block b, Cycle now) const {
        if (block(b).destressing() || serving(b, now)) return false;
        if (!access_ || now >= access_->end) return true;
        const Cycle done = now + setup_.tDSC;
        if (access_->in_verify[index(b)] && now < access_->verify_start && done > access_->verify_start) return false;
        if (b == Block::PS && access_->ps_destress_at && *access_->ps_destress_at >= now &&
            *access_->ps_destress_at < done)
            return false;
        return true;
    }

    bool serving(Block b, Cycle now) const {
        if (!access_ || now >= access_->end || now < access_->start) return false;
        if (now < access_->program_end) return access_->in_program[index(b)];
        if (now >= access_->verify_start) return access_->in_verify[index(b)];
        return false;
    }

    /// Account for cycle `now` and advance one cycle.
    void tick(Cycle now) {
        if (access_ && access_->ps_destress_at == now) {
            auto& ps = blocks_[index(Block::PS)];
            if (ps.destressing()) throw SchedulingError("pulse shaper is already de-stressing");
            ps.destress_remaining = setup_.tDSC;
        }
        if (access_ && access_->kind == OpKind::Write && now == access_->verify_start) {
            for (Block b : kAllBlocks) {
                auto& blk = blocks_[index(b)];
                if (!access_->in_verify[index(b)] || access_->in_program[index(b)]) continue;
                if (blk.destressing()) throw SchedulingError("verify step needs a block that is de-stressing");
                ++blk.counters.n_verify;
                blk.idle_since_service = 0;
                flush_if_saturated(blk);
            }
        }
        const bool bank_serving = access_ && now >= access_->start && now < access_->end;
        bool any_destress = false;
        for (Block b : kAllBlocks) {
            auto& blk = blocks_[index(b)];
            Mode mode;
            if (blk.destressing()) {
                any_destress = true;
                mode = Mode::DeStress;
                ++blk.destress_cycles;
                if (setup_.record_timeline) record(blk, mode, 1);
                if (--blk.destress_remaining == 0) finish_destress(blk);
                continue;
            } else if (serving(b, now)) {
                mode = access_->kind == OpKind::Read ? Mode::Read : Mode::Write;
                ++blk.serving_cycles;
            } else {
                mode = Mode::Idle;
                ++blk.idle_cycles;
                ++blk.idle_since_service;
                ++blk.counters.n_idle_cycles;
                flush_if_saturated(blk);
            }
            if (setup_.record_timeline) record(blk, mode, 1);
        }
        if (any_destress && !bank_serving) ++destress_busy_cycles_;
        if (access_ && now + 1 >= access_->end) access_.reset();
    }

    /// Advance `n` cycles during which the bank is idle and nothing de-stresses.
    void tick_idle(Cycle now, Cycle n) {
        if (n == 0) return;
        if (busy(now) || any_destressing())
            throw SchedulingError("tick_idle on a bank with work in flight");
        for (auto& blk : blocks_) {
            blk.idle_cycles += n;
            blk.idle_since_service += n;
            Cycle left = n;
            while (left > 0) {
                Cycle step = std::min(left, kIdleCounterMax - blk.counters.n_idle_cycles);
                blk.counters.n_idle_cycles += step;
                left -= step;
                flush_if_saturated(blk);
            }
            if (setup_.record_timeline) record(blk, Mode::Idle, n);
        }
    }

    /// Fold every counter into the aging accumulator.
    void flush_all() {
        for (auto& blk : blocks_) flush(blk);
    }

  private:
    void flush(LogicBlockState& blk) {
        double a = blk.pending_aging(setup_.units[index(blk.id)], setup_.verify_cycles, setup_.write_cycles);
        blk.aging.recoverable += a;
        blk.gross_aging += a;
        blk.counters = {};
    }

    void flush_if_saturated(LogicBlockState& blk) {
        const auto& c = blk.counters;
        if (c.n_read >= kReadCounterMax || c.n_write >= kWriteCounterMax || c.n_verify >= kWriteCounterMax ||
            c.n_program >= kWriteCounterMax || c.n_idle_cycles >= kIdleCounterMax)
            flush(blk);
    }

    void finish_destress(LogicBlockState& blk) {
        flush(blk);
        blk.peak_recoverable = std::max(blk.peak_recoverable, blk.aging.recoverable);
        blk.aging = apply_destress(blk.aging, setup_.recovery);
        blk.idle_since_service = 0;
        ++blk.destress_count;
        if (setup_.record_timeline) blk.timeline.push_back({Mode::DeStress, 0});
    }

    static void record(LogicBlockState& blk, Mode mode, Cycle n) {
        // a zero-length DeStress run marks a de-stress completion
        if (!blk.timeline.empty() && blk.timeline.back().mode == mode && blk.timeline.back().cycles > 0)
            blk.timeline.back().cycles += n;
        else
            blk.timeline.push_back({mode, n});
    }

    std::uint64_t id_ = 0;
    BankSetup setup_;
    std::array<LogicBlockState, kBlockCount> blocks_{};
    Cycle busy_until_ = 0;
    std::optional<Access> access_;
    std::optional<std::uint64_t> last_row_;
    std::uint64_t served_ = 0;
    std::uint64_t served_since_destress_ = 0;
    Cycle destress_busy_cycles_ = 0;
    std::uint64_t full_destress_count_ = 0;
};

} // namespace nvmsim
