#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "aging.hpp"
#include "bank.hpp"
#include "common.hpp"

namespace nvmsim {

enum class Policy : std::uint8_t { Baseline, Laser, DecoupledLaser };

inline constexpr std::string_view to_string(Policy p) {
    switch (p) {
    case Policy::Baseline: return "baseline";
    case Policy::Laser: return "laser";
    case Policy::DecoupledLaser: return "decoupled-laser";
    }
    return "?";
}

inline Policy parse_policy(std::string_view s) {
    if (s == "baseline") return Policy::Baseline;
    if (s == "laser") return Policy::Laser;
    if (s == "decoupled-laser" || s == "decoupled") return Policy::DecoupledLaser;
    throw ConfigError("unknown policy '" + std::string(s) + "' (expected baseline, laser or decoupled-laser)");
}

inline Architecture architecture_of(Policy p) {
    return p == Policy::DecoupledLaser ? Architecture::Decoupled : Architecture::Coupled;
}

struct SchedulerConfig {
    Policy policy = Policy::Baseline;
    /// Baseline: requests served by a bank between two de-stress operations.
    std::uint64_t tDSI = 100;
    /// Aging threshold (aging units).
    double th_aging = 1000.0;
    /// Idle threshold (cycles).
    Cycle th_idle = 65535;
    /// Backlogging threshold (cycles).
    Cycle th_backlog = 10000;
    std::size_t queue_capacity = 64;
    /// De-stress over-threshold banks that have no queued request.
    bool background_sweep = true;

    void validate() const {
        if (tDSI == 0) throw ConfigError("scheduler: tDSI must be positive");
        if (!(th_aging > 0)) throw ConfigError("scheduler: th_aging must be positive");
        if (th_idle == 0) throw ConfigError("scheduler: th_idle must be positive");
        if (th_backlog == 0) throw ConfigError("scheduler: th_backlog must be positive");
        if (queue_capacity == 0) throw ConfigError("scheduler: queue capacity must be positive");
    }
};

struct Request {
    std::uint64_t id = 0;
    OpKind kind = OpKind::Read;
    std::uint64_t bank = 0;
    std::uint64_t row = 0;
    Cycle arrival_cycle = 0;
    /// Cycle the request entered the queue; it is eligible one cycle later.
    Cycle enqueue_cycle = 0;
    std::optional<Cycle> issue_cycle;
};

/// Read-write queue. Requests keep arrival order, which is the stable
/// tie-break for every policy.
class RequestQueue {
  public:
    explicit RequestQueue(std::size_t capacity = 64) : capacity_(capacity) {}

    /// False means the queue is full and the feeder must stall.
    [[nodiscard]] bool enqueue(Request r) {
        if (full()) return false;
        items_.push_back(std::move(r));
        return true;
    }

    Request take(std::size_t pos) {
        Request r = std::move(items_.at(pos));
        items_.erase(items_.begin() + static_cast<std::ptrdiff_t>(pos));
        return r;
    }

    bool full() const { return items_.size() >= capacity_; }
    bool empty() const { return items_.empty(); }
    std::size_t size() const { return items_.size(); }
    std::size_t capacity() const { return capacity_; }
    const Request& operator[](std::size_t i) const { return items_[i]; }
    auto begin() const { return items_.begin(); }
    auto end() const { return items_.end(); }

  private:
    std::size_t capacity_;
    std::deque<Request> items_;
};

inline bool eligible(const Request& r, Cycle now) { return r.enqueue_cycle < now; }

/// sTab: one availability bit per bank.
class StatusTable {
  public:
    void refresh(std::span<const BankState> banks, Architecture arch, Cycle now) {
        bits_.resize(banks.size());
        for (std::size_t i = 0; i < banks.size(); ++i) {
            const auto& b = banks[i];
            bool avail = !b.busy(now);
            if (arch == Architecture::Coupled) avail = avail && !b.any_destressing();
            bits_[i] = avail;
        }
    }
    bool available(std::size_t bank) const { return bits_[bank]; }
    std::size_t size_bits() const { return bits_.size(); }

  private:
    std::vector<bool> bits_;
};

/// One aTab entry as the hardware sees it.
struct AccessTableEntry {
    std::uint16_t idle_cycles = 0;
    std::uint8_t reads = 0;  // 4 bits
    std::uint8_t writes = 0; // 4 bits
};

inline constexpr std::size_t kAccessEntryBits = 16 + 4 + 4;
/// Decoupled blocks also count partial writes (program-only or verify-only steps).
inline constexpr std::size_t kPartialWriteBits = 4;
inline constexpr std::size_t kUnitEntryBits = 32;

/// aTab view of a bank. Coupled controllers keep one entry per bank (the
/// pulse shaper's activity stands for the circuit); decoupled ones keep one
/// per block.
inline AccessTableEntry access_entry(const BankState& bank, Block b) {
    const auto& c = bank.block(b).counters;
    return {static_cast<std::uint16_t>(c.n_idle_cycles), static_cast<std::uint8_t>(c.n_read),
            static_cast<std::uint8_t>(c.n_write)};
}

/// uTab entry: 32-bit mantissa with a binary point fixed at design time.
struct FixedPoint32 {
    std::uint32_t mantissa = 0;
    int exponent = 0; // value = mantissa * 2^exponent

    static FixedPoint32 quantize(double v) {
        if (!(v > 0)) return {};
        int e = 0;
        double frac = std::frexp(v, &e); // v = frac * 2^e, frac in [0.5, 1)
        double m = std::round(std::ldexp(frac, 32));
        if (m >= 4294967296.0) {
            m /= 2;
            ++e;
        }
        return {static_cast<std::uint32_t>(m), e - 32};
    }
    double value() const { return std::ldexp(static_cast<double>(mantissa), exponent); }
};

struct UnitAgingTable {
    std::array<std::array<FixedPoint32, 3>, kBlockCount> entries{};

    static UnitAgingTable build(const std::array<UnitAging, kBlockCount>& units) {
        UnitAgingTable t;
        for (std::size_t b = 0; b < kBlockCount; ++b) {
            t.entries[b][0] = FixedPoint32::quantize(units[b].u_read);
            t.entries[b][1] = FixedPoint32::quantize(units[b].u_write);
            t.entries[b][2] = FixedPoint32::quantize(units[b].u_idle);
        }
        return t;
    }

    UnitAging unit(Block b) const {
        const auto& e = entries[index(b)];
        return {e[0].value(), e[1].value(), e[2].value()};
    }

    std::array<UnitAging, kBlockCount> units() const { return {unit(Block::PS), unit(Block::VR), unit(Block::SA)}; }
};

/// Controller table storage in bits: sTab + aTab + uTab.
struct StorageReport {
    std::uint64_t stab_bits = 0;
    std::uint64_t atab_bits = 0;
    std::uint64_t utab_bits = 0;
    std::uint64_t total() const { return stab_bits + atab_bits + utab_bits; }
};

inline StorageReport storage_bits(std::uint64_t bank_count, Architecture arch) {
    StorageReport r;
    r.stab_bits = bank_count;
    if (arch == Architecture::Coupled) {
        r.atab_bits = bank_count * kAccessEntryBits;
        r.utab_bits = 3 * kUnitEntryBits;
    } else {
        r.atab_bits = bank_count * kBlockCount * (kAccessEntryBits + kPartialWriteBits);
        r.utab_bits = kBlockCount * 3 * kUnitEntryBits;
    }
    return r;
}

// ---------------------------------------------------------------------------
// Request selection

/// FR-FCFS: among requests whose bank can take them, row hits first, then
/// the oldest. Returns a queue position.
inline std::optional<std::size_t> select_baseline(const RequestQueue& q, std::span<const BankState> banks,
                                                  Cycle now) {
    std::optional<std::size_t> oldest;
    for (std::size_t i = 0; i < q.size(); ++i) {
        const Request& r = q[i];
        if (!eligible(r, now)) continue;
        const BankState& b = banks[r.bank];
        if (b.any_destressing() || !b.can_issue(r.kind, now)) continue;
        if (b.last_row() && *b.last_row() == r.row) return i;
        if (!oldest) oldest = i;
    }
    return oldest;
}

/// True when the baseline owes this bank its periodic de-stress.
inline bool destress_baseline(const BankState& bank, Cycle now, const SchedulerConfig& cfg) {
    return !bank.busy(now) && !bank.any_destressing() && bank.served_since_destress() >= cfg.tDSI;
}

inline bool laser_serviceable(const Request& r, const BankState& b, Architecture arch, Cycle now) {
    if (b.busy(now)) return false;
    if (arch == Architecture::Coupled) return !b.any_destressing();
    return b.can_issue(r.kind, now);
}

/// LASER request selection: a request that has waited longer than the
/// backlogging threshold goes first (oldest such); otherwise the request to
/// the available bank that has been idle the longest, oldest first on ties.
inline std::optional<std::size_t> select_laser(const RequestQueue& q, std::span<const BankState> banks, Cycle now,
                                               const SchedulerConfig& cfg) {
    const Architecture arch = architecture_of(cfg.policy);
    std::optional<std::size_t> best;
    Cycle best_idle = 0;
    for (std::size_t i = 0; i < q.size(); ++i) {
        const Request& r = q[i];
        if (!eligible(r, now) || !laser_serviceable(r, banks[r.bank], arch, now)) continue;
        if (now - r.arrival_cycle > cfg.th_backlog) return i;
        Cycle idle = banks[r.bank].idle_since_service();
        if (!best || idle > best_idle) {
            best = i;
            best_idle = idle;
        }
    }
    return best;
}

enum class LaserDecision : std::uint8_t { Issue, Destress };

inline bool over_aging(const BankState& b, const SchedulerConfig& cfg) {
    return b.tracked_overall_aging() > cfg.th_aging;
}
inline bool over_idle(const BankState& b, const SchedulerConfig& cfg) { return b.idle_since_service() > cfg.th_idle; }

inline LaserDecision destress_decision_laser(const BankState& bank, const SchedulerConfig& cfg) {
    return over_aging(bank, cfg) || over_idle(bank, cfg) ? LaserDecision::Destress : LaserDecision::Issue;
}

/// What the decoupled controller does with one bank this cycle.
struct DecoupledAction {
    /// Pump setting; both Active means no de-stress.
    PumpControl pumps;
    bool issue = false;
    /// The write runs its program step now and its verify step after the
    /// VR/SA de-stress.
    bool verify_deferred = false;

    bool destress() const { return pumps != PumpControl{}; }
};

inline std::array<bool, kBlockCount> blocks_over_threshold(const BankState& bank, const SchedulerConfig& cfg) {
    std::array<bool, kBlockCount> over{};
    for (Block b : kAllBlocks) {
        const auto& blk = bank.block(b);
        if (blk.destressing()) continue;
        over[index(b)] = bank.tracked_aging(b) > cfg.th_aging || blk.idle_since_service > cfg.th_idle;
    }
    return over;
}

/// Per-block decision. Blocks over a threshold de-stress with the pump row
/// covering all of them; the selected request issues alongside unless it
/// needs one of those blocks (SA for reads, PS for writes).
inline DecoupledAction destress_decision_decoupled(OpKind kind, const BankState& bank, const SchedulerConfig& cfg) {
    DecoupledAction a;
    a.pumps = pumps_covering(blocks_over_threshold(bank, cfg));
    const auto off = destressed_blocks(a.pumps);
    const Block needed = kind == OpKind::Read ? Block::SA : Block::PS;
    a.issue = !off[index(needed)];
    a.verify_deferred = a.issue && kind == OpKind::Write && (off[index(Block::VR)] || bank.block(Block::VR).destressing());
    for (Block b : kAllBlocks)
        if (off[index(b)] && bank.block(b).destressing())
            throw SchedulingError("decoupled decision picked a block that is already de-stressing");
    return a;
}

// ---------------------------------------------------------------------------
// Controller

struct ActionLogEntry {
    Cycle cycle = 0;
    std::uint64_t bank = 0;
    std::string action;
    std::string detail;
};

inline std::ostream& operator<<(std::ostream& os, const ActionLogEntry& e) {
    return os << e.cycle << ',' << e.bank << ',' << e.action << ',' << e.detail;
}

inline std::string blocks_label(const std::array<bool, kBlockCount>& which) {
    std::string s;
    for (Block b : kAllBlocks) {
        if (!which[index(b)]) continue;
        if (!s.empty()) s += '+';
        s += to_string(b);
    }
    return s;
}

/// A request that left the queue.
struct IssuedRequest {
    Request request;
    Cycle completion = 0;
};

class Controller {
  public:
    Controller(SchedulerConfig cfg, bool keep_log = false)
        : cfg_(cfg), arch_(architecture_of(cfg.policy)), queue_(cfg.queue_capacity), keep_log_(keep_log) {}

    RequestQueue& queue() { return queue_; }
    const RequestQueue& queue() const { return queue_; }
    const SchedulerConfig& config() const { return cfg_; }
    Architecture architecture() const { return arch_; }
    const StatusTable& status() const { return stab_; }
    const std::vector<ActionLogEntry>& log() const { return log_; }
    std::uint64_t destress_ops() const { return destress_ops_; }

    /// Run one controller cycle. Returns the request issued this cycle, if any.
    std::optional<IssuedRequest> tick(std::span<BankState> banks, Cycle now) {
        stab_.refresh(banks, arch_, now);
        std::optional<IssuedRequest> issued;
        if (cfg_.policy == Policy::Baseline) {
            for (auto& b : banks)
                if (destress_baseline(b, now, cfg_))
                    destress(b, PumpControl{PumpState::Discharged, PumpState::Discharged}, now, "periodic");
            if (auto pos = select_baseline(queue_, banks, now)) issued = issue(*pos, banks, now, false);
        } else {
            if (auto pos = select_laser(queue_, banks, now, cfg_)) issued = decide(*pos, banks, now);
            if (cfg_.background_sweep) sweep(banks, now);
        }
        stab_.refresh(banks, arch_, now);
        return issued;
    }

    /// True when the controller still owes some bank a de-stress.
    bool owes_destress(std::span<const BankState> banks) const {
        if (cfg_.policy != Policy::Baseline) return false;
        return std::any_of(banks.begin(), banks.end(),
                           [&](const BankState& b) { return b.served_since_destress() >= cfg_.tDSI; });
    }

  private:
    std::optional<IssuedRequest> decide(std::size_t pos, std::span<BankState> banks, Cycle now) {
        BankState& bank = banks[queue_[pos].bank];
        if (arch_ == Architecture::Coupled) {
            if (destress_decision_laser(bank, cfg_) == LaserDecision::Destress) {
                destress(bank, PumpControl{PumpState::Discharged, PumpState::Discharged}, now,
                         over_aging(bank, cfg_) ? "aging" : "idle");
                return std::nullopt;
            }
            return issue(pos, banks, now, false);
        }
        const DecoupledAction a = destress_decision_decoupled(queue_[pos].kind, bank, cfg_);
        if (a.destress()) destress(bank, a.pumps, now, "aging");
        if (!a.issue) return std::nullopt;
        return issue(pos, banks, now, a.verify_deferred, releases_ps(queue_[pos].kind, bank));
    }

    void sweep(std::span<BankState> banks, Cycle now) {
        for (auto& bank : banks) {
            if (bank.busy(now) || bank.any_destressing()) continue;
            const bool wanted = std::any_of(queue_.begin(), queue_.end(),
                                            [&](const Request& r) { return r.bank == bank.id(); });
            if (wanted) continue;
            if (arch_ == Architecture::Coupled) {
                if (destress_decision_laser(bank, cfg_) == LaserDecision::Destress) {
                    destress(bank, PumpControl{PumpState::Discharged, PumpState::Discharged}, now, "background");
                    return;
                }
            } else {
                PumpControl p = pumps_covering(blocks_over_threshold(bank, cfg_));
                if (p != PumpControl{}) {
                    destress(bank, p, now, "background");
                    return;
                }
            }
        }
    }

    void destress(BankState& bank, PumpControl pumps, Cycle now, std::string_view reason) {
        bank.begin_destress(pumps, arch_, now);
        ++destress_ops_;
        if (keep_log_)
            log_.push_back({now, bank.id(), "destress",
                            blocks_label(destressed_blocks(pumps)) + ";" + std::string(reason)});
    }

    /// Decoupled writes that take PS over the aging threshold free PS for a
    /// de-stress during their own verify step.
    bool releases_ps(OpKind kind, const BankState& bank) const {
        if (kind != OpKind::Write || bank.block(Block::PS).destressing()) return false;
        const auto& s = bank.setup();
        const double program_share =
            static_cast<double>(s.program_cycles()) / static_cast<double>(s.write_cycles);
        return bank.tracked_aging(Block::PS) + s.units[index(Block::PS)].u_write * program_share > cfg_.th_aging;
    }

    IssuedRequest issue(std::size_t pos, std::span<BankState> banks, Cycle now, bool deferred,
                        bool release_ps = false) {
        Request r = queue_.take(pos);
        BankState& bank = banks[r.bank];
        bank.issue_access(r.kind, now, r.row, release_ps);
        r.issue_cycle = now;
        if (release_ps) ++destress_ops_;
        if (keep_log_) {
            const Access& a = *bank.access();
            std::string detail = std::string(to_string(r.kind)) + ":" + std::to_string(r.id);
            if (deferred || bank.pending_verify()) detail += ":verify@" + std::to_string(a.verify_start);
            if (release_ps) detail += ":PS-destress@" + std::to_string(*a.ps_destress_at);
            log_.push_back({now, bank.id(), "issue", detail});
        }
        return {std::move(r), bank.busy_until()};
    }

    SchedulerConfig cfg_;
    Architecture arch_;
    RequestQueue queue_;
    StatusTable stab_;
    bool keep_log_;
    std::vector<ActionLogEntry> log_;
    std::uint64_t destress_ops_ = 0;
};

} // namespace nvmsim
