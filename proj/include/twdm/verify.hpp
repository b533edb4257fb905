#pragma once

// Randomized scheduler instances and the invariant checks run by `verify`.

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "twdm/collision.hpp"
#include "twdm/scheduler.hpp"
#include "twdm/traffic.hpp"

namespace twdm::verify {

struct InstanceLimits {
    std::uint32_t max_groups = 8;
    std::uint32_t max_group_size = 8;
    std::uint32_t max_receivers = 8;
    std::uint32_t max_bursts = 12;
    Time grid = Time::ns(50);      // coarse grid makes equal starts (ties) common
    Time horizon = Time::us(20);   // bursts are placed in [0, horizon)
    Time max_rtt = Time::us(4);
    Time max_guard = Time::ns(400);
    Bytes max_grant = 1500;
};

/// A scheduler state reachable under the one-outstanding-request protocol: every
/// committed burst belongs to a different ONU, none of them to `onu`.
struct Instance {
    SchedulerState state;
    std::vector<Transmission> committed;
    OnuId onu = 0;
    Bytes grant = 0;
};

namespace detail {

inline std::uint64_t pick(std::mt19937_64& rng, std::uint64_t lo, std::uint64_t hi) {
    return lo + static_cast<std::uint64_t>(uniform01(rng) * static_cast<double>(hi - lo + 1));
}

inline Time pick_time(std::mt19937_64& rng, Time hi, Time grid) {
    const auto steps = static_cast<std::uint64_t>(hi.count() / grid.count());
    return Time(static_cast<std::int64_t>(pick(rng, 0, steps)) * grid.count());
}

// Finds the void of `owner` that contains `burst`.
inline std::optional<Time> containing(const VoidTimeline& tl, std::uint32_t owner, const Void& burst) {
    for (const auto& e : tl.entries())
        if (e.owner == owner && e.span.start <= burst.start && burst.finish <= e.span.finish) return e.span.start;
    return std::nullopt;
}

}  // namespace detail

inline Instance random_instance(std::mt19937_64& rng, const InstanceLimits& lim = {}) {
    using detail::pick;
    using detail::pick_time;
    Topology t;
    t.groups = static_cast<std::uint32_t>(pick(rng, 1, lim.max_groups));
    t.group_size = static_cast<std::uint32_t>(pick(rng, 1, lim.max_group_size));
    t.receivers = static_cast<std::uint32_t>(pick(rng, 1, std::min<std::uint64_t>(lim.max_receivers, t.onu_count())));
    t.olt_rate = 1'000'000'000;
    t.onu_rate = t.olt_rate / t.group_size;
    t.t_grd = Time(static_cast<std::int64_t>(pick(rng, 1, static_cast<std::uint64_t>(lim.max_guard.count()))));
    for (std::uint32_t i = 0; i < t.onu_count(); ++i) t.rtt.push_back(pick_time(rng, lim.max_rtt, lim.grid));

    Instance inst{SchedulerState(t), {}, 0, 0};
    std::vector<OnuId> onus(t.onu_count());
    for (OnuId o = 0; o < onus.size(); ++o) onus[o] = o;
    std::shuffle(onus.begin(), onus.end(), rng);
    inst.onu = onus.back();
    onus.pop_back();

    const std::uint32_t bursts = std::min<std::uint32_t>(static_cast<std::uint32_t>(pick(rng, 0, lim.max_bursts)),
                                                         static_cast<std::uint32_t>(onus.size()));
    std::size_t next_onu = 0;
    for (std::uint32_t k = 0; k < bursts && next_onu < onus.size(); ++k) {
        const OnuId o = onus[next_onu];
        const GroupId x = t.group_of(o);
        const Bytes g = static_cast<Bytes>(pick(rng, 0, static_cast<std::uint64_t>(lim.max_grant)));
        ScheduleDecision d;
        if (uniform01(rng) < 0.5) {
            // placed by the scheduler itself, as the protocol would
            d = schedule_cevf_naive(inst.state, o, g);
        } else {
            // placed at a random spot; retried a few times until it fits both domains
            bool placed = false;
            for (int attempt = 0; attempt < 8 && !placed; ++attempt) {
                const auto r = static_cast<ReceiverId>(pick(rng, 0, t.receivers - 1));
                const Time start = pick_time(rng, lim.horizon, lim.grid);
                const Void burst{start, start + required_length(g, t.olt_rate, t.t_grd)};
                const auto rv = detail::containing(inst.state.receivers(), r, burst);
                const auto gv = detail::containing(inst.state.group(x), x, burst);
                if (!rv || !gv) continue;
                d.onu = o;
                d.group = x;
                d.receiver = r;
                d.granted = g;
                d.start = burst.start;
                d.duration = burst.finish - burst.start;
                d.receiver_void_start = *rv;
                d.group_void_start = *gv;
                placed = true;
            }
            if (!placed) continue;
        }
        inst.state.commit(d);
        inst.committed.push_back({o, x, d.receiver, d.start, d.finish(), g});
        ++next_onu;
    }
    inst.state.advance(pick_time(rng, Time(lim.horizon.count() / 2), lim.grid));
    inst.grant = static_cast<Bytes>(pick(rng, 0, static_cast<std::uint64_t>(lim.max_grant)));
    return inst;
}

struct Summary {
    std::size_t instances = 0;
    std::size_t mismatches = 0;           // fast != naive
    std::size_t hop_violations = 0;       // hops > N + M*N + R
    std::size_t insert_violations = 0;    // comparisons > ceil(log2(len + 1))
    std::size_t timeline_violations = 0;  // invariant scan failures after commit
    std::size_t safety_violations = 0;    // overlapping bursts in either domain
    std::size_t progress_violations = 0;  // start < T_e
    std::size_t oracle_mismatches = 0;    // naive != external oracle, when one is supplied
    std::size_t max_hops = 0;
    std::string first_failure;

    bool ok() const {
        return mismatches == 0 && hop_violations == 0 && insert_violations == 0 && timeline_violations == 0 &&
               safety_violations == 0 && progress_violations == 0 && oracle_mismatches == 0;
    }

    std::string report() const {
        std::ostringstream os;
        os << "instances checked:            " << instances << '\n'
           << "fast/naive mismatches:        " << mismatches << '\n'
           << "hop-bound violations:         " << hop_violations << " (max hops " << max_hops << ")\n"
           << "insertion-bound violations:   " << insert_violations << '\n'
           << "timeline invariant failures:  " << timeline_violations << '\n'
           << "collision-safety failures:    " << safety_violations << '\n'
           << "earliest-start violations:    " << progress_violations << '\n'
           << "oracle mismatches:            " << oracle_mismatches << '\n';
        if (!first_failure.empty()) os << "first failure: " << first_failure << '\n';
        return os.str();
    }
};

inline bool same_placement(const ScheduleDecision& a, const ScheduleDecision& b) {
    return a.start == b.start && a.receiver == b.receiver && a.duration == b.duration &&
           a.receiver_void_start == b.receiver_void_start && a.group_void_start == b.group_void_start &&
           a.grant_at == b.grant_at;
}

/// Optional external check of the naive decision; returns true when they agree.
using OracleCheck = std::function<bool(const Instance&, const ScheduleDecision& naive)>;

/// Generates `count` random instances and checks every scheduler invariant on each.
inline Summary run_suite(std::size_t count, std::uint64_t seed, const InstanceLimits& lim = {},
                         const OracleCheck& oracle = {}) {
    Summary s;
    std::mt19937_64 rng(seed);
    auto fail = [&](std::size_t& counter, const std::string& what) {
        ++counter;
        if (s.first_failure.empty()) s.first_failure = what;
    };
    for (std::size_t i = 0; i < count; ++i) {
        Instance inst = random_instance(rng, lim);
        ++s.instances;
        const Topology& t = inst.state.topology();
        const ScheduleDecision naive = schedule_cevf_naive(inst.state, inst.onu, inst.grant);
        const ScheduleDecision fast = schedule_cevf_fast(inst.state, inst.onu, inst.grant);
        std::ostringstream tag;
        tag << "instance " << i;
        if (!same_placement(naive, fast)) fail(s.mismatches, tag.str() + ": fast and naive disagree");
        if (oracle && !oracle(inst, naive)) fail(s.oracle_mismatches, tag.str() + ": naive disagrees with the oracle");
        s.max_hops = std::max(s.max_hops, fast.hops);
        if (fast.hops > hop_bound(t)) fail(s.hop_violations, tag.str() + ": hop bound exceeded");
        if (fast.start < earliest_start(inst.state.now(), t.rtt[inst.onu]) || fast.start.is_infinite())
            fail(s.progress_violations, tag.str() + ": start before T_e");

        inst.state.commit(fast);
        inst.committed.push_back({fast.onu, fast.group, fast.receiver, fast.start, fast.finish(), fast.granted});
        if (inst.state.stats().insert_bound_violations > 0) fail(s.insert_violations, tag.str() + ": insertion bound");
        if (const auto e = inst.state.validate(); !e.empty()) fail(s.timeline_violations, tag.str() + ": " + e);
        if (detect_collisions(inst.committed, Architecture::FlexibleSecure).lost_count() != 0)
            fail(s.safety_violations, tag.str() + ": committed bursts collide");
    }
    return s;
}

}  // namespace twdm::verify
