#pragma once

// Upstream grant placement over two collision domains.
//
// Every receiver and every group owns a timeline of voids (idle intervals). A
// burst of an ONU in group x may only be placed inside the intersection of a
// receiver void and a void of group x. Three placement policies are offered:
//
//   schedule_cevf_naive  scans every (receiver void, group void) pair
//   schedule_cevf_fast   walks both start-ordered sequences once with two pointers
//   schedule_eftvf       receiver voids only; group occupancy is ignored
//
// All three pick the earliest feasible start, ties going to the lowest receiver
// id and then to the earliest receiver-void start. None of them mutates the
// state; SchedulerState::commit applies a decision.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "twdm/core.hpp"
#include "twdm/void_timeline.hpp"

namespace twdm {

class StaleDecision : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

class InfeasibleGrant : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

constexpr Time earliest_start(Time now, Time rtt) {
    if (rtt < Time(0)) throw std::invalid_argument("earliest_start: negative rtt");
    return now + rtt;
}

/// Instant at which the grant must leave the OLT so the burst arrives at t_s.
inline Time grant_instant(Time t_s, Time rtt, Time now) {
    const Time t_g = t_s - rtt;
    if (t_g < now) throw InfeasibleGrant("grant_instant: grant would have to be sent in the past");
    return t_g;
}

/// Intersection of two voids clamped to start no earlier than t_e; empty when
/// the clamped finish precedes the clamped start. Zero-length results are kept.
constexpr std::optional<Void> intersect(const Void& a, const Void& b, Time t_e) {
    const Time start = std::max({t_e, a.start, b.start});
    const Time finish = std::min(a.finish, b.finish);
    if (finish < start) return std::nullopt;
    return Void{start, finish};
}

/// Reserved interval length for a g-byte burst: payload wire time plus guard.
constexpr Time required_length(Bytes g, BitRate rate, Time t_grd) {
    return transmission_time(g, rate) + t_grd;
}

struct CandidateVoid {
    Void span;
    ReceiverId receiver = 0;
    Time receiver_void_start;
    std::optional<Time> group_void_start;

    Time length() const { return void_length(span); }
};

constexpr bool fits(Time candidate_length, Time required) { return candidate_length >= required; }

inline bool fits(const CandidateVoid& c, Bytes g, BitRate rate, Time t_grd) {
    if (g < 0) throw std::invalid_argument("fits: negative grant");
    return fits(c.length(), required_length(g, rate, t_grd));
}

struct SchedulerStats {
    std::uint64_t fast_calls = 0;
    std::uint64_t fast_hops = 0;
    std::uint64_t max_hops = 0;
    std::uint64_t hop_bound_violations = 0;
    std::uint64_t inserts = 0;
    std::uint64_t insert_comparisons = 0;
    std::uint64_t insert_bound_violations = 0;
    std::uint64_t dropped_fragments = 0;
    Time dropped_fragment_time;

    void record_fast(std::size_t hops, std::size_t bound) {
        ++fast_calls;
        fast_hops += hops;
        max_hops = std::max<std::uint64_t>(max_hops, hops);
        if (hops > bound) ++hop_bound_violations;
    }
};

/// Upper bound on fast-scheduler pointer moves for one request: N + M*N + R.
inline std::size_t hop_bound(const Topology& t) {
    return std::size_t{t.group_size} + std::size_t{t.groups} * t.group_size + t.receivers;
}

class SchedulerState {
public:
    explicit SchedulerState(Topology topology, Time now = Time(0))
        : topology_(std::move(topology)), now_(now), receivers_(VoidTimeline::Kind::Receiver) {
        topology_.validate();
        for (ReceiverId r = 0; r < topology_.receivers; ++r) receivers_.add_horizon(r, now_);
        groups_.reserve(topology_.groups);
        for (GroupId x = 0; x < topology_.groups; ++x) {
            groups_.emplace_back(VoidTimeline::Kind::Group);
            groups_.back().add_horizon(x, now_);
        }
    }

    /// State with explicit timelines, e.g. a hand-drawn schedule. `receivers`
    /// holds the voids of every receiver; `groups[x]` holds the voids of group x.
    SchedulerState(Topology topology, Time now, VoidTimeline receivers, std::vector<VoidTimeline> groups)
        : topology_(std::move(topology)), now_(now), receivers_(std::move(receivers)), groups_(std::move(groups)) {
        topology_.validate();
        if (groups_.size() != topology_.groups) throw std::invalid_argument("SchedulerState: one timeline per group");
        for (std::size_t i = 0; i < receivers_.size(); ++i)
            if (receivers_[i].owner >= topology_.receivers) throw std::invalid_argument("SchedulerState: unknown receiver");
        for (GroupId x = 0; x < groups_.size(); ++x)
            for (const auto& e : groups_[x].entries())
                if (e.owner != x) throw std::invalid_argument("SchedulerState: group void owned by another group");
        if (auto e = validate(); !e.empty()) throw std::invalid_argument("SchedulerState: " + e);
        auto has_horizon = [](const VoidTimeline& tl, std::uint32_t owner) {
            for (const auto& e : tl.entries())
                if (e.owner == owner && e.span.is_horizon()) return true;
            return false;
        };
        for (ReceiverId r = 0; r < topology_.receivers; ++r)
            if (!has_horizon(receivers_, r)) throw std::invalid_argument("SchedulerState: receiver without horizon");
        for (GroupId x = 0; x < topology_.groups; ++x)
            if (!has_horizon(groups_[x], x)) throw std::invalid_argument("SchedulerState: group without horizon");
    }

    const Topology& topology() const { return topology_; }
    Time now() const { return now_; }
    const VoidTimeline& receivers() const { return receivers_; }
    const VoidTimeline& group(GroupId x) const { return groups_.at(x); }
    const SchedulerStats& stats() const { return stats_; }
    SchedulerStats& stats() { return stats_; }

    /// Moves the clock forward and forgets voids that are entirely in the past.
    void advance(Time now) {
        if (now < now_) throw std::invalid_argument("SchedulerState::advance: time went backwards");
        now_ = now;
        receivers_.prune(now_);
        for (auto& g : groups_) g.prune(now_);
    }

    /// Removes the decision's interval from its source voids. Fragments shorter
    /// than 2*t_grd are discarded. Decisions without a group void (receiver-only
    /// scheduling) leave the group timelines untouched.
    /// Throws StaleDecision if the interval is not inside the named voids; the
    /// state is unchanged in that case.
    void commit(const ScheduleDecision& d) {
        if (d.receiver >= topology_.receivers || d.group >= topology_.groups)
            throw StaleDecision("commit: unknown receiver or group");
        const Void burst{d.start, d.finish()};
        const std::size_t ri = locate(receivers_, d.receiver, d.receiver_void_start, burst);
        std::optional<std::size_t> gi;
        if (d.group_void_start) gi = locate(groups_[d.group], d.group, *d.group_void_start, burst);

        carve(receivers_, ri, burst);
        if (gi) carve(groups_[d.group], *gi, burst);
    }

    /// Empty string when every timeline invariant holds.
    std::string validate() const {
        if (auto e = receivers_.validate(topology_.t_grd); !e.empty()) return "receivers: " + e;
        for (GroupId x = 0; x < groups_.size(); ++x)
            if (auto e = groups_[x].validate(topology_.t_grd); !e.empty()) return "group " + std::to_string(x) + ": " + e;
        return {};
    }

private:
    static std::size_t locate(const VoidTimeline& tl, std::uint32_t owner, Time void_start, const Void& burst) {
        const std::size_t i = tl.find(owner, void_start);
        if (i == tl.size()) throw StaleDecision("commit: source void no longer exists");
        const Void& v = tl[i].span;
        if (burst.start < v.start || burst.finish > v.finish || burst.finish < burst.start)
            throw StaleDecision("commit: burst is not contained in its source void");
        return i;
    }

    void carve(VoidTimeline& tl, std::size_t index, const Void& burst) {
        const TimelineEntry src = tl[index];
        tl.erase(index);
        const Time min_len = topology_.t_grd + topology_.t_grd;
        auto keep = [&](const Void& frag) {
            if (frag.is_horizon() || void_length(frag) >= min_len) {
                const std::size_t bound = insertion_comparison_bound(tl.size());
                const std::size_t cmp = tl.insert_ordered({frag, src.owner});
                ++stats_.inserts;
                stats_.insert_comparisons += cmp;
                if (cmp > bound) ++stats_.insert_bound_violations;
            } else if (void_length(frag) > Time(0)) {
                ++stats_.dropped_fragments;
                stats_.dropped_fragment_time += void_length(frag);
            }
        };
        keep({src.span.start, burst.start});
        keep({burst.finish, src.span.finish});
    }

    Topology topology_;
    Time now_;
    VoidTimeline receivers_;
    std::vector<VoidTimeline> groups_;
    SchedulerStats stats_;
};

namespace detail {

struct Request {
    GroupId group;
    Time rtt;
    Time t_e;
    Time required;
};

inline Request prepare(const SchedulerState& s, OnuId onu, Bytes g) {
    const Topology& t = s.topology();
    if (onu >= t.onu_count()) throw std::invalid_argument("schedule: unknown ONU");
    if (g < 0) throw std::invalid_argument("schedule: negative grant");
    if (t.lim && g > *t.lim) throw std::invalid_argument("schedule: grant exceeds the limited-granting cap");
    const Time rtt = t.rtt[onu];
    return {t.group_of(onu), rtt, earliest_start(s.now(), rtt), required_length(g, t.olt_rate, t.t_grd)};
}

// Ordering used for tie-breaking: earliest start, lowest receiver, earliest receiver void.
inline bool better(const CandidateVoid& a, const CandidateVoid& b) {
    return std::tie(a.span.start, a.receiver, a.receiver_void_start) <
           std::tie(b.span.start, b.receiver, b.receiver_void_start);
}

inline ScheduleDecision to_decision(const SchedulerState& s, OnuId onu, Bytes g, const Request& req,
                                    const CandidateVoid& c, std::size_t hops) {
    ScheduleDecision d;
    d.onu = onu;
    d.group = req.group;
    d.receiver = c.receiver;
    d.granted = g;
    d.start = c.span.start;
    d.duration = req.required;
    d.grant_at = grant_instant(d.start, req.rtt, s.now());
    d.receiver_void_start = c.receiver_void_start;
    d.group_void_start = c.group_void_start;
    d.hops = hops;
    return d;
}

}  // namespace detail

/// Grid search over every receiver void paired with every void of the ONU's group.
inline ScheduleDecision schedule_cevf_naive(const SchedulerState& s, OnuId onu, Bytes g) {
    const auto req = detail::prepare(s, onu, g);
    const auto rx = s.receivers().entries();
    const auto gx = s.group(req.group).entries();
    std::optional<CandidateVoid> best;
    for (const auto& a : rx) {
        for (const auto& b : gx) {
            const auto c = intersect(a.span, b.span, req.t_e);
            if (!c || !fits(void_length(*c), req.required)) continue;
            CandidateVoid cand{*c, a.owner, a.span.start, b.span.start};
            if (!best || detail::better(cand, *best)) best = cand;
        }
    }
    if (!best) throw std::logic_error("schedule_cevf_naive: no feasible void (horizon missing?)");
    return detail::to_decision(s, onu, g, req, *best, 0);
}

/// Two-pointer walk over the start-ordered receiver voids (all receivers merged)
/// and the start-ordered voids of the ONU's group. On a misfit the pointer whose
/// void finishes first moves on. The first fit has the minimum start; the walk
/// then continues over receiver voids starting no later than that instant to
/// apply the receiver tie-break. `hops` counts every pointer move.
inline ScheduleDecision schedule_cevf_fast(const SchedulerState& s, OnuId onu, Bytes g) {
    const auto req = detail::prepare(s, onu, g);
    const auto rx = s.receivers().entries();
    const auto gx = s.group(req.group).entries();
    std::size_t a = 0;
    std::size_t b = 0;
    std::size_t hops = 0;
    for (;;) {
        if (a >= rx.size() || b >= gx.size()) throw std::logic_error("schedule_cevf_fast: walked past a horizon void");
        const auto c = intersect(rx[a].span, gx[b].span, req.t_e);
        if (c && fits(void_length(*c), req.required)) break;
        if (rx[a].span.finish <= gx[b].span.finish) {
            ++a;
        } else {
            ++b;
        }
        ++hops;
    }
    const Void& group_void = gx[b].span;
    CandidateVoid best{*intersect(rx[a].span, group_void, req.t_e), rx[a].owner, rx[a].span.start, group_void.start};
    const Time t_s = best.span.start;
    for (std::size_t k = a + 1; k < rx.size() && rx[k].span.start <= t_s; ++k) {
        ++hops;
        const auto c = intersect(rx[k].span, group_void, req.t_e);
        if (!c || c->start != t_s || !fits(void_length(*c), req.required)) continue;
        CandidateVoid cand{*c, rx[k].owner, rx[k].span.start, group_void.start};
        if (detail::better(cand, best)) best = cand;
    }
    return detail::to_decision(s, onu, g, req, best, hops);
}

/// Earliest-start void filling on receiver voids only.
inline ScheduleDecision schedule_eftvf(const SchedulerState& s, OnuId onu, Bytes g) {
    const auto req = detail::prepare(s, onu, g);
    std::optional<CandidateVoid> best;
    for (const auto& a : s.receivers().entries()) {
        const Time start = std::max(req.t_e, a.span.start);
        if (a.span.finish < start || !fits(a.span.finish - start, req.required)) continue;
        CandidateVoid cand{{start, a.span.finish}, a.owner, a.span.start, std::nullopt};
        if (!best || detail::better(cand, *best)) best = cand;
    }
    if (!best) throw std::logic_error("schedule_eftvf: no feasible void (horizon missing?)");
    return detail::to_decision(s, onu, g, req, *best, 0);
}

enum class SchedulerKind { CevfFast, CevfNaive, EftVf };

inline ScheduleDecision schedule(SchedulerKind kind, const SchedulerState& s, OnuId onu, Bytes g) {
    switch (kind) {
        case SchedulerKind::CevfFast: return schedule_cevf_fast(s, onu, g);
        case SchedulerKind::CevfNaive: return schedule_cevf_naive(s, onu, g);
        case SchedulerKind::EftVf: return schedule_eftvf(s, onu, g);
    }
    throw std::invalid_argument("schedule: unknown scheduler");
}

}  // namespace twdm
