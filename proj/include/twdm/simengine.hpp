#pragma once

// Event-driven upstream simulator. Each ONU keeps exactly one Request in
// flight: the OLT schedules a Grant the moment a Request arrives, the ONU sends
// the granted bytes and piggybacks its next Request (current buffer occupancy)
// at the end of that burst. ONUs with an empty buffer are polled with zero-byte
// grants, which still reserve the guard time.

#include <cstdint>
#include <optional>
#include <ostream>
#include <queue>
#include <stdexcept>
#include <string>
#include <vector>

#include "twdm/collision.hpp"
#include "twdm/core.hpp"
#include "twdm/scheduler.hpp"
#include "twdm/traffic.hpp"

namespace twdm {

/// Parameters from which a Topology (including per-ONU RTTs) is drawn.
struct NetworkSpec {
    std::uint32_t onus = 64;
    std::uint32_t group_size = 8;
    std::uint32_t receivers = 2;
    BitRate onu_rate = 31'250'000;
    BitRate olt_rate = 1'000'000'000;
    Time t_grd = Time::us(1);
    bool limited_granting = true;
    std::optional<Bytes> lim;  // overrides the 2 ms-cycle default
    std::int64_t buffer_bits = 1'000'000'000;
    Time rtt_min = Time::us(100);
    Time rtt_max = Time::us(200);
};

inline Topology make_topology(const NetworkSpec& spec, std::uint64_t seed) {
    if (spec.group_size == 0 || spec.onus == 0 || spec.onus % spec.group_size != 0)
        throw std::invalid_argument("network: ONU count must be a positive multiple of the group size");
    if (spec.rtt_max < spec.rtt_min) throw std::invalid_argument("network: rtt_max < rtt_min");
    Topology t;
    t.groups = spec.onus / spec.group_size;
    t.group_size = spec.group_size;
    t.receivers = spec.receivers;
    t.olt_rate = spec.olt_rate;
    t.onu_rate = spec.onu_rate;
    t.t_grd = spec.t_grd;
    t.buffer_capacity_bits = spec.buffer_bits;
    if (spec.limited_granting) t.lim = spec.lim ? *spec.lim : default_grant_cap(spec.group_size, spec.olt_rate);
    std::mt19937_64 rng(derive_seed(seed, 0x5254'54ULL));
    const auto span = static_cast<double>((spec.rtt_max - spec.rtt_min).count() + 1);
    for (std::uint32_t i = 0; i < spec.onus; ++i)
        t.rtt.push_back(spec.rtt_min + Time(static_cast<std::int64_t>(uniform01(rng) * span)));
    t.validate();
    return t;
}

struct SimConfig {
    Topology topology;
    Architecture architecture = Architecture::FlexibleSecure;
    SchedulerKind scheduler = SchedulerKind::CevfFast;
    double load = 0.0;
    Time duration = Time::s(20);
    Time warmup = Time::s(2);
    std::uint64_t seed = 1;
    double shape_on = 1.2;
    double shape_off = 1.4;
    bool audit = false;                   // validate every timeline after every commit
    bool record_transmissions = false;    // keep the full burst log in SimResult
    std::ostream* event_trace = nullptr;  // CSV rows: time_ns,event,onu,receiver,bytes

    void validate() const {
        topology.validate();
        if (!(load >= 0.0 && load <= 1.0)) throw std::invalid_argument("sim: load must lie in [0, 1]");
        if (duration <= Time(0) || duration.is_infinite()) throw std::invalid_argument("sim: duration must be positive");
        if (warmup < Time(0) || warmup >= duration) throw std::invalid_argument("sim: warmup must lie in [0, duration)");
    }
};

struct Metrics {
    // measured window [warmup, duration)
    double measured_seconds = 0.0;
    std::int64_t offered_bits = 0;
    std::int64_t delivered_bits = 0;
    std::int64_t dropped_bits = 0;
    std::int64_t lost_bits = 0;
    std::uint64_t group_collisions = 0;     // transmissions lost to a same-group overlap
    std::uint64_t receiver_collisions = 0;  // transmissions lost to a same-receiver overlap
    double throughput_pct = 0.0;            // delivered / (M*N*r * window)
    double collision_loss_pct = 0.0;        // lost / offered
    double buffer_drop_pct = 0.0;           // dropped / offered
    double mean_hops = 0.0;                 // fast scheduler only

    // whole run, for conservation checks: arrivals = delivered + lost + dropped + residual
    std::int64_t total_arrival_bits = 0;
    std::int64_t total_delivered_bits = 0;
    std::int64_t total_lost_bits = 0;
    std::int64_t total_dropped_bits = 0;
    std::int64_t residual_bits = 0;
    std::uint64_t transmissions = 0;
    std::uint64_t polls = 0;
    std::uint64_t audit_failures = 0;
    SchedulerStats scheduler;
};

struct SimResult {
    Metrics metrics;
    std::vector<Transmission> transmissions;  // filled when record_transmissions is set
    std::vector<bool> lost;
};

namespace detail {

class Simulator {
public:
    explicit Simulator(const SimConfig& cfg) : cfg_(cfg), state_(cfg.topology) {
        cfg_.validate();
        const Topology& t = cfg_.topology;
        TrafficConfig tc;
        tc.peak_rate = t.onu_rate;
        tc.load = cfg_.load;
        tc.shape_on = cfg_.shape_on;
        tc.shape_off = cfg_.shape_off;
        onus_.reserve(t.onu_count());
        for (OnuId o = 0; o < t.onu_count(); ++o) {
            Onu onu{ParetoOnOffSource(tc, derive_seed(cfg_.seed, 1000 + o)), OnuBuffer(t.buffer_capacity_bits), {}, {}, {}};
            onu.next = onu.source.next_burst();
            onu.uplink = t.rtt[o] - Time(t.rtt[o].count() / 2);
            onus_.push_back(std::move(onu));
        }
    }

    SimResult run() {
        for (OnuId o = 0; o < onus_.size(); ++o) push(onus_[o].uplink, o);
        while (!events_.empty() && events_.top().at < cfg_.duration) {
            const Event ev = events_.top();
            events_.pop();
            on_request(ev.at, ev.onu);
        }
        return finish();
    }

private:
    struct Onu {
        ParetoOnOffSource source;
        OnuBuffer buffer;
        Packet next;
        Time uplink;  // ONU -> OLT propagation
        std::optional<std::size_t> pending;  // index into live_
    };

    struct Live {
        Transmission tx;
        bool lost = false;
        bool group_hit = false;
        bool receiver_hit = false;
        std::size_t log_index = 0;
    };

    struct Event {
        Time at;
        std::uint64_t seq;
        OnuId onu;
        bool operator>(const Event& o) const { return at != o.at ? at > o.at : seq > o.seq; }
    };

    void push(Time at, OnuId onu) { events_.push({at, seq_++, onu}); }

    bool in_window(Time t) const { return t >= cfg_.warmup && t < cfg_.duration; }

    void advance_arrivals(Onu& onu, Time until) {
        while (onu.next.arrival <= until) {
            const bool accepted = onu.buffer.enqueue(onu.next.size);
            if (in_window(onu.next.arrival)) {
                const std::int64_t bits = onu.next.size * 8;
                m_.offered_bits += bits;
                if (!accepted) m_.dropped_bits += bits;
            }
            onu.next = onu.source.next_burst();
        }
    }

    void trace(Time at, const char* kind, OnuId onu, std::optional<ReceiverId> rx, Bytes bytes) {
        if (!cfg_.event_trace) return;
        std::ostream& os = *cfg_.event_trace;
        os << at.count() << ',' << kind << ',' << onu << ',';
        if (rx) os << *rx;
        os << ',' << bytes << '\n';
    }

    void finalize(OnuId o, Time now) {
        Onu& onu = onus_[o];
        const std::size_t li = *onu.pending;
        Live& l = live_[li];
        advance_arrivals(onu, l.tx.start - onu.uplink);
        const Bytes sent = onu.buffer.dequeue(l.tx.bytes);
        if (sent != l.tx.bytes) throw std::logic_error("simulator: ONU transmitted less than granted");
        const std::int64_t bits = sent * 8;
        if (l.lost) {
            m_.total_lost_bits += bits;
            if (in_window(now)) {
                m_.lost_bits += bits;
                if (l.group_hit) ++m_.group_collisions;
                if (l.receiver_hit) ++m_.receiver_collisions;
            }
        } else {
            m_.total_delivered_bits += bits;
            if (in_window(now)) m_.delivered_bits += bits;
        }
        trace(now, l.lost ? "lost" : "delivered", o, l.tx.receiver, sent);
        if (cfg_.record_transmissions) lost_log_[l.log_index] = l.lost;
        // swap-remove from the live set
        const std::size_t last = live_.size() - 1;
        if (li != last) {
            live_[li] = live_[last];
            onus_[live_[li].tx.onu].pending = li;
        }
        live_.pop_back();
        onu.pending.reset();
    }

    void on_request(Time now, OnuId o) {
        Onu& onu = onus_[o];
        if (onu.pending) finalize(o, now);
        advance_arrivals(onu, now - onu.uplink);

        const Topology& t = cfg_.topology;
        const Bytes b = std::min(onu.buffer.occupancy_bytes(), t.buffer_capacity_bits / 8);
        const Bytes g = t.lim ? std::min(b, *t.lim) : b;
        trace(now, "request", o, std::nullopt, b);

        state_.advance(now);
        const ScheduleDecision d = schedule(cfg_.scheduler, state_, o, g);
        if (cfg_.scheduler == SchedulerKind::CevfFast) state_.stats().record_fast(d.hops, hop_bound(t));
        state_.commit(d);
        if (cfg_.audit && !state_.validate().empty()) ++m_.audit_failures;
        trace(d.start, "schedule", o, d.receiver, g);

        Live l;
        l.tx = {o, d.group, d.receiver, d.start, d.finish(), g};
        for (Live& other : live_) {
            if (!overlaps(other.tx, l.tx)) continue;
            const bool same_rx = other.tx.receiver == l.tx.receiver;
            const bool same_group = cfg_.architecture == Architecture::FlexibleSecure && other.tx.group == l.tx.group;
            if (same_rx) other.receiver_hit = l.receiver_hit = true;
            if (same_group) other.group_hit = l.group_hit = true;
            if (same_rx || same_group) other.lost = l.lost = true;
        }
        ++m_.transmissions;
        if (g == 0) ++m_.polls;
        if (cfg_.record_transmissions) {
            l.log_index = log_.size();
            log_.push_back(l.tx);
            lost_log_.push_back(false);
        }
        onu.pending = live_.size();
        live_.push_back(l);
        push(d.finish(), o);
    }

    SimResult finish() {
        for (auto& onu : onus_) advance_arrivals(onu, cfg_.duration - Time(1));
        for (const Live& l : live_) {
            if (cfg_.record_transmissions) lost_log_[l.log_index] = l.lost;
        }
        for (const auto& onu : onus_) {
            m_.total_arrival_bits += onu.buffer.arrival_bits();
            m_.total_dropped_bits += onu.buffer.drop_bits();
            m_.residual_bits += onu.buffer.occupancy_bits();
        }
        const Topology& t = cfg_.topology;
        m_.measured_seconds = (cfg_.duration - cfg_.warmup).seconds();
        const double capacity = static_cast<double>(t.onu_rate) * t.onu_count() * m_.measured_seconds;
        m_.throughput_pct = 100.0 * static_cast<double>(m_.delivered_bits) / capacity;
        if (m_.offered_bits > 0) {
            m_.collision_loss_pct = 100.0 * static_cast<double>(m_.lost_bits) / static_cast<double>(m_.offered_bits);
            m_.buffer_drop_pct = 100.0 * static_cast<double>(m_.dropped_bits) / static_cast<double>(m_.offered_bits);
        }
        m_.scheduler = state_.stats();
        if (m_.scheduler.fast_calls > 0)
            m_.mean_hops = static_cast<double>(m_.scheduler.fast_hops) / static_cast<double>(m_.scheduler.fast_calls);
        return {m_, std::move(log_), std::move(lost_log_)};
    }

    SimConfig cfg_;
    SchedulerState state_;
    std::vector<Onu> onus_;
    std::vector<Live> live_;
    std::priority_queue<Event, std::vector<Event>, std::greater<>> events_;
    std::uint64_t seq_ = 0;
    Metrics m_;
    std::vector<Transmission> log_;
    std::vector<bool> lost_log_;
};

}  // namespace detail

inline SimResult run_detailed(const SimConfig& cfg) { return detail::Simulator(cfg).run(); }

inline Metrics run(const SimConfig& cfg) { return run_detailed(cfg).metrics; }

}  // namespace twdm
