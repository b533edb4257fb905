#pragma once

// Domain types shared by every other header.

#include <compare>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace twdm {

using Bytes = std::int64_t;
using BitRate = std::int64_t;  // bits per second
using OnuId = std::uint32_t;
using GroupId = std::uint32_t;
using ReceiverId = std::uint32_t;

/// Integer nanosecond instant or duration. The maximum representable value is
/// reserved as +infinity and orders above every finite time.
class Time {
public:
    constexpr Time() = default;
    constexpr explicit Time(std::int64_t ns) : ns_(ns) {}

    static constexpr Time infinity() { return Time(kInf); }
    static constexpr Time ns(std::int64_t v) { return Time(v); }
    static constexpr Time us(std::int64_t v) { return Time(v * 1'000); }
    static constexpr Time ms(std::int64_t v) { return Time(v * 1'000'000); }
    static constexpr Time s(std::int64_t v) { return Time(v * 1'000'000'000); }

    constexpr std::int64_t count() const { return ns_; }
    constexpr bool is_infinite() const { return ns_ == kInf; }
    double seconds() const { return static_cast<double>(ns_) * 1e-9; }

    friend constexpr auto operator<=>(Time, Time) = default;

    // infinity is absorbing for + and for the minuend of -
    friend constexpr Time operator+(Time a, Time b) {
        if (a.is_infinite() || b.is_infinite()) return infinity();
        return Time(a.ns_ + b.ns_);
    }
    friend constexpr Time operator-(Time a, Time b) {
        if (a.is_infinite()) return infinity();
        if (b.is_infinite()) throw std::domain_error("Time: finite - infinity");
        return Time(a.ns_ - b.ns_);
    }
    constexpr Time& operator+=(Time o) { return *this = *this + o; }
    constexpr Time& operator-=(Time o) { return *this = *this - o; }

    friend std::ostream& operator<<(std::ostream& os, Time t) {
        if (t.is_infinite()) return os << "+inf";
        return os << t.ns_ << "ns";
    }

private:
    static constexpr std::int64_t kInf = std::numeric_limits<std::int64_t>::max();
    std::int64_t ns_ = 0;
};

/// Wire time of `bytes` at `rate`, rounded up to the next nanosecond.
constexpr Time transmission_time(Bytes bytes, BitRate rate) {
    if (bytes < 0 || rate <= 0) throw std::invalid_argument("transmission_time: bad arguments");
    const __int128 num = static_cast<__int128>(bytes) * 8 * 1'000'000'000;
    const __int128 q = (num + rate - 1) / rate;
    return Time(static_cast<std::int64_t>(q));
}

/// Half-open idle interval [start, finish) on a receiver or group timeline.
struct Void {
    Time start;
    Time finish;

    constexpr bool is_horizon() const { return finish.is_infinite(); }
    friend constexpr bool operator==(const Void&, const Void&) = default;
};

constexpr Time void_length(const Void& v) { return v.finish - v.start; }

inline std::ostream& operator<<(std::ostream& os, const Void& v) {
    return os << '[' << v.start << ", " << v.finish << ')';
}

struct Topology {
    std::uint32_t groups = 0;      // M
    std::uint32_t group_size = 0;  // N
    std::uint32_t receivers = 0;   // R
    BitRate olt_rate = 1'000'000'000;
    BitRate onu_rate = 0;
    std::vector<Time> rtt;  // one entry per ONU
    Time t_grd = Time::us(1);
    std::optional<Bytes> lim;  // grant cap; nullopt disables limited granting
    std::int64_t buffer_capacity_bits = 1'000'000'000;

    std::uint32_t onu_count() const { return groups * group_size; }
    GroupId group_of(OnuId onu) const { return onu / group_size; }

    /// Throws std::invalid_argument describing the first violated constraint.
    void validate() const {
        auto fail = [](const std::string& what) { throw std::invalid_argument("topology: " + what); };
        if (groups == 0 || group_size == 0) fail("groups and group size must be positive");
        if (receivers == 0) fail("at least one receiver is required");
        if (receivers > onu_count()) fail("more receivers than ONUs");
        if (olt_rate <= 0 || onu_rate <= 0) fail("rates must be positive");
        if (rtt.size() != onu_count()) fail("rtt table size does not match ONU count");
        for (Time t : rtt)
            if (t < Time(0) || t.is_infinite()) fail("rtt must be finite and non-negative");
        if (t_grd <= Time(0)) fail("guard time must be positive");
        if (lim && *lim <= 0) fail("grant cap must be positive");
        if (buffer_capacity_bits <= 0) fail("buffer capacity must be positive");
    }
};

/// Grant cap derived from a 2 ms limited-granting cycle shared by the N ONUs of a
/// group: each ONU may occupy (2 ms / N) of receiver time at the OLT rate.
inline Bytes default_grant_cap(std::uint32_t group_size, BitRate olt_rate) {
    const __int128 bits = static_cast<__int128>(olt_rate) * 2 / 1000 / group_size;
    return static_cast<Bytes>(bits / 8);
}

struct RequestMsg {
    OnuId onu = 0;
    Bytes requested = 0;  // b
};

struct GrantMsg {
    OnuId onu = 0;
    Bytes granted = 0;  // g
    Time send_at;
};

/// Placement chosen by a scheduler. `duration` covers the guard time plus the
/// payload wire time; `start` is the arrival instant of the burst at the OLT.
struct ScheduleDecision {
    OnuId onu = 0;
    GroupId group = 0;
    ReceiverId receiver = 0;
    Bytes granted = 0;
    Time start;
    Time grant_at;
    Time duration;
    Time receiver_void_start;
    std::optional<Time> group_void_start;  // empty for receiver-only decisions
    std::size_t hops = 0;

    Time finish() const { return start + duration; }
    GrantMsg grant() const { return {onu, granted, grant_at}; }
};

}  // namespace twdm
