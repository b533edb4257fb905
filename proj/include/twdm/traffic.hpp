#pragma once

// Self-similar ONU traffic: Pareto on/off sources and drop-tail buffers.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <random>
#include <stdexcept>
#include <vector>

#include "twdm/core.hpp"

namespace twdm {

/// splitmix64 finalizer; turns (seed, stream) into independent generator seeds.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Uniform double in [0, 1) from the top 53 bits; identical on every platform.
inline double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// Pareto law Pr(X > x) = (scale / x)^shape on [scale, scale * cap_ratio].
/// The upper bound sits far in the tail (mass beyond it is (1/cap_ratio)^shape)
/// and keeps sample means of heavy-tailed shapes close to the analytic mean.
class BoundedPareto {
public:
    static constexpr double kDefaultCapRatio = 1e4;

    BoundedPareto(double shape, double scale, double cap_ratio = kDefaultCapRatio)
        : shape_(shape), scale_(scale), cap_ratio_(cap_ratio) {
        if (!(shape > 0) || !(scale > 0) || !(cap_ratio > 1)) throw std::invalid_argument("BoundedPareto: bad parameters");
        tail_ = std::pow(1.0 / cap_ratio_, shape_);
    }

    double shape() const { return shape_; }
    double scale() const { return scale_; }
    double upper() const { return scale_ * cap_ratio_; }

    double operator()(std::mt19937_64& rng) const { return quantile(uniform01(rng)); }

    double quantile(double u) const { return scale_ / std::pow(1.0 - u * (1.0 - tail_), 1.0 / shape_); }

    double cdf(double x) const {
        if (x <= scale_) return 0.0;
        if (x >= upper()) return 1.0;
        return (1.0 - std::pow(scale_ / x, shape_)) / (1.0 - tail_);
    }

    double mean() const { return scale_ * unit_mean(shape_, cap_ratio_); }

    /// Mean of the bounded law with scale 1.
    static double unit_mean(double shape, double cap_ratio) {
        const double r = 1.0 / cap_ratio;
        if (std::abs(shape - 1.0) < 1e-12) return std::log(cap_ratio) / (1.0 - r);
        return shape / (shape - 1.0) * (1.0 - std::pow(r, shape - 1.0)) / (1.0 - std::pow(r, shape));
    }

private:
    double shape_;
    double scale_;
    double cap_ratio_;
    double tail_;
};

struct TrafficConfig {
    BitRate peak_rate = 0;  // ONU line rate r; arrivals run at this rate while on
    double load = 0.0;      // long-run fraction of time spent on
    double shape_on = 1.2;
    double shape_off = 1.4;
    Bytes packet_bytes = 1500;
    double cap_ratio = BoundedPareto::kDefaultCapRatio;
};

struct Packet {
    Time arrival;
    Bytes size = 0;
};

/// On/off source with Pareto on and off periods. The shortest on period carries
/// exactly one full packet at peak rate; the off-period scale is solved so that
/// the mean duty cycle equals the configured load. Each on period is cut into
/// full packets plus at most one shorter trailing packet.
class ParetoOnOffSource {
public:
    ParetoOnOffSource(const TrafficConfig& cfg, std::uint64_t seed, Time origin = Time(0))
        : cfg_(cfg),
          rng_(seed),
          on_(cfg.shape_on, static_cast<double>(cfg.packet_bytes) * 8.0 / positive_rate(cfg.peak_rate), cfg.cap_ratio),
          off_(cfg.shape_off, 1.0, cfg.cap_ratio),
          next_on_start_(origin) {
        if (!(cfg.load >= 0.0 && cfg.load <= 1.0)) throw std::invalid_argument("ParetoOnOffSource: load outside [0, 1]");
        if (cfg.packet_bytes <= 0) throw std::invalid_argument("ParetoOnOffSource: packet size must be positive");
        if (cfg.load > 0.0 && cfg.load < 1.0) {
            const double mean_off = on_.mean() * (1.0 - cfg.load) / cfg.load;
            off_ = BoundedPareto(cfg.shape_off, mean_off / BoundedPareto::unit_mean(cfg.shape_off, cfg.cap_ratio),
                                 cfg.cap_ratio);
            next_on_start_ += Time(std::llround(off_(rng_) * 1e9));  // random phase
        }
    }

    const TrafficConfig& config() const { return cfg_; }
    const BoundedPareto& on_law() const { return on_; }
    const BoundedPareto& off_law() const { return off_; }

    /// Next packet, in arrival order. A silent source returns an infinite arrival.
    Packet next_burst() {
        if (cfg_.load <= 0.0) return {Time::infinity(), 0};
        if (emitted_ >= burst_bytes_) start_on_period();
        const Bytes size = std::min(cfg_.packet_bytes, burst_bytes_ - emitted_);
        emitted_ += size;
        return {burst_start_ + transmission_time(emitted_, cfg_.peak_rate), size};
    }

private:
    static double positive_rate(BitRate r) {
        if (r <= 0) throw std::invalid_argument("ParetoOnOffSource: peak rate must be positive");
        return static_cast<double>(r);
    }

    void start_on_period() {
        burst_start_ = next_on_start_;
        const double on_seconds = on_(rng_);
        burst_bytes_ = std::max<Bytes>(1, std::llround(on_seconds * static_cast<double>(cfg_.peak_rate) / 8.0));
        emitted_ = 0;
        Time gap(0);
        if (cfg_.load < 1.0) gap = Time(std::llround(off_(rng_) * 1e9));
        next_on_start_ = burst_start_ + transmission_time(burst_bytes_, cfg_.peak_rate) + gap;
    }

    TrafficConfig cfg_;
    std::mt19937_64 rng_;
    BoundedPareto on_;
    BoundedPareto off_;
    Time burst_start_;
    Time next_on_start_;
    Bytes burst_bytes_ = 0;
    Bytes emitted_ = 0;
};

/// Drop-tail ONU buffer; every counter is in bits.
class OnuBuffer {
public:
    explicit OnuBuffer(std::int64_t capacity_bits = 1'000'000'000) : capacity_(capacity_bits) {
        if (capacity_bits <= 0) throw std::invalid_argument("OnuBuffer: capacity must be positive");
    }

    /// Accepts the whole packet iff it fits.
    bool enqueue(Bytes size) {
        if (size <= 0) throw std::invalid_argument("OnuBuffer::enqueue: size must be positive");
        const std::int64_t bits = size * 8;
        arrivals_ += bits;
        if (occupancy_ + bits > capacity_) {
            drops_ += bits;
            return false;
        }
        occupancy_ += bits;
        return true;
    }

    /// Removes up to `size` bytes; returns the bytes removed.
    Bytes dequeue(Bytes size) {
        if (size < 0) throw std::invalid_argument("OnuBuffer::dequeue: negative size");
        const std::int64_t bits = std::min(size * 8, occupancy_);
        occupancy_ -= bits;
        departures_ += bits;
        return bits / 8;
    }

    std::int64_t occupancy_bits() const { return occupancy_; }
    Bytes occupancy_bytes() const { return occupancy_ / 8; }
    std::int64_t capacity_bits() const { return capacity_; }
    std::int64_t arrival_bits() const { return arrivals_; }
    std::int64_t departure_bits() const { return departures_; }
    std::int64_t drop_bits() const { return drops_; }

private:
    std::int64_t capacity_;
    std::int64_t occupancy_ = 0;
    std::int64_t arrivals_ = 0;
    std::int64_t departures_ = 0;
    std::int64_t drops_ = 0;
};

/// CSV dump of every packet generated by `onus` sources before `until`:
/// rows `arrival_ns,onu_id,bytes` sorted by arrival then ONU.
inline void write_traffic_trace(std::ostream& os, const TrafficConfig& cfg, std::uint64_t seed, std::uint32_t onus,
                                Time until) {
    struct Row {
        Time arrival;
        OnuId onu;
        Bytes bytes;
    };
    std::vector<Row> rows;
    for (OnuId o = 0; o < onus; ++o) {
        ParetoOnOffSource src(cfg, derive_seed(seed, o));
        for (Packet p = src.next_burst(); p.arrival < until; p = src.next_burst()) rows.push_back({p.arrival, o, p.size});
    }
    std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.arrival < b.arrival; });
    os << "arrival_ns,onu_id,bytes\n";
    for (const auto& r : rows) os << r.arrival.count() << ',' << r.onu << ',' << r.bytes << '\n';
}

}  // namespace twdm
