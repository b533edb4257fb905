#pragma once

// Parameter sweeps over the simulator and CSV emission.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <mutex>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "twdm/markov.hpp"
#include "twdm/simengine.hpp"

namespace twdm {

inline std::string to_string(SchedulerKind k) {
    switch (k) {
        case SchedulerKind::CevfFast: return "cevf";
        case SchedulerKind::CevfNaive: return "cevf-naive";
        case SchedulerKind::EftVf: return "eftvf";
    }
    return "?";
}

inline std::string to_string(Architecture a) { return a == Architecture::FlexibleSecure ? "flexible" : "splitter"; }

inline SchedulerKind parse_scheduler(const std::string& s) {
    if (s == "cevf") return SchedulerKind::CevfFast;
    if (s == "cevf-naive") return SchedulerKind::CevfNaive;
    if (s == "eftvf") return SchedulerKind::EftVf;
    throw std::invalid_argument("unknown scheduler '" + s + "' (expected cevf, cevf-naive or eftvf)");
}

inline Architecture parse_architecture(const std::string& s) {
    if (s == "flexible") return Architecture::FlexibleSecure;
    if (s == "splitter") return Architecture::Splitter;
    throw std::invalid_argument("unknown architecture '" + s + "' (expected flexible or splitter)");
}

/// Rates are accepted in any floating notation ("31.25e6") but must be whole bits/s.
inline BitRate parse_rate(double v) {
    if (!(v > 0) || v > 1e15 || std::floor(v) != v) throw std::invalid_argument("rates must be positive whole bits per second");
    return static_cast<BitRate>(v);
}

inline Time seconds_to_time(double s) {
    if (!(s >= 0) || s > 1e6) throw std::invalid_argument("durations must be non-negative seconds");
    return Time(std::llround(s * 1e9));
}

struct Experiment {
    NetworkSpec network;
    std::vector<double> loads{1.0};
    std::vector<SchedulerKind> schedulers{SchedulerKind::CevfFast};
    std::vector<Architecture> architectures{Architecture::FlexibleSecure};
    std::vector<std::uint64_t> seeds{1};
    Time duration = Time::s(20);
    std::optional<Time> warmup;  // default: 10% of duration
    unsigned jobs = 1;

    Time effective_warmup() const { return warmup ? *warmup : Time(duration.count() / 10); }

    /// One SimConfig per point of the Cartesian product, in sweep order
    /// (scheduler, architecture, load, seed; seed varies fastest).
    std::vector<SimConfig> configs() const {
        std::vector<SimConfig> out;
        for (auto sk : schedulers)
            for (auto arch : architectures)
                for (double rho : loads)
                    for (auto seed : seeds) {
                        SimConfig c;
                        c.topology = make_topology(network, seed);
                        c.architecture = arch;
                        c.scheduler = sk;
                        c.load = rho;
                        c.duration = duration;
                        c.warmup = effective_warmup();
                        c.seed = seed;
                        c.validate();
                        out.push_back(std::move(c));
                    }
        return out;
    }
};

struct RunRow {
    SimConfig config;
    Metrics metrics;
};

/// Runs every configuration on up to `jobs` threads; rows keep input order.
inline std::vector<RunRow> run_all(const std::vector<SimConfig>& configs, unsigned jobs) {
    std::vector<RunRow> rows(configs.size());
    std::atomic<std::size_t> next{0};
    std::mutex err_mu;
    std::exception_ptr first_error;
    auto worker = [&] {
        for (std::size_t i = next++; i < configs.size(); i = next++) {
            try {
                rows[i] = {configs[i], run(configs[i])};
            } catch (...) {
                std::lock_guard lock(err_mu);
                if (!first_error) first_error = std::current_exception();
            }
        }
    };
    const unsigned n = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(configs.size())));
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < n; ++t) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
    return rows;
}

inline std::vector<RunRow> run_experiment(const Experiment& e) { return run_all(e.configs(), e.jobs); }

inline constexpr const char* kSimulateCsvHeader =
    "scheduler,arch,rho,N,R,onu_rate,seed,throughput_pct,collision_loss_pct,buffer_drop_pct,mean_hops";

inline void write_csv(std::ostream& os, const std::vector<RunRow>& rows) {
    os << kSimulateCsvHeader << '\n';
    for (const auto& r : rows) {
        const Topology& t = r.config.topology;
        std::ostringstream line;
        line << to_string(r.config.scheduler) << ',' << to_string(r.config.architecture) << ','
             << std::setprecision(6) << r.config.load << ',' << t.group_size << ',' << t.receivers << ','
             << t.onu_rate << ',' << r.config.seed << ',' << std::fixed << std::setprecision(4)
             << r.metrics.throughput_pct << ',' << r.metrics.collision_loss_pct << ',' << r.metrics.buffer_drop_pct
             << ',' << std::setprecision(3) << r.metrics.mean_hops;
        os << line.str() << '\n';
    }
}

inline constexpr const char* kBoundCsvHeader = "rho,K,lim_q,A,pi_full,throughput_percent";

inline void write_bound_csv(std::ostream& os, const std::vector<markov::BoundResult>& rows) {
    os << kBoundCsvHeader << '\n';
    for (const auto& b : rows) {
        std::ostringstream line;
        line << std::setprecision(6) << b.rho << ',' << b.K << ',' << b.lim_q << ',' << std::fixed
             << std::setprecision(6) << b.A << ',' << std::scientific << std::setprecision(6) << b.pi_full << ','
             << std::fixed << std::setprecision(4) << b.throughput_pct;
        os << line.str() << '\n';
    }
}

/// Applies the keys present in a JSON config object. Unknown keys are rejected
/// so typos do not silently fall back to defaults.
inline void apply_json(Experiment& e, const nlohmann::json& j) {
    if (!j.is_object()) throw std::invalid_argument("config: top level must be an object");
    auto list_of = [](const nlohmann::json& v, auto parse) {
        using T = decltype(parse(v));
        std::vector<T> out;
        if (v.is_array()) {
            for (const auto& x : v) out.push_back(parse(x));
        } else {
            out.push_back(parse(v));
        }
        if (out.empty()) throw std::invalid_argument("config: empty list");
        return out;
    };
    for (const auto& [key, v] : j.items()) {
        if (key == "scheduler") {
            e.schedulers = list_of(v, [](const nlohmann::json& x) { return parse_scheduler(x.get<std::string>()); });
        } else if (key == "arch") {
            e.architectures = list_of(v, [](const nlohmann::json& x) { return parse_architecture(x.get<std::string>()); });
        } else if (key == "load") {
            e.loads = list_of(v, [](const nlohmann::json& x) { return x.get<double>(); });
        } else if (key == "seeds" || key == "seed") {
            e.seeds = list_of(v, [](const nlohmann::json& x) { return x.get<std::uint64_t>(); });
        } else if (key == "onus") {
            e.network.onus = v.get<std::uint32_t>();
        } else if (key == "group_size") {
            e.network.group_size = v.get<std::uint32_t>();
        } else if (key == "receivers") {
            e.network.receivers = v.get<std::uint32_t>();
        } else if (key == "onu_rate") {
            e.network.onu_rate = parse_rate(v.get<double>());
        } else if (key == "olt_rate") {
            e.network.olt_rate = parse_rate(v.get<double>());
        } else if (key == "t_grd_ns") {
            e.network.t_grd = Time(v.get<std::int64_t>());
        } else if (key == "lim_bytes") {
            if (v.is_null()) {
                e.network.limited_granting = false;
            } else {
                e.network.limited_granting = true;
                e.network.lim = v.get<Bytes>();
            }
        } else if (key == "buffer_bits") {
            e.network.buffer_bits = v.get<std::int64_t>();
        } else if (key == "rtt_min_ns") {
            e.network.rtt_min = Time(v.get<std::int64_t>());
        } else if (key == "rtt_max_ns") {
            e.network.rtt_max = Time(v.get<std::int64_t>());
        } else if (key == "duration_s") {
            e.duration = seconds_to_time(v.get<double>());
        } else if (key == "warmup_s") {
            e.warmup = seconds_to_time(v.get<double>());
        } else if (key == "jobs") {
            e.jobs = v.get<unsigned>();
        } else if (key == "out") {
            // handled by the CLI
        } else {
            throw std::invalid_argument("config: unknown key '" + key + "'");
        }
    }
}

inline markov::ArrivalMode parse_arrival_mode(const std::string& s) {
    if (s == "literal") return markov::ArrivalMode::Literal;
    if (s == "linear") return markov::ArrivalMode::Linear;
    throw std::invalid_argument("unknown arrival mode '" + s + "' (expected literal or linear)");
}

inline markov::GrowthRule parse_growth_rule(const std::string& s) {
    if (s == "served") return markov::GrowthRule::ServedEachCycle;
    if (s == "arrivals-only") return markov::GrowthRule::ArrivalsOnly;
    throw std::invalid_argument("unknown growth rule '" + s + "' (expected served or arrivals-only)");
}

/// Settings of the `bound` command. A simulation config file can be reused:
/// keys that only matter to the simulator are accepted and ignored.
struct BoundSweep {
    markov::BoundParams params;
    std::vector<double> loads{1.0};

    std::vector<markov::BoundResult> run() const {
        std::vector<markov::BoundResult> out;
        for (double rho : loads) {
            markov::BoundParams p = params;
            p.load = rho;
            out.push_back(markov::compute_bound(p));
        }
        return out;
    }
};

inline void apply_bound_json(BoundSweep& b, const nlohmann::json& j) {
    if (!j.is_object()) throw std::invalid_argument("config: top level must be an object");
    static const char* const simulator_only[] = {"scheduler", "arch", "seeds", "seed", "onus", "receivers",
                                                 "t_grd_ns", "lim_bytes", "rtt_min_ns", "rtt_max_ns",
                                                 "duration_s", "warmup_s", "jobs", "out"};
    for (const auto& [key, v] : j.items()) {
        if (key == "load") {
            b.loads.clear();
            if (v.is_array()) {
                for (const auto& x : v) b.loads.push_back(x.get<double>());
            } else {
                b.loads.push_back(v.get<double>());
            }
            if (b.loads.empty()) throw std::invalid_argument("config: empty list");
        } else if (key == "onu_rate") {
            b.params.onu_rate = parse_rate(v.get<double>());
        } else if (key == "olt_rate") {
            b.params.olt_rate = parse_rate(v.get<double>());
        } else if (key == "group_size") {
            b.params.group_size = v.get<std::uint32_t>();
        } else if (key == "buffer_bits") {
            b.params.buffer_bits = v.get<std::int64_t>();
        } else if (key == "buffer_quanta") {
            b.params.buffer_quanta = v.get<int>();
        } else if (key == "mode") {
            b.params.mode = parse_arrival_mode(v.get<std::string>());
        } else if (key == "growth") {
            b.params.growth = parse_growth_rule(v.get<std::string>());
        } else if (std::find(std::begin(simulator_only), std::end(simulator_only), key) == std::end(simulator_only)) {
            throw std::invalid_argument("config: unknown key '" + key + "'");
        }
    }
}

}  // namespace twdm
