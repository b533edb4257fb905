// Command-line front end over the library. Exit codes: 0 success, 1 invalid
// configuration, 2 verification failure, 3 any other error.

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "oracle/brute_force.hpp"
#include "twdm/experiment.hpp"
#include "twdm/verify.hpp"

namespace {

constexpr int kBadConfig = 1;
constexpr int kVerifyFailed = 2;

nlohmann::json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open config file '" + path + "'");
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument("config file '" + path + "': " + e.what());
    }
}

// Splits "a,b,c" and repeated flags into one list.
std::vector<std::string> split_list(const std::vector<std::string>& raw) {
    std::vector<std::string> out;
    for (const auto& item : raw) {
        std::stringstream ss(item);
        std::string tok;
        while (std::getline(ss, tok, ','))
            if (!tok.empty()) out.push_back(tok);
    }
    return out;
}

std::vector<double> parse_doubles(const std::vector<std::string>& raw) {
    std::vector<double> out;
    for (const auto& s : split_list(raw)) {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument("not a number: '" + s + "'");
        out.push_back(v);
    }
    return out;
}

// Writes to --out when given, otherwise (or for "-") to stdout.
template <class Fn>
void emit(const std::string& path, Fn write) {
    if (path.empty() || path == "-") {
        write(std::cout);
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::invalid_argument("cannot open output file '" + path + "'");
    write(out);
}

struct SimulateFlags {
    std::string config;
    std::string out;
    std::string trace;
    std::vector<std::string> loads;
    std::vector<std::string> schedulers;
    std::vector<std::string> archs;
    std::vector<std::uint64_t> seeds;
    std::uint32_t onus = 0;
    std::uint32_t group_size = 0;
    std::uint32_t receivers = 0;
    double onu_rate = 0;
    double olt_rate = 0;
    double duration = 0;
    double warmup = 0;
    std::int64_t lim = 0;
    bool no_lim = false;
    unsigned jobs = 0;
};

int run_simulate(const SimulateFlags& f, const CLI::App& cmd) {
    using namespace twdm;
    Experiment e;
    std::string out = f.out;
    if (!f.config.empty()) {
        const auto j = load_json(f.config);
        apply_json(e, j);
        if (out.empty() && j.contains("out")) out = j["out"].get<std::string>();
    }
    auto given = [&](const char* name) { return cmd.count(name) > 0; };
    if (given("--load")) e.loads = parse_doubles(f.loads);
    if (given("--scheduler")) {
        e.schedulers.clear();
        for (const auto& s : split_list(f.schedulers)) e.schedulers.push_back(parse_scheduler(s));
    }
    if (given("--arch")) {
        e.architectures.clear();
        for (const auto& s : split_list(f.archs)) e.architectures.push_back(parse_architecture(s));
    }
    if (given("--seed")) e.seeds = f.seeds;
    if (given("--onus")) e.network.onus = f.onus;
    if (given("--group-size")) e.network.group_size = f.group_size;
    if (given("--receivers")) e.network.receivers = f.receivers;
    if (given("--onu-rate")) e.network.onu_rate = parse_rate(f.onu_rate);
    if (given("--olt-rate")) e.network.olt_rate = parse_rate(f.olt_rate);
    if (given("--duration")) e.duration = seconds_to_time(f.duration);
    if (given("--warmup")) e.warmup = seconds_to_time(f.warmup);
    if (given("--lim")) {
        e.network.limited_granting = true;
        e.network.lim = f.lim;
    }
    if (f.no_lim) e.network.limited_granting = false;
    if (given("--jobs")) e.jobs = f.jobs;

    std::vector<SimConfig> configs = e.configs();  // validates everything up front
    std::ofstream trace;
    if (!f.trace.empty()) {
        if (configs.size() != 1) throw std::invalid_argument("--trace needs a sweep with exactly one run");
        trace.open(f.trace, std::ios::binary);
        if (!trace) throw std::invalid_argument("cannot open trace file '" + f.trace + "'");
        trace << "time_ns,event,onu,receiver,bytes\n";
        configs.front().event_trace = &trace;
    }
    const auto rows = run_all(configs, e.jobs);
    emit(out, [&](std::ostream& os) { write_csv(os, rows); });
    return 0;
}

struct BoundFlags {
    std::string config;
    std::string out;
    std::vector<std::string> loads;
    double onu_rate = 0;
    double olt_rate = 0;
    std::uint32_t group_size = 0;
    std::int64_t buffer_bits = 0;
    int buffer_quanta = 0;
    std::string mode;
    std::string growth;
};

int run_bound(const BoundFlags& f, const CLI::App& cmd) {
    using namespace twdm;
    BoundSweep b;
    std::string out = f.out;
    if (!f.config.empty()) {
        const auto j = load_json(f.config);
        apply_bound_json(b, j);
        if (out.empty() && j.contains("out")) out = j["out"].get<std::string>();
    }
    auto given = [&](const char* name) { return cmd.count(name) > 0; };
    if (given("--load")) b.loads = parse_doubles(f.loads);
    if (given("--onu-rate")) b.params.onu_rate = parse_rate(f.onu_rate);
    if (given("--olt-rate")) b.params.olt_rate = parse_rate(f.olt_rate);
    if (given("--group-size")) b.params.group_size = f.group_size;
    if (given("--buffer-bits")) b.params.buffer_bits = f.buffer_bits;
    if (given("--buffer-quanta")) b.params.buffer_quanta = f.buffer_quanta;
    if (given("--mode")) b.params.mode = parse_arrival_mode(f.mode);
    if (given("--growth")) b.params.growth = parse_growth_rule(f.growth);
    const auto rows = b.run();
    emit(out, [&](std::ostream& os) { write_bound_csv(os, rows); });
    return 0;
}

int run_verify(std::size_t instances, std::uint64_t seed) {
    using namespace twdm;
    const auto oracle_check = [](const verify::Instance& inst, const ScheduleDecision& naive) {
        return oracle::agrees(inst.state, inst.onu, inst.grant, naive);
    };
    const verify::Summary s = verify::run_suite(instances, seed, {}, oracle_check);
    std::cout << s.report();
    std::cout << (s.ok() ? "verify: all invariants hold\n" : "verify: FAILED\n");
    return s.ok() ? 0 : kVerifyFailed;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"TWDM upstream scheduling simulator"};
    app.require_subcommand(1);

    SimulateFlags sim;
    auto* simulate = app.add_subcommand("simulate", "run a simulation sweep and write CSV");
    simulate->add_option("--config", sim.config, "JSON config file (flags override its values)");
    simulate->add_option("--out", sim.out, "CSV output file (default or \"-\": stdout)");
    simulate->add_option("--trace", sim.trace, "per-event CSV trace (single-run sweeps only)");
    simulate->add_option("--load", sim.loads, "load values, comma separated");
    simulate->add_option("--scheduler", sim.schedulers, "cevf, cevf-naive or eftvf (comma separated)");
    simulate->add_option("--arch", sim.archs, "flexible or splitter (comma separated)");
    simulate->add_option("--seed", sim.seeds, "seed(s); repeat the flag or give several values")
        ->delimiter(',');
    simulate->add_option("--onus", sim.onus, "number of ONUs (M*N)");
    simulate->add_option("--group-size", sim.group_size, "ONUs per group (N)");
    simulate->add_option("--receivers", sim.receivers, "OLT receivers (R)");
    simulate->add_option("--onu-rate", sim.onu_rate, "ONU line rate in bit/s");
    simulate->add_option("--olt-rate", sim.olt_rate, "OLT receiver rate in bit/s");
    simulate->add_option("--duration", sim.duration, "simulated seconds per run (default 20)");
    simulate->add_option("--warmup", sim.warmup, "seconds excluded from metrics (default: 10% of duration)");
    simulate->add_option("--lim", sim.lim, "grant cap in bytes (default: 2 ms cycle shared by the group)");
    simulate->add_flag("--no-lim", sim.no_lim, "disable limited granting");
    simulate->add_option("--jobs", sim.jobs, "parallel runs");

    BoundFlags bnd;
    auto* bound = app.add_subcommand("bound", "Markov-chain throughput bound for limited granting");
    bound->add_option("--config", bnd.config, "JSON config file (flags override its values)");
    bound->add_option("--out", bnd.out, "CSV output file (default or \"-\": stdout)");
    bound->add_option("--load", bnd.loads, "load values, comma separated");
    bound->add_option("--onu-rate", bnd.onu_rate, "ONU line rate in bit/s (default 125e6)");
    bound->add_option("--olt-rate", bnd.olt_rate, "OLT receiver rate in bit/s (default 1e9)");
    bound->add_option("--group-size", bnd.group_size, "ONUs per group (default 8)");
    bound->add_option("--buffer-bits", bnd.buffer_bits, "ONU buffer in bits (default 1e9)");
    bound->add_option("--buffer-quanta", bnd.buffer_quanta, "ONU buffer in 1500 B quanta (overrides bits)");
    bound->add_option("--mode", bnd.mode, "arrivals per cycle: literal (rho^2 scaling) or linear");
    bound->add_option("--growth", bnd.growth, "transition rule: served or arrivals-only");

    std::size_t instances = 10'000;
    std::uint64_t verify_seed = 1;
    auto* verify_cmd = app.add_subcommand("verify", "randomized scheduler equivalence and invariant checks");
    verify_cmd->add_option("--instances", instances, "random instances to check");
    verify_cmd->add_option("--seed", verify_seed, "generator seed");

    std::string traffic_out;
    double traffic_load = 0.5;
    double traffic_rate = 125e6;
    double traffic_seconds = 1.0;
    std::uint32_t traffic_onus = 1;
    std::uint64_t traffic_seed = 1;
    auto* traffic = app.add_subcommand("traffic", "dump the generated packet arrivals as CSV");
    traffic->add_option("--out", traffic_out, "CSV output file (default or \"-\": stdout)");
    traffic->add_option("--load", traffic_load, "load in [0, 1]");
    traffic->add_option("--onu-rate", traffic_rate, "peak rate in bit/s");
    traffic->add_option("--duration", traffic_seconds, "seconds of traffic");
    traffic->add_option("--onus", traffic_onus, "number of sources");
    traffic->add_option("--seed", traffic_seed, "seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kBadConfig;
    }

    try {
        if (*simulate) return run_simulate(sim, *simulate);
        if (*bound) return run_bound(bnd, *bound);
        if (*verify_cmd) return run_verify(instances, verify_seed);
        if (*traffic) {
            twdm::TrafficConfig tc;
            tc.peak_rate = twdm::parse_rate(traffic_rate);
            tc.load = traffic_load;
            const twdm::Time until = twdm::seconds_to_time(traffic_seconds);
            twdm::ParetoOnOffSource probe(tc, 0);  // validates the configuration
            emit(traffic_out, [&](std::ostream& os) {
                twdm::write_traffic_trace(os, tc, traffic_seed, traffic_onus, until);
            });
            return 0;
        }
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kBadConfig;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "error: config: " << e.what() << '\n';
        return kBadConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
    return 0;
}
