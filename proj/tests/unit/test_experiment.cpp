#include <gtest/gtest.h>

#include <sstream>

#include "twdm/experiment.hpp"

using namespace twdm;

namespace {

Experiment small_experiment() {
    Experiment e;
    e.network.onus = 16;
    e.network.group_size = 4;
    e.network.receivers = 2;
    e.network.onu_rate = 125'000'000;
    e.loads = {0.2, 0.6};
    e.schedulers = {SchedulerKind::CevfFast, SchedulerKind::EftVf};
    e.architectures = {Architecture::FlexibleSecure};
    e.seeds = {1, 2};
    e.duration = Time::ms(200);
    return e;
}

std::string csv(const Experiment& e) {
    std::ostringstream os;
    write_csv(os, run_experiment(e));
    return os.str();
}

}  // namespace

TEST(Names, RoundTrip) {
    for (auto k : {SchedulerKind::CevfFast, SchedulerKind::CevfNaive, SchedulerKind::EftVf})
        EXPECT_EQ(parse_scheduler(to_string(k)), k);
    for (auto a : {Architecture::FlexibleSecure, Architecture::Splitter}) EXPECT_EQ(parse_architecture(to_string(a)), a);
    EXPECT_THROW(parse_scheduler("eft"), std::invalid_argument);
    EXPECT_THROW(parse_architecture("awg"), std::invalid_argument);
}

TEST(ParseRate, AcceptsScientificWholeRates) {
    EXPECT_EQ(parse_rate(31.25e6), 31'250'000);
    EXPECT_THROW(parse_rate(0.0), std::invalid_argument);
    EXPECT_THROW(parse_rate(1.5), std::invalid_argument);
}

TEST(Experiment, ConfigsEnumerateCartesianProductInOrder) {
    const Experiment e = small_experiment();
    const auto cs = e.configs();
    ASSERT_EQ(cs.size(), 8u);
    EXPECT_EQ(cs[0].scheduler, SchedulerKind::CevfFast);
    EXPECT_EQ(cs[0].load, 0.2);
    EXPECT_EQ(cs[0].seed, 1u);
    EXPECT_EQ(cs[1].seed, 2u);
    EXPECT_EQ(cs[2].load, 0.6);
    EXPECT_EQ(cs[4].scheduler, SchedulerKind::EftVf);
    EXPECT_EQ(cs[0].warmup, Time::ms(20));
}

TEST(Experiment, CsvIsByteIdenticalAcrossRunsAndJobCounts) {
    Experiment e = small_experiment();
    const std::string a = csv(e);
    const std::string b = csv(e);
    e.jobs = 3;
    const std::string c = csv(e);
    EXPECT_EQ(a, b);
    EXPECT_EQ(a, c);
    EXPECT_EQ(a.substr(0, a.find('\n')), kSimulateCsvHeader);
    EXPECT_EQ(std::count(a.begin(), a.end(), '\n'), 9);
}

TEST(Experiment, CsvRowLayout) {
    Experiment e = small_experiment();
    e.loads = {0.5};
    e.schedulers = {SchedulerKind::CevfFast};
    e.seeds = {7};
    const std::string out = csv(e);
    const std::string row = out.substr(out.find('\n') + 1);
    EXPECT_EQ(row.rfind("cevf,flexible,0.5,4,2,125000000,7,", 0), 0u) << row;
    EXPECT_EQ(std::count(row.begin(), row.end(), ','), 10);
}

TEST(Experiment, ErrorsPropagateFromWorkers) {
    Experiment e = small_experiment();
    auto cs = e.configs();
    cs[3].load = 2.0;
    EXPECT_THROW(run_all(cs, 2), std::invalid_argument);
}

TEST(Json, AppliesEveryKey) {
    Experiment e;
    const auto j = nlohmann::json::parse(R"({
        "scheduler": ["cevf", "eftvf"], "arch": "splitter", "load": [0.1, 0.9], "seeds": [4, 5],
        "onus": 32, "group_size": 4, "receivers": 3, "onu_rate": 62.5e6, "olt_rate": 1e9,
        "t_grd_ns": 500, "lim_bytes": 9000, "buffer_bits": 1000000, "rtt_min_ns": 1000,
        "rtt_max_ns": 2000, "duration_s": 3, "warmup_s": 0.5, "jobs": 2, "out": "x.csv"})");
    apply_json(e, j);
    EXPECT_EQ(e.schedulers.size(), 2u);
    EXPECT_EQ(e.architectures.front(), Architecture::Splitter);
    EXPECT_EQ(e.loads, (std::vector<double>{0.1, 0.9}));
    EXPECT_EQ(e.seeds, (std::vector<std::uint64_t>{4, 5}));
    EXPECT_EQ(e.network.onus, 32u);
    EXPECT_EQ(e.network.group_size, 4u);
    EXPECT_EQ(e.network.receivers, 3u);
    EXPECT_EQ(e.network.onu_rate, 62'500'000);
    EXPECT_EQ(e.network.t_grd, Time(500));
    EXPECT_EQ(e.network.lim, 9000);
    EXPECT_EQ(e.network.buffer_bits, 1'000'000);
    EXPECT_EQ(e.network.rtt_max, Time(2000));
    EXPECT_EQ(e.duration, Time::s(3));
    EXPECT_EQ(e.effective_warmup(), Time::ms(500));
    EXPECT_EQ(e.jobs, 2u);
}

TEST(Json, NullCapDisablesLimitedGranting) {
    Experiment e;
    apply_json(e, nlohmann::json::parse(R"({"lim_bytes": null})"));
    EXPECT_FALSE(e.network.limited_granting);
    EXPECT_FALSE(e.configs().front().topology.lim.has_value());
}

TEST(Json, RejectsUnknownKeysAndBadValues) {
    Experiment e;
    EXPECT_THROW(apply_json(e, nlohmann::json::parse(R"({"laod": 0.5})")), std::invalid_argument);
    EXPECT_THROW(apply_json(e, nlohmann::json::parse(R"([1, 2])")), std::invalid_argument);
    EXPECT_THROW(apply_json(e, nlohmann::json::parse(R"({"load": []})")), std::invalid_argument);
    EXPECT_THROW(apply_json(e, nlohmann::json::parse(R"({"scheduler": "fifo"})")), std::invalid_argument);
    EXPECT_ANY_THROW(apply_json(e, nlohmann::json::parse(R"({"onus": "many"})")));
}

TEST(BoundCsv, Layout) {
    markov::BoundParams p;
    p.load = 0.1;
    std::ostringstream os;
    write_bound_csv(os, {markov::compute_bound(p)});
    EXPECT_EQ(os.str(), std::string(kBoundCsvHeader) + "\n0.1,83333,20,0.208333,0.000000e+00,10.0000\n");
}
