#include <gtest/gtest.h>

#include <random>

#include "oracle/brute_force.hpp"
#include "twdm/scheduler.hpp"
#include "twdm/verify.hpp"

using namespace twdm;

namespace {

Topology topology(std::uint32_t groups, std::uint32_t group_size, std::uint32_t receivers, Time rtt = Time(0)) {
    Topology t;
    t.groups = groups;
    t.group_size = group_size;
    t.receivers = receivers;
    t.olt_rate = 1'000'000'000;
    t.onu_rate = t.olt_rate / group_size;
    t.rtt.assign(groups * group_size, rtt);
    t.t_grd = Time::us(1);
    return t;
}

TimelineEntry us(std::int64_t s, std::int64_t f, std::uint32_t owner) {
    return {{Time::us(s), f < 0 ? Time::infinity() : Time::us(f)}, owner};
}

VoidTimeline timeline(VoidTimeline::Kind k, std::initializer_list<TimelineEntry> entries) {
    VoidTimeline tl(k);
    for (const auto& e : entries) tl.insert_ordered(e);
    return tl;
}

// 1125 bytes at 1 Gb/s is 9 us of payload; with the guard the burst needs 10 us.
constexpr Bytes kTenMicroseconds = 1125;

// Two receivers and two groups. Receiver 1 has voids X = [0,6) and X+2 = [40,80),
// receiver 0 has X+1 = [5,30); group 1 has Y = [2,14) and Y+1 = [25,60).
SchedulerState hopping_example() {
    auto rx = timeline(VoidTimeline::Kind::Receiver,
                       {us(0, 6, 1), us(5, 30, 0), us(40, 80, 1), us(90, -1, 1), us(100, -1, 0)});
    std::vector<VoidTimeline> groups;
    groups.push_back(timeline(VoidTimeline::Kind::Group, {us(0, -1, 0)}));
    groups.push_back(timeline(VoidTimeline::Kind::Group, {us(2, 14, 1), us(25, 60, 1), us(70, -1, 1)}));
    return SchedulerState(topology(2, 2, 2), Time(0), std::move(rx), std::move(groups));
}

}  // namespace

TEST(EarliestStart, Examples) {
    EXPECT_EQ(earliest_start(Time::us(10), Time::us(200)), Time::us(210));
    EXPECT_EQ(earliest_start(Time(0), Time(0)), Time(0));
    EXPECT_EQ(earliest_start(Time(5), Time(3)), Time(8));
    EXPECT_THROW(earliest_start(Time(0), Time(-1)), std::invalid_argument);
}

TEST(GrantInstant, Examples) {
    EXPECT_EQ(grant_instant(Time::us(210), Time::us(200), Time::us(10)), Time::us(10));
    const Time now = Time::us(3);
    const Time rtt = Time::us(150);
    EXPECT_EQ(grant_instant(earliest_start(now, rtt), rtt, now), now);
    EXPECT_EQ(grant_instant(Time::us(7), Time(0), Time::us(7)), Time::us(7));
    EXPECT_THROW(grant_instant(Time::us(5), Time::us(10), Time(0)), InfeasibleGrant);
}

TEST(Intersect, Examples) {
    auto v = [](std::int64_t s, std::int64_t f) { return Void{Time(s), Time(f)}; };
    EXPECT_EQ(intersect(v(0, 10), v(5, 20), Time(0)), v(5, 10));
    EXPECT_EQ(intersect(v(5, 10), v(5, 10), Time(0)), v(5, 10));
    EXPECT_EQ(intersect(v(0, 5), v(6, 10), Time(0)), std::nullopt);
    EXPECT_EQ(intersect(v(5, 10), v(0, 20), Time(7)), v(7, 10));
    EXPECT_EQ(intersect(v(0, 5), v(5, 10), Time(0)), v(5, 5));  // touching voids: zero length
    const Void h{Time(3), Time::infinity()};
    EXPECT_EQ(intersect(h, h, Time(9)), (Void{Time(9), Time::infinity()}));
}

TEST(Fits, EqualityAdmits) {
    EXPECT_TRUE(fits(Time::us(10), Time::us(10)));
    EXPECT_FALSE(fits(Time::us(10) - Time(1), Time::us(10)));
    CandidateVoid exact{{Time(0), Time::us(10)}, 0, Time(0), Time(0)};
    EXPECT_TRUE(fits(exact, kTenMicroseconds, 1'000'000'000, Time::us(1)));
    CandidateVoid short_by_one{{Time(1), Time::us(10)}, 0, Time(0), Time(0)};
    EXPECT_FALSE(fits(short_by_one, kTenMicroseconds, 1'000'000'000, Time::us(1)));
    CandidateVoid horizon{{Time(0), Time::infinity()}, 0, Time(0), Time(0)};
    EXPECT_TRUE(fits(horizon, 1'000'000'000, 1'000'000'000, Time::us(1)));
    EXPECT_THROW(fits(horizon, -1, 1'000'000'000, Time::us(1)), std::invalid_argument);
}

TEST(RequiredLength, PayloadPlusGuard) {
    EXPECT_EQ(required_length(kTenMicroseconds, 1'000'000'000, Time::us(1)), Time::us(10));
    EXPECT_EQ(required_length(0, 1'000'000'000, Time::us(1)), Time::us(1));
}

TEST(HoppingExample, NaivePicksIntersectionOfThirdReceiverVoidAndSecondGroupVoid) {
    const SchedulerState s = hopping_example();
    const ScheduleDecision d = schedule_cevf_naive(s, 2, kTenMicroseconds);  // ONU 2 is in group 1
    EXPECT_EQ(d.start, Time::us(40));
    EXPECT_EQ(d.receiver, 1u);
    EXPECT_EQ(d.receiver_void_start, Time::us(40));
    EXPECT_EQ(d.group_void_start, Time::us(25));
    EXPECT_EQ(d.duration, Time::us(10));
    EXPECT_EQ(d.grant_at, Time::us(40));  // zero rtt
}

TEST(HoppingExample, FastWalkTakesThreeHops) {
    // X -> X+1, Y -> Y+1, X+1 -> X+2, accept X+2 with Y+1
    const SchedulerState s = hopping_example();
    const ScheduleDecision d = schedule_cevf_fast(s, 2, kTenMicroseconds);
    EXPECT_EQ(d.start, Time::us(40));
    EXPECT_EQ(d.receiver, 1u);
    EXPECT_EQ(d.group_void_start, Time::us(25));
    EXPECT_EQ(d.hops, 3u);
}

TEST(HoppingExample, EftVfIgnoresGroupVoids) {
    const SchedulerState s = hopping_example();
    const ScheduleDecision d = schedule_eftvf(s, 2, kTenMicroseconds);
    EXPECT_EQ(d.start, Time::us(5));  // X+1 on receiver 0 is long enough on its own
    EXPECT_EQ(d.receiver, 0u);
    EXPECT_FALSE(d.group_void_start.has_value());
}

TEST(Schedulers, EmptyScheduleStartsAtEarliestInstantOnReceiverZero) {
    const SchedulerState s(topology(3, 2, 3, Time::us(150)), Time::us(20));
    for (auto kind : {SchedulerKind::CevfFast, SchedulerKind::CevfNaive, SchedulerKind::EftVf}) {
        const ScheduleDecision d = schedule(kind, s, 4, 500);
        EXPECT_EQ(d.start, Time::us(170));
        EXPECT_EQ(d.receiver, 0u);
        EXPECT_EQ(d.grant_at, Time::us(20));
    }
}

TEST(Schedulers, TieGoesToLowestReceiver) {
    // both receivers free from 10 us; receiver 1 listed with an earlier void start
    auto rx = timeline(VoidTimeline::Kind::Receiver, {us(0, -1, 1), us(10, -1, 0)});
    std::vector<VoidTimeline> groups{timeline(VoidTimeline::Kind::Group, {us(0, -1, 0)})};
    const SchedulerState s(topology(1, 2, 2, Time::us(10)), Time(0), std::move(rx), std::move(groups));
    EXPECT_EQ(schedule_cevf_naive(s, 0, 100).receiver, 0u);
    EXPECT_EQ(schedule_cevf_fast(s, 0, 100).receiver, 0u);
    EXPECT_EQ(schedule_eftvf(s, 0, 100).receiver, 0u);
}

TEST(Schedulers, RejectBadRequests) {
    Topology t = topology(1, 2, 1);
    t.lim = 1000;
    const SchedulerState s(t);
    EXPECT_THROW(schedule_cevf_fast(s, 2, 10), std::invalid_argument);
    EXPECT_THROW(schedule_cevf_naive(s, 0, -1), std::invalid_argument);
    EXPECT_THROW(schedule_eftvf(s, 0, 1001), std::invalid_argument);
    EXPECT_NO_THROW(schedule_eftvf(s, 0, 1000));
}

TEST(EftVf, SameGroupBurstsOnDifferentReceiversAreAllowed) {
    SchedulerState s(topology(1, 2, 2));
    const ScheduleDecision a = schedule_eftvf(s, 0, 1000);
    s.commit(a);
    const ScheduleDecision b = schedule_eftvf(s, 1, 1000);
    EXPECT_NE(a.receiver, b.receiver);
    EXPECT_EQ(a.start, b.start);  // overlapping in time, same group
    EXPECT_NO_THROW(s.commit(b));
}

TEST(Commit, SplitsVoidIntoTwoKeptFragments) {
    auto rx = timeline(VoidTimeline::Kind::Receiver, {us(0, 100, 0), us(200, -1, 0)});
    std::vector<VoidTimeline> groups{timeline(VoidTimeline::Kind::Group, {us(0, -1, 0)})};
    SchedulerState s(topology(1, 1, 1), Time(0), std::move(rx), std::move(groups));
    ScheduleDecision d;
    d.start = Time::us(40);
    d.duration = Time::us(20);
    d.receiver_void_start = Time(0);
    d.group_void_start = Time(0);
    s.commit(d);
    const auto v = s.receivers().view(0);
    ASSERT_EQ(v.size(), 3u);
    EXPECT_EQ(v[0], (Void{Time(0), Time::us(40)}));
    EXPECT_EQ(v[1], (Void{Time::us(60), Time::us(100)}));
    const auto g = s.group(0).view(0);
    ASSERT_EQ(g.size(), 2u);
    EXPECT_EQ(g[0], (Void{Time(0), Time::us(40)}));
    EXPECT_EQ(g[1], (Void{Time::us(60), Time::infinity()}));
    EXPECT_EQ(s.validate(), "");
}

TEST(Commit, DropsFragmentShorterThanTwoGuardTimes) {
    auto rx = timeline(VoidTimeline::Kind::Receiver, {us(0, 12, 0), us(50, -1, 0)});
    std::vector<VoidTimeline> groups{timeline(VoidTimeline::Kind::Group, {us(0, -1, 0)})};
    SchedulerState s(topology(1, 1, 1), Time(0), std::move(rx), std::move(groups));
    ScheduleDecision d;
    d.start = Time(0);
    d.duration = Time::ns(10'500);
    d.receiver_void_start = Time(0);
    d.group_void_start = Time(0);
    s.commit(d);
    const auto v = s.receivers().view(0);
    ASSERT_EQ(v.size(), 1u);
    EXPECT_TRUE(v[0].is_horizon());
    EXPECT_EQ(s.stats().dropped_fragments, 1u);
    EXPECT_EQ(s.stats().dropped_fragment_time, Time::ns(1'500));
}

TEST(Commit, ExactFillRemovesVoid) {
    auto rx = timeline(VoidTimeline::Kind::Receiver, {us(0, 10, 0), us(50, -1, 0)});
    std::vector<VoidTimeline> groups{timeline(VoidTimeline::Kind::Group, {us(0, -1, 0)})};
    SchedulerState s(topology(1, 1, 1), Time(0), std::move(rx), std::move(groups));
    const ScheduleDecision d = schedule_cevf_fast(s, 0, kTenMicroseconds);
    EXPECT_EQ(d.start, Time(0));
    s.commit(d);
    EXPECT_EQ(s.receivers().size(), 1u);
    EXPECT_EQ(s.stats().dropped_fragments, 0u);
}

TEST(Commit, RejectsStaleDecisionAndLeavesStateUnchanged) {
    SchedulerState s(topology(2, 2, 2, Time::us(5)));
    const ScheduleDecision d = schedule_cevf_fast(s, 0, 1000);
    s.commit(d);
    const auto before_rx = std::vector<TimelineEntry>(s.receivers().entries().begin(), s.receivers().entries().end());
    EXPECT_THROW(s.commit(d), StaleDecision);  // its void no longer exists
    ScheduleDecision outside = schedule_cevf_fast(s, 1, 1000);
    outside.start = outside.start - Time::us(1);  // starts before its void
    EXPECT_THROW(s.commit(outside), StaleDecision);
    ScheduleDecision bad_rx = schedule_cevf_fast(s, 1, 1000);
    bad_rx.receiver = 9;
    EXPECT_THROW(s.commit(bad_rx), StaleDecision);
    EXPECT_EQ(std::vector<TimelineEntry>(s.receivers().entries().begin(), s.receivers().entries().end()), before_rx);
}

TEST(SchedulerState, AdvanceRejectsTimeTravel) {
    SchedulerState s(topology(1, 1, 1), Time::us(10));
    EXPECT_THROW(s.advance(Time::us(9)), std::invalid_argument);
    EXPECT_NO_THROW(s.advance(Time::us(10)));
}

TEST(SchedulerState, ExplicitTimelinesAreValidated) {
    std::vector<VoidTimeline> groups{timeline(VoidTimeline::Kind::Group, {us(0, -1, 0)})};
    auto no_horizon = timeline(VoidTimeline::Kind::Receiver, {us(0, 10, 0)});
    EXPECT_THROW(SchedulerState(topology(1, 1, 1), Time(0), no_horizon, groups), std::invalid_argument);
    auto foreign = timeline(VoidTimeline::Kind::Receiver, {us(0, -1, 0), us(0, -1, 3)});
    EXPECT_THROW(SchedulerState(topology(1, 1, 1), Time(0), foreign, groups), std::invalid_argument);
}

TEST(HopBound, Formula) { EXPECT_EQ(hop_bound(topology(8, 8, 2)), 8u + 64u + 2u); }

// Random instances: fast == naive == independent enumerator, plus every invariant.
TEST(RandomInstances, FastNaiveAndBruteForceAgree) {
    std::mt19937_64 rng(20240601);
    std::size_t ties = 0;
    for (int i = 0; i < 10'000; ++i) {
        verify::Instance inst = verify::random_instance(rng);
        const auto naive = schedule_cevf_naive(inst.state, inst.onu, inst.grant);
        const auto fast = schedule_cevf_fast(inst.state, inst.onu, inst.grant);
        const auto truth = oracle::brute_force(inst.state, inst.onu, inst.grant);
        ASSERT_EQ(naive.start, truth.start) << "instance " << i;
        ASSERT_EQ(naive.receiver, truth.receiver) << "instance " << i;
        ASSERT_EQ(naive.receiver_void_start, truth.receiver_void_start) << "instance " << i;
        ASSERT_EQ(naive.group_void_start, truth.group_void_start) << "instance " << i;
        ASSERT_TRUE(verify::same_placement(naive, fast)) << "instance " << i;
        ASSERT_LE(fast.hops, hop_bound(inst.state.topology())) << "instance " << i;
        if (naive.start == earliest_start(inst.state.now(), inst.state.topology().rtt[inst.onu])) ++ties;

        const auto eft = schedule_eftvf(inst.state, inst.onu, inst.grant);
        const auto eft_truth = oracle::brute_force(inst.state, inst.onu, inst.grant, false);
        ASSERT_EQ(eft.start, eft_truth.start) << "instance " << i;
        ASSERT_EQ(eft.receiver, eft_truth.receiver) << "instance " << i;
    }
    EXPECT_GT(ties, 100u);  // the generator exercises the T_e boundary
}

TEST(RandomInstances, VerifySuiteIsClean) {
    const verify::Summary s = verify::run_suite(2'000, 99);
    EXPECT_TRUE(s.ok()) << s.report();
    EXPECT_EQ(s.instances, 2'000u);
}

// Long schedule+commit sequences keep every invariant and never overlap.
TEST(RandomInstances, CommitSequencesStaySafe) {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        Topology t = topology(4, 4, 2);
        for (auto& r : t.rtt) r = Time::ns(static_cast<std::int64_t>(rng() % 5000));
        SchedulerState s(t);
        std::vector<Transmission> log;
        Time now(0);
        for (int k = 0; k < 200; ++k) {
            now += Time::ns(static_cast<std::int64_t>(rng() % 3000));
            s.advance(now);
            const OnuId onu = static_cast<OnuId>(rng() % t.onu_count());
            const Bytes g = static_cast<Bytes>(rng() % 2000);
            const ScheduleDecision d = schedule_cevf_fast(s, onu, g);
            s.commit(d);
            ASSERT_EQ(s.validate(), "");
            log.push_back({onu, d.group, d.receiver, d.start, d.finish(), g});
        }
        EXPECT_EQ(s.stats().insert_bound_violations, 0u);
        // a group may only hold one burst at a time, whichever ONU issued it
        for (std::size_t i = 0; i < log.size(); ++i)
            for (std::size_t j = i + 1; j < log.size(); ++j)
                if (overlaps(log[i], log[j])) {
                    EXPECT_NE(log[i].receiver, log[j].receiver);
                    EXPECT_NE(log[i].group, log[j].group);
                }
    }
}
