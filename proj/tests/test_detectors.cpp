#include <cmath>
#include <limits>
#include <random>

#include "doctest.h"
#include "qcd/detectors.hpp"
#include "qcd/engine.hpp"
#include "qcd/errors.hpp"
#include "qcd/experiments.hpp"

using namespace qcd;

namespace {

// Density whose llr is the observed value itself.
DensityModel identity_llr() {
    CustomDensity c;
    c.log_f0 = [](double) { return 0.0; };
    c.log_f1 = [](double z) { return z; };
    c.sample_f0 = [](std::mt19937_64&) { return 0.0; };
    c.sample_f1 = [](std::mt19937_64&) { return 0.0; };
    c.kl = 0.0;
    return c;
}

SlotObservation delivery(Slot k, double z) {
    SlotObservation o;
    o.slot = k;
    o.queue_nonempty = true;
    o.y = ChannelOutcome::Success;
    o.sensor = 0;
    o.sample_index = k;
    o.sample_slot = k;
    o.value = z;
    return o;
}

ScenarioConfig lr_ordered(Discipline d, double r = 0.5, double p = 0.6) {
    ScenarioConfig c;
    c.sensors = {SensorConfig{BernoulliSampling{r}, GaussianKnownVariance{0.0, 1.0, 0.5}}};
    c.channel = {p, p};
    c.discipline = d;
    c.initial_queue = InitialQueue::stationary();
    return c;
}

}  // namespace

TEST_CASE("recursive cusum hand example") {
    const ChannelModel ch{0.5, 0.5};
    for (auto kind : {DetectorKind::RecursiveCusum, DetectorKind::GeneralizedCusum, DetectorKind::NetworkOblivious}) {
        Detector det(kind, 2.0, ch, {identity_llr()});
        const double inc[] = {1.0, -0.5, 2.0};
        const double expect[] = {1.0, 0.5, 2.5};
        for (int n = 0; n < 3; ++n) {
            const auto s = det.step(delivery(n + 1, inc[n]));
            CHECK(s.statistic == doctest::Approx(expect[n]));
            CHECK(s.alarm == (n == 2));
        }
        CHECK(det.alarmed_at() == std::optional<Slot>(3));
        CHECK_THROWS_AS(det.step(delivery(4, 0.0)), std::logic_error);
    }
}

TEST_CASE("non-positive increments keep the statistic at zero") {
    Detector det(DetectorKind::RecursiveCusum, 0.1, {0.5, 0.5}, {identity_llr()});
    std::mt19937_64 eng(1);
    std::uniform_real_distribution<double> u(-3.0, 0.0);
    for (Slot k = 1; k <= 1000; ++k) {
        const auto s = det.step(delivery(k, u(eng)));
        CHECK(s.statistic == 0.0);
        CHECK_FALSE(s.alarm);
    }
}

TEST_CASE("alarm needs strict crossing and non-finite increments are errors") {
    Detector det(DetectorKind::RecursiveCusum, 1.0, {0.5, 0.5}, {identity_llr()});
    CHECK_FALSE(det.step(delivery(1, 1.0)).alarm);
    CHECK(det.step(delivery(2, 1e-9)).alarm);

    Detector bad(DetectorKind::RecursiveCusum, 1.0, {0.5, 0.5}, {identity_llr()});
    CHECK_THROWS_AS(bad.step(delivery(1, std::numeric_limits<double>::infinity())), std::exception);
    CHECK_THROWS_AS(Detector(DetectorKind::RecursiveCusum, 0.0, {0.5, 0.5}, {identity_llr()}), ConfigError);
}

TEST_CASE("oblivious detector ignores the channel") {
    Detector det(DetectorKind::NetworkOblivious, 100.0, {0.9, 0.1}, {identity_llr()});
    SlotObservation f;
    f.slot = 1;
    f.queue_nonempty = true;
    f.y = ChannelOutcome::Failure;
    CHECK(det.step(f).statistic == 0.0);
    CHECK(det.step(delivery(2, 0.7)).statistic == doctest::Approx(0.7));
}

TEST_CASE("generalized equals recursive on fcfs traces") {
    auto c = lr_ordered(Discipline::fcfs(), 0.4, 0.6);
    c.channel = {0.7, 0.5};
    const std::vector<DensityModel> d{c.sensors[0].density};
    for (std::uint64_t rep = 0; rep < 20; ++rep) {
        Simulation sim(c, RngPolicy{3}, rep);
        Detector rec(DetectorKind::RecursiveCusum, 1e300, c.channel, d);
        Detector gen(DetectorKind::GeneralizedCusum, 1e300, c.channel, d);
        LlrTermLedger L;
        for (Slot k = 1; k <= 1000; ++k) {
            const auto obs = sim.advance().obs;
            L.record(obs, c.channel, d);
            const double a = rec.step(obs).statistic;
            const double b = gen.step(obs).statistic;
            REQUIRE(std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(a)));
            if (k % 97 == 0) CHECK(generalized_statistic(L, k) == doctest::Approx(a).epsilon(1e-12));
        }
    }
}

TEST_CASE("generalized statistic on small ledgers") {
    const ChannelModel ch{0.5, 0.5};
    const std::vector<DensityModel> d{identity_llr()};
    LlrTermLedger L;
    CHECK(generalized_statistic(L, 0) == 0.0);
    SlotObservation i;
    i.slot = 1;
    L.record(i, ch, d);
    CHECK(generalized_statistic(L, 1) == 0.0);
    LlrTermLedger one;
    one.record(delivery(1, -0.4), ch, d);
    CHECK(generalized_statistic(one, 1) == 0.0);
    LlrTermLedger two;
    two.record(delivery(1, 0.4), ch, d);
    CHECK(generalized_statistic(two, 1) == doctest::Approx(0.4));
}

TEST_CASE("streaming generalized detector matches the ledger form under lcfs") {
    auto c = lr_ordered(Discipline::lcfs(), 0.45, 0.6);
    c.channel = {0.65, 0.55};
    const std::vector<DensityModel> d{c.sensors[0].density};
    for (std::uint64_t rep = 0; rep < 10; ++rep) {
        Simulation sim(c, RngPolicy{8}, rep);
        Detector gen(DetectorKind::GeneralizedCusum, 1e300, c.channel, d);
        LlrTermLedger L;
        for (Slot k = 1; k <= 400; ++k) {
            const auto obs = sim.advance().obs;
            L.record(obs, c.channel, d);
            REQUIRE(gen.step(obs).statistic == doctest::Approx(generalized_statistic(L, k)).epsilon(1e-10));
        }
    }
}

TEST_CASE("lcfs and fcfs statistics agree at the end of busy periods") {
    auto f = lr_ordered(Discipline::fcfs());
    auto l = lr_ordered(Discipline::lcfs());
    const std::vector<DensityModel> d{f.sensors[0].density};
    for (std::uint64_t rep = 0; rep < 30; ++rep) {
        Simulation sf(f, RngPolicy{4}, rep), sl(l, RngPolicy{4}, rep);
        Detector df(DetectorKind::GeneralizedCusum, 1e300, f.channel, d);
        Detector dl(DetectorKind::GeneralizedCusum, 1e300, l.channel, d);
        for (Slot k = 1; k <= 500; ++k) {
            const auto rf = sf.advance();
            const auto rl = sl.advance();
            const double a = df.step(rf.obs).statistic;
            const double b = dl.step(rl.obs).statistic;
            if (rf.obs.queue_nonempty && rf.next_queue_length == 0) CHECK(b == doctest::Approx(a).epsilon(1e-12));
        }
    }
}

TEST_CASE("stochastic dominance helper") {
    std::mt19937_64 eng(6);
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<double> b(2000);
    for (auto& x : b) x = n(eng);
    auto same = is_stochastically_dominated(b, b);
    CHECK(same.dominated);
    CHECK(same.max_violation == 0.0);
    std::vector<double> a = b;
    for (auto& x : a) x -= 1.0;
    CHECK(is_stochastically_dominated(a, b).dominated);
    CHECK_FALSE(is_stochastically_dominated(b, a).dominated);
    CHECK_THROWS_AS(is_stochastically_dominated({}, b), DomainError);
    const auto ks = two_sample_ks(a, b);
    CHECK(ks.p_value < 1e-6);
}

TEST_CASE("stopping time is monotone in the threshold on coupled paths") {
    auto c = lr_ordered(Discipline::fcfs(), 0.3, 0.6);
    c.change_slot.reset();
    c.horizon = 20'000;
    for (std::uint64_t rep = 0; rep < 30; ++rep) {
        std::optional<Slot> prev = 0;
        for (double h : {0.5, 1.0, 2.0, 3.0, 4.0}) {
            const auto t = run_replication(c, DetectorKind::RecursiveCusum, h, RngPolicy{10}, rep).stopping_slot;
            if (prev && t) CHECK(*t >= *prev);
            if (!prev) CHECK_FALSE(t);
            prev = t;
        }
    }
}

TEST_CASE("false alarm law is the same for every discipline") {
    // Under no change the statistic only sees the channel and f0 values, so T
    // has one distribution for all non-idling disciplines.
    const Discipline ds[] = {Discipline::lcfs(), Discipline::look_back(2)};
    auto f = lr_ordered(Discipline::fcfs(), 0.4, 0.6);
    f.channel = {0.7, 0.5};
    f.change_slot.reset();
    f.horizon = 1'000'000;
    const RngPolicy coupled{31};
    auto collect = [&](const ScenarioConfig& c) {
        std::vector<double> t;
        for (const auto& r : run_batch(c, DetectorKind::GeneralizedCusum, 2.0, 10'000, 1, coupled))
            t.push_back(static_cast<double>(*r.stopping_slot));
        return t;
    };
    const auto tf = collect(f);
    for (const auto& d : ds) {
        auto c = f;
        c.discipline = d;
        CHECK(two_sample_ks(tf, collect(c)).p_value > 0.05);
    }
}
