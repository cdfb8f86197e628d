#include <cmath>
#include <map>
#include <random>
#include <sstream>

#include "doctest.h"
#include "oracles.hpp"
#include "qcd/engine.hpp"
#include "qcd/errors.hpp"

using namespace qcd;

namespace {

ScenarioConfig base(double r = 0.3, double p0 = 0.7, double p1 = 0.5) {
    ScenarioConfig c;
    c.sensors = {SensorConfig{BernoulliSampling{r}, GaussianKnownVariance{0.0, 1.0, 0.5}}};
    c.channel = {p0, p1};
    c.initial_queue = InitialQueue::known(0);
    return c;
}

ScenarioConfig two_sensor() {
    ScenarioConfig c;
    c.sensors = {SensorConfig{BernoulliSampling{0.2}, GaussianKnownVariance{0.0, 1.0, 0.5}},
                 SensorConfig{BernoulliSampling{0.25}, GaussianKnownVariance{0.0, 2.0, 1.0}}};
    c.channel = {0.7, 0.6};
    c.initial_queue = InitialQueue::stationary();
    return c;
}

}  // namespace

TEST_CASE("queue recursion and idle iff empty hold at every slot") {
    for (const auto& c : {base(), two_sensor()}) {
        for (std::uint64_t rep = 0; rep < 20; ++rep) {
            Simulation sim(c, RngPolicy{1}, rep);
            std::int64_t q = sim.initial_queue_length();
            for (int i = 0; i < 2000; ++i) {
                const auto r = sim.advance();
                REQUIRE(r.queue_length == q);
                REQUIRE((r.obs.y == ChannelOutcome::Idle) == (r.queue_length == 0));
                const std::int64_t served = r.obs.y == ChannelOutcome::Success ? 1 : 0;
                REQUIRE(r.next_queue_length == std::max<std::int64_t>(q - served, 0) + r.arrivals);
                q = r.next_queue_length;
            }
        }
    }
}

TEST_CASE("success rate among attempts is p0 without a change") {
    auto c = base(0.3, 0.7, 0.5);
    c.change_slot.reset();
    Simulation sim(c, RngPolicy{2}, 0);
    std::int64_t attempts = 0, ok = 0;
    for (int i = 0; i < 200'000; ++i) {
        const auto r = sim.advance();
        attempts += r.obs.queue_nonempty;
        ok += r.obs.y == ChannelOutcome::Success;
    }
    const double rate = static_cast<double>(ok) / static_cast<double>(attempts);
    CHECK(std::abs(rate - 0.7) < 3.0 * std::sqrt(0.7 * 0.3 / static_cast<double>(attempts)));
}

TEST_CASE("change point splits channel and measurement laws") {
    auto c = base(0.5, 0.95, 0.6);
    c.sensors[0].density = GaussianKnownVariance{0.0, 100.0, 1.0};
    c.change_slot = 50;
    for (std::uint64_t rep = 0; rep < 20; ++rep) {
        Simulation sim(c, RngPolicy{3}, rep);
        for (int i = 0; i < 200; ++i) {
            const auto r = sim.advance();
            CHECK(r.post_change == (r.obs.slot > 50));
            if (r.obs.value && !r.obs.is_prestart_delivery)
                CHECK((*r.obs.value > 50.0) == (*r.obs.sample_slot > 50));
        }
    }
}

TEST_CASE("periodic sampling gives exact gaps") {
    auto c = base();
    c.sensors[0].sampling = PeriodicSampling{5, 3};
    Simulation sim(c, RngPolicy{4}, 0);
    Slot last = 0;
    for (int i = 0; i < 500; ++i) {
        const auto r = sim.advance();
        const Slot k = r.obs.slot;
        CHECK((r.arrivals == 1) == (c.sensors[0].sampling.slots_to_next_arrival(k) == 0));
        if (r.arrivals == 1) {
            if (last != 0) CHECK(k - last == 5);
            last = k;
        }
    }
}

TEST_CASE("fcfs deliveries have increasing indices") {
    auto c = base(0.45, 0.6, 0.5);
    c.initial_queue = InitialQueue::known(4);
    Simulation sim(c, RngPolicy{5}, 0);
    std::int64_t last = 0;
    int prestart = 0;
    for (int i = 0; i < 5000; ++i) {
        const auto r = sim.advance();
        if (!r.obs.sample_index) continue;
        CHECK(*r.obs.sample_index == last + 1);
        last = *r.obs.sample_index;
        prestart += r.obs.is_prestart_delivery;
    }
    CHECK(prestart == 4);
}

TEST_CASE("retransmission cap drops packets after K failures") {
    auto c = base(0.3, 0.4, 0.4);
    c.retransmit_cap = 2;
    Simulation sim(c, RngPolicy{6}, 0);
    int drops = 0;
    for (int i = 0; i < 10'000; ++i) {
        const auto r = sim.advance();
        if (r.dropped) {
            ++drops;
            CHECK(r.dropped->attempts == 2);
            CHECK(r.obs.y == ChannelOutcome::Failure);
        }
    }
    CHECK(drops > 0);
}

TEST_CASE("replays and parallel batches are deterministic") {
    const auto c = two_sensor();
    const RngPolicy pol{99};
    const auto a = run_batch(c, DetectorKind::RecursiveCusum, 4.0, 64, 1, pol);
    const auto b = run_batch(c, DetectorKind::RecursiveCusum, 4.0, 64, 8, pol);
    CHECK(a == b);
    const auto one = run_batch(c, DetectorKind::RecursiveCusum, 4.0, 1, 1, pol);
    CHECK(one.front() == run_replication(c, DetectorKind::RecursiveCusum, 4.0, pol, 0));
    const auto other = run_batch(c, DetectorKind::RecursiveCusum, 4.0, 64, 1, RngPolicy{100});
    CHECK_FALSE(a == other);
}

TEST_CASE("coupled disciplines share arrivals and losses") {
    auto f = base(0.4, 0.6, 0.5);
    auto l = f;
    l.discipline = Discipline::lcfs();
    for (auto mode : {CouplingMode::CoupledAcrossDisciplines, CouplingMode::Independent}) {
        const RngPolicy pol{7, mode};
        Simulation sf(f, pol, 3), sl(l, pol, 3);
        bool same = true;
        for (int i = 0; i < 1000; ++i) {
            const auto a = sf.advance();
            const auto b = sl.advance();
            same = same && a.arrivals == b.arrivals && a.obs.y == b.obs.y;
        }
        CHECK(same == (mode == CouplingMode::CoupledAcrossDisciplines));
    }
}

TEST_CASE("degenerate model never alarms") {
    auto c = base(0.3, 0.6, 0.6);
    c.sensors[0].density = GaussianKnownVariance{1.0, 1.0, 1.0};
    c.horizon = 5000;
    const auto r = run_replication(c, DetectorKind::RecursiveCusum, 1e-9, RngPolicy{1}, 0);
    CHECK(r.truncated());
    CHECK_FALSE(r.detection_delay());
}

TEST_CASE("tiny threshold stops at the first positive increment") {
    const auto c = base(0.3, 0.7, 0.5);
    const std::vector<DensityModel> d{c.sensors[0].density};
    for (std::uint64_t rep = 0; rep < 50; ++rep) {
        Simulation sim(c, RngPolicy{12}, rep);
        Slot first = 0;
        for (Slot k = 1; k <= 10'000 && first == 0; ++k)
            if (slot_llr(sim.advance().obs, c.channel, d) > 0.0) first = k;
        const auto r = run_replication(c, DetectorKind::RecursiveCusum, 1e-12, RngPolicy{12}, rep);
        CHECK(r.stopping_slot == std::optional<Slot>(first));
    }
}

TEST_CASE("occupancy estimates") {
    auto c = base(0.3, 0.6, 0.6);
    CHECK(estimate_occupancy(c, 1'000'000).busy_fraction == doctest::Approx(0.5).epsilon(0.01));
    c.retransmit_cap = 1;
    CHECK(estimate_occupancy(c, 1'000'000).busy_fraction == doctest::Approx(0.3).epsilon(0.01));
    auto tiny = base(1e-4, 0.6, 0.6);
    CHECK(estimate_occupancy(tiny, 200'000).busy_fraction < 1e-3);
}

TEST_CASE("random access draws sensors uniformly") {
    auto c = two_sensor();
    c.sensors[0].sampling = BernoulliSampling{0.3};
    c.sensors[1].sampling = BernoulliSampling{0.3};
    c.channel = {0.7, 0.7};
    Simulation sim(c, RngPolicy{13}, 0);
    int both = 0, zero = 0;
    for (int i = 0; i < 200'000; ++i) {
        const bool b = sim.queue().length(0) > 0 && sim.queue().length(1) > 0;
        const auto r = sim.advance();
        if (!b || !r.obs.sensor) continue;
        // Only successful slots reveal the sensor; loss does not depend on it.
        ++both;
        zero += *r.obs.sensor == 0;
    }
    CHECK(std::abs(zero / static_cast<double>(both) - 0.5) < 0.01);
}

TEST_CASE("empirical trace law matches the enumerated one") {
    oracle::MicroModel m;
    m.rates = {0.35, 0.25};
    m.q0 = {0.3, 0.6};
    m.q1 = {0.8, 0.1};
    m.p0 = 0.7;
    m.p1 = 0.45;
    m.initial = {1, 0};
    m.slots = 3;
    const auto traces = oracle::enumerate(m);

    ScenarioConfig c;
    for (int s = 0; s < 2; ++s)
        c.sensors.push_back({BernoulliSampling{m.rates[s]}, BernoulliMeasurement{m.q0[s], m.q1[s]}});
    c.channel = {m.p0, m.p1};
    c.initial_queue.kind = InitialQueue::Kind::Known;
    c.initial_queue.lengths = {1, 0};
    c.change_slot.reset();

    auto key = [](const std::vector<SlotObservation>& obs) {
        std::ostringstream os;
        for (const auto& o : obs) {
            os << static_cast<int>(o.y);
            if (o.sensor) os << '/' << *o.sensor << '/' << *o.sample_index << '/' << *o.value;
            os << ';';
        }
        return os.str();
    };
    std::map<std::string, double> expect;
    for (const auto& t : traces) expect[key(t.obs)] = t.p_none;

    const int n = 200'000;
    std::map<std::string, int> seen;
    for (int rep = 0; rep < n; ++rep) {
        Simulation sim(c, RngPolicy{14}, static_cast<std::uint64_t>(rep));
        std::vector<SlotObservation> obs;
        for (int k = 0; k < m.slots; ++k) obs.push_back(sim.advance().obs);
        ++seen[key(obs)];
    }
    double chi2 = 0.0;
    int cells = 0;
    for (const auto& [k, p] : expect) {
        const double e = p * n;
        const double o = seen.count(k) ? seen[k] : 0;
        if (e >= 5.0) {
            chi2 += (o - e) * (o - e) / e;
            ++cells;
        }
    }
    for (const auto& [k, _] : seen) REQUIRE(expect.count(k) == 1);
    // Chi-square with `cells - 1` degrees of freedom, normal approximation at 4 sigma.
    const double dof = cells - 1;
    CHECK(chi2 < dof + 4.0 * std::sqrt(2.0 * dof));
}

TEST_CASE("trace rows use the documented column order") {
    TraceRow row;
    row.k = 3;
    row.queue_length = 2;
    row.obs.slot = 3;
    row.obs.queue_nonempty = true;
    row.obs.y = ChannelOutcome::Success;
    row.obs.sensor = 0;
    row.obs.sample_index = 5;
    row.obs.sample_slot = 2;
    row.obs.value = 0.25;
    row.increment = 1.5;
    row.statistic = 2.5;
    std::ostringstream os;
    write_trace_header(os);
    write_trace_row(os, row);
    row.obs = SlotObservation{};
    write_trace_row(os, row);
    CHECK(os.str() == "# k, Q_k, y, U_k, J_k, Z_k, L_k, C_k\n3, 2, 1, 1, 5, 0.25, 1.5, 2.5\n3, 2, -, *, *, *, 1.5, 2.5\n");
}

TEST_CASE("parallel_for propagates exceptions") {
    CHECK_THROWS_AS(parallel_for(100, 4, [](std::int64_t i) {
                        if (i == 37) throw NumericError("boom");
                    }),
                    NumericError);
}
