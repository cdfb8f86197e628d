#include <cmath>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "qcd/engine.hpp"
#include "qcd/errors.hpp"
#include "qcd/likelihood.hpp"

using namespace qcd;

namespace {

SlotObservation idle(Slot k) {
    SlotObservation o;
    o.slot = k;
    return o;
}

SlotObservation failure(Slot k) {
    SlotObservation o;
    o.slot = k;
    o.queue_nonempty = true;
    o.y = ChannelOutcome::Failure;
    return o;
}

SlotObservation success(Slot k, std::int64_t index, double z, Slot sample_slot = 0, std::size_t sensor = 0) {
    SlotObservation o;
    o.slot = k;
    o.queue_nonempty = true;
    o.y = ChannelOutcome::Success;
    o.sensor = sensor;
    o.sample_index = index;
    o.sample_slot = sample_slot == 0 ? index : sample_slot;
    o.value = z;
    return o;
}

ScenarioConfig scenario(Discipline d, double r = 0.4, double p0 = 0.7, double p1 = 0.5) {
    ScenarioConfig c;
    c.sensors = {SensorConfig{BernoulliSampling{r}, GaussianKnownVariance{0.0, 1.0, 1.0}}};
    c.channel = {p0, p1};
    c.discipline = d;
    c.change_slot = 1;
    c.initial_queue = InitialQueue::stationary();
    return c;
}

std::vector<SlotRecord> run_slots(const ScenarioConfig& c, std::uint64_t rep, Slot n) {
    Simulation sim(c, RngPolicy{77}, rep);
    std::vector<SlotRecord> out;
    for (Slot k = 0; k < n; ++k) out.push_back(sim.advance());
    return out;
}

}  // namespace

TEST_CASE("slot_llr examples") {
    const ChannelModel ch{0.61, 0.60};
    const DensityModel g = GaussianKnownVariance{0.0, 10.0, 0.5};
    CHECK(slot_llr(idle(1), ch, g) == 0.0);
    CHECK(slot_llr(failure(1), ch, g) == doctest::Approx(std::log(0.40 / 0.39)).epsilon(1e-14));
    CHECK(slot_llr(failure(1), ch, g) == doctest::Approx(0.025318).epsilon(1e-4));
    CHECK(slot_llr(success(1, 1, 5.0), ch, g) == doctest::Approx(std::log(0.6 / 0.61)).epsilon(1e-14));
    CHECK(slot_llr(success(1, 1, 5.0), ch, g) == doctest::Approx(-0.016530).epsilon(1e-4));
    auto pre = success(1, 1, 10.0, -2);
    pre.is_prestart_delivery = true;
    CHECK(slot_llr(pre, ch, g) == doctest::Approx(std::log(0.6 / 0.61)).epsilon(1e-14));
}

TEST_CASE("malformed observations are rejected") {
    const ChannelModel ch{0.61, 0.60};
    const DensityModel g = GaussianKnownVariance{};
    auto s = success(1, 1, 0.0);
    s.value.reset();
    CHECK_THROWS_AS(slot_llr(s, ch, g), MalformedObservation);
    auto i = idle(1);
    i.queue_nonempty = true;
    CHECK_THROWS_AS(slot_llr(i, ch, g), MalformedObservation);
    auto f = failure(1);
    f.queue_nonempty = false;
    CHECK_THROWS_AS(slot_llr(f, ch, g), MalformedObservation);
    auto u = success(1, 1, 0.0, 1, 3);
    const DensityModel one[] = {g};
    CHECK_THROWS_AS(slot_llr(u, ch, one), MalformedObservation);
}

TEST_CASE("reassignment sorts receptions inside a busy period") {
    const ChannelModel ch{0.5, 0.5};
    const DensityModel g = GaussianKnownVariance{0.0, 1.0, 1.0};
    const DensityModel d[] = {g};
    LlrTermLedger L;
    // Receptions of samples (3, 1, 2) in slots 2, 4, 5.
    L.record(failure(1), ch, d);
    L.record(success(2, 3, 0.3), ch, d);
    L.record(failure(3), ch, d);
    L.record(success(4, 1, 0.1), ch, d);
    L.record(success(5, 2, 0.2), ch, d);
    const auto re = L.reassign_measurements();
    const double m1 = g.log_likelihood_ratio(0.1), m2 = g.log_likelihood_ratio(0.2), m3 = g.log_likelihood_ratio(0.3);
    CHECK(re[0] == 0.0);
    CHECK(re[1] == doctest::Approx(m1));
    CHECK(re[2] == 0.0);
    CHECK(re[3] == doctest::Approx(m2));
    CHECK(re[4] == doctest::Approx(m3));

    LlrTermLedger single;
    single.record(success(1, 7, 0.9), ch, d);
    CHECK(single.reassign_measurements()[0] == doctest::Approx(g.log_likelihood_ratio(0.9)));
}

TEST_CASE("reassignment is scoped to busy periods") {
    const ChannelModel ch{0.5, 0.5};
    const DensityModel d[] = {GaussianKnownVariance{0.0, 1.0, 1.0}};
    LlrTermLedger L;
    L.record(success(1, 2, 2.0), ch, d);
    L.record(idle(2), ch, d);
    L.record(success(3, 1, 1.0), ch, d);
    const auto re = L.reassign_measurements();
    CHECK(re[0] == doctest::Approx(d[0].log_likelihood_ratio(2.0)));
    CHECK(re[2] == doctest::Approx(d[0].log_likelihood_ratio(1.0)));
}

TEST_CASE("cumulative llr on idle windows and fcfs traces") {
    const auto c = scenario(Discipline::fcfs());
    const auto recs = run_slots(c, 3, 400);
    LlrTermLedger L;
    std::vector<double> direct;
    const std::vector<DensityModel> d{c.sensors[0].density};
    for (const auto& r : recs) {
        L.record(r.obs, c.channel, d);
        direct.push_back(slot_llr(r.obs, c.channel, d));
    }
    CHECK(L.reassign_measurements() == [&] {
        std::vector<double> raw;
        for (const auto& e : L.entries()) raw.push_back(e.measurement_term);
        return raw;
    }());
    for (Slot j = 1; j <= 400; j += 7)
        for (Slot n = j; n <= 400; n += 13) {
            double s = 0.0;
            for (Slot i = j; i <= n; ++i) s += direct[static_cast<std::size_t>(i - 1)];
            CHECK(L.cumulative_llr(j, n) == doctest::Approx(s).epsilon(1e-12));
        }

    LlrTermLedger idle_only;
    for (Slot k = 1; k <= 5; ++k) idle_only.record(idle(k), c.channel, d);
    CHECK(idle_only.cumulative_llr(1, 5) == 0.0);
    CHECK_THROWS(idle_only.cumulative_llr(3, 2));
}

TEST_CASE("exp of the cumulative llr equals the enumerated likelihood ratio") {
    oracle::MicroModel m;
    m.rates = {0.45};
    m.q0 = {0.25};
    m.q1 = {0.65};
    m.p0 = 0.75;
    m.p1 = 0.55;
    m.initial = {1};
    m.slots = 5;
    for (auto order : {oracle::MicroModel::Order::Fcfs, oracle::MicroModel::Order::Lcfs}) {
        m.order = order;
        const auto traces = oracle::enumerate(m);
        const std::vector<DensityModel> d{BernoulliMeasurement{m.q0[0], m.q1[0]}};
        double total = 0.0;
        for (const auto& t : traces) {
            LlrTermLedger L;
            for (const auto& o : t.obs) L.record(o, {m.p0, m.p1}, d);
            CHECK(std::exp(L.cumulative_llr(1, m.slots)) == doctest::Approx(t.p_change / t.p_none).epsilon(1e-10));
            total += t.p_none;
        }
        CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("mean increment is negative before and equals I after the change") {
    auto c = scenario(Discipline::fcfs(), 0.3, 0.7, 0.5);
    c.initial_queue = InitialQueue::known(0);
    const std::vector<DensityModel> d{c.sensors[0].density};
    for (bool post : {false, true}) {
        auto cc = c;
        if (!post) cc.change_slot.reset();
        Simulation sim(cc, RngPolicy{5}, 0);
        const int batches = 100, per = post ? 10'000 : 1'000;
        std::vector<double> means;
        for (int b = 0; b < batches; ++b) {
            double s = 0.0;
            for (int i = 0; i < per; ++i) s += slot_llr(sim.advance().obs, cc.channel, d);
            means.push_back(s / per);
        }
        double mean = 0.0, var = 0.0;
        for (double x : means) mean += x / batches;
        for (double x : means) var += (x - mean) * (x - mean) / (batches - 1);
        const double se = std::sqrt(var / batches);
        if (post) {
            CHECK(std::abs(mean - information_number(c)) < 3.0 * se);
        } else {
            CHECK(mean < 0.0);
        }
    }
}

TEST_CASE("cumulative llr agrees across disciplines when a busy period ends") {
    const Discipline ds[] = {Discipline::fcfs(), Discipline::lcfs(), Discipline::look_back(3),
                             Discipline::discounted_info(0.5)};
    for (std::uint64_t rep = 0; rep < 40; ++rep) {
        std::vector<std::vector<SlotRecord>> runs;
        std::vector<ScenarioConfig> cfgs;
        for (const auto& d : ds) cfgs.push_back(scenario(d));
        for (const auto& c : cfgs) runs.push_back(run_slots(c, rep, 300));
        const std::vector<DensityModel> d{cfgs[0].sensors[0].density};
        std::vector<LlrTermLedger> L(cfgs.size());
        for (Slot k = 1; k <= 300; ++k) {
            for (std::size_t i = 0; i < cfgs.size(); ++i) L[i].record(runs[i][k - 1].obs, cfgs[i].channel, d);
            const bool boundary = runs[0][k - 1].next_queue_length == 0 && runs[0][k - 1].obs.queue_nonempty;
            if (!boundary) continue;
            for (std::size_t i = 1; i < cfgs.size(); ++i) {
                CHECK(runs[i][k - 1].next_queue_length == 0);
                CHECK(L[i].cumulative_llr(1, k) == doctest::Approx(L[0].cumulative_llr(1, k)).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("prestart deliveries carry no measurement term") {
    auto c = scenario(Discipline::fcfs());
    c.initial_queue = InitialQueue::known(6);
    const std::vector<DensityModel> d{c.sensors[0].density};
    const auto recs = run_slots(c, 1, 60);
    int prestart = 0;
    for (const auto& r : recs) {
        if (!r.obs.is_prestart_delivery) continue;
        ++prestart;
        CHECK(measurement_llr(r.obs, d) == 0.0);
        CHECK(*r.obs.sample_slot <= 0);
    }
    CHECK(prestart == 6);
}
