#include "qcd/verify.hpp"

#include <cmath>
#include <sstream>

#include "qcd/engine.hpp"

namespace qcd {

namespace {

constexpr Slot kTraceSlots = 2000;
constexpr std::uint64_t kTraces = 50;

ScenarioConfig short_run(const ScenarioConfig& base, Discipline d) {
    ScenarioConfig c = base;
    c.discipline = d;
    c.horizon = kTraceSlots;
    return c;
}

template <class F>
CheckResult check(std::string name, F&& body) {
    CheckResult r{std::move(name), true, {}};
    try {
        r.detail = body(r.passed);
    } catch (const std::exception& e) {
        r.passed = false;
        r.detail = std::string("exception: ") + e.what();
    }
    return r;
}

}  // namespace

std::vector<CheckResult> verify_invariants(const RunConfig& rc, unsigned parallelism) {
    const ScenarioConfig& base = rc.spec.scenario;
    base.validate();
    std::vector<CheckResult> out;

    out.push_back(check("queue_recursion", [&](bool& ok) {
        const ScenarioConfig c = short_run(base, base.discipline);
        std::int64_t slots = 0;
        for (std::uint64_t rep = 0; rep < kTraces && ok; ++rep) {
            Simulation sim(c, rc.rng, rep);
            for (Slot k = 1; k <= c.horizon; ++k, ++slots) {
                const SlotRecord s = sim.advance();
                const std::int64_t removed = (s.obs.y == ChannelOutcome::Success || s.dropped) ? 1 : 0;
                if (s.next_queue_length != std::max<std::int64_t>(s.queue_length - removed, 0) + s.arrivals ||
                    s.next_queue_length != sim.queue().length()) {
                    ok = false;
                    return "mismatch at replication " + std::to_string(rep) + " slot " + std::to_string(k);
                }
            }
        }
        return std::to_string(slots) + " slots";
    }));

    out.push_back(check("idle_iff_empty", [&](bool& ok) {
        const ScenarioConfig c = short_run(base, base.discipline);
        for (std::uint64_t rep = 0; rep < kTraces; ++rep) {
            Simulation sim(c, rc.rng, rep);
            for (Slot k = 1; k <= c.horizon; ++k) {
                const SlotRecord s = sim.advance();
                s.obs.validate();
                if ((s.obs.y == ChannelOutcome::Idle) != (s.queue_length == 0)) {
                    ok = false;
                    return "slot " + std::to_string(k) + " of replication " + std::to_string(rep);
                }
            }
        }
        return std::string("ok");
    }));

    out.push_back(check("fcfs_delivery_order", [&](bool& ok) {
        const ScenarioConfig c = short_run(base, Discipline::fcfs());
        for (std::uint64_t rep = 0; rep < kTraces; ++rep) {
            Simulation sim(c, rc.rng, rep);
            std::vector<std::int64_t> last(c.sensors.size(), 0);
            for (Slot k = 1; k <= c.horizon; ++k) {
                const SlotRecord s = sim.advance();
                if (s.obs.y != ChannelOutcome::Success) continue;
                auto& prev = last[*s.obs.sensor];
                if (*s.obs.sample_index <= prev) {
                    ok = false;
                    return "out-of-order delivery at slot " + std::to_string(k);
                }
                prev = *s.obs.sample_index;
            }
        }
        return std::string("ok");
    }));

    out.push_back(check("fcfs_generalized_equals_recursive", [&](bool& ok) {
        const ScenarioConfig c = short_run(base, Discipline::fcfs());
        std::vector<DensityModel> dens;
        for (const auto& s : c.sensors) dens.push_back(s.density);
        double worst = 0.0;
        for (std::uint64_t rep = 0; rep < kTraces; ++rep) {
            Simulation sim(c, rc.rng, rep);
            Detector rec(DetectorKind::RecursiveCusum, 1e300, c.channel, dens);
            Detector gen(DetectorKind::GeneralizedCusum, 1e300, c.channel, dens);
            for (Slot k = 1; k <= c.horizon; ++k) {
                const SlotObservation o = sim.advance().obs;
                worst = std::max(worst, std::abs(rec.step(o).statistic - gen.step(o).statistic));
            }
        }
        ok = worst <= 1e-12;
        std::ostringstream os;
        os << "max |difference| " << worst;
        return os.str();
    }));

    out.push_back(check("queue_path_discipline_invariant", [&](bool& ok) {
        if (base.retransmit_cap) return std::string("not applicable with a retransmission cap");
        const std::vector<Discipline> ds = {Discipline::fcfs(), Discipline::lcfs(), Discipline::random(),
                                            Discipline::look_back(2)};
        RngPolicy coupled = rc.rng;
        coupled.coupling = CouplingMode::CoupledAcrossDisciplines;
        for (std::uint64_t rep = 0; rep < 10; ++rep) {
            std::vector<std::int64_t> ref;
            for (std::size_t i = 0; i < ds.size(); ++i) {
                const ScenarioConfig c = short_run(base, ds[i]);
                Simulation sim(c, coupled, rep);
                std::vector<std::int64_t> path;
                for (Slot k = 1; k <= c.horizon; ++k) path.push_back(sim.advance().queue_length);
                if (i == 0) ref = std::move(path);
                else if (path != ref) {
                    ok = false;
                    return ds[i].name() + " diverges from fcfs at replication " + std::to_string(rep);
                }
            }
        }
        return std::string("ok");
    }));

    out.push_back(check("occupancy", [&](bool& ok) {
        if (base.retransmit_cap || base.aggregate_rate() >= base.channel.p1)
            return std::string("not applicable (finite cap or unstable)");
        const OccupancyEstimate occ = estimate_occupancy(base, 400'000);
        const double expect = base.aggregate_rate() / base.channel.p1;
        ok = std::abs(occ.busy_fraction - expect) <= 0.03 * expect;
        std::ostringstream os;
        os << "P(Q>0) " << occ.busy_fraction << " vs r/p1 " << expect;
        return os.str();
    }));

    out.push_back(check("replay_determinism", [&](bool& ok) {
        ScenarioConfig c = short_run(base, base.discipline);
        const auto a = run_batch(c, DetectorKind::RecursiveCusum, 5.0, 20, 1, rc.rng);
        const auto b = run_batch(c, DetectorKind::RecursiveCusum, 5.0, 20, std::max(1u, parallelism), rc.rng);
        ok = a == b;
        return std::string(ok ? "ok" : "replications differ");
    }));

    return out;
}

}  // namespace qcd
