#include "qcd/engine.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <iomanip>
#include <mutex>
#include <thread>

#include "qcd/errors.hpp"

namespace qcd {

namespace {

bool info_aware(const Discipline& d) {
    return d.kind == DisciplineKind::DiscountedInfo || d.kind == DisciplineKind::LookBack;
}

std::vector<double> sensor_information(const ScenarioConfig& config) {
    std::vector<double> info(config.sensors.size(), 0.0);
    if (!info_aware(config.discipline)) return info;
    for (std::size_t i = 0; i < info.size(); ++i) info[i] = config.sensors[i].density.kl_divergence();
    return info;
}

}  // namespace

std::uint64_t discipline_tag(const Discipline& d) noexcept {
    std::uint64_t tag = static_cast<std::uint64_t>(d.kind) + 1;
    tag = splitmix64(tag ^ static_cast<std::uint64_t>(d.window));
    tag = splitmix64(tag ^ static_cast<std::uint64_t>(std::llround(d.alpha * 1e9)));
    return tag;
}

Simulation::Simulation(const ScenarioConfig& config, const RngPolicy& policy, std::uint64_t replication)
    : config_(config),
      streams_(policy, replication, discipline_tag(config.discipline)),
      queue_(config.sensors.size()),
      info_(sensor_information(config)),
      next_index_(config.sensors.size(), 1) {
    for (std::size_t s = 0; s < config.sensors.size(); ++s) {
        std::int64_t q = 0;
        if (config.initial_queue.kind == InitialQueue::Kind::Known) {
            q = config.initial_queue.known_length(s);
        } else {
            q = stationary_queue_draw(config.sensors[s].sampling.rate(), config.channel.p0, streams_.initial);
        }
        for (std::int64_t i = 0; i < q; ++i) {
            Packet p;
            p.sample_index = next_index_[s]++;
            p.sample_slot = i - q + 1;
            p.sensor = s;
            p.value = config.sensors[s].density.sample(false, streams_.initial);
            p.is_prestart = true;
            queue_.push(p);
        }
        initial_length_ += q;
    }
}

SlotRecord Simulation::advance() {
    const Slot k = next_slot_++;
    SlotRecord rec;
    rec.post_change = config_.is_post_change(k);
    rec.queue_length = queue_.length();

    SlotObservation& obs = rec.obs;
    obs.slot = k;
    obs.queue_nonempty = !queue_.empty();

    std::optional<PacketRef> selected;
    if (obs.queue_nonempty) {
        std::optional<std::size_t> only;
        if (config_.multi_sensor() && config_.access == AccessMode::RandomAccess)
            only = select_sensor(queue_, streams_.scheduler);
        selected = select_packet(queue_, config_.discipline, k, info_, &streams_.scheduler, only);
    }

    // One channel draw per slot keeps loss outcomes aligned across disciplines.
    const double u = streams_.channel.uniform();
    const bool success = selected.has_value() && u < config_.channel.success_probability(rec.post_change);

    arrivals_.clear();
    for (std::size_t s = 0; s < config_.sensors.size(); ++s) {
        const auto& sensor = config_.sensors[s];
        if (!sensor.sampling.arrives(k, streams_.arrivals)) continue;
        Packet p;
        p.sample_index = next_index_[s]++;
        p.sample_slot = k;
        p.sensor = s;
        p.value = sensor.density.sample(rec.post_change, streams_.values);
        arrivals_.push_back(p);
        if (config_.change_slot && k <= *config_.change_slot) ++pre_change_arrivals_;
    }
    rec.arrivals = static_cast<std::int64_t>(arrivals_.size());

    const SlotUpdate upd = slot_update(queue_, selected, success, arrivals_, config_.retransmit_cap);
    rec.dropped = upd.dropped;
    rec.next_queue_length = queue_.length();

    if (!obs.queue_nonempty) {
        obs.y = ChannelOutcome::Idle;
    } else if (upd.delivered) {
        const Packet& p = *upd.delivered;
        obs.y = ChannelOutcome::Success;
        obs.sensor = p.sensor;
        obs.sample_index = p.sample_index;
        obs.sample_slot = p.sample_slot;
        obs.value = p.value;
        obs.is_prestart_delivery = p.is_prestart;
    } else {
        obs.y = ChannelOutcome::Failure;
    }
    return rec;
}

std::optional<Slot> ReplicationResult::detection_delay() const noexcept {
    if (!stopping_slot || !change_slot) return std::nullopt;
    return std::max<Slot>(*stopping_slot - *change_slot, 0);
}

void write_trace_header(std::ostream& os) { os << "# k, Q_k, y, U_k, J_k, Z_k, L_k, C_k\n"; }

void write_trace_row(std::ostream& os, const TraceRow& row) {
    const auto& o = row.obs;
    os << row.k << ", " << row.queue_length << ", ";
    switch (o.y) {
        case ChannelOutcome::Success: os << '1'; break;
        case ChannelOutcome::Failure: os << '0'; break;
        case ChannelOutcome::Idle: os << '-'; break;
    }
    os << ", ";
    if (o.sensor) os << (*o.sensor + 1); else os << '*';
    os << ", ";
    if (o.sample_index) os << *o.sample_index; else os << '*';
    os << ", ";
    if (o.value) os << std::setprecision(10) << *o.value; else os << '*';
    os << ", " << std::setprecision(10) << row.increment << ", " << row.statistic << '\n';
}

ReplicationResult run_replication(const ScenarioConfig& config, DetectorKind detector_kind, double threshold,
                                  const RngPolicy& policy, std::uint64_t replication, const TraceSink& sink) {
    config.validate();
    std::vector<DensityModel> densities;
    densities.reserve(config.sensors.size());
    for (const auto& s : config.sensors) densities.push_back(s.density);

    Simulation sim(config, policy, replication);
    Detector detector(detector_kind, threshold, config.channel, std::move(densities));

    ReplicationResult result;
    result.replication = replication;
    result.seed = policy.master_seed;
    result.change_slot = config.change_slot;
    result.initial_queue = sim.initial_queue_length();

    for (Slot k = 1; k <= config.horizon; ++k) {
        const SlotRecord rec = sim.advance();
        const Detector::Step st = detector.step(rec.obs);
        if (sink) sink(TraceRow{k, rec.queue_length, rec.obs, st.increment, st.statistic});
        if (st.alarm) {
            result.stopping_slot = k;
            break;
        }
    }
    result.pre_change_arrivals = sim.pre_change_arrivals();
    return result;
}

void parallel_for(std::int64_t n, unsigned parallelism, const std::function<void(std::int64_t)>& fn) {
    if (n <= 0) return;
    const unsigned workers = std::max(1u, std::min<unsigned>(parallelism, static_cast<unsigned>(n)));
    if (workers == 1) {
        for (std::int64_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::int64_t> next{0};
    std::exception_ptr failure;
    std::atomic<bool> failed{false};
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                const std::int64_t i = next.fetch_add(1);
                if (i >= n || failed.load()) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                    failed = true;
                    return;
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

std::vector<ReplicationResult> run_batch(const ScenarioConfig& config, DetectorKind detector, double threshold,
                                         std::int64_t n_reps, unsigned parallelism, const RngPolicy& policy) {
    if (n_reps < 1) throw ConfigError("run_batch needs n_reps >= 1");
    config.validate();
    std::vector<ReplicationResult> out(static_cast<std::size_t>(n_reps));
    parallel_for(n_reps, parallelism, [&](std::int64_t i) {
        out[static_cast<std::size_t>(i)] =
            run_replication(config, detector, threshold, policy, static_cast<std::uint64_t>(i));
    });
    return out;
}

OccupancyEstimate estimate_occupancy(const ScenarioConfig& config, std::int64_t slots) {
    if (slots < 1) throw ConfigError("estimate_occupancy needs slots >= 1");
    ScenarioConfig post = config;
    post.channel.p0 = config.channel.p1;
    post.change_slot.reset();
    post.initial_queue = InitialQueue::known(0);
    post.horizon = slots;
    post.validate();

    RngPolicy policy{config.seed, CouplingMode::CoupledAcrossDisciplines};
    Simulation sim(post, policy, 0);

    OccupancyEstimate occ;
    occ.slots = slots;
    occ.success_rate.assign(post.sensors.size(), 0.0);
    std::int64_t busy = 0;
    double queue_sum = 0.0;
    for (std::int64_t k = 0; k < slots; ++k) {
        const SlotRecord rec = sim.advance();
        queue_sum += static_cast<double>(rec.queue_length);
        if (rec.obs.queue_nonempty) ++busy;
        if (rec.obs.y == ChannelOutcome::Success) occ.success_rate[*rec.obs.sensor] += 1.0;
    }
    const auto n = static_cast<double>(slots);
    occ.busy_fraction = static_cast<double>(busy) / n;
    occ.mean_queue_length = queue_sum / n;
    for (auto& s : occ.success_rate) s /= n;
    return occ;
}

}  // namespace qcd
