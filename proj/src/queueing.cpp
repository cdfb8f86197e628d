#include "qcd/queueing.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "qcd/errors.hpp"

namespace qcd {

bool more_recent(const Packet& a, const Packet& b) noexcept {
    if (a.sample_slot != b.sample_slot) return a.sample_slot > b.sample_slot;
    if (a.sensor != b.sensor) return a.sensor < b.sensor;
    return a.sample_index > b.sample_index;
}

void QueueState::push(Packet p) {
    auto& buf = buffers_.at(p.sensor);
    buf.push_back(p);
    ++total_;
}

Packet QueueState::remove(PacketRef ref) {
    auto& buf = buffers_.at(ref.sensor);
    if (ref.position >= buf.size()) throw std::logic_error("remove: packet reference out of range");
    Packet p = buf[ref.position];
    buf.erase(buf.begin() + static_cast<std::ptrdiff_t>(ref.position));
    --total_;
    return p;
}

namespace {

struct SensorRange {
    std::size_t first;
    std::size_t last;  // exclusive
};

SensorRange sensor_range(const QueueState& q, std::optional<std::size_t> only) {
    if (only) return {*only, *only + 1};
    return {0, q.sensors()};
}

std::optional<PacketRef> newest(const QueueState& q, SensorRange range) {
    std::optional<PacketRef> best;
    for (std::size_t s = range.first; s < range.last; ++s) {
        const auto& buf = q.buffer(s);
        if (buf.empty()) continue;
        PacketRef cand{s, buf.size() - 1};
        if (!best || more_recent(q.at(cand), q.at(*best))) best = cand;
    }
    return best;
}

std::optional<PacketRef> oldest(const QueueState& q, SensorRange range) {
    std::optional<PacketRef> best;
    for (std::size_t s = range.first; s < range.last; ++s) {
        const auto& buf = q.buffer(s);
        if (buf.empty()) continue;
        PacketRef cand{s, 0};
        if (!best || more_recent(q.at(*best), q.at(cand))) best = cand;
    }
    return best;
}

double info_of(std::span<const double> info, std::size_t sensor) {
    return sensor < info.size() ? info[sensor] : 0.0;
}

// Newest packet of each sensor has the highest priority I* alpha^age within
// that sensor, so only those compete.
std::optional<PacketRef> discounted_info(const QueueState& q, SensorRange range, Slot k, double alpha,
                                         std::span<const double> info) {
    std::optional<PacketRef> best;
    double best_log_priority = 0.0;
    const double log_alpha = std::log(alpha);
    for (std::size_t s = range.first; s < range.last; ++s) {
        const auto& buf = q.buffer(s);
        if (buf.empty()) continue;
        PacketRef cand{s, buf.size() - 1};
        const Packet& p = q.at(cand);
        const double i_star = info_of(info, s);
        const double lp = i_star > 0.0 ? std::log(i_star) + static_cast<double>(k - p.sample_slot) * log_alpha
                                       : -std::numeric_limits<double>::infinity();
        if (!best || lp > best_log_priority || (lp == best_log_priority && more_recent(p, q.at(*best)))) {
            best = cand;
            best_log_priority = lp;
        }
    }
    return best;
}

std::optional<PacketRef> look_back(const QueueState& q, SensorRange range, std::int64_t window,
                                   std::span<const double> info) {
    // Walk the w most recent queued packets (merge from the buffer tails).
    std::vector<std::size_t> cursor;  // number of packets already taken per sensor
    cursor.assign(q.sensors(), 0);
    std::optional<PacketRef> best;
    double best_info = 0.0;
    for (std::int64_t taken = 0; taken < window; ++taken) {
        std::optional<PacketRef> next;
        for (std::size_t s = range.first; s < range.last; ++s) {
            const auto& buf = q.buffer(s);
            if (cursor[s] >= buf.size()) continue;
            PacketRef cand{s, buf.size() - 1 - cursor[s]};
            if (!next || more_recent(q.at(cand), q.at(*next))) next = cand;
        }
        if (!next) break;
        ++cursor[next->sensor];
        const double i_star = info_of(info, next->sensor);
        // Strict comparison: among equally informative packets the more recent wins.
        if (!best || i_star > best_info) {
            best = next;
            best_info = i_star;
        }
    }
    return best;
}

std::optional<PacketRef> uniform_packet(const QueueState& q, SensorRange range, LaneRng* rng) {
    if (!rng) throw std::logic_error("random discipline needs a scheduler stream");
    std::int64_t total = 0;
    for (std::size_t s = range.first; s < range.last; ++s) total += q.length(s);
    if (total == 0) return std::nullopt;
    auto pick = static_cast<std::int64_t>(rng->uniform() * static_cast<double>(total));
    if (pick >= total) pick = total - 1;
    for (std::size_t s = range.first; s < range.last; ++s) {
        if (pick < q.length(s)) return PacketRef{s, static_cast<std::size_t>(pick)};
        pick -= q.length(s);
    }
    return std::nullopt;
}

}  // namespace

std::optional<PacketRef> select_packet(const QueueState& queue, const Discipline& discipline, Slot k,
                                       std::span<const double> info, LaneRng* rng,
                                       std::optional<std::size_t> only_sensor) {
    if (queue.empty()) return std::nullopt;
    const SensorRange range = sensor_range(queue, only_sensor);
    switch (discipline.kind) {
        case DisciplineKind::Fcfs: return oldest(queue, range);
        case DisciplineKind::Lcfs: return newest(queue, range);
        case DisciplineKind::Random: return uniform_packet(queue, range, rng);
        case DisciplineKind::DiscountedInfo: return discounted_info(queue, range, k, discipline.alpha, info);
        case DisciplineKind::LookBack: return look_back(queue, range, discipline.window, info);
    }
    return std::nullopt;
}

std::optional<std::size_t> select_sensor(const QueueState& queue, LaneRng& rng) {
    std::size_t busy = 0;
    for (std::size_t s = 0; s < queue.sensors(); ++s)
        if (queue.length(s) > 0) ++busy;
    if (busy == 0) return std::nullopt;
    auto pick = static_cast<std::size_t>(rng.uniform() * static_cast<double>(busy));
    if (pick >= busy) pick = busy - 1;
    for (std::size_t s = 0; s < queue.sensors(); ++s) {
        if (queue.length(s) == 0) continue;
        if (pick == 0) return s;
        --pick;
    }
    return std::nullopt;
}

SlotUpdate slot_update(QueueState& queue, std::optional<PacketRef> selected, bool success,
                       std::span<const Packet> arrivals, std::optional<std::int64_t> retransmit_cap) {
    SlotUpdate out;
    if (success && (!selected || queue.empty()))
        throw std::logic_error("slot_update: success reported with no packet in service");
    if (selected) {
        if (success) {
            out.delivered = queue.remove(*selected);
        } else {
            Packet& p = queue.at(*selected);
            ++p.attempts;
            if (retransmit_cap && p.attempts >= *retransmit_cap) out.dropped = queue.remove(*selected);
        }
    }
    for (const auto& a : arrivals) queue.push(a);
    return out;
}

std::int64_t stationary_queue_draw(double r, double p, LaneRng& rng) {
    if (!(r > 0.0 && r < 1.0) || !(p > 0.0 && p < 1.0)) throw ConfigError("stationary draw needs r, p in (0,1)");
    if (!(r < p)) throw ConfigError("stationary draw needs r < p");
    if (!rng.bernoulli(r / p)) return 0;
    // Given Q > 0 the law is geometric on {1, 2, ...} with ratio r(1-p) / (p(1-r)).
    const double ratio = r * (1.0 - p) / (p * (1.0 - r));
    std::geometric_distribution<std::int64_t> extra(1.0 - ratio);
    return 1 + extra(rng.engine());
}

double stationary_queue_mean(double r, double p) {
    if (!(r < p)) throw ConfigError("stationary mean needs r < p");
    return r * (1.0 - r) / (p - r);
}

}  // namespace qcd
