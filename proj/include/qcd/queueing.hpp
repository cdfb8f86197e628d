#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <vector>

#include "qcd/model.hpp"
#include "qcd/rng.hpp"

namespace qcd {

struct Packet {
    std::int64_t sample_index = 0;  // per-sensor sequence number, prestart packets first
    Slot sample_slot = 0;           // t_j; prestart packets carry slots <= 0
    std::size_t sensor = 0;         // 0-based
    double value = 0.0;
    std::int64_t attempts = 0;
    bool is_prestart = false;
};

// True when `a` arrived after `b`; equal slots resolve to the lower sensor id.
bool more_recent(const Packet& a, const Packet& b) noexcept;

struct PacketRef {
    std::size_t sensor = 0;
    std::size_t position = 0;  // index into that sensor's buffer (0 = oldest)

    friend bool operator==(const PacketRef&, const PacketRef&) = default;
};

// Transmit buffers of all sensors. Each per-sensor buffer is kept in arrival
// order, oldest first.
class QueueState {
public:
    explicit QueueState(std::size_t sensors = 1) : buffers_(sensors) {}

    std::size_t sensors() const noexcept { return buffers_.size(); }
    std::int64_t length() const noexcept { return total_; }
    std::int64_t length(std::size_t sensor) const { return static_cast<std::int64_t>(buffers_.at(sensor).size()); }
    bool empty() const noexcept { return total_ == 0; }
    const std::deque<Packet>& buffer(std::size_t sensor) const { return buffers_.at(sensor); }

    const Packet& at(PacketRef ref) const { return buffers_.at(ref.sensor).at(ref.position); }
    Packet& at(PacketRef ref) { return buffers_.at(ref.sensor).at(ref.position); }

    void push(Packet p);
    Packet remove(PacketRef ref);

private:
    std::vector<std::deque<Packet>> buffers_;
    std::int64_t total_ = 0;
};

// Picks the packet to attempt in slot k. `info` holds I*_i = D(f1,i || f0,i)
// per sensor for the information-aware disciplines. `only_sensor` restricts
// the choice to one sensor's buffer (random-access mode). `rng` is needed for
// the Random discipline only.
std::optional<PacketRef> select_packet(const QueueState& queue, const Discipline& discipline, Slot k,
                                       std::span<const double> info, LaneRng* rng = nullptr,
                                       std::optional<std::size_t> only_sensor = std::nullopt);

// Uniform choice among sensors with a non-empty buffer.
std::optional<std::size_t> select_sensor(const QueueState& queue, LaneRng& rng);

struct SlotUpdate {
    std::optional<Packet> delivered;
    std::optional<Packet> dropped;
};

// Applies one slot: resolve the attempted packet, then append the arrivals.
// Throws std::logic_error when success is reported without a selected packet.
SlotUpdate slot_update(QueueState& queue, std::optional<PacketRef> selected, bool success,
                       std::span<const Packet> arrivals, std::optional<std::int64_t> retransmit_cap);

// Draw from the stationary queue-length law of the slotted Geom/Geom/1 queue
// Q_{k+1} = (Q_k - Y_k)^+ + A_k with arrival rate r and service rate p.
std::int64_t stationary_queue_draw(double r, double p, LaneRng& rng);

// Mean of that law, r (1 - r) / (p - r).
double stationary_queue_mean(double r, double p);

}  // namespace qcd
