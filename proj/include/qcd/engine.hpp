#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <vector>

#include "qcd/detectors.hpp"
#include "qcd/likelihood.hpp"
#include "qcd/model.hpp"
#include "qcd/queueing.hpp"
#include "qcd/rng.hpp"

namespace qcd {

// Everything that happened in one slot, including the hidden state the
// decision maker never sees.
struct SlotRecord {
    SlotObservation obs;
    std::int64_t queue_length = 0;        // Q_k, all sensors
    std::int64_t next_queue_length = 0;   // Q_{k+1}
    std::int64_t arrivals = 0;            // A_k, all sensors
    bool post_change = false;             // k > nu
    std::optional<Packet> dropped;        // packet removed after its K-th failure
};

// One replication of the slotted system without any detector attached.
// Within a slot: read Q_k, select and attempt, deliver or drop, append the
// slot's arrivals (counted in Q_{k+1}).
class Simulation {
public:
    Simulation(const ScenarioConfig& config, const RngPolicy& policy, std::uint64_t replication);

    SlotRecord advance();

    Slot next_slot() const noexcept { return next_slot_; }
    const QueueState& queue() const noexcept { return queue_; }
    std::int64_t initial_queue_length() const noexcept { return initial_length_; }
    // Fresh arrivals during slots 1..nu so far (the true S_nu, diagnostics only).
    std::int64_t pre_change_arrivals() const noexcept { return pre_change_arrivals_; }

private:
    const ScenarioConfig& config_;
    ReplicationStreams streams_;
    QueueState queue_;
    std::vector<double> info_;
    std::vector<std::int64_t> next_index_;
    Slot next_slot_ = 1;
    std::int64_t initial_length_ = 0;
    std::int64_t pre_change_arrivals_ = 0;
    std::vector<Packet> arrivals_;
};

struct ReplicationResult {
    std::uint64_t replication = 0;
    std::uint64_t seed = 0;                 // master seed of the policy
    std::optional<Slot> stopping_slot;      // nullopt: horizon exhausted without alarm
    std::optional<Slot> change_slot;
    std::int64_t initial_queue = 0;
    std::int64_t pre_change_arrivals = 0;   // true S_nu (diagnostic)

    bool truncated() const noexcept { return !stopping_slot.has_value(); }
    bool false_alarm() const noexcept { return stopping_slot && change_slot && *stopping_slot <= *change_slot; }
    // (T - nu)^+ when both are finite.
    std::optional<Slot> detection_delay() const noexcept;

    friend bool operator==(const ReplicationResult&, const ReplicationResult&) = default;
};

struct TraceRow {
    Slot k = 0;
    std::int64_t queue_length = 0;
    SlotObservation obs;
    double increment = 0.0;
    double statistic = 0.0;
};

using TraceSink = std::function<void(const TraceRow&)>;

// Header and one line per slot: k, Q_k, y, U_k, J_k, Z_k, L_k, C_k.
void write_trace_header(std::ostream& os);
void write_trace_row(std::ostream& os, const TraceRow& row);

ReplicationResult run_replication(const ScenarioConfig& config, DetectorKind detector, double threshold,
                                  const RngPolicy& policy, std::uint64_t replication,
                                  const TraceSink& sink = {});

// Replications 0..n_reps-1 on `parallelism` threads; output ordered by index and
// independent of the thread count.
std::vector<ReplicationResult> run_batch(const ScenarioConfig& config, DetectorKind detector, double threshold,
                                         std::int64_t n_reps, unsigned parallelism, const RngPolicy& policy);

// Runs `slots` slots of post-change dynamics (service p1, no detector) from an
// empty queue and reports occupancy statistics.
OccupancyEstimate estimate_occupancy(const ScenarioConfig& config, std::int64_t slots);

// Seed-derived tag used to decorrelate discipline variants in Independent mode.
std::uint64_t discipline_tag(const Discipline& d) noexcept;

// Runs fn(i) for i in [0, n) on up to `parallelism` threads.
void parallel_for(std::int64_t n, unsigned parallelism, const std::function<void(std::int64_t)>& fn);

}  // namespace qcd
