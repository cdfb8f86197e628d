#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "qcd/rng.hpp"

namespace qcd {

using Slot = std::int64_t;

// ---------------------------------------------------------------------------
// Measurement densities
// ---------------------------------------------------------------------------

// N(mean0, variance) before the change, N(mean1, variance) after.
struct GaussianKnownVariance {
    double mean0 = 0.0;
    double mean1 = 1.0;
    double variance = 1.0;
};

// Measurement z in {0, 1} with P(z = 1) = q0 before and q1 after the change.
struct BernoulliMeasurement {
    double q0 = 0.5;
    double q1 = 0.5;
};

// User supplied log-densities and samplers. `kl` is D(f1 || f0) in nats and is
// only needed by the information-number routines and the schedulers.
struct CustomDensity {
    std::function<double(double)> log_f0;
    std::function<double(double)> log_f1;
    std::function<double(std::mt19937_64&)> sample_f0;
    std::function<double(std::mt19937_64&)> sample_f1;
    double kl = std::numeric_limits<double>::quiet_NaN();
};

class DensityModel {
public:
    using Kind = std::variant<GaussianKnownVariance, BernoulliMeasurement, CustomDensity>;

    DensityModel() : kind_(GaussianKnownVariance{}) {}
    DensityModel(Kind kind);  // NOLINT(google-explicit-constructor)
    DensityModel(GaussianKnownVariance g) : DensityModel(Kind(g)) {}    // NOLINT(google-explicit-constructor)
    DensityModel(BernoulliMeasurement b) : DensityModel(Kind(b)) {}     // NOLINT(google-explicit-constructor)
    DensityModel(CustomDensity c) : DensityModel(Kind(std::move(c))) {}  // NOLINT(google-explicit-constructor)

    const Kind& kind() const noexcept { return kind_; }

    double log_f0(double z) const;
    double log_f1(double z) const;
    // log f1(z) - log f0(z); throws DomainError outside the common support.
    double log_likelihood_ratio(double z) const;
    // D(f1 || f0) in nats.
    double kl_divergence() const;
    // Draw one measurement from f1 (post_change) or f0.
    double sample(bool post_change, LaneRng& rng) const;

    std::string describe() const;

private:
    Kind kind_;
};

double log_likelihood_ratio(const DensityModel& model, double z);

// D(Ber(p1) || Ber(p0)) in nats. Both arguments must lie in (0, 1).
double kl_bernoulli(double p1, double p0);

// ---------------------------------------------------------------------------
// Channel and sampling
// ---------------------------------------------------------------------------

struct ChannelModel {
    double p0 = 0.5;  // success probability for slots k <= change slot
    double p1 = 0.5;  // success probability for slots k > change slot

    double success_probability(bool post_change) const noexcept { return post_change ? p1 : p0; }
    void validate() const;
};

struct BernoulliSampling {
    double rate = 0.1;
};

// One arrival every `interval` slots; the first one lands in slot `phase`.
struct PeriodicSampling {
    std::int64_t interval = 10;
    std::int64_t phase = 1;
};

class SamplingProcess {
public:
    using Kind = std::variant<BernoulliSampling, PeriodicSampling>;

    SamplingProcess() : kind_(BernoulliSampling{}) {}
    SamplingProcess(Kind kind) : kind_(std::move(kind)) {}  // NOLINT(google-explicit-constructor)
    SamplingProcess(BernoulliSampling b) : kind_(b) {}      // NOLINT(google-explicit-constructor)
    SamplingProcess(PeriodicSampling p) : kind_(p) {}       // NOLINT(google-explicit-constructor)

    const Kind& kind() const noexcept { return kind_; }
    bool is_periodic() const noexcept { return std::holds_alternative<PeriodicSampling>(kind_); }
    // Long-run arrivals per slot.
    double rate() const noexcept;
    // Slots until the next arrival as seen at the start of slot k (V_k); 0 when
    // an arrival happens in slot k. Periodic sampling only.
    std::int64_t slots_to_next_arrival(Slot k) const;
    bool arrives(Slot k, LaneRng& rng) const;

private:
    Kind kind_;
};

// ---------------------------------------------------------------------------
// Scenario
// ---------------------------------------------------------------------------

enum class DisciplineKind { Fcfs, Lcfs, Random, DiscountedInfo, LookBack };

struct Discipline {
    DisciplineKind kind = DisciplineKind::Fcfs;
    double alpha = 0.5;       // DiscountedInfo only
    std::int64_t window = 1;  // LookBack only

    static Discipline fcfs() { return {}; }
    static Discipline lcfs() { return {DisciplineKind::Lcfs}; }
    static Discipline random() { return {DisciplineKind::Random}; }
    static Discipline discounted_info(double a) { return {DisciplineKind::DiscountedInfo, a, 1}; }
    static Discipline look_back(std::int64_t w) { return {DisciplineKind::LookBack, 0.5, w}; }

    std::string name() const;
};

// How the shared channel is granted when several sensors hold packets.
enum class AccessMode {
    RandomAccess,  // uniform over non-empty queues, discipline applied inside the chosen queue
    Scheduled      // discipline applied to the union of all queued packets
};

struct InitialQueue {
    enum class Kind { Known, StationaryDraw };
    Kind kind = Kind::Known;
    std::vector<std::int64_t> lengths;  // Known: one entry per sensor, or a single broadcast entry

    static InitialQueue known(std::int64_t q) { return {Kind::Known, {q}}; }
    static InitialQueue stationary() { return {Kind::StationaryDraw, {}}; }
    std::int64_t known_length(std::size_t sensor) const;
};

struct SensorConfig {
    SamplingProcess sampling;
    DensityModel density;
};

struct ScenarioConfig {
    std::optional<Slot> change_slot = 1;  // nullopt: no change (nu = infinity)
    std::vector<SensorConfig> sensors;
    ChannelModel channel;
    std::optional<std::int64_t> retransmit_cap;  // nullopt: retransmit until success
    Discipline discipline;
    AccessMode access = AccessMode::RandomAccess;
    InitialQueue initial_queue;
    Slot horizon = 10'000;
    std::uint64_t seed = 1;
    // Permit sum of rates >= min(p0, p1). The multi-sensor figure parameter sets
    // are overloaded; simulation is still well defined over a finite horizon.
    bool allow_unstable = false;

    bool multi_sensor() const noexcept { return sensors.size() > 1; }
    double aggregate_rate() const noexcept;
    bool is_post_change(Slot k) const noexcept { return change_slot && k > *change_slot; }

    // Throws ConfigError listing every violated invariant.
    void validate() const;
};

// ---------------------------------------------------------------------------
// Information quantities (nats per slot)
// ---------------------------------------------------------------------------

// Long-run statistics of the post-change queue used by the information numbers.
struct OccupancyEstimate {
    double busy_fraction = 0.0;             // P(Q > 0) (any sensor non-empty)
    std::vector<double> success_rate;       // per-sensor deliveries per slot
    double mean_queue_length = 0.0;         // time average of Q_k
    std::int64_t slots = 0;
};

// Single-sensor information number I. Closed form for K = infinity and K = 1;
// for other finite caps the occupancy is estimated by simulation over
// `occupancy_slots` slots.
double information_number(const ScenarioConfig& config, std::int64_t occupancy_slots = 1'000'000);

// Multi-sensor information rate.
double information_number_multisensor(const ScenarioConfig& config,
                                      std::int64_t occupancy_slots = 1'000'000);

// Information numbers computed from a given occupancy, shared by both routines.
double information_from_occupancy(const ScenarioConfig& config, const OccupancyEstimate& occ);

}  // namespace qcd
