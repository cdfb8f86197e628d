#pragma once

#include <cstdint>
#include <random>

namespace qcd {

enum class CouplingMode { Independent, CoupledAcrossDisciplines };

// Named sub-streams of one replication. Each lane has its own engine so that
// changing how often one lane is consumed never shifts another lane.
enum class Lane : std::uint64_t { Arrivals = 1, Channel = 2, Values = 3, Scheduler = 4, Initial = 5 };

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

struct RngPolicy {
    std::uint64_t master_seed = 1;
    CouplingMode coupling = CouplingMode::CoupledAcrossDisciplines;

    // `variant_tag` distinguishes discipline variants; it only enters the
    // derivation in Independent mode.
    std::uint64_t stream_seed(std::uint64_t replication, Lane lane,
                              std::uint64_t variant_tag = 0) const noexcept {
        std::uint64_t s = splitmix64(master_seed);
        s = splitmix64(s ^ replication);
        if (coupling == CouplingMode::Independent) s = splitmix64(s ^ (variant_tag + 0x51ED270B27FULL));
        return splitmix64(s ^ static_cast<std::uint64_t>(lane));
    }
};

class LaneRng {
public:
    explicit LaneRng(std::uint64_t seed) : engine_(seed) {}

    double uniform() { return unit_(engine_); }
    bool bernoulli(double p) { return unit_(engine_) < p; }
    double standard_normal() { return normal_(engine_); }
    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
    std::uniform_real_distribution<double> unit_{0.0, 1.0};
    std::normal_distribution<double> normal_{0.0, 1.0};
};

struct ReplicationStreams {
    LaneRng arrivals;
    LaneRng channel;
    LaneRng values;
    LaneRng scheduler;
    LaneRng initial;

    ReplicationStreams(const RngPolicy& policy, std::uint64_t replication, std::uint64_t variant_tag = 0)
        : arrivals(policy.stream_seed(replication, Lane::Arrivals, variant_tag)),
          channel(policy.stream_seed(replication, Lane::Channel, variant_tag)),
          values(policy.stream_seed(replication, Lane::Values, variant_tag)),
          scheduler(policy.stream_seed(replication, Lane::Scheduler, variant_tag)),
          initial(policy.stream_seed(replication, Lane::Initial, variant_tag)) {}
};

}  // namespace qcd
