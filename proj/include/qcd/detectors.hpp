#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qcd/likelihood.hpp"
#include "qcd/model.hpp"

namespace qcd {

enum class DetectorKind {
    RecursiveCusum,    // C_n = (C_{n-1} + L_n)^+
    GeneralizedCusum,  // C_n = max_j l_{j,n} over reordered measurements, clamped at 0
    NetworkOblivious   // recursive CUSUM on delivered measurements only
};

std::string to_string(DetectorKind kind);
DetectorKind detector_kind_from_string(const std::string& name);

// Streaming stopping rule. The generalized form keeps only the current busy
// period plus the statistic at the end of the last completed one: deliveries
// of different busy periods never interleave, so completed periods are final.
class Detector {
public:
    struct Step {
        double increment = 0.0;  // L_n as credited this slot (un-reordered)
        double statistic = 0.0;  // C_n
        bool alarm = false;
    };

    Detector(DetectorKind kind, double threshold, ChannelModel channel, std::vector<DensityModel> densities);

    // Throws std::logic_error if called after the alarm and NumericError on a
    // non-finite increment.
    Step step(const SlotObservation& obs);

    DetectorKind kind() const noexcept { return kind_; }
    double threshold() const noexcept { return threshold_; }
    double statistic() const noexcept { return statistic_; }
    std::optional<Slot> alarmed_at() const noexcept { return alarmed_at_; }
    void reset();

private:
    struct PeriodSlot {
        double channel_term = 0.0;
        bool reception = false;
    };

    double advance_generalized(const SlotObservation& obs, double channel_term, double meas_term);

    DetectorKind kind_;
    double threshold_;
    ChannelModel channel_;
    std::vector<DensityModel> densities_;
    double statistic_ = 0.0;
    std::optional<Slot> alarmed_at_;

    // GeneralizedCusum state
    double base_ = 0.0;  // statistic at the end of the last completed busy period
    std::vector<PeriodSlot> period_;
    std::vector<std::pair<SampleKey, double>> period_received_;  // kept sorted by key
};

// max(0, max_{1<=j<=n} cumulative_llr(j, n)) evaluated directly on a ledger.
double generalized_statistic(const LlrTermLedger& ledger, Slot n);

struct DominanceResult {
    bool dominated = false;
    double max_violation = 0.0;  // largest CDF_b(x) - CDF_a(x) over the grid
    double slack = 0.0;          // one-sided two-sample KS allowance
};

// Checks a <=_st b: the empirical CDF of `a` sits above that of `b` at every
// grid level, up to the one-sided KS critical value at `significance`. With an
// empty grid the pooled sample values are used. Throws DomainError on empty
// samples.
DominanceResult is_stochastically_dominated(std::span<const double> a, std::span<const double> b,
                                            std::span<const double> levels = {}, double significance = 0.05);

// Two-sample KS statistic sup |F_a - F_b| and its asymptotic p-value.
struct KsResult {
    double statistic = 0.0;
    double p_value = 1.0;
};
KsResult two_sample_ks(std::span<const double> a, std::span<const double> b);

}  // namespace qcd
