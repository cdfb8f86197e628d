#include "qcd/detectors.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "qcd/errors.hpp"

namespace qcd {

std::string to_string(DetectorKind kind) {
    switch (kind) {
        case DetectorKind::RecursiveCusum: return "recursive";
        case DetectorKind::GeneralizedCusum: return "generalized";
        case DetectorKind::NetworkOblivious: return "oblivious";
    }
    return "unknown";
}

DetectorKind detector_kind_from_string(const std::string& name) {
    if (name == "recursive" || name == "network_aware") return DetectorKind::RecursiveCusum;
    if (name == "generalized") return DetectorKind::GeneralizedCusum;
    if (name == "oblivious" || name == "network_oblivious") return DetectorKind::NetworkOblivious;
    throw ConfigError("unknown detector '" + name + "' (expected recursive, generalized or oblivious)");
}

Detector::Detector(DetectorKind kind, double threshold, ChannelModel channel, std::vector<DensityModel> densities)
    : kind_(kind), threshold_(threshold), channel_(channel), densities_(std::move(densities)) {
    if (!(threshold > 0.0) || !std::isfinite(threshold)) throw ConfigError("detector threshold must be finite and > 0");
    if (densities_.empty()) throw ConfigError("detector needs at least one density");
}

void Detector::reset() {
    statistic_ = 0.0;
    alarmed_at_.reset();
    base_ = 0.0;
    period_.clear();
    period_received_.clear();
}

double Detector::advance_generalized(const SlotObservation& obs, double channel_term, double meas_term) {
    if (!obs.queue_nonempty) {
        if (!period_.empty()) {
            base_ = statistic_;
            period_.clear();
            period_received_.clear();
        }
        return statistic_;
    }

    const bool reception = obs.y == ChannelOutcome::Success;
    period_.push_back({channel_term, reception});
    if (reception) {
        const SampleKey key{obs.sample_slot.value_or(obs.sample_index.value_or(0)), obs.sensor.value_or(0),
                            obs.sample_index.value_or(0)};
        auto pos = std::upper_bound(period_received_.begin(), period_received_.end(), key,
                                    [](const SampleKey& k, const auto& item) { return k < item.first; });
        period_received_.insert(pos, {key, meas_term});
    }

    double c = base_;
    std::size_t next_received = 0;
    for (const auto& s : period_) {
        double term = s.channel_term;
        if (s.reception) term += period_received_[next_received++].second;
        c = std::max(c + term, 0.0);
    }
    return c;
}

Detector::Step Detector::step(const SlotObservation& obs) {
    if (alarmed_at_) throw std::logic_error("detector stepped after its alarm");
    obs.validate();

    const double ch = obs.queue_nonempty ? channel_llr(obs.y, channel_) : 0.0;
    const double meas = measurement_llr(obs, densities_);

    Step out;
    switch (kind_) {
        case DetectorKind::RecursiveCusum:
            out.increment = ch + meas;
            statistic_ = std::max(statistic_ + out.increment, 0.0);
            break;
        case DetectorKind::NetworkOblivious:
            out.increment = meas;
            statistic_ = std::max(statistic_ + out.increment, 0.0);
            break;
        case DetectorKind::GeneralizedCusum:
            out.increment = ch + meas;
            statistic_ = advance_generalized(obs, ch, meas);
            break;
    }
    if (!std::isfinite(out.increment) || !std::isfinite(statistic_))
        throw NumericError("non-finite CUSUM update at slot " + std::to_string(obs.slot));

    out.statistic = statistic_;
    out.alarm = statistic_ > threshold_;
    if (out.alarm) alarmed_at_ = obs.slot;
    return out;
}

double generalized_statistic(const LlrTermLedger& ledger, Slot n) {
    if (n <= 0) return 0.0;
    const std::vector<double> terms = ledger.slot_terms(n);
    // Max suffix sum, scanning backwards.
    double best = 0.0;
    double suffix = 0.0;
    for (auto it = terms.rbegin(); it != terms.rend(); ++it) {
        suffix += *it;
        best = std::max(best, suffix);
    }
    return best;
}

namespace {

std::vector<double> sorted_copy(std::span<const double> xs) {
    std::vector<double> v(xs.begin(), xs.end());
    std::sort(v.begin(), v.end());
    return v;
}

double ecdf(const std::vector<double>& sorted, double x) {
    const auto it = std::upper_bound(sorted.begin(), sorted.end(), x);
    return static_cast<double>(it - sorted.begin()) / static_cast<double>(sorted.size());
}

}  // namespace

DominanceResult is_stochastically_dominated(std::span<const double> a, std::span<const double> b,
                                            std::span<const double> levels, double significance) {
    if (a.empty() || b.empty()) throw DomainError("dominance check needs non-empty samples");
    if (!(significance > 0.0 && significance < 1.0)) throw DomainError("significance must lie in (0,1)");
    const auto sa = sorted_copy(a);
    const auto sb = sorted_copy(b);

    std::vector<double> grid(levels.begin(), levels.end());
    if (grid.empty()) {
        grid = sa;
        grid.insert(grid.end(), sb.begin(), sb.end());
    }

    DominanceResult out;
    for (double x : grid) out.max_violation = std::max(out.max_violation, ecdf(sb, x) - ecdf(sa, x));
    const auto n = static_cast<double>(sa.size());
    const auto m = static_cast<double>(sb.size());
    out.slack = std::sqrt(-std::log(significance) / 2.0 * (n + m) / (n * m));
    out.dominated = out.max_violation <= out.slack;
    return out;
}

KsResult two_sample_ks(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) throw DomainError("KS test needs non-empty samples");
    const auto sa = sorted_copy(a);
    const auto sb = sorted_copy(b);
    KsResult out;
    std::size_t i = 0;
    std::size_t j = 0;
    while (i < sa.size() && j < sb.size()) {
        const double x = std::min(sa[i], sb[j]);
        while (i < sa.size() && sa[i] <= x) ++i;
        while (j < sb.size() && sb[j] <= x) ++j;
        const double fa = static_cast<double>(i) / static_cast<double>(sa.size());
        const double fb = static_cast<double>(j) / static_cast<double>(sb.size());
        out.statistic = std::max(out.statistic, std::abs(fa - fb));
    }
    const double ne = static_cast<double>(sa.size()) * static_cast<double>(sb.size()) /
                      static_cast<double>(sa.size() + sb.size());
    const double lambda = (std::sqrt(ne) + 0.12 + 0.11 / std::sqrt(ne)) * out.statistic;
    // Kolmogorov survival function.
    double sum = 0.0;
    double sign = 1.0;
    for (int k = 1; k <= 100; ++k) {
        const double term = sign * std::exp(-2.0 * k * k * lambda * lambda);
        sum += term;
        if (std::abs(term) < 1e-12) break;
        sign = -sign;
    }
    out.p_value = std::clamp(2.0 * sum, 0.0, 1.0);
    if (out.statistic == 0.0) out.p_value = 1.0;
    return out;
}

}  // namespace qcd
