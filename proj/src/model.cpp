#include "qcd/model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

#include "qcd/engine.hpp"
#include "qcd/errors.hpp"

namespace qcd {

namespace {

bool open_unit(double p) { return p > 0.0 && p < 1.0; }

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

double gaussian_log_density(double z, double mean, double variance) {
    const double d = z - mean;
    return -0.5 * std::log(2.0 * std::numbers::pi * variance) - d * d / (2.0 * variance);
}

double bernoulli_log_pmf(double z, double q) {
    if (z == 1.0) return std::log(q);
    if (z == 0.0) return std::log1p(-q);
    throw DomainError("Bernoulli measurement must be 0 or 1, got " + std::to_string(z));
}

}  // namespace

DensityModel::DensityModel(Kind kind) : kind_(std::move(kind)) {
    std::visit(overloaded{
                   [](const GaussianKnownVariance& g) {
                       if (!(g.variance > 0.0) || !std::isfinite(g.variance))
                           throw ConfigError("gaussian variance must be > 0");
                       if (!std::isfinite(g.mean0) || !std::isfinite(g.mean1))
                           throw ConfigError("gaussian means must be finite");
                   },
                   [](const BernoulliMeasurement& b) {
                       if (!open_unit(b.q0) || !open_unit(b.q1))
                           throw ConfigError("bernoulli measurement probabilities must lie in (0,1)");
                   },
                   [](const CustomDensity& c) {
                       if (!c.log_f0 || !c.log_f1) throw ConfigError("custom density needs both log-densities");
                   },
               },
               kind_);
}

double DensityModel::log_f0(double z) const {
    return std::visit(overloaded{
                          [z](const GaussianKnownVariance& g) { return gaussian_log_density(z, g.mean0, g.variance); },
                          [z](const BernoulliMeasurement& b) { return bernoulli_log_pmf(z, b.q0); },
                          [z](const CustomDensity& c) { return c.log_f0(z); },
                      },
                      kind_);
}

double DensityModel::log_f1(double z) const {
    return std::visit(overloaded{
                          [z](const GaussianKnownVariance& g) { return gaussian_log_density(z, g.mean1, g.variance); },
                          [z](const BernoulliMeasurement& b) { return bernoulli_log_pmf(z, b.q1); },
                          [z](const CustomDensity& c) { return c.log_f1(z); },
                      },
                      kind_);
}

double DensityModel::log_likelihood_ratio(double z) const {
    const double llr = std::visit(
        overloaded{
            [z](const GaussianKnownVariance& g) {
                return ((g.mean1 - g.mean0) * z - (g.mean1 * g.mean1 - g.mean0 * g.mean0) / 2.0) / g.variance;
            },
            [z](const BernoulliMeasurement& b) {
                if (z == 1.0) return std::log(b.q1 / b.q0);
                if (z == 0.0) return std::log((1.0 - b.q1) / (1.0 - b.q0));
                throw DomainError("Bernoulli measurement must be 0 or 1, got " + std::to_string(z));
            },
            [z](const CustomDensity& c) { return c.log_f1(z) - c.log_f0(z); },
        },
        kind_);
    if (!std::isfinite(llr)) throw DomainError("log-likelihood ratio is not finite at z = " + std::to_string(z));
    return llr;
}

double DensityModel::kl_divergence() const {
    return std::visit(overloaded{
                          [](const GaussianKnownVariance& g) {
                              const double d = g.mean1 - g.mean0;
                              return d * d / (2.0 * g.variance);
                          },
                          [](const BernoulliMeasurement& b) { return kl_bernoulli(b.q1, b.q0); },
                          [](const CustomDensity& c) {
                              if (!std::isfinite(c.kl)) throw ConfigError("custom density has no KL divergence set");
                              return c.kl;
                          },
                      },
                      kind_);
}

double DensityModel::sample(bool post_change, LaneRng& rng) const {
    return std::visit(overloaded{
                          [&](const GaussianKnownVariance& g) {
                              const double mean = post_change ? g.mean1 : g.mean0;
                              return mean + std::sqrt(g.variance) * rng.standard_normal();
                          },
                          [&](const BernoulliMeasurement& b) {
                              return rng.bernoulli(post_change ? b.q1 : b.q0) ? 1.0 : 0.0;
                          },
                          [&](const CustomDensity& c) {
                              const auto& sampler = post_change ? c.sample_f1 : c.sample_f0;
                              if (!sampler) throw ConfigError("custom density has no sampler");
                              return sampler(rng.engine());
                          },
                      },
                      kind_);
}

std::string DensityModel::describe() const {
    std::ostringstream os;
    std::visit(overloaded{
                   [&](const GaussianKnownVariance& g) {
                       os << "gaussian(" << g.mean0 << "->" << g.mean1 << ", var " << g.variance << ")";
                   },
                   [&](const BernoulliMeasurement& b) { os << "bernoulli(" << b.q0 << "->" << b.q1 << ")"; },
                   [&](const CustomDensity&) { os << "custom"; },
               },
               kind_);
    return os.str();
}

double log_likelihood_ratio(const DensityModel& model, double z) { return model.log_likelihood_ratio(z); }

double kl_bernoulli(double p1, double p0) {
    if (!open_unit(p1) || !open_unit(p0)) throw DomainError("kl_bernoulli arguments must lie in (0,1)");
    if (p1 == p0) return 0.0;
    return p1 * std::log(p1 / p0) + (1.0 - p1) * std::log((1.0 - p1) / (1.0 - p0));
}

void ChannelModel::validate() const {
    std::vector<std::string> problems;
    if (!open_unit(p0)) problems.emplace_back("channel.p0 must lie in (0,1)");
    if (!open_unit(p1)) problems.emplace_back("channel.p1 must lie in (0,1)");
    if (!problems.empty()) throw ConfigError(std::move(problems));
}

double SamplingProcess::rate() const noexcept {
    return std::visit(overloaded{
                          [](const BernoulliSampling& b) { return b.rate; },
                          [](const PeriodicSampling& p) { return 1.0 / static_cast<double>(p.interval); },
                      },
                      kind_);
}

std::int64_t SamplingProcess::slots_to_next_arrival(Slot k) const {
    const auto* p = std::get_if<PeriodicSampling>(&kind_);
    if (!p) throw ConfigError("slots_to_next_arrival is defined for periodic sampling only");
    if (k <= p->phase) return p->phase - k;
    const std::int64_t since = (k - p->phase) % p->interval;
    return since == 0 ? 0 : p->interval - since;
}

bool SamplingProcess::arrives(Slot k, LaneRng& rng) const {
    return std::visit(overloaded{
                          [&](const BernoulliSampling& b) { return rng.bernoulli(b.rate); },
                          [&](const PeriodicSampling& p) { return k >= p.phase && (k - p.phase) % p.interval == 0; },
                      },
                      kind_);
}

std::string Discipline::name() const {
    switch (kind) {
        case DisciplineKind::Fcfs: return "fcfs";
        case DisciplineKind::Lcfs: return "lcfs";
        case DisciplineKind::Random: return "random";
        case DisciplineKind::DiscountedInfo: {
            std::ostringstream os;
            os << "discounted_info(" << alpha << ")";
            return os.str();
        }
        case DisciplineKind::LookBack: return "lookback(" + std::to_string(window) + ")";
    }
    return "unknown";
}

std::int64_t InitialQueue::known_length(std::size_t sensor) const {
    if (lengths.empty()) return 0;
    if (lengths.size() == 1) return lengths.front();
    return lengths.at(sensor);
}

double ScenarioConfig::aggregate_rate() const noexcept {
    return std::accumulate(sensors.begin(), sensors.end(), 0.0,
                           [](double acc, const SensorConfig& s) { return acc + s.sampling.rate(); });
}

void ScenarioConfig::validate() const {
    std::vector<std::string> problems;
    if (sensors.empty()) problems.emplace_back("at least one sensor is required");
    if (change_slot && *change_slot < 1) problems.emplace_back("change_slot must be >= 1 when finite");
    if (!open_unit(channel.p0)) problems.emplace_back("channel.p0 must lie in (0,1)");
    if (!open_unit(channel.p1)) problems.emplace_back("channel.p1 must lie in (0,1)");
    if (retransmit_cap && *retransmit_cap < 1) problems.emplace_back("retransmit_cap must be >= 1");
    if (horizon < 1) problems.emplace_back("horizon must be >= 1");
    if (discipline.kind == DisciplineKind::DiscountedInfo && !(discipline.alpha > 0.0 && discipline.alpha < 1.0))
        problems.emplace_back("discounted_info alpha must lie in (0,1)");
    if (discipline.kind == DisciplineKind::LookBack && discipline.window < 1)
        problems.emplace_back("lookback window must be >= 1");

    for (std::size_t i = 0; i < sensors.size(); ++i) {
        const auto& s = sensors[i];
        const std::string where = "sensors[" + std::to_string(i) + "]";
        if (const auto* b = std::get_if<BernoulliSampling>(&s.sampling.kind())) {
            if (!open_unit(b->rate)) problems.push_back(where + ".sampling.rate must lie in (0,1)");
        } else {
            const auto& p = std::get<PeriodicSampling>(s.sampling.kind());
            if (p.interval < 1) problems.push_back(where + ".sampling.interval must be >= 1");
            if (p.phase < 1 || p.phase > p.interval) problems.push_back(where + ".sampling.phase must lie in [1, interval]");
        }
    }

    if (initial_queue.kind == InitialQueue::Kind::Known) {
        if (initial_queue.lengths.size() > 1 && initial_queue.lengths.size() != sensors.size())
            problems.emplace_back("initial_queue.lengths must have one entry per sensor");
        for (auto q : initial_queue.lengths)
            if (q < 0) problems.emplace_back("initial queue lengths must be >= 0");
    }

    if (problems.empty() && !allow_unstable) {
        const double limit = std::min(channel.p0, channel.p1);
        if (!(aggregate_rate() < limit)) {
            std::ostringstream os;
            os << "aggregate sampling rate " << aggregate_rate() << " must be below min(p0, p1) = " << limit;
            problems.push_back(os.str());
        }
    }
    if (problems.empty() && initial_queue.kind == InitialQueue::Kind::StationaryDraw) {
        for (const auto& s : sensors)
            if (!(s.sampling.rate() < channel.p0))
                problems.emplace_back("stationary initial queue needs each rate below p0");
    }
    if (!problems.empty()) throw ConfigError(std::move(problems));
}

double information_from_occupancy(const ScenarioConfig& config, const OccupancyEstimate& occ) {
    const double channel_kl = kl_bernoulli(config.channel.p1, config.channel.p0);
    double value = occ.busy_fraction * channel_kl;
    for (std::size_t i = 0; i < config.sensors.size(); ++i)
        value += occ.success_rate.at(i) * config.sensors[i].density.kl_divergence();
    return value;
}

namespace {

void require_stable(const ScenarioConfig& config) {
    config.channel.validate();
    const double limit = std::min(config.channel.p0, config.channel.p1);
    if (!(config.aggregate_rate() < limit)) {
        std::ostringstream os;
        os << "information number needs aggregate rate " << config.aggregate_rate() << " < min(p0, p1) = " << limit;
        throw ConfigError(os.str());
    }
}

OccupancyEstimate closed_form_occupancy(const ScenarioConfig& config) {
    OccupancyEstimate occ;
    const double p1 = config.channel.p1;
    const double total = config.aggregate_rate();
    if (!config.retransmit_cap) {
        occ.busy_fraction = total / p1;
        for (const auto& s : config.sensors) occ.success_rate.push_back(s.sampling.rate());
    } else {
        // K = 1, single sensor: Q_k is the previous slot's arrival indicator.
        occ.busy_fraction = total;
        for (const auto& s : config.sensors) occ.success_rate.push_back(s.sampling.rate() * p1);
    }
    return occ;
}

}  // namespace

double information_number(const ScenarioConfig& config, std::int64_t occupancy_slots) {
    if (config.sensors.size() != 1) throw ConfigError("information_number expects exactly one sensor");
    require_stable(config);
    const bool closed = !config.retransmit_cap || *config.retransmit_cap == 1;
    const OccupancyEstimate occ = closed ? closed_form_occupancy(config) : estimate_occupancy(config, occupancy_slots);
    return information_from_occupancy(config, occ);
}

double information_number_multisensor(const ScenarioConfig& config, std::int64_t occupancy_slots) {
    if (config.sensors.empty()) throw ConfigError("information_number_multisensor needs sensors");
    require_stable(config);
    if (!config.retransmit_cap) return information_from_occupancy(config, closed_form_occupancy(config));
    return information_from_occupancy(config, estimate_occupancy(config, occupancy_slots));
}

}  // namespace qcd
