#include "qcd/likelihood.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "qcd/errors.hpp"

namespace qcd {

void SlotObservation::validate() const {
    const bool success = y == ChannelOutcome::Success;
    if ((y == ChannelOutcome::Idle) == queue_nonempty)
        throw MalformedObservation("slot " + std::to_string(slot) + ": idle iff the queue is empty");
    if (success != value.has_value())
        throw MalformedObservation("slot " + std::to_string(slot) + ": a value is present iff the attempt succeeded");
    if (is_prestart_delivery && !success)
        throw MalformedObservation("slot " + std::to_string(slot) + ": prestart flag without a delivery");
}

double channel_llr(ChannelOutcome y, const ChannelModel& channel) {
    switch (y) {
        case ChannelOutcome::Success: return std::log(channel.p1 / channel.p0);
        case ChannelOutcome::Failure: return std::log((1.0 - channel.p1) / (1.0 - channel.p0));
        case ChannelOutcome::Idle: return 0.0;
    }
    return 0.0;
}

double measurement_llr(const SlotObservation& obs, std::span<const DensityModel> densities) {
    if (obs.y != ChannelOutcome::Success || obs.is_prestart_delivery) return 0.0;
    const std::size_t sensor = obs.sensor.value_or(0);
    if (sensor >= densities.size())
        throw MalformedObservation("slot " + std::to_string(obs.slot) + ": unknown sensor " + std::to_string(sensor));
    return densities[sensor].log_likelihood_ratio(*obs.value);
}

double slot_llr(const SlotObservation& obs, const ChannelModel& channel, std::span<const DensityModel> densities) {
    obs.validate();
    if (!obs.queue_nonempty) return 0.0;
    return channel_llr(obs.y, channel) + measurement_llr(obs, densities);
}

double slot_llr(const SlotObservation& obs, const ChannelModel& channel, const DensityModel& density) {
    return slot_llr(obs, channel, std::span<const DensityModel>(&density, 1));
}

void LlrTermLedger::record(const SlotObservation& obs, const ChannelModel& channel,
                           std::span<const DensityModel> densities) {
    obs.validate();
    if (obs.slot != last_slot() + 1)
        throw std::logic_error("ledger slots must be consecutive from 1; got " + std::to_string(obs.slot));
    Entry e;
    e.slot = obs.slot;
    e.busy = obs.queue_nonempty;
    e.channel_term = channel_llr(obs.y, channel);
    if (obs.y == ChannelOutcome::Success) {
        e.received = SampleKey{obs.sample_slot.value_or(obs.sample_index.value_or(0)), obs.sensor.value_or(0),
                               obs.sample_index.value_or(0)};
        e.measurement_term = measurement_llr(obs, densities);
    }
    entries_.push_back(e);
}

std::vector<double> LlrTermLedger::reassign_measurements(Slot upto) const {
    upto = std::min(upto, last_slot());
    std::vector<double> out(static_cast<std::size_t>(std::max<Slot>(upto, 0)), 0.0);
    std::vector<std::pair<SampleKey, double>> received;
    std::vector<std::size_t> reception_slots;

    auto flush = [&] {
        std::sort(received.begin(), received.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });
        for (std::size_t j = 0; j < reception_slots.size(); ++j) out[reception_slots[j]] = received[j].second;
        received.clear();
        reception_slots.clear();
    };

    for (std::size_t i = 0; i < out.size(); ++i) {
        const Entry& e = entries_[i];
        if (!e.busy) {
            flush();
            continue;
        }
        if (e.received) {
            received.emplace_back(*e.received, e.measurement_term);
            reception_slots.push_back(i);
        }
    }
    flush();
    return out;
}

std::vector<double> LlrTermLedger::slot_terms(Slot upto) const {
    std::vector<double> terms = reassign_measurements(upto);
    for (std::size_t i = 0; i < terms.size(); ++i) terms[i] = entries_[i].channel_term + terms[i];
    return terms;
}

std::vector<double> LlrTermLedger::raw_slot_terms(Slot upto) const {
    upto = std::min(upto, last_slot());
    std::vector<double> terms(static_cast<std::size_t>(std::max<Slot>(upto, 0)));
    for (std::size_t i = 0; i < terms.size(); ++i) terms[i] = entries_[i].channel_term + entries_[i].measurement_term;
    return terms;
}

double LlrTermLedger::cumulative_llr(Slot from, Slot to) const {
    if (from > to) throw std::invalid_argument("cumulative_llr needs from <= to");
    if (to > last_slot()) throw std::out_of_range("cumulative_llr beyond the recorded slots");
    const std::vector<double> terms = slot_terms(to);
    double sum = 0.0;
    for (Slot i = std::max<Slot>(from, 1); i <= to; ++i) sum += terms[static_cast<std::size_t>(i - 1)];
    return sum;
}

double cumulative_llr(const LlrTermLedger& ledger, Slot from, Slot to) { return ledger.cumulative_llr(from, to); }

std::vector<double> reassign_measurements(const LlrTermLedger& ledger) { return ledger.reassign_measurements(); }

}  // namespace qcd
