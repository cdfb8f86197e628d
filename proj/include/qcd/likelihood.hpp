#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "qcd/model.hpp"

namespace qcd {

enum class ChannelOutcome { Success, Failure, Idle };

// What the decision maker sees at the end of slot k: (U_k, Y_k, J_k, Z_k) plus
// the queue-derived side information it can infer (Q_k > 0, prestart flag).
struct SlotObservation {
    Slot slot = 0;
    ChannelOutcome y = ChannelOutcome::Idle;
    std::optional<std::size_t> sensor;         // U_k (0-based)
    std::optional<std::int64_t> sample_index;  // J_k
    std::optional<Slot> sample_slot;           // sampling slot of the delivered packet
    std::optional<double> value;               // Z_k
    bool queue_nonempty = false;
    bool is_prestart_delivery = false;

    // Throws MalformedObservation when the tuple contradicts itself.
    void validate() const;
};

// log P0(y)/Pinf(y) for an attempted slot, 0 for an idle one.
double channel_llr(ChannelOutcome y, const ChannelModel& channel);

// Measurement part of the slot increment (0 unless a fresh sample was delivered).
double measurement_llr(const SlotObservation& obs, std::span<const DensityModel> densities);

// L_k with S_nu = 0: channel term plus measurement term of the delivering sensor.
double slot_llr(const SlotObservation& obs, const ChannelModel& channel, std::span<const DensityModel> densities);
double slot_llr(const SlotObservation& obs, const ChannelModel& channel, const DensityModel& density);

// Arrival order of samples across sensors.
struct SampleKey {
    Slot sample_slot = 0;
    std::size_t sensor = 0;
    std::int64_t sample_index = 0;

    friend auto operator<=>(const SampleKey&, const SampleKey&) = default;
};

// Full record of per-slot channel terms and per-delivery measurement terms.
// Slots must be recorded consecutively starting at slot 1.
class LlrTermLedger {
public:
    struct Entry {
        Slot slot = 0;
        bool busy = false;
        double channel_term = 0.0;
        std::optional<SampleKey> received;  // set on Success
        double measurement_term = 0.0;      // raw term of the sample received in this slot
    };

    void record(const SlotObservation& obs, const ChannelModel& channel, std::span<const DensityModel> densities);
    void clear() { entries_.clear(); }

    Slot last_slot() const noexcept { return static_cast<Slot>(entries_.size()); }
    const std::vector<Entry>& entries() const noexcept { return entries_; }

    // Measurement terms re-attached to reception slots as of the end of slot
    // `upto`: inside each busy period the received samples are sorted by
    // arrival and the j-th oldest is credited to the j-th reception slot.
    // Index i of the result holds slot i + 1.
    std::vector<double> reassign_measurements(Slot upto) const;
    std::vector<double> reassign_measurements() const { return reassign_measurements(last_slot()); }

    // channel term + reassigned measurement term for slots 1..upto.
    std::vector<double> slot_terms(Slot upto) const;
    // Slot terms without reordering (the measurement credited where it arrived).
    std::vector<double> raw_slot_terms(Slot upto) const;

    // Sum of reassigned slot terms over slots from..to (inclusive), with the
    // reassignment taken as of the end of slot `to`.
    double cumulative_llr(Slot from, Slot to) const;

private:
    std::vector<Entry> entries_;
};

double cumulative_llr(const LlrTermLedger& ledger, Slot from, Slot to);
std::vector<double> reassign_measurements(const LlrTermLedger& ledger);

}  // namespace qcd
