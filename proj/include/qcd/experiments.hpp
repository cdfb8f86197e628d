#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "qcd/detectors.hpp"
#include "qcd/engine.hpp"
#include "qcd/model.hpp"
#include "qcd/rng.hpp"

namespace qcd {

struct BatchOptions {
    RngPolicy rng;
    unsigned parallelism = 1;
};

struct AddEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    std::int64_t used = 0;          // runs with T > nu
    std::int64_t false_alarms = 0;  // runs with T <= nu
    std::int64_t truncated = 0;     // horizon reached without alarm
    double mean_stopping_slot = 0.0;
    std::int64_t reps = 0;
};

// Mean of T - nu over runs that alarm after the change. Throws EstimationError
// when no run qualifies.
AddEstimate estimate_add(const ScenarioConfig& config, DetectorKind detector, double threshold, std::int64_t reps,
                         const BatchOptions& opts = {});

struct ArlEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    bool lower_bound = false;  // some runs truncated; truncated runs count as the horizon
    std::int64_t truncated = 0;
    std::int64_t reps = 0;
};

// E_inf[T]: the change slot is removed and runs stop at `horizon`.
ArlEstimate estimate_arl2fa(const ScenarioConfig& config, DetectorKind detector, double threshold, std::int64_t reps,
                            Slot horizon, const BatchOptions& opts = {});

// Running-maximum records of the CUSUM statistic on one no-change path, run
// until the statistic exceeds `cap` or the horizon is reached. The stopping
// slot for any h < cap is the slot of the first record above h.
struct RecordPath {
    std::vector<double> values;  // strictly increasing
    std::vector<Slot> slots;

    std::optional<Slot> stopping_slot(double h) const;
};

std::vector<RecordPath> record_paths(const ScenarioConfig& config, DetectorKind detector, double cap,
                                     std::int64_t reps, Slot horizon, const BatchOptions& opts = {});

// ARL estimate at h from recorded paths; h must not exceed the recording cap.
ArlEstimate arl_from_records(const std::vector<RecordPath>& paths, double h, Slot horizon);

struct Calibration {
    double threshold = 0.0;
    ArlEstimate arl;
    int iterations = 0;
    bool within_tolerance = false;
};

// Bisection on h over a fixed set of no-change paths. Starts from h = ln gamma
// and grows the cap until ARL >= gamma. Throws EstimationError when no bracket
// is found within `max_iter` cap expansions.
Calibration calibrate_threshold(const ScenarioConfig& config, DetectorKind detector, double gamma, double tolerance,
                                std::int64_t reps, Slot horizon, const BatchOptions& opts = {}, int max_iter = 40);

struct ExperimentGrid {
    std::vector<double> rates;         // single sensor only; empty keeps the scenario rate
    std::vector<double> thresholds;    // fixed h values
    std::vector<double> gammas;        // calibrate h per point instead
    std::vector<Discipline> disciplines;
    std::vector<DetectorKind> detectors;
    std::vector<std::optional<Slot>> change_slots;
};

struct ExperimentSpec {
    std::string name = "experiment";
    ScenarioConfig scenario;
    ExperimentGrid grid;
    std::int64_t reps = 10'000;
    std::int64_t calibration_reps = 2'000;
    Slot arl_horizon = 100'000;
    bool estimate_arl = false;  // fixed-h points: also estimate ARL2FA
    double tolerance = 0.05;

    // Number of grid points.
    std::size_t size() const;
    void validate() const;
};

struct MetricRow {
    std::string scenario_id;
    std::string detector;
    std::string discipline;
    double r = 0.0;
    double p0 = 0.0;
    double p1 = 0.0;
    std::optional<std::int64_t> retransmit_cap;
    std::optional<double> alpha;
    std::optional<std::int64_t> window;
    double h = 0.0;
    std::optional<double> gamma_target;
    std::optional<double> arl2fa;
    bool arl2fa_lower_bound = false;
    AddEstimate add;
    std::optional<double> inv_information;
    std::optional<Slot> change_slot;
    std::string status = "ok";

    bool failed() const { return status != "ok"; }
};

// One row per grid point, in grid order. A failing point records its error in
// `status` and the sweep continues.
std::vector<MetricRow> sweep(const ExperimentSpec& spec, const BatchOptions& opts = {});

// Single point with the scenario as given.
MetricRow simulate_point(const ExperimentSpec& spec, const BatchOptions& opts = {});

void write_csv_header(std::ostream& os);
void write_csv_row(std::ostream& os, const MetricRow& row);
void write_csv(std::ostream& os, const std::vector<MetricRow>& rows);

// Ordinary least squares y = a + b x; returns {a, b, R^2}.
struct LinearFit {
    double intercept = 0.0;
    double slope = 0.0;
    double r_squared = 0.0;
};
LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace qcd
