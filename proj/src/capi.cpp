#include "qcd/qcd.h"

#include <cstdlib>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <sstream>
#include <string>

#include "qcd/config.hpp"
#include "qcd/errors.hpp"
#include "qcd/experiments.hpp"
#include "qcd/verify.hpp"

struct qcd_scenario {
    qcd::RunConfig rc;
};

namespace {

thread_local std::string last_error;

struct IoFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

template <class F>
qcd_status guarded(F&& body) {
    try {
        body();
        last_error.clear();
        return QCD_OK;
    } catch (const qcd::ConfigError& e) {
        last_error = e.what();
        return QCD_ERR_CONFIG;
    } catch (const qcd::DomainError& e) {
        last_error = e.what();
        return QCD_ERR_DOMAIN;
    } catch (const qcd::NumericError& e) {
        last_error = e.what();
        return QCD_ERR_NUMERIC;
    } catch (const qcd::EstimationError& e) {
        last_error = e.what();
        return QCD_ERR_ESTIMATION;
    } catch (const IoFailure& e) {
        last_error = e.what();
        return QCD_ERR_IO;
    } catch (const std::exception& e) {
        last_error = e.what();
        return QCD_ERR_INTERNAL;
    } catch (...) {
        last_error = "unknown error";
        return QCD_ERR_INTERNAL;
    }
}

void require(const void* p, const char* what) {
    if (!p) throw qcd::ConfigError(std::string(what) + " must not be NULL");
}

char* dup_string(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (!out) throw std::bad_alloc();
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

qcd::BatchOptions batch(const qcd_scenario* s, unsigned parallelism) {
    return {s->rc.rng, parallelism == 0 ? 1u : parallelism};
}

qcd::DetectorKind single_detector(const qcd::ExperimentSpec& spec) {
    if (spec.grid.detectors.size() > 1) throw qcd::ConfigError("expected a single detector");
    return spec.grid.detectors.empty() ? qcd::DetectorKind::RecursiveCusum : spec.grid.detectors.front();
}

}  // namespace

extern "C" {

const char* qcd_last_error(void) { return last_error.c_str(); }

const char* qcd_version(void) { return "1.0.0"; }

qcd_status qcd_scenario_from_json(const char* json, qcd_scenario** out) {
    return guarded([&] {
        require(json, "json");
        require(out, "out");
        *out = new qcd_scenario{qcd::parse_run_config(json)};
    });
}

qcd_status qcd_scenario_from_file(const char* path, qcd_scenario** out) {
    return guarded([&] {
        require(path, "path");
        require(out, "out");
        if (!std::ifstream(path)) throw IoFailure(std::string("cannot read config file '") + path + "'");
        *out = new qcd_scenario{qcd::load_run_config(path)};
    });
}

qcd_status qcd_scenario_default(qcd_scenario** out) {
    return guarded([&] {
        require(out, "out");
        *out = new qcd_scenario{qcd::default_run_config()};
    });
}

void qcd_scenario_free(qcd_scenario* scenario) { delete scenario; }

qcd_status qcd_scenario_set_seed(qcd_scenario* scenario, uint64_t seed) {
    return guarded([&] {
        require(scenario, "scenario");
        scenario->rc.rng.master_seed = seed;
        scenario->rc.spec.scenario.seed = seed;
    });
}

qcd_status qcd_scenario_set_reps(qcd_scenario* scenario, int64_t reps) {
    return guarded([&] {
        require(scenario, "scenario");
        if (reps < 1) throw qcd::ConfigError("reps must be >= 1");
        scenario->rc.spec.reps = reps;
    });
}

qcd_status qcd_scenario_grid_size(const qcd_scenario* scenario, size_t* out) {
    return guarded([&] {
        require(scenario, "scenario");
        require(out, "out");
        *out = scenario->rc.spec.size();
    });
}

qcd_status qcd_information_number(const qcd_scenario* scenario, double* out) {
    return guarded([&] {
        require(scenario, "scenario");
        require(out, "out");
        const auto& c = scenario->rc.spec.scenario;
        *out = c.multi_sensor() ? qcd::information_number_multisensor(c) : qcd::information_number(c);
    });
}

qcd_status qcd_run_replication(const qcd_scenario* scenario, const char* detector, double threshold,
                               uint64_t replication, qcd_replication* out) {
    return guarded([&] {
        require(scenario, "scenario");
        require(detector, "detector");
        require(out, "out");
        const auto r = qcd::run_replication(scenario->rc.spec.scenario, qcd::detector_kind_from_string(detector),
                                            threshold, scenario->rc.rng, replication);
        out->stopping_slot = r.stopping_slot.value_or(-1);
        out->change_slot = r.change_slot.value_or(-1);
        out->initial_queue = r.initial_queue;
    });
}

qcd_status qcd_simulate(const qcd_scenario* scenario, unsigned parallelism, char** csv_out) {
    return guarded([&] {
        require(scenario, "scenario");
        require(csv_out, "csv_out");
        const auto row = qcd::simulate_point(scenario->rc.spec, batch(scenario, parallelism));
        if (row.failed()) throw qcd::EstimationError(row.status);
        std::ostringstream os;
        qcd::write_csv(os, {row});
        *csv_out = dup_string(os.str());
    });
}

qcd_status qcd_sweep(const qcd_scenario* scenario, unsigned parallelism, char** csv_out, size_t* failed_rows) {
    return guarded([&] {
        require(scenario, "scenario");
        require(csv_out, "csv_out");
        const auto rows = qcd::sweep(scenario->rc.spec, batch(scenario, parallelism));
        std::size_t failed = 0;
        for (const auto& r : rows) failed += r.failed() ? 1 : 0;
        std::ostringstream os;
        qcd::write_csv(os, rows);
        *csv_out = dup_string(os.str());
        if (failed_rows) *failed_rows = failed;
    });
}

qcd_status qcd_calibrate(const qcd_scenario* scenario, unsigned parallelism, double* threshold_out,
                         double* arl_out) {
    return guarded([&] {
        require(scenario, "scenario");
        require(threshold_out, "threshold_out");
        const auto& spec = scenario->rc.spec;
        if (spec.grid.gammas.size() != 1) throw qcd::ConfigError("calibrate needs exactly one target gamma");
        const auto cal = qcd::calibrate_threshold(spec.scenario, single_detector(spec), spec.grid.gammas.front(),
                                                  spec.tolerance, spec.calibration_reps, spec.arl_horizon,
                                                  batch(scenario, parallelism));
        *threshold_out = cal.threshold;
        if (arl_out) *arl_out = cal.arl.mean;
    });
}

qcd_status qcd_trace(const qcd_scenario* scenario, uint64_t replication, char** text_out) {
    return guarded([&] {
        require(scenario, "scenario");
        require(text_out, "text_out");
        const auto& spec = scenario->rc.spec;
        if (spec.grid.thresholds.size() != 1) throw qcd::ConfigError("trace needs exactly one threshold");
        std::ostringstream os;
        qcd::write_trace_header(os);
        qcd::run_replication(spec.scenario, single_detector(spec), spec.grid.thresholds.front(), scenario->rc.rng,
                             replication, [&](const qcd::TraceRow& row) { qcd::write_trace_row(os, row); });
        *text_out = dup_string(os.str());
    });
}

qcd_status qcd_verify(const qcd_scenario* scenario, unsigned parallelism, char** report_out, int* all_passed) {
    return guarded([&] {
        require(scenario, "scenario");
        require(report_out, "report_out");
        const auto checks = qcd::verify_invariants(scenario->rc, parallelism == 0 ? 1u : parallelism);
        bool ok = true;
        std::ostringstream os;
        for (const auto& c : checks) {
            ok = ok && c.passed;
            os << (c.passed ? "PASS " : "FAIL ") << c.name << ": " << c.detail << '\n';
        }
        *report_out = dup_string(os.str());
        if (all_passed) *all_passed = ok ? 1 : 0;
    });
}

void qcd_string_free(char* s) { std::free(s); }

}  // extern "C"
