#pragma once

#include <string>

#include "qcd/experiments.hpp"
#include "qcd/rng.hpp"

namespace qcd {

// A parsed experiment file: the scenario, its grid and the RNG policy.
struct RunConfig {
    ExperimentSpec spec;
    RngPolicy rng;
};

// Parses the JSON experiment schema (see README). Unknown keys, wrong types and
// out-of-range values are all reported in one ConfigError, each prefixed with
// its path, e.g. "scenario.sensors[1].density.variance: must be > 0".
RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::string& path);

// Built-in single-sensor scenario used when no config is given.
RunConfig default_run_config();

}  // namespace qcd
