// qcd: command-line front end over the C API.
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "qcd/qcd.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;

struct Options {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::optional<std::int64_t> reps;
    unsigned parallel = 1;
    bool quiet = false;
};

int exit_code(qcd_status s) {
    if (s == QCD_OK) return kExitOk;
    return s == QCD_ERR_CONFIG ? kExitConfig : kExitRuntime;
}

int report(qcd_status s, const char* what) {
    if (s != QCD_OK) std::fprintf(stderr, "qcd %s: %s\n", what, qcd_last_error());
    return exit_code(s);
}

class Text {
public:
    ~Text() { qcd_string_free(p_); }
    char** out() { return &p_; }
    const char* get() const { return p_ ? p_ : ""; }

private:
    char* p_ = nullptr;
};

class Scenario {
public:
    ~Scenario() { qcd_scenario_free(p_); }
    qcd_scenario** out() { return &p_; }
    qcd_scenario* get() const { return p_; }

private:
    qcd_scenario* p_ = nullptr;
};

bool emit(const Options& o, const char* text) {
    if (o.out.empty()) {
        std::cout << text;
        std::cout.flush();
        return true;
    }
    std::ofstream f(o.out, std::ios::binary);
    f << text;
    if (!f) {
        std::fprintf(stderr, "qcd: cannot write '%s'\n", o.out.c_str());
        return false;
    }
    return true;
}

int run(const std::string& verb, const Options& o) {
    Scenario sc;
    qcd_status st = o.config.empty() ? qcd_scenario_default(sc.out())
                                     : qcd_scenario_from_file(o.config.c_str(), sc.out());
    if (st != QCD_OK) return report(st, "config");
    if (o.seed && (st = qcd_scenario_set_seed(sc.get(), *o.seed)) != QCD_OK) return report(st, "config");
    if (o.reps && (st = qcd_scenario_set_reps(sc.get(), *o.reps)) != QCD_OK) return report(st, "config");

    Text text;
    if (verb == "simulate") {
        std::size_t points = 0;
        qcd_scenario_grid_size(sc.get(), &points);
        if (points != 1) {
            std::fprintf(stderr, "qcd simulate: config has %zu grid points, use sweep\n", points);
            return kExitConfig;
        }
        if ((st = qcd_simulate(sc.get(), o.parallel, text.out())) != QCD_OK) return report(st, "simulate");
        return emit(o, text.get()) ? kExitOk : kExitRuntime;
    }
    if (verb == "sweep") {
        std::size_t failed = 0;
        if ((st = qcd_sweep(sc.get(), o.parallel, text.out(), &failed)) != QCD_OK) return report(st, "sweep");
        if (!emit(o, text.get())) return kExitRuntime;
        if (failed > 0) {
            if (!o.quiet) std::fprintf(stderr, "qcd sweep: %zu row(s) failed\n", failed);
            return kExitRuntime;
        }
        return kExitOk;
    }
    if (verb == "calibrate") {
        double h = 0.0;
        double arl = 0.0;
        if ((st = qcd_calibrate(sc.get(), o.parallel, &h, &arl)) != QCD_OK) return report(st, "calibrate");
        char line[64];
        std::snprintf(line, sizeof line, "%.10g\n", h);
        if (!o.quiet) std::fprintf(stderr, "estimated ARL2FA at h: %.6g\n", arl);
        return emit(o, line) ? kExitOk : kExitRuntime;
    }
    if (verb == "trace") {
        if ((st = qcd_trace(sc.get(), 0, text.out())) != QCD_OK) return report(st, "trace");
        return emit(o, text.get()) ? kExitOk : kExitRuntime;
    }
    // verify
    int passed = 0;
    if ((st = qcd_verify(sc.get(), o.parallel, text.out(), &passed)) != QCD_OK) return report(st, "verify");
    if (!o.quiet || !passed) std::cout << text.get();
    return passed ? kExitOk : kExitRuntime;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Quickest change detection over a lossy retransmitting link"};
    app.require_subcommand(1, 1);

    Options o;
    app.add_option("--config", o.config, "JSON experiment file")->check(CLI::ExistingFile);
    app.add_option("--out", o.out, "output file (default stdout)");
    app.add_option("--seed", o.seed, "master seed")->envname("QCD_SEED");
    app.add_option("--reps", o.reps, "replications per point")->check(CLI::PositiveNumber);
    app.add_option("--parallel", o.parallel, "worker threads")->check(CLI::PositiveNumber);
    app.add_flag("--quiet", o.quiet, "suppress progress and summary output");

    for (const char* verb : {"simulate", "sweep", "calibrate", "trace", "verify"}) app.add_subcommand(verb)->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitConfig;
    }
    const std::string verb = app.get_subcommands().front()->get_name();
    if (o.config.empty() && verb != "verify") {
        std::fprintf(stderr, "qcd %s: --config is required\n", verb.c_str());
        return kExitConfig;
    }
    return run(verb, o);
}
