#include "qcd/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>

#include "qcd/errors.hpp"

namespace qcd {

namespace {

struct Moments {
    double mean = 0.0;
    double std_error = 0.0;
};

Moments moments(const std::vector<double>& xs) {
    Moments m;
    if (xs.empty()) return m;
    const auto n = static_cast<double>(xs.size());
    m.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
    if (xs.size() > 1) {
        double ss = 0.0;
        for (double x : xs) ss += (x - m.mean) * (x - m.mean);
        m.std_error = std::sqrt(ss / (n - 1.0) / n);
    }
    return m;
}

std::vector<DensityModel> densities_of(const ScenarioConfig& config) {
    std::vector<DensityModel> out;
    out.reserve(config.sensors.size());
    for (const auto& s : config.sensors) out.push_back(s.density);
    return out;
}

ScenarioConfig no_change(const ScenarioConfig& config, Slot horizon) {
    ScenarioConfig c = config;
    c.change_slot.reset();
    c.horizon = horizon;
    return c;
}

}  // namespace

AddEstimate estimate_add(const ScenarioConfig& config, DetectorKind detector, double threshold, std::int64_t reps,
                         const BatchOptions& opts) {
    if (!config.change_slot) throw ConfigError("estimate_add needs a finite change slot");
    const auto runs = run_batch(config, detector, threshold, reps, opts.parallelism, opts.rng);

    AddEstimate est;
    est.reps = reps;
    std::vector<double> delays;
    delays.reserve(runs.size());
    double stop_sum = 0.0;
    std::int64_t stopped = 0;
    for (const auto& r : runs) {
        if (r.truncated()) {
            ++est.truncated;
            continue;
        }
        stop_sum += static_cast<double>(*r.stopping_slot);
        ++stopped;
        if (r.false_alarm()) {
            ++est.false_alarms;
            continue;
        }
        delays.push_back(static_cast<double>(*r.stopping_slot - *r.change_slot));
    }
    if (delays.empty()) {
        throw EstimationError("no replication alarmed after the change (" + std::to_string(est.truncated) +
                              " truncated, " + std::to_string(est.false_alarms) + " false alarms of " +
                              std::to_string(reps) + ")");
    }
    const Moments m = moments(delays);
    est.mean = m.mean;
    est.std_error = m.std_error;
    est.used = static_cast<std::int64_t>(delays.size());
    est.mean_stopping_slot = stopped ? stop_sum / static_cast<double>(stopped) : 0.0;
    return est;
}

ArlEstimate estimate_arl2fa(const ScenarioConfig& config, DetectorKind detector, double threshold, std::int64_t reps,
                            Slot horizon, const BatchOptions& opts) {
    if (horizon < 1) throw ConfigError("ARL2FA horizon must be >= 1");
    const ScenarioConfig c = no_change(config, horizon);
    const auto runs = run_batch(c, detector, threshold, reps, opts.parallelism, opts.rng);

    ArlEstimate est;
    est.reps = reps;
    std::vector<double> t;
    t.reserve(runs.size());
    for (const auto& r : runs) {
        if (r.truncated()) ++est.truncated;
        t.push_back(static_cast<double>(r.stopping_slot.value_or(horizon)));
    }
    const Moments m = moments(t);
    est.mean = m.mean;
    est.std_error = m.std_error;
    est.lower_bound = est.truncated > 0;
    return est;
}

std::optional<Slot> RecordPath::stopping_slot(double h) const {
    const auto it = std::upper_bound(values.begin(), values.end(), h);
    if (it == values.end()) return std::nullopt;
    return slots[static_cast<std::size_t>(it - values.begin())];
}

std::vector<RecordPath> record_paths(const ScenarioConfig& config, DetectorKind detector, double cap,
                                     std::int64_t reps, Slot horizon, const BatchOptions& opts) {
    if (reps < 1) throw ConfigError("record_paths needs reps >= 1");
    if (horizon < 1) throw ConfigError("ARL2FA horizon must be >= 1");
    const ScenarioConfig c = no_change(config, horizon);
    c.validate();
    const auto densities = densities_of(c);

    std::vector<RecordPath> paths(static_cast<std::size_t>(reps));
    parallel_for(reps, opts.parallelism, [&](std::int64_t i) {
        Simulation sim(c, opts.rng, static_cast<std::uint64_t>(i));
        Detector det(detector, cap, c.channel, densities);
        RecordPath& path = paths[static_cast<std::size_t>(i)];
        double best = 0.0;
        for (Slot k = 1; k <= horizon; ++k) {
            const auto st = det.step(sim.advance().obs);
            if (st.statistic > best) {
                best = st.statistic;
                path.values.push_back(best);
                path.slots.push_back(k);
            }
            if (st.alarm) break;
        }
    });
    return paths;
}

ArlEstimate arl_from_records(const std::vector<RecordPath>& paths, double h, Slot horizon) {
    ArlEstimate est;
    est.reps = static_cast<std::int64_t>(paths.size());
    std::vector<double> t;
    t.reserve(paths.size());
    for (const auto& p : paths) {
        const auto s = p.stopping_slot(h);
        if (!s) ++est.truncated;
        t.push_back(static_cast<double>(s.value_or(horizon)));
    }
    const Moments m = moments(t);
    est.mean = m.mean;
    est.std_error = m.std_error;
    est.lower_bound = est.truncated > 0;
    return est;
}

Calibration calibrate_threshold(const ScenarioConfig& config, DetectorKind detector, double gamma, double tolerance,
                                std::int64_t reps, Slot horizon, const BatchOptions& opts, int max_iter) {
    if (!(gamma > 1.0)) throw ConfigError("target ARL2FA gamma must exceed 1");
    if (!(tolerance > 0.0 && tolerance < 1.0)) throw ConfigError("calibration tolerance must lie in (0, 1)");
    if (static_cast<double>(horizon) < gamma) throw ConfigError("ARL2FA horizon is below the target gamma");

    // A pass costs about ARL(cap) slots per path, and ln gamma typically
    // overshoots gamma several fold, so probe below it first and step up using
    // ARL ~ exp(h).
    Calibration cal;
    const double h0 = std::log(gamma);
    double cap = std::max(h0 - 2.0, 0.25);
    std::vector<RecordPath> paths;
    bool bracketed = false;
    for (int i = 0; i < max_iter; ++i) {
        ++cal.iterations;
        paths = record_paths(config, detector, cap, reps, horizon, opts);
        const double arl = arl_from_records(paths, cap, horizon).mean;
        if (arl >= gamma) {
            bracketed = true;
            break;
        }
        double next = cap + std::max(std::log(gamma / arl), 0.1) + 0.3;
        if (cap < h0) next = std::min(next, h0);
        cap = next;
    }
    if (!bracketed) {
        throw EstimationError("no threshold with ARL2FA >= " + std::to_string(gamma) + " found up to h = " +
                              std::to_string(cap));
    }

    const auto rel_err = [&](const ArlEstimate& a) { return std::abs(a.mean - gamma) / gamma; };
    double lo = 0.0;
    double hi = cap;
    double best_h = hi;
    ArlEstimate best = arl_from_records(paths, hi, horizon);
    for (int i = 0; i < 200 && rel_err(best) > tolerance && hi - lo > 1e-12 * std::max(1.0, hi); ++i) {
        ++cal.iterations;
        const double mid = 0.5 * (lo + hi);
        const ArlEstimate a = arl_from_records(paths, mid, horizon);
        if (rel_err(a) < rel_err(best)) {
            best = a;
            best_h = mid;
        }
        if (a.mean >= gamma) hi = mid; else lo = mid;
    }
    cal.threshold = best_h;
    cal.arl = best;
    cal.within_tolerance = rel_err(best) <= tolerance;
    return cal;
}

std::size_t ExperimentSpec::size() const {
    const auto dim = [](std::size_t n) { return std::max<std::size_t>(n, 1); };
    return dim(grid.rates.size()) * dim(grid.disciplines.size()) * dim(grid.detectors.size()) *
           dim(grid.change_slots.size()) * (grid.thresholds.size() + grid.gammas.size());
}

void ExperimentSpec::validate() const {
    std::vector<std::string> problems;
    if (grid.thresholds.empty() && grid.gammas.empty()) problems.emplace_back("grid needs thresholds or gammas");
    for (double h : grid.thresholds)
        if (!(h > 0.0) || !std::isfinite(h)) problems.emplace_back("thresholds must be finite and > 0");
    for (double g : grid.gammas)
        if (!(g > 1.0) || !std::isfinite(g)) problems.emplace_back("gammas must be finite and > 1");
    for (double r : grid.rates)
        if (!(r > 0.0 && r < 1.0)) problems.emplace_back("grid rates must lie in (0, 1)");
    if (!grid.rates.empty() && scenario.sensors.size() != 1)
        problems.emplace_back("a rate grid needs exactly one sensor");
    if (reps < 1) problems.emplace_back("reps must be >= 1");
    if (calibration_reps < 1) problems.emplace_back("calibration_reps must be >= 1");
    if (arl_horizon < 1) problems.emplace_back("arl_horizon must be >= 1");
    if (!(tolerance > 0.0 && tolerance < 1.0)) problems.emplace_back("tolerance must lie in (0, 1)");
    if (!problems.empty()) throw ConfigError(std::move(problems));
}

namespace {

ScenarioConfig with_rate(ScenarioConfig c, double r) {
    auto& s = c.sensors.front().sampling;
    if (s.is_periodic()) {
        auto p = std::get<PeriodicSampling>(s.kind());
        p.interval = std::max<std::int64_t>(1, std::llround(1.0 / r));
        s = p;
    } else {
        s = BernoulliSampling{r};
    }
    return c;
}

std::optional<double> inverse_information(const ScenarioConfig& c) {
    try {
        const double info = c.multi_sensor() ? information_number_multisensor(c) : information_number(c);
        if (info > 0.0 && std::isfinite(info)) return 1.0 / info;
    } catch (const std::exception&) {
    }
    return std::nullopt;
}

}  // namespace

std::vector<MetricRow> sweep(const ExperimentSpec& spec, const BatchOptions& opts) {
    spec.validate();
    const auto& g = spec.grid;
    const std::vector<Discipline> disciplines =
        g.disciplines.empty() ? std::vector<Discipline>{spec.scenario.discipline} : g.disciplines;
    const std::vector<DetectorKind> detectors =
        g.detectors.empty() ? std::vector<DetectorKind>{DetectorKind::RecursiveCusum} : g.detectors;
    const std::vector<std::optional<Slot>> change_slots =
        g.change_slots.empty() ? std::vector<std::optional<Slot>>{spec.scenario.change_slot} : g.change_slots;
    std::vector<std::optional<double>> rates;
    if (g.rates.empty()) rates.emplace_back(); else rates.assign(g.rates.begin(), g.rates.end());

    std::map<std::optional<double>, std::optional<double>> inv_info_cache;
    std::vector<MetricRow> rows;
    rows.reserve(spec.size());

    for (const auto& discipline : disciplines) {
        for (DetectorKind detector : detectors) {
            for (const auto& rate : rates) {
                for (const auto& nu : change_slots) {
                    // Fixed thresholds first, then calibrated targets.
                    const std::size_t points = g.thresholds.size() + g.gammas.size();
                    for (std::size_t j = 0; j < points; ++j) {
                        MetricRow row;
                        row.scenario_id = spec.name + "-" + std::to_string(rows.size());
                        row.detector = to_string(detector);
                        row.discipline = discipline.name();
                        row.change_slot = nu;
                        try {
                            ScenarioConfig c = rate ? with_rate(spec.scenario, *rate) : spec.scenario;
                            c.discipline = discipline;
                            c.change_slot = nu;
                            row.r = c.aggregate_rate();
                            row.p0 = c.channel.p0;
                            row.p1 = c.channel.p1;
                            row.retransmit_cap = c.retransmit_cap;
                            if (discipline.kind == DisciplineKind::DiscountedInfo) row.alpha = discipline.alpha;
                            if (discipline.kind == DisciplineKind::LookBack) row.window = discipline.window;
                            c.validate();

                            if (j < g.thresholds.size()) {
                                row.h = g.thresholds[j];
                                if (spec.estimate_arl) {
                                    const auto arl = estimate_arl2fa(c, detector, row.h, spec.calibration_reps,
                                                                     spec.arl_horizon, opts);
                                    row.arl2fa = arl.mean;
                                    row.arl2fa_lower_bound = arl.lower_bound;
                                }
                            } else {
                                const double gamma = g.gammas[j - g.thresholds.size()];
                                row.gamma_target = gamma;
                                const auto cal = calibrate_threshold(c, detector, gamma, spec.tolerance,
                                                                     spec.calibration_reps, spec.arl_horizon, opts);
                                row.h = cal.threshold;
                                row.arl2fa = cal.arl.mean;
                                row.arl2fa_lower_bound = cal.arl.lower_bound;
                            }

                            auto cached = inv_info_cache.find(rate);
                            if (cached == inv_info_cache.end())
                                cached = inv_info_cache.emplace(rate, inverse_information(c)).first;
                            row.inv_information = cached->second;

                            if (nu) {
                                row.add = estimate_add(c, detector, row.h, spec.reps, opts);
                            } else {
                                row.add.reps = spec.reps;
                            }
                        } catch (const std::exception& e) {
                            row.status = std::string("error: ") + e.what();
                        }
                        rows.push_back(std::move(row));
                    }
                }
            }
        }
    }
    return rows;
}

MetricRow simulate_point(const ExperimentSpec& spec, const BatchOptions& opts) {
    if (spec.size() != 1) throw ConfigError("simulate expects exactly one grid point");
    return sweep(spec, opts).front();
}

namespace {

std::string num(double x) {
    if (!std::isfinite(x)) return "";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", x);
    return buf;
}

std::string num(const std::optional<double>& x) { return x ? num(*x) : std::string(); }

std::string csv_text(std::string s) {
    std::replace(s.begin(), s.end(), ',', ';');
    std::replace(s.begin(), s.end(), '\n', ' ');
    return s;
}

}  // namespace

void write_csv_header(std::ostream& os) {
    os << "scenario_id,detector,discipline,r,s,p0,p1,K,alpha,w,h,gamma_target,arl2fa,arl2fa_lb_flag,"
          "add_mean,add_stderr,add_over_h,inv_I,reps,nu,mean_T,add_used,false_alarms,truncated,status\n";
}

void write_csv_row(std::ostream& os, const MetricRow& row) {
    const bool have_add = row.add.used > 0;
    os << csv_text(row.scenario_id) << ',' << row.detector << ',' << csv_text(row.discipline) << ',' << num(row.r)
       << ',' << (row.r > 0.0 ? num(1.0 / row.r) : std::string()) << ',' << num(row.p0) << ',' << num(row.p1)
       << ',' << (row.retransmit_cap ? std::to_string(*row.retransmit_cap) : std::string("inf")) << ','
       << num(row.alpha) << ',' << (row.window ? std::to_string(*row.window) : std::string()) << ','
       << num(row.h) << ',' << num(row.gamma_target) << ',' << num(row.arl2fa) << ','
       << (row.arl2fa_lower_bound ? 1 : 0) << ',' << (have_add ? num(row.add.mean) : "") << ','
       << (have_add ? num(row.add.std_error) : "") << ','
       << (have_add && row.h > 0.0 ? num(row.add.mean / row.h) : "") << ',' << num(row.inv_information) << ','
       << row.add.reps << ',' << (row.change_slot ? std::to_string(*row.change_slot) : std::string("inf")) << ','
       << (have_add ? num(row.add.mean_stopping_slot) : "") << ',' << row.add.used << ','
       << row.add.false_alarms << ',' << row.add.truncated << ',' << csv_text(row.status) << '\n';
}

void write_csv(std::ostream& os, const std::vector<MetricRow>& rows) {
    write_csv_header(os);
    for (const auto& r : rows) write_csv_row(os, r);
}

LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw DomainError("linear_fit needs two equal-length series, n >= 2");
    const auto n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxx = 0.0;
    double sxy = 0.0;
    double syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0) throw DomainError("linear_fit needs at least two distinct x values");
    LinearFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    fit.r_squared = syy == 0.0 ? 1.0 : sxy * sxy / (sxx * syy);
    return fit;
}

}  // namespace qcd
