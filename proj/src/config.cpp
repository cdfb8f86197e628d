#include "qcd/config.hpp"

#include <cmath>
#include <fstream>
#include <initializer_list>
#include <sstream>

#include <json.hpp>

#include "qcd/errors.hpp"

namespace qcd {

namespace {

using nlohmann::json;

class Reader {
public:
    std::vector<std::string> problems;

    void fail(const std::string& path, const std::string& msg) { problems.push_back(path + ": " + msg); }

    bool expect_object(const json& j, const std::string& path) {
        if (j.is_object()) return true;
        fail(path, "expected an object");
        return false;
    }

    void only_keys(const json& j, const std::string& path, std::initializer_list<const char*> allowed) {
        for (const auto& [key, _] : j.items()) {
            bool ok = false;
            for (const char* a : allowed) ok = ok || key == a;
            if (!ok) fail(join(path, key), "unknown key");
        }
    }

    static std::string join(const std::string& path, const std::string& key) {
        return path.empty() ? key : path + "." + key;
    }

    std::optional<double> number(const json& obj, const std::string& path, const char* key) {
        if (!obj.contains(key)) return std::nullopt;
        const json& v = obj.at(key);
        if (!v.is_number()) {
            fail(join(path, key), "expected a number");
            return std::nullopt;
        }
        return v.get<double>();
    }

    std::optional<std::int64_t> integer(const json& obj, const std::string& path, const char* key) {
        if (!obj.contains(key)) return std::nullopt;
        return integer_value(obj.at(key), join(path, key));
    }

    std::optional<std::int64_t> integer_value(const json& v, const std::string& path) {
        if (v.is_number_integer()) return v.get<std::int64_t>();
        if (v.is_number_float()) {
            const double d = v.get<double>();
            if (std::floor(d) == d && std::abs(d) < 9e15) return static_cast<std::int64_t>(d);
        }
        fail(path, "expected an integer");
        return std::nullopt;
    }

    std::optional<bool> boolean(const json& obj, const std::string& path, const char* key) {
        if (!obj.contains(key)) return std::nullopt;
        const json& v = obj.at(key);
        if (!v.is_boolean()) {
            fail(join(path, key), "expected true or false");
            return std::nullopt;
        }
        return v.get<bool>();
    }

    std::optional<std::string> string(const json& obj, const std::string& path, const char* key) {
        if (!obj.contains(key)) return std::nullopt;
        const json& v = obj.at(key);
        if (!v.is_string()) {
            fail(join(path, key), "expected a string");
            return std::nullopt;
        }
        return v.get<std::string>();
    }

    double required_number(const json& obj, const std::string& path, const char* key) {
        if (!obj.contains(key)) {
            fail(join(path, key), "required");
            return 0.0;
        }
        return number(obj, path, key).value_or(0.0);
    }

    // Finite slot or "inf" / null for no change.
    std::optional<Slot> change_slot(const json& v, const std::string& path) {
        if (v.is_null() || (v.is_string() && v.get<std::string>() == "inf")) return std::nullopt;
        if (v.is_string()) {
            fail(path, "expected an integer or \"inf\"");
            return std::nullopt;
        }
        return integer_value(v, path);
    }

    SamplingProcess sampling(const json& j, const std::string& path) {
        if (!expect_object(j, path)) return {};
        const std::string type = string(j, path, "type").value_or("bernoulli");
        if (type == "bernoulli") {
            only_keys(j, path, {"type", "rate"});
            return BernoulliSampling{required_number(j, path, "rate")};
        }
        if (type == "periodic") {
            only_keys(j, path, {"type", "interval", "phase"});
            PeriodicSampling p;
            if (!j.contains("interval")) fail(join(path, "interval"), "required");
            p.interval = integer(j, path, "interval").value_or(p.interval);
            p.phase = integer(j, path, "phase").value_or(p.phase);
            return p;
        }
        fail(join(path, "type"), "expected \"bernoulli\" or \"periodic\"");
        return {};
    }

    DensityModel density(const json& j, const std::string& path) {
        if (!expect_object(j, path)) return {};
        const std::string type = string(j, path, "type").value_or("gaussian");
        if (type == "gaussian") {
            only_keys(j, path, {"type", "mean0", "mean1", "variance", "std_dev"});
            GaussianKnownVariance g;
            g.mean0 = number(j, path, "mean0").value_or(g.mean0);
            g.mean1 = number(j, path, "mean1").value_or(g.mean1);
            const auto var = number(j, path, "variance");
            const auto sd = number(j, path, "std_dev");
            if (var && sd) fail(path, "give variance or std_dev, not both");
            if (var) g.variance = *var;
            if (sd) g.variance = *sd * *sd;
            if (!(g.variance > 0.0) || !std::isfinite(g.variance)) {
                fail(join(path, sd ? "std_dev" : "variance"), "must be finite and > 0");
                g.variance = 1.0;
            }
            if (!std::isfinite(g.mean0) || !std::isfinite(g.mean1)) {
                fail(path, "means must be finite");
                g.mean0 = 0.0;
                g.mean1 = 1.0;
            }
            return g;
        }
        if (type == "bernoulli") {
            only_keys(j, path, {"type", "q0", "q1"});
            BernoulliMeasurement b{required_number(j, path, "q0"), required_number(j, path, "q1")};
            if (!(b.q0 > 0.0 && b.q0 < 1.0 && b.q1 > 0.0 && b.q1 < 1.0)) {
                fail(path, "q0 and q1 must lie in (0, 1)");
                return {};
            }
            return b;
        }
        fail(join(path, "type"), "expected \"gaussian\" or \"bernoulli\"");
        return {};
    }

    Discipline discipline(const json& j, const std::string& path) {
        if (j.is_string()) {
            const std::string s = j.get<std::string>();
            if (s == "fcfs") return Discipline::fcfs();
            if (s == "lcfs") return Discipline::lcfs();
            if (s == "random") return Discipline::random();
            fail(path, "unknown discipline '" + s + "' (fcfs, lcfs, random, or an object for discounted_info/lookback)");
            return {};
        }
        if (!expect_object(j, path)) return {};
        const std::string type = string(j, path, "type").value_or("");
        if (type == "discounted_info") {
            only_keys(j, path, {"type", "alpha"});
            const double a = required_number(j, path, "alpha");
            if (!(a > 0.0 && a < 1.0)) fail(join(path, "alpha"), "must lie in (0, 1)");
            return Discipline::discounted_info(a);
        }
        if (type == "lookback") {
            only_keys(j, path, {"type", "window"});
            const auto w = integer(j, path, "window");
            if (!w) fail(join(path, "window"), "required");
            if (w && *w < 1) fail(join(path, "window"), "must be >= 1");
            return Discipline::look_back(w.value_or(1));
        }
        if (type == "fcfs" || type == "lcfs" || type == "random") {
            only_keys(j, path, {"type"});
            return discipline(json(type), path);
        }
        fail(join(path, "type"), "expected fcfs, lcfs, random, discounted_info or lookback");
        return {};
    }

    DetectorKind detector(const json& j, const std::string& path) {
        if (!j.is_string()) {
            fail(path, "expected a detector name");
            return DetectorKind::RecursiveCusum;
        }
        try {
            return detector_kind_from_string(j.get<std::string>());
        } catch (const ConfigError& e) {
            fail(path, e.what());
            return DetectorKind::RecursiveCusum;
        }
    }

    ScenarioConfig scenario(const json& j, const std::string& path) {
        ScenarioConfig c;
        if (!expect_object(j, path)) return c;
        only_keys(j, path,
                  {"sensors", "channel", "change_slot", "retransmit_cap", "discipline", "access", "initial_queue",
                   "horizon", "allow_unstable"});

        const std::string sp = join(path, "sensors");
        if (!j.contains("sensors") || !j.at("sensors").is_array() || j.at("sensors").empty()) {
            fail(sp, "expected a non-empty array");
        } else {
            std::size_t i = 0;
            for (const auto& s : j.at("sensors")) {
                const std::string p = sp + "[" + std::to_string(i++) + "]";
                if (!expect_object(s, p)) continue;
                only_keys(s, p, {"sampling", "density"});
                SensorConfig sc;
                if (s.contains("sampling")) sc.sampling = sampling(s.at("sampling"), join(p, "sampling"));
                else fail(join(p, "sampling"), "required");
                if (s.contains("density")) sc.density = density(s.at("density"), join(p, "density"));
                else fail(join(p, "density"), "required");
                c.sensors.push_back(std::move(sc));
            }
        }

        const std::string cp = join(path, "channel");
        if (!j.contains("channel")) {
            fail(cp, "required");
        } else if (expect_object(j.at("channel"), cp)) {
            const json& ch = j.at("channel");
            only_keys(ch, cp, {"p0", "p1", "p"});
            if (ch.contains("p")) {
                if (ch.contains("p0") || ch.contains("p1")) fail(cp, "give p, or p0 and p1");
                c.channel.p0 = c.channel.p1 = number(ch, cp, "p").value_or(0.5);
            } else {
                c.channel.p0 = required_number(ch, cp, "p0");
                c.channel.p1 = required_number(ch, cp, "p1");
            }
        }

        if (j.contains("change_slot")) c.change_slot = change_slot(j.at("change_slot"), join(path, "change_slot"));
        if (j.contains("retransmit_cap")) {
            const json& v = j.at("retransmit_cap");
            if (!(v.is_null() || (v.is_string() && v.get<std::string>() == "inf")))
                c.retransmit_cap = integer_value(v, join(path, "retransmit_cap"));
        }
        if (j.contains("discipline")) c.discipline = discipline(j.at("discipline"), join(path, "discipline"));
        if (const auto a = string(j, path, "access")) {
            if (*a == "random_access") c.access = AccessMode::RandomAccess;
            else if (*a == "scheduled") c.access = AccessMode::Scheduled;
            else fail(join(path, "access"), "expected \"random_access\" or \"scheduled\"");
        }
        if (j.contains("initial_queue")) {
            const json& v = j.at("initial_queue");
            const std::string ip = join(path, "initial_queue");
            if (v.is_string() && v.get<std::string>() == "stationary") {
                c.initial_queue = InitialQueue::stationary();
            } else if (v.is_array()) {
                c.initial_queue.kind = InitialQueue::Kind::Known;
                std::size_t i = 0;
                for (const auto& q : v) c.initial_queue.lengths.push_back(
                    integer_value(q, ip + "[" + std::to_string(i++) + "]").value_or(0));
            } else if (v.is_string()) {
                fail(ip, "expected an integer, an array or \"stationary\"");
            } else {
                c.initial_queue = InitialQueue::known(integer_value(v, ip).value_or(0));
            }
        }
        c.horizon = integer(j, path, "horizon").value_or(c.horizon);
        c.allow_unstable = boolean(j, path, "allow_unstable").value_or(false);
        return c;
    }

    template <class T, class F>
    std::vector<T> list(const json& obj, const std::string& path, const char* key, F&& item) {
        std::vector<T> out;
        if (!obj.contains(key)) return out;
        const json& v = obj.at(key);
        const std::string p = join(path, key);
        if (!v.is_array() || v.empty()) {
            fail(p, "expected a non-empty array");
            return out;
        }
        std::size_t i = 0;
        for (const auto& e : v) out.push_back(item(e, p + "[" + std::to_string(i++) + "]"));
        return out;
    }

    double number_value(const json& v, const std::string& path) {
        if (v.is_number()) return v.get<double>();
        fail(path, "expected a number");
        return 0.0;
    }
};

}  // namespace

RunConfig parse_run_config(const std::string& json_text) {
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("invalid JSON: ") + e.what());
    }

    Reader rd;
    RunConfig rc;
    if (!rd.expect_object(root, "$")) throw ConfigError(std::move(rd.problems));
    rd.only_keys(root, "",
                 {"name", "scenario", "detector", "threshold", "gamma", "reps", "calibration_reps", "arl_horizon",
                  "tolerance", "estimate_arl", "seed", "coupling", "grid"});

    auto& spec = rc.spec;
    spec.name = rd.string(root, "", "name").value_or(spec.name);
    if (root.contains("scenario")) spec.scenario = rd.scenario(root.at("scenario"), "scenario");
    else rd.fail("scenario", "required");

    const auto num = [&](const json& v, const std::string& p) { return rd.number_value(v, p); };
    if (root.contains("grid") && rd.expect_object(root.at("grid"), "grid")) {
        const json& g = root.at("grid");
        rd.only_keys(g, "grid", {"rates", "thresholds", "gammas", "disciplines", "detectors", "change_slots"});
        spec.grid.rates = rd.list<double>(g, "grid", "rates", num);
        spec.grid.thresholds = rd.list<double>(g, "grid", "thresholds", num);
        spec.grid.gammas = rd.list<double>(g, "grid", "gammas", num);
        spec.grid.disciplines = rd.list<Discipline>(
            g, "grid", "disciplines", [&](const json& v, const std::string& p) { return rd.discipline(v, p); });
        spec.grid.detectors = rd.list<DetectorKind>(
            g, "grid", "detectors", [&](const json& v, const std::string& p) { return rd.detector(v, p); });
        spec.grid.change_slots = rd.list<std::optional<Slot>>(
            g, "grid", "change_slots", [&](const json& v, const std::string& p) { return rd.change_slot(v, p); });
    }

    if (root.contains("detector")) {
        if (!spec.grid.detectors.empty()) rd.fail("detector", "also given as grid.detectors");
        spec.grid.detectors = {rd.detector(root.at("detector"), "detector")};
    }
    if (const auto h = rd.number(root, "", "threshold")) {
        if (!spec.grid.thresholds.empty()) rd.fail("threshold", "also given as grid.thresholds");
        spec.grid.thresholds = {*h};
    }
    if (const auto g = rd.number(root, "", "gamma")) {
        if (!spec.grid.gammas.empty()) rd.fail("gamma", "also given as grid.gammas");
        spec.grid.gammas = {*g};
    }

    spec.reps = rd.integer(root, "", "reps").value_or(spec.reps);
    spec.calibration_reps = rd.integer(root, "", "calibration_reps").value_or(spec.calibration_reps);
    spec.arl_horizon = rd.integer(root, "", "arl_horizon").value_or(spec.arl_horizon);
    spec.tolerance = rd.number(root, "", "tolerance").value_or(spec.tolerance);
    spec.estimate_arl = rd.boolean(root, "", "estimate_arl").value_or(spec.estimate_arl);

    if (root.contains("seed")) {
        const json& s = root.at("seed");
        if (s.is_number_unsigned()) rc.rng.master_seed = s.get<std::uint64_t>();
        else rd.fail("seed", "expected a non-negative integer");
    }
    if (const auto c = rd.string(root, "", "coupling")) {
        if (*c == "coupled") rc.rng.coupling = CouplingMode::CoupledAcrossDisciplines;
        else if (*c == "independent") rc.rng.coupling = CouplingMode::Independent;
        else rd.fail("coupling", "expected \"coupled\" or \"independent\"");
    }
    spec.scenario.seed = rc.rng.master_seed;

    if (rd.problems.empty()) {
        try {
            spec.scenario.validate();
        } catch (const ConfigError& e) {
            for (const auto& p : e.problems()) rd.fail("scenario", p);
        }
        try {
            spec.validate();
        } catch (const ConfigError& e) {
            for (const auto& p : e.problems()) rd.fail("$", p);
        }
    }
    if (!rd.problems.empty()) throw ConfigError(std::move(rd.problems));
    return rc;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_run_config(ss.str());
}

RunConfig default_run_config() {
    RunConfig rc;
    auto& s = rc.spec;
    s.name = "default";
    s.scenario.sensors = {SensorConfig{BernoulliSampling{0.1}, GaussianKnownVariance{0.0, 1.0, 0.5}}};
    s.scenario.channel = {0.61, 0.60};
    s.scenario.change_slot = 1;
    s.scenario.horizon = 10'000;
    s.grid.thresholds = {10.0};
    s.reps = 1000;
    return rc;
}

}  // namespace qcd
