#include "runner.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <random>
#include <stdexcept>

#include "normflow/manifold.hpp"
#include "normflow/one_neuron.hpp"
#include "normflow/realization.hpp"
#include "normflow/seeding.hpp"
#include "normflow/verification.hpp"

namespace normflow::runner {

namespace fs = std::filesystem;

Mode parse_mode(const std::string& name)
{
    if (name == "flow") {
        return Mode::flow;
    }
    if (name == "gd") {
        return Mode::gd;
    }
    if (name == "one-neuron") {
        return Mode::one_neuron;
    }
    if (name == "verify") {
        return Mode::verify;
    }
    throw std::invalid_argument("unknown mode '" + name + "'");
}

std::string to_string(Mode mode)
{
    switch (mode) {
    case Mode::flow:
        return "flow";
    case Mode::gd:
        return "gd";
    case Mode::one_neuron:
        return "one-neuron";
    case Mode::verify:
        return "verify";
    }
    return "";
}

Json default_config()
{
    return Json::parse(R"({
  "mode": "flow",
  "seed": 1,
  "output_dir": "out",
  "architecture": [1, 4, 1],
  "measure": {"kind": "uniform", "lower": 0.0, "upper": 1.0, "nodes_per_axis": 2048},
  "target": {"kind": "abs_offset", "c": 0.3},
  "init": {"kind": "random", "scale": 1.0, "theta3_range": 2.0},
  "flow": {"t_end": 1.0, "step": 0.001, "integrator": "rk4", "reproject": true, "gamma": 1.0,
           "gamma_cap": 1000000.0, "record_every": 1, "stationary_tol": 1e-12, "divergence_bound": 1e12},
  "gd": {"steps": 1000, "gamma": 0.001, "record_every": 1},
  "one_neuron": {"trajectories": 1, "t_end": 100.0, "step": 0.001, "integrator": "rk4", "reproject": true,
                 "gamma": 1.0, "record_every": 10, "slack": 1e-6, "conservation_rate": 1e-6,
                 "plateau_fraction": 0.1},
  "verify": {"criteria": [1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13]}
})");
}

namespace {

void require(bool condition, const std::string& message)
{
    if (!condition) {
        throw std::invalid_argument(message);
    }
}

Json parse_gamma(const std::string& text)
{
    if (text == "rescaled") {
        return "rescaled";
    }
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(text, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    require(used == text.size() && used > 0, "gamma must be a number or 'rescaled'");
    return v;
}

Integrator parse_integrator(const std::string& s)
{
    if (s == "rk4") {
        return Integrator::rk4;
    }
    if (s == "euler") {
        return Integrator::euler;
    }
    throw std::invalid_argument("integrator must be euler or rk4");
}

GammaSchedule gamma_schedule(const Json& g, double cap)
{
    if (g.is_string()) {
        require(g.get<std::string>() == "rescaled", "gamma must be a number, a list of numbers or 'rescaled'");
        return GammaSchedule::rescaled(cap);
    }
    if (g.is_array()) {
        return GammaSchedule::list(g.get<std::vector<double>>());
    }
    require(g.is_number(), "gamma must be a number, a list of numbers or 'rescaled'");
    return GammaSchedule::constant(g.get<double>());
}

std::shared_ptr<const Architecture> architecture(const Json& cfg)
{
    return make_architecture(cfg.at("architecture").get<std::vector<std::size_t>>());
}

InputMeasure measure(const Json& cfg, std::size_t dim)
{
    const Json& m = cfg.at("measure");
    const auto kind = m.at("kind").get<std::string>();
    const double lo = m.at("lower").get<double>();
    const double hi = m.at("upper").get<double>();
    if (kind == "uniform") {
        return InputMeasure::uniform(lo, hi, dim, m.at("nodes_per_axis").get<std::size_t>());
    }
    require(kind == "discrete", "measure kind must be uniform or discrete");
    return InputMeasure::discrete(lo, hi, m.at("points").get<std::vector<std::vector<double>>>(),
                                  m.at("weights").get<std::vector<double>>());
}

PiecewisePolynomial profile(const Json& t, double lo, double hi)
{
    const auto kind = t.at("kind").get<std::string>();
    if (kind == "constant") {
        return PiecewisePolynomial::constant(t.at("value").get<double>(), lo, hi);
    }
    if (kind == "affine") {
        return PiecewisePolynomial::affine(t.at("intercept").get<double>(), t.at("slope").get<double>(), lo, hi);
    }
    if (kind == "abs_offset") {
        return PiecewisePolynomial::abs_offset(t.at("c").get<double>(), lo, hi);
    }
    if (kind == "piecewise_linear") {
        std::vector<double> xs;
        std::vector<double> ys;
        for (const auto& knot : t.at("knots")) {
            require(knot.is_array() && knot.size() == 2, "knots are [x, y] pairs");
            xs.push_back(knot[0].get<double>());
            ys.push_back(knot[1].get<double>());
        }
        return PiecewisePolynomial::piecewise_linear(xs, ys);
    }
    if (kind == "polynomial") {
        return PiecewisePolynomial::polynomial(t.at("coefficients").get<std::vector<double>>(), lo, hi);
    }
    throw std::invalid_argument("unknown target kind '" + kind + "'");
}

FlowConfig flow_config(const Json& f)
{
    FlowConfig cfg;
    cfg.t_end = f.at("t_end").get<double>();
    cfg.step = f.at("step").get<double>();
    cfg.integrator = parse_integrator(f.at("integrator").get<std::string>());
    cfg.reproject = f.at("reproject").get<bool>();
    cfg.gamma = gamma_schedule(f.at("gamma"), f.at("gamma_cap").get<double>());
    cfg.record_every = f.at("record_every").get<std::size_t>();
    cfg.stationary_tol = f.at("stationary_tol").get<double>();
    cfg.divergence_bound = f.at("divergence_bound").get<double>();
    cfg.validate();
    return cfg;
}

BoundednessConfig boundedness_config(const Json& o)
{
    BoundednessConfig cfg;
    cfg.t_end = o.at("t_end").get<double>();
    cfg.step = o.at("step").get<double>();
    cfg.integrator = parse_integrator(o.at("integrator").get<std::string>());
    cfg.reproject = o.at("reproject").get<bool>();
    cfg.gamma = gamma_schedule(o.at("gamma"), 1e6);
    cfg.record_every = o.at("record_every").get<std::size_t>();
    cfg.slack = o.at("slack").get<double>();
    cfg.conservation_rate = o.at("conservation_rate").get<double>();
    cfg.plateau_fraction = o.at("plateau_fraction").get<double>();
    FlowConfig check;
    check.t_end = cfg.t_end;
    check.step = cfg.step;
    check.record_every = cfg.record_every;
    check.validate();
    require(cfg.plateau_fraction > 0.0 && cfg.plateau_fraction < 1.0, "plateau_fraction must lie in (0, 1)");
    return cfg;
}

ParamVector initial_params(const Json& cfg, const std::shared_ptr<const Architecture>& arch)
{
    const Json& init = cfg.at("init");
    const auto kind = init.at("kind").get<std::string>();
    if (kind == "explicit") {
        return ParamVector(arch, init.at("values").get<std::vector<double>>());
    }
    require(kind == "random", "init kind must be random or explicit");
    auto rng = derive_stream(cfg.at("seed").get<std::uint64_t>(), 0);
    std::normal_distribution<double> normal(0.0, init.at("scale").get<double>());
    ParamVector th(arch);
    for (auto& v : th.values()) {
        v = normal(rng);
    }
    return th;
}

Theta initial_theta(const Json& cfg, std::uint64_t counter)
{
    const Json& init = cfg.at("init");
    if (init.at("kind").get<std::string>() == "explicit") {
        const auto v = init.at("values").get<std::vector<double>>();
        require(v.size() == 3, "one-neuron initial values have three components");
        return {v[0], v[1], v[2]};
    }
    return random_manifold_point(cfg.at("seed").get<std::uint64_t>(), counter,
                                 init.at("theta3_range").get<double>());
}

void validate(const Json& cfg)
{
    const Mode mode = parse_mode(cfg.at("mode").get<std::string>());
    require(cfg.at("seed").is_number_unsigned() || cfg.at("seed").get<std::int64_t>() >= 0,
            "seed must be a non-negative integer");
    switch (mode) {
    case Mode::flow: {
        const auto arch = architecture(cfg);
        measure(cfg, arch->input_dim());
        const auto& m = cfg.at("measure");
        profile(cfg.at("target"), m.at("lower").get<double>(), m.at("upper").get<double>());
        flow_config(cfg.at("flow"));
        initial_params(cfg, arch);
        break;
    }
    case Mode::gd: {
        const auto arch = architecture(cfg);
        measure(cfg, arch->input_dim());
        const auto& m = cfg.at("measure");
        profile(cfg.at("target"), m.at("lower").get<double>(), m.at("upper").get<double>());
        require(cfg.at("gd").at("steps").get<std::size_t>() >= 1, "gd.steps must be at least 1");
        require(cfg.at("gd").at("record_every").get<std::size_t>() >= 1, "gd.record_every must be at least 1");
        require(!cfg.at("gd").at("gamma").is_string(), "gd.gamma must be numeric");
        gamma_schedule(cfg.at("gd").at("gamma"), 1e6);
        initial_params(cfg, architecture(cfg));
        break;
    }
    case Mode::one_neuron:
        OneNeuronProblem(profile(cfg.at("target"), 0.0, 1.0));
        boundedness_config(cfg.at("one_neuron"));
        require(cfg.at("one_neuron").at("trajectories").get<std::size_t>() >= 1,
                "one_neuron.trajectories must be at least 1");
        initial_theta(cfg, 0);
        break;
    case Mode::verify: {
        const auto known = criterion_ids();
        for (const int id : cfg.at("verify").at("criteria").get<std::vector<int>>()) {
            require(std::find(known.begin(), known.end(), id) != known.end(),
                    "unknown criterion " + std::to_string(id));
        }
        break;
    }
    }
}

Json tally_json(const MonitorTally& t)
{
    return Json{{"checked", t.checked}, {"violations", t.violations}, {"worst_increase", t.worst_increase}};
}

Json trajectory_summary(const TrajectoryRecord& tr)
{
    double max_dev = 0.0;
    for (const double d : tr.psi_max_dev) {
        max_dev = std::max(max_dev, d);
    }
    return Json{{"termination", to_string(tr.termination)},
                {"steps_taken", tr.steps_taken},
                {"rows", tr.size()},
                {"final_time", tr.size() ? tr.times.back() : 0.0},
                {"initial_risk", tr.size() ? tr.risk.front() : 0.0},
                {"final_risk", tr.size() ? tr.risk.back() : 0.0},
                {"sup_norm", tr.sup_norm()},
                {"max_constraint_deviation", max_dev},
                {"degenerate_start", tr.degenerate_start},
                {"zero_neuron_encountered", tr.zero_neuron_encountered}};
}

void write_csv(const fs::path& path, const TrajectoryRecord& tr, bool one_neuron)
{
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
    write_trajectory_csv(out, tr, one_neuron);
}

void write_json(const fs::path& path, const Json& j)
{
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
    out << j.dump(2) << '\n';
}

RunOutcome run_network(const Json& cfg, const fs::path& dir, std::ostream& log, bool gd)
{
    const auto arch = architecture(cfg);
    const auto mu = measure(cfg, arch->input_dim());
    const auto f = profile(cfg.at("target"), mu.lower(), mu.upper()).to_target(arch->input_dim(), arch->output_dim());
    const auto xi = initial_params(cfg, arch);
    TrajectoryRecord tr;
    if (gd) {
        const Json& g = cfg.at("gd");
        tr = gd_run(xi, mu, f, g.at("steps").get<std::size_t>(), gamma_schedule(g.at("gamma"), 1e6),
                    g.at("record_every").get<std::size_t>());
    } else {
        tr = integrate_flow(xi, mu, f, flow_config(cfg.at("flow")));
    }
    write_csv(dir / "trajectory.csv", tr, false);
    RunOutcome out;
    out.ok = tr.termination == Termination::completed || tr.termination == Termination::stationary;
    out.summary = trajectory_summary(tr);
    log << (gd ? "gd" : "flow") << ": " << to_string(tr.termination) << ", " << tr.size()
        << " rows, final risk " << format_double(tr.size() ? tr.risk.back() : 0.0) << '\n';
    return out;
}

RunOutcome run_one_neuron(const Json& cfg, const fs::path& dir, std::ostream& log)
{
    const OneNeuronProblem problem(profile(cfg.at("target"), 0.0, 1.0));
    const auto bcfg = boundedness_config(cfg.at("one_neuron"));
    const auto count = cfg.at("one_neuron").at("trajectories").get<std::size_t>();
    RunOutcome out;
    Json runs = Json::array();
    std::size_t aborted = 0;
    std::size_t violations = 0;
    for (std::size_t k = 0; k < count; ++k) {
        const Theta init = initial_theta(cfg, k);
        const auto rep = boundedness_experiment(problem, init, bcfg);
        char name[32];
        std::snprintf(name, sizeof name, "trajectory_%04zu", k);
        const fs::path sub = count == 1 ? dir : dir / name;
        fs::create_directories(sub);
        write_csv(sub / "trajectory.csv", rep.trajectory, true);

        Json windows = Json::object();
        for (const auto& [n, t] : rep.windows) {
            windows[n] = tally_json(t);
        }
        Json informational = Json::object();
        for (const auto& [n, t] : rep.informational) {
            informational[n] = tally_json(t);
        }
        Json occupancy = Json::object();
        for (const auto& [n, v] : rep.regime_occupancy) {
            occupancy[n] = v;
        }
        Json run = trajectory_summary(rep.trajectory);
        run["initial_state"] = {init[0], init[1], init[2]};
        run["plateau_increase"] = rep.plateau_increase;
        run["regime_occupancy"] = occupancy;
        run["monitor_violations"] = rep.lyapunov_violations();
        run["conservation"] = tally_json(rep.conservation);
        run["windows"] = windows;
        run["informational_windows"] = informational;
        run["simple_bound"] = tally_json(rep.simple_bound);
        run["risk_monotone"] = tally_json(rep.risk_monotone);
        run["not_applicable"] = rep.not_applicable;
        if (count > 1) {
            run["directory"] = name;
        }
        runs.push_back(run);

        const auto term = rep.trajectory.termination;
        aborted += term == Termination::diverged || term == Termination::non_finite ? 1 : 0;
        violations += rep.lyapunov_violations();
    }
    out.ok = aborted == 0;
    out.summary = Json{{"trajectories", count},
                       {"aborted", aborted},
                       {"monitor_violations", violations},
                       {"lipschitz_bound", problem.lipschitz_bound()},
                       {"target_mean", problem.fbar()},
                       {"runs", runs}};
    log << "one-neuron: " << count << " trajectories, " << aborted << " aborted, " << violations
        << " monitor violations\n";
    return out;
}

RunOutcome run_verify(const Json& cfg, const fs::path& dir, std::ostream& log)
{
    VerificationOptions opt;
    opt.seed = cfg.at("seed").get<std::uint64_t>();
    RunOutcome out;
    Json criteria = Json::array();
    std::size_t failed = 0;
    for (const int id : cfg.at("verify").at("criteria").get<std::vector<int>>()) {
        const auto r = run_criterion(id, opt);
        Json metrics = Json::object();
        for (const auto& [name, value] : r.metrics) {
            metrics[name] = value;
        }
        Json entry{{"id", r.id}, {"title", r.title}, {"passed", r.passed}, {"metrics", metrics}};
        if (!r.note.empty()) {
            entry["note"] = r.note;
        }
        criteria.push_back(entry);
        failed += r.passed ? 0 : 1;
        char line[64];
        std::snprintf(line, sizeof line, " (%.2f s)", r.seconds);
        log << (r.passed ? "PASS " : "FAIL ") << r.id << ": " << r.title << line << '\n';
    }
    const Json report{{"seed", opt.seed}, {"all_passed", failed == 0}, {"criteria", criteria}};
    write_json(dir / "verify_report.json", report);
    out.ok = failed == 0;
    out.summary = Json{{"criteria_run", criteria.size()}, {"failed", failed}};
    return out;
}

}  // namespace

Json resolve_config(const Json& file_config, Mode mode, const Overrides& ov)
{
    require(file_config.is_object() || file_config.is_null(), "configuration must be a JSON object");
    Json cfg = default_config();
    if (file_config.is_object()) {
        for (const auto& [key, value] : file_config.items()) {
            require(cfg.contains(key), "unknown configuration key '" + key + "'");
        }
        cfg.merge_patch(file_config);
    }
    cfg["mode"] = to_string(mode);
    if (ov.seed) {
        cfg["seed"] = *ov.seed;
    }
    if (ov.output_dir) {
        cfg["output_dir"] = *ov.output_dir;
    }
    Json& section = mode == Mode::one_neuron ? cfg["one_neuron"] : cfg["flow"];
    if (ov.t_end) {
        section["t_end"] = *ov.t_end;
    }
    if (ov.step) {
        section["step"] = *ov.step;
    }
    if (ov.integrator) {
        parse_integrator(*ov.integrator);
        section["integrator"] = *ov.integrator;
    }
    if (ov.no_reproject) {
        section["reproject"] = false;
    }
    if (ov.gamma) {
        (mode == Mode::gd ? cfg["gd"] : section)["gamma"] = parse_gamma(*ov.gamma);
    }
    validate(cfg);
    return cfg;
}

Json load_config(const fs::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot read configuration " + path.string());
    }
    try {
        return Json::parse(in);
    } catch (const Json::parse_error& e) {
        throw std::runtime_error("malformed configuration " + path.string() + ": " + e.what());
    }
}

std::string format_double(double x)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

void write_trajectory_csv(std::ostream& out, const TrajectoryRecord& tr, bool one_neuron)
{
    const std::size_t d = tr.states.empty() ? 0 : tr.states.front().size();
    out << 't';
    for (std::size_t k = 1; k <= d; ++k) {
        out << ",theta_" << k;
    }
    out << ",risk,psi_max_dev,grad_norm";
    if (one_neuron) {
        out << ",regime";
        for (const auto& name : tr.channel_names) {
            out << ',' << name;
        }
    }
    out << '\n';
    for (std::size_t n = 0; n < tr.size(); ++n) {
        out << format_double(tr.times[n]);
        for (const double v : tr.states[n]) {
            out << ',' << format_double(v);
        }
        out << ',' << format_double(tr.risk[n]) << ',' << format_double(tr.psi_max_dev[n]) << ','
            << format_double(tr.grad_norm[n]);
        if (one_neuron) {
            out << ',' << tr.labels[n];
            for (const auto& channel : tr.channels) {
                out << ',' << format_double(channel[n]);
            }
        }
        out << '\n';
    }
}

RunOutcome run(const Json& config, std::ostream& log)
{
    const Mode mode = parse_mode(config.at("mode").get<std::string>());
    const fs::path dir = config.at("output_dir").get<std::string>();
    fs::create_directories(dir);
    RunOutcome out;
    switch (mode) {
    case Mode::flow:
        out = run_network(config, dir, log, false);
        break;
    case Mode::gd:
        out = run_network(config, dir, log, true);
        break;
    case Mode::one_neuron:
        out = run_one_neuron(config, dir, log);
        break;
    case Mode::verify:
        out = run_verify(config, dir, log);
        break;
    }
    const Json summary{{"mode", to_string(mode)},
                       {"seed", config.at("seed")},
                       {"ok", out.ok},
                       {"result", out.summary},
                       {"config", config}};
    write_json(dir / "summary.json", summary);
    out.summary = summary;
    return out;
}

}  // namespace normflow::runner
