#include "normflow/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "normflow/manifold.hpp"
#include "normflow/realization.hpp"

namespace normflow {

namespace {

double norm2(std::span<const double> v)
{
    double s = 0.0;
    for (const double x : v) {
        s += x * x;
    }
    return s;
}

bool all_finite(std::span<const double> v)
{
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

double max_abs(std::span<const double> v)
{
    double m = 0.0;
    for (const double x : v) {
        m = std::max(m, std::abs(x));
    }
    return m;
}

}  // namespace

// ---------------------------------------------------------------------------
// NetworkSystem

NetworkSystem::NetworkSystem(std::shared_ptr<const Architecture> arch, InputMeasure measure, TargetFunction target)
    : arch_(std::move(arch)), measure_(std::move(measure)), target_(std::move(target))
{
    if (!arch_) {
        throw std::invalid_argument("network system needs an architecture");
    }
    if (measure_.dim() != arch_->input_dim()) {
        throw std::invalid_argument("measure dimension does not match the network input dimension");
    }
    if (target_.input_dim != arch_->input_dim() || target_.output_dim != arch_->output_dim()) {
        throw std::invalid_argument("target dimensions do not match the network");
    }
}

ParamVector NetworkSystem::wrap(std::span<const double> theta) const
{
    return ParamVector(arch_, std::vector<double>(theta.begin(), theta.end()));
}

std::vector<double> NetworkSystem::prepare(std::span<const double> xi) const
{
    const auto p = rescale_full(wrap(xi));
    return {p.values().begin(), p.values().end()};
}

SystemSample NetworkSystem::sample(std::span<const double> theta) const
{
    const ParamVector p = wrap(theta);
    auto rg = risk_and_gradient(p, measure_, target_, Smoothing::relu());
    SystemSample s;
    s.risk = rg.risk;
    s.tangent = project_gradient(p, rg.gradient);
    s.raw = std::move(rg.gradient);
    return s;
}

void NetworkSystem::retract(std::span<double> theta) const
{
    const auto p = renormalize_phi(wrap(theta));
    std::copy(p.values().begin(), p.values().end(), theta.begin());
}

double NetworkSystem::constraint_deviation(std::span<const double> theta) const
{
    return psi_max_deviation(wrap(theta));
}

double NetworkSystem::min_constraint_norm(std::span<const double> theta) const
{
    return min_hidden_norm(wrap(theta));
}

// ---------------------------------------------------------------------------
// Schedules and configuration

GammaSchedule GammaSchedule::constant(double value)
{
    if (!(value >= 0.0) || !std::isfinite(value)) {
        throw std::invalid_argument("gamma must be a finite non-negative number");
    }
    GammaSchedule g;
    g.kind_ = Kind::constant;
    g.values_ = {value};
    return g;
}

GammaSchedule GammaSchedule::list(std::vector<double> values)
{
    if (values.empty()) {
        throw std::invalid_argument("gamma list must not be empty");
    }
    for (const double v : values) {
        if (!(v >= 0.0) || !std::isfinite(v)) {
            throw std::invalid_argument("gamma values must be finite and non-negative");
        }
    }
    GammaSchedule g;
    g.kind_ = Kind::list;
    g.values_ = std::move(values);
    return g;
}

GammaSchedule GammaSchedule::rescaled(double cap)
{
    if (!(cap > 0.0)) {
        throw std::invalid_argument("gamma cap must be positive");
    }
    GammaSchedule g;
    g.kind_ = Kind::rescaled;
    g.values_.clear();
    g.cap_ = cap;
    return g;
}

double GammaSchedule::at(std::size_t step) const
{
    if (kind_ == Kind::rescaled) {
        throw std::logic_error("rescaled gamma depends on the state, not the step");
    }
    return values_[std::min(step, values_.size() - 1)];
}

std::string GammaSchedule::describe() const
{
    std::ostringstream os;
    os.precision(17);
    switch (kind_) {
    case Kind::constant:
        os << values_.front();
        break;
    case Kind::list:
        os << "list[" << values_.size() << "]";
        break;
    case Kind::rescaled:
        os << "rescaled";
        break;
    }
    return os.str();
}

void FlowConfig::validate() const
{
    if (!(t_end > 0.0) || !std::isfinite(t_end)) {
        throw std::invalid_argument("t_end must be positive");
    }
    if (!(step > 0.0) || step > t_end) {
        throw std::invalid_argument("step must lie in (0, t_end]");
    }
    if (record_every < 1) {
        throw std::invalid_argument("record_every must be at least 1");
    }
}

std::string to_string(Termination t)
{
    switch (t) {
    case Termination::completed:
        return "completed";
    case Termination::stationary:
        return "stationary";
    case Termination::diverged:
        return "diverged";
    case Termination::non_finite:
        return "non_finite";
    }
    return "unknown";
}

std::string to_string(Integrator i) { return i == Integrator::euler ? "euler" : "rk4"; }

double TrajectoryRecord::sup_norm() const
{
    double m = 0.0;
    for (const auto& s : states) {
        m = std::max(m, std::sqrt(norm2(s)));
    }
    return m;
}

const std::vector<double>& TrajectoryRecord::channel(const std::string& name) const
{
    for (std::size_t c = 0; c < channel_names.size(); ++c) {
        if (channel_names[c] == name) {
            return channels[c];
        }
    }
    throw std::out_of_range("no diagnostic channel named " + name);
}

double rescaled_gamma(std::span<const double> raw, std::span<const double> tangent)
{
    const double t = norm2(tangent);
    if (t == 0.0) {
        throw StationaryPoint("projected gradient vanishes; the point is stationary on the manifold");
    }
    return norm2(raw) / t;
}

double rescaled_gamma(const GradientSystem& system, std::span<const double> theta)
{
    const auto s = system.sample(theta);
    return rescaled_gamma(s.raw, s.tangent);
}

// ---------------------------------------------------------------------------
// Integration

namespace {

class Recorder {
public:
    Recorder(const GradientSystem& system, TrajectoryRecord& rec) : system_(system), rec_(rec)
    {
        rec_.channel_names = system.channel_names();
        rec_.channels.assign(rec_.channel_names.size(), {});
    }

    void add(double t, std::span<const double> state, const SystemSample& s, double gamma)
    {
        rec_.times.push_back(t);
        rec_.states.emplace_back(state.begin(), state.end());
        rec_.risk.push_back(s.risk);
        rec_.psi_max_dev.push_back(system_.constraint_deviation(state));
        rec_.grad_norm.push_back(std::sqrt(norm2(s.tangent)));
        rec_.raw_grad_norm.push_back(std::sqrt(norm2(s.raw)));
        rec_.gamma.push_back(gamma);
        auto ann = system_.annotate(state);
        rec_.labels.push_back(std::move(ann.label));
        for (std::size_t c = 0; c < rec_.channels.size(); ++c) {
            rec_.channels[c].push_back(c < ann.channels.size() ? ann.channels[c] : std::nan(""));
        }
    }

private:
    const GradientSystem& system_;
    TrajectoryRecord& rec_;
};

double gamma_for(const GammaSchedule& g, std::size_t step, const SystemSample& s)
{
    if (g.kind() != GammaSchedule::Kind::rescaled) {
        return g.at(step);
    }
    const double t = norm2(s.tangent);
    if (t == 0.0) {
        return 0.0;
    }
    return std::min(g.cap(), norm2(s.raw) / t);
}

// -gamma(theta) G(theta)
std::vector<double> velocity(const SystemSample& s, double gamma)
{
    std::vector<double> v(s.tangent.size());
    for (std::size_t n = 0; n < v.size(); ++n) {
        v[n] = -gamma * s.tangent[n];
    }
    return v;
}

std::vector<double> axpy(std::span<const double> x, double a, std::span<const double> y)
{
    std::vector<double> out(x.begin(), x.end());
    for (std::size_t n = 0; n < out.size(); ++n) {
        out[n] += a * y[n];
    }
    return out;
}

std::vector<double> take_step(const GradientSystem& system, const FlowConfig& cfg, std::size_t j,
                              std::span<const double> state, const SystemSample& s0, double gamma0)
{
    const double h = cfg.step;
    const auto k1 = velocity(s0, gamma0);
    if (cfg.integrator == Integrator::euler) {
        return axpy(state, h, k1);
    }
    auto stage = [&](std::span<const double> at) {
        const auto s = system.sample(at);
        return velocity(s, gamma_for(cfg.gamma, j, s));
    };
    const auto k2 = stage(axpy(state, 0.5 * h, k1));
    const auto k3 = stage(axpy(state, 0.5 * h, k2));
    const auto k4 = stage(axpy(state, h, k3));
    std::vector<double> out(state.begin(), state.end());
    for (std::size_t n = 0; n < out.size(); ++n) {
        out[n] += h / 6.0 * (k1[n] + 2.0 * k2[n] + 2.0 * k3[n] + k4[n]);
    }
    return out;
}

}  // namespace

TrajectoryRecord integrate_flow(const GradientSystem& system, std::span<const double> xi, const FlowConfig& cfg)
{
    cfg.validate();
    if (xi.size() != system.dim()) {
        throw std::invalid_argument("initial value has the wrong dimension");
    }
    TrajectoryRecord rec;
    Recorder recorder(system, rec);
    rec.degenerate_start = !(system.min_constraint_norm(xi) > 0.0);

    std::vector<double> state = system.prepare(xi);
    SystemSample s = system.sample(state);
    const auto n_steps = static_cast<std::size_t>(std::llround(cfg.t_end / cfg.step));

    for (std::size_t j = 0;; ++j) {
        const double t = static_cast<double>(j) * cfg.step;
        const double gamma = gamma_for(cfg.gamma, j, s);
        const bool recorded = j % cfg.record_every == 0 || j == n_steps;
        if (recorded) {
            recorder.add(t, state, s, gamma);
        }
        if (j == n_steps) {
            break;
        }
        if (std::sqrt(norm2(s.tangent)) <= cfg.stationary_tol) {
            // The exact solution is constant from here on.
            rec.termination = Termination::stationary;
            recorder.add(static_cast<double>(n_steps) * cfg.step, state, s, gamma);
            break;
        }

        std::vector<double> next;
        SystemSample next_sample;
        try {
            next = take_step(system, cfg, j, state, s, gamma);
            if (!all_finite(next)) {
                rec.termination = Termination::non_finite;
                break;
            }
            if (cfg.reproject) {
                system.retract(next);
            }
            next_sample = system.sample(next);
        } catch (const QuadratureError&) {
            rec.termination = Termination::non_finite;
            break;
        }
        state = std::move(next);
        s = std::move(next_sample);
        ++rec.steps_taken;

        if (system.min_constraint_norm(state) < 1e-12) {
            rec.zero_neuron_encountered = true;
        }
        if (max_abs(state) > cfg.divergence_bound) {
            rec.termination = Termination::diverged;
            recorder.add(static_cast<double>(j + 1) * cfg.step, state, s, gamma_for(cfg.gamma, j + 1, s));
            break;
        }
    }
    return rec;
}

TrajectoryRecord integrate_flow(const ParamVector& xi, const InputMeasure& measure, const TargetFunction& target,
                                const FlowConfig& cfg)
{
    const NetworkSystem system(xi.arch_ptr(), measure, target);
    return integrate_flow(system, xi.values(), cfg);
}

TrajectoryRecord gd_run(const GradientSystem& system, std::span<const double> xi, std::size_t steps,
                        const GammaSchedule& gammas, std::size_t record_every)
{
    if (record_every < 1) {
        throw std::invalid_argument("record_every must be at least 1");
    }
    if (xi.size() != system.dim()) {
        throw std::invalid_argument("initial value has the wrong dimension");
    }
    TrajectoryRecord rec;
    Recorder recorder(system, rec);
    rec.degenerate_start = !(system.min_constraint_norm(xi) > 0.0);

    std::vector<double> state = system.prepare(xi);
    SystemSample s = system.sample(state);
    for (std::size_t n = 0;; ++n) {
        const double gamma = gamma_for(gammas, n, s);
        if (n % record_every == 0 || n == steps) {
            recorder.add(static_cast<double>(n), state, s, gamma);
        }
        if (n == steps) {
            break;
        }
        std::vector<double> next = axpy(state, -gamma, s.tangent);
        if (!all_finite(next)) {
            rec.termination = Termination::non_finite;
            break;
        }
        system.retract(next);
        try {
            s = system.sample(next);
        } catch (const QuadratureError&) {
            rec.termination = Termination::non_finite;
            break;
        }
        state = std::move(next);
        ++rec.steps_taken;
        if (system.min_constraint_norm(state) < 1e-12) {
            rec.zero_neuron_encountered = true;
        }
        if (max_abs(state) > 1e12) {
            rec.termination = Termination::diverged;
            recorder.add(static_cast<double>(n + 1), state, s, gamma_for(gammas, n + 1, s));
            break;
        }
    }
    return rec;
}

TrajectoryRecord gd_run(const ParamVector& xi, const InputMeasure& measure, const TargetFunction& target,
                        std::size_t steps, const GammaSchedule& gammas, std::size_t record_every)
{
    const NetworkSystem system(xi.arch_ptr(), measure, target);
    return gd_run(system, xi.values(), steps, gammas, record_every);
}

}  // namespace normflow
