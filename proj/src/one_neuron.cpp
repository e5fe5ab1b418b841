#include "normflow/one_neuron.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "normflow/measure.hpp"
#include "normflow/seeding.hpp"

namespace normflow {

namespace {

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
};

std::optional<Interval> active_interval(const Theta& theta)
{
    const Regime r = classify(theta);
    switch (r.tag) {
    case RegimeTag::empty:
        return std::nullopt;
    case RegimeTag::full:
        return Interval{0.0, 1.0};
    case RegimeTag::right:
        return Interval{r.q, 1.0};
    case RegimeTag::left:
        return Interval{0.0, r.q};
    }
    return std::nullopt;
}

double poly_integral(std::span<const double> p, double lo, double hi)
{
    double total = 0.0;
    double hi_pow = hi;
    double lo_pow = lo;
    for (std::size_t k = 0; k < p.size(); ++k) {
        total += p[k] * (hi_pow - lo_pow) / static_cast<double>(k + 1);
        hi_pow *= hi;
        lo_pow *= lo;
    }
    return total;
}

std::vector<double> poly_mul(std::span<const double> a, std::span<const double> b)
{
    std::vector<double> out(a.size() + b.size() - 1, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i) {
        for (std::size_t j = 0; j < b.size(); ++j) {
            out[i + j] += a[i] * b[j];
        }
    }
    return out;
}

void require_manifold(const Theta& theta, double tol)
{
    if (!(std::abs(g_constraint(theta) - 1.0) <= tol)) {
        throw std::domain_error("theta is not on the unit circle manifold");
    }
}

}  // namespace

double breakpoint(const Theta& theta)
{
    if (theta[0] == 0.0) {
        return no_breakpoint;
    }
    return -theta[1] / theta[0];
}

std::string to_string(RegimeTag tag)
{
    switch (tag) {
    case RegimeTag::empty:
        return "empty";
    case RegimeTag::full:
        return "full";
    case RegimeTag::right:
        return "right";
    case RegimeTag::left:
        return "left";
    }
    return "unknown";
}

Regime classify(const Theta& theta)
{
    const double q = breakpoint(theta);
    if (theta[0] > 0.0) {
        if (q <= 0.0) {
            return {RegimeTag::full, q};
        }
        if (q >= 1.0) {
            return {RegimeTag::empty, q};
        }
        return {RegimeTag::right, q};
    }
    if (theta[0] < 0.0) {
        if (q >= 1.0) {
            return {RegimeTag::full, q};
        }
        if (q <= 0.0) {
            return {RegimeTag::empty, q};
        }
        return {RegimeTag::left, q};
    }
    return {theta[1] > 0.0 ? RegimeTag::full : RegimeTag::empty, q};
}

double activity_measure(const Theta& theta)
{
    const auto I = active_interval(theta);
    return I ? I->hi - I->lo : 0.0;
}

double mean_m(const Theta& theta)
{
    const Regime r = classify(theta);
    switch (r.tag) {
    case RegimeTag::empty:
        return 0.0;
    case RegimeTag::full:
        return theta[0] / 2.0 + theta[1];
    case RegimeTag::right:
        return theta[0] / 2.0 * (1.0 - r.q) * (1.0 - r.q);
    case RegimeTag::left:
        return std::abs(theta[0]) / 2.0 * r.q * r.q;
    }
    return 0.0;
}

ClosedIntegrals closed_integrals(const Theta& theta)
{
    const Regime r = classify(theta);
    const double q = r.q;
    const double a2 = theta[0] * theta[0];
    ClosedIntegrals out;
    if (r.tag == RegimeTag::right) {
        const double u = 1.0 - q;
        out.m = theta[0] / 2.0 * u * u;
        out.centered_first_moment = out.m * q;
        out.centered_second_moment = a2 * u * u * u * (1.0 / 12.0 + q / 4.0);
        return out;
    }
    if (r.tag == RegimeTag::left) {
        out.m = std::abs(theta[0]) / 2.0 * q * q;
        out.centered_first_moment = out.m * (1.0 - q);
        out.centered_second_moment = a2 * q * q * q * (1.0 / 3.0 - q / 4.0);
        return out;
    }
    throw std::domain_error("closed integrals need the right or left regime, got " + to_string(r.tag));
}

double affine_square_integral(double alpha, double beta, double lo, double hi)
{
    const double len = hi - lo;
    const double mid = alpha * (lo + hi) / 2.0 + beta;
    return len * mid * mid + alpha * alpha * len * len * len / 12.0;
}

bool affine_integral_bound_check(double alpha, double beta, double lo, double hi)
{
    if (!(hi >= lo) || !std::isfinite(lo) || !std::isfinite(hi)) {
        throw std::invalid_argument("affine integral bound needs a bounded interval");
    }
    const double len = hi - lo;
    return affine_square_integral(alpha, beta, lo, hi) >= alpha * alpha / 12.0 * len * len * len;
}

// ---------------------------------------------------------------------------
// OneNeuronProblem

OneNeuronProblem::OneNeuronProblem(PiecewisePolynomial f) : f_(std::move(f))
{
    if (f_.lower() != 0.0 || f_.upper() != 1.0) {
        throw std::invalid_argument("one-neuron target must be defined on [0, 1]");
    }
    fbar_ = f_.mean();
    const auto cuts = f_.breakpoints();
    const QuadratureRule rule = piecewise_gauss_rule(0.0, 1.0, cuts);
    double acc = 0.0;
    for (std::size_t n = 0; n < rule.size(); ++n) {
        const double d = f_(rule.points[n]) - fbar_;
        acc += rule.weights[n] * d * d;
    }
    centered_norm_ = std::sqrt(acc);
}

double OneNeuronProblem::target_moment(const Theta& theta, std::span<const double> p) const
{
    const auto I = active_interval(theta);
    if (!I) {
        return 0.0;
    }
    return fbar_ * poly_integral(p, I->lo, I->hi) - f_.integrate_against(p, I->lo, I->hi);
}

double OneNeuronProblem::residual_moment(const Theta& theta, std::span<const double> p) const
{
    const auto I = active_interval(theta);
    if (!I) {
        return 0.0;
    }
    const double m = mean_m(theta);
    const std::vector<double> centered{theta[1] - m, theta[0]};
    return theta[2] * poly_integral(poly_mul(centered, p), I->lo, I->hi) + target_moment(theta, p);
}

double OneNeuronProblem::risk(const Theta& theta) const
{
    const auto I = active_interval(theta);
    double variance = 0.0;
    double cross = 0.0;
    if (I) {
        const double m = mean_m(theta);
        const std::vector<double> lin{theta[1], theta[0]};
        variance = poly_integral(poly_mul(lin, lin), I->lo, I->hi) - m * m;
        cross = target_moment(theta, lin);
    }
    return theta[2] * theta[2] * variance + 2.0 * theta[2] * cross + centered_norm_ * centered_norm_;
}

Theta OneNeuronProblem::loss_gradient(const Theta& theta) const
{
    const std::vector<double> one{1.0};
    const std::vector<double> s{0.0, 1.0};
    const std::vector<double> lin{theta[1], theta[0]};
    // The mean of the residual vanishes, so the theta-dependence of m drops out.
    return {2.0 * theta[2] * residual_moment(theta, s), 2.0 * theta[2] * residual_moment(theta, one),
            2.0 * residual_moment(theta, lin)};
}

Theta OneNeuronProblem::grad_1n(const Theta& theta, double manifold_tol) const
{
    require_manifold(theta, manifold_tol);
    const double a = theta[0];
    const double b = theta[1];
    const std::vector<double> p1{-a * b, b * b};
    const std::vector<double> p2{a * a, -a * b};
    const std::vector<double> lin{b, a};
    return {2.0 * theta[2] * residual_moment(theta, p1), 2.0 * theta[2] * residual_moment(theta, p2),
            2.0 * residual_moment(theta, lin)};
}

Theta OneNeuronProblem::modified_gradient(const Theta& theta) const
{
    Theta grad = loss_gradient(theta);
    const double g = g_constraint(theta);
    if (g == 0.0) {
        return grad;
    }
    const double c = (theta[0] * grad[0] + theta[1] * grad[1]) / g;
    grad[0] -= c * theta[0];
    grad[1] -= c * theta[1];
    return grad;
}

Theta OneNeuronProblem::regime_gradient(const Theta& theta, double manifold_tol) const
{
    require_manifold(theta, manifold_tol);
    const Regime r = classify(theta);
    const double a = theta[0];
    const double b = theta[1];
    const double t3 = theta[2];
    const double q = r.q;
    const std::vector<double> p1{-a * b, b * b};
    const std::vector<double> lin{b, a};
    const double f1 = target_moment(theta, p1);
    const double f3 = target_moment(theta, lin);
    const double nan = std::numeric_limits<double>::quiet_NaN();
    if (r.tag == RegimeTag::right) {
        const double u = 1.0 - q;
        const double g1 = 2.0 * t3 * (a * b * b * t3 / 12.0 * u * u * (7.0 + 2.0 * q + 3.0 * q * q) + f1);
        const double g3 = 2.0 * a * a * t3 * u * u * u * (1.0 / 12.0 + q / 4.0) + 2.0 * f3;
        return {g1, nan, g3};
    }
    if (r.tag == RegimeTag::left) {
        const double q3 = q * q * q;
        const double poly = 6.0 - 6.0 * q + 2.0 * q * q - 3.0 * q3;
        const double g1 = 2.0 * t3 * (-a * a * a * t3 / 12.0 * q3 * poly + f1);
        const double g3 = 2.0 * a * a * t3 * q3 * (1.0 / 3.0 - q / 4.0) + 2.0 * f3;
        return {g1, nan, g3};
    }
    throw std::domain_error("regime closed forms need the right or left regime");
}

// ---------------------------------------------------------------------------
// Monitors

LyapunovValues lyapunov(const Theta& theta)
{
    LyapunovValues v;
    const double t1 = theta[0];
    const double t3sq = theta[2] * theta[2];
    if (std::abs(t1) < 1.0) {
        v.e_full = t3sq + std::log1p(-t1 * t1);
    }
    const double d = t1 - 1.0 / std::numbers::sqrt2;
    v.v_right = t3sq - 0.625 * d * d;
    v.v_right_corrected = t3sq - 1.25 * d * d;
    v.v_left = t3sq + 0.625 * t1 * t1;
    const RegimeTag tag = classify(theta).tag;
    v.conservation_applies = (tag == RegimeTag::full || tag == RegimeTag::empty) && std::abs(t1) < 1.0;
    return v;
}

std::string to_string(MonitorKind kind)
{
    switch (kind) {
    case MonitorKind::theta3_squared:
        return "theta3_squared";
    case MonitorKind::v_right:
        return "V_right";
    case MonitorKind::v_right_corrected:
        return "V_right_corrected";
    case MonitorKind::v_left:
        return "V_left";
    }
    return "unknown";
}

bool MonitorWindow::contains(const Theta& theta) const
{
    const Regime r = classify(theta);
    if (r.tag != regime || r.q < q_lo || r.q > q_hi) {
        return false;
    }
    const double s = orientation * theta[2];
    switch (theta3_condition) {
    case Theta3Condition::any:
        break;
    case Theta3Condition::nonpositive:
        if (!(s <= 0.0)) {
            return false;
        }
        break;
    case Theta3Condition::positive:
        if (!(s > 0.0)) {
            return false;
        }
        break;
    }
    return std::abs(theta[2]) >= theta3_abs_min;
}

double MonitorWindow::value(const Theta& theta) const
{
    const auto v = lyapunov(theta);
    switch (kind) {
    case MonitorKind::theta3_squared:
        return theta[2] * theta[2];
    case MonitorKind::v_right:
        return v.v_right;
    case MonitorKind::v_right_corrected:
        return v.v_right_corrected;
    case MonitorKind::v_left:
        return v.v_left;
    }
    return 0.0;
}

double monitor_derivative(const OneNeuronProblem& problem, const MonitorWindow& window, const Theta& theta)
{
    const Theta G = problem.modified_gradient(theta);
    const double base = -2.0 * theta[2] * G[2];
    switch (window.kind) {
    case MonitorKind::theta3_squared:
        return base;
    case MonitorKind::v_right:
        return base + 1.25 * (theta[0] - 1.0 / std::numbers::sqrt2) * G[0];
    case MonitorKind::v_right_corrected:
        return base + 2.5 * (theta[0] - 1.0 / std::numbers::sqrt2) * G[0];
    case MonitorKind::v_left:
        return base - 1.25 * theta[0] * G[0];
    }
    return 0.0;
}

namespace {

// Largest eps = k / grid below 1/2 such that pred holds at every grid point of
// the side window ([1 - eps, 1] or [0, eps]); one grid spacing is given back so
// a sign change between grid points cannot sneak in.
double scan_eps(const PiecewisePolynomial& f, std::size_t grid, bool right, const auto& pred)
{
    std::size_t k = 0;
    const std::size_t limit = grid / 2 - 1;
    while (k < limit) {
        const std::size_t j = right ? grid - (k + 1) : k + 1;
        if (!pred(f(static_cast<double>(j) / static_cast<double>(grid)))) {
            break;
        }
        ++k;
    }
    if (k == 0 || !pred(f(right ? 1.0 : 0.0))) {
        return 0.0;
    }
    return static_cast<double>(k - 1) / static_cast<double>(grid);
}

bool right_q_conditions(double q)
{
    const double root = std::sqrt(2.0 * (1.0 + q * q));
    const double t1sq = 1.0 / (1.0 + q * q);
    return 1.0 / 6.0 + q / 2.0 > 0.625 && 5.0 * (1.0 + q) / (8.0 + 4.0 * root) <= 0.625 &&
           5.0 * t1sq * (1.0 + q) * q * (2.0 + q + q * q) / (8.0 + 4.0 * root) >= 10.0 / 9.0;
}

bool left_q_conditions(double q)
{
    const double t1sq = 1.0 / (1.0 + q * q);
    return 1.25 * t1sq * (2.0 + q * q) > 20.0 / 9.0 && -4.0 / 3.0 + q + 1.25 * t1sq * (1.0 + 2.0 * q) < 0.0;
}

void add_side(const OneNeuronProblem& problem, std::size_t grid, bool right, MonitorWindows& out)
{
    const PiecewisePolynomial& f = problem.target();
    const double fbar = problem.fbar();
    const double end = f(right ? 1.0 : 0.0);
    const double D = end - fbar;
    const RegimeTag regime = right ? RegimeTag::right : RegimeTag::left;
    const std::string side = right ? "right" : "left";
    const double h = 1.0 / static_cast<double>(grid);

    if (std::abs(D) <= 1e-12 * (1.0 + std::abs(fbar))) {
        MonitorWindow w;
        w.name = "endpoint_" + side;
        w.kind = MonitorKind::theta3_squared;
        w.regime = regime;
        w.q_lo = right ? 0.5 : 0.0;
        w.q_hi = right ? 1.0 : 0.5;
        w.theta3_abs_min = 4.0 * problem.lipschitz_bound();
        out.windows.push_back(w);
        out.not_applicable.push_back("case1_" + side);
        out.not_applicable.push_back("case2_" + side);
        return;
    }
    out.not_applicable.push_back("endpoint_" + side);
    const double sigma = D > 0.0 ? 1.0 : -1.0;

    const double eps1 = scan_eps(f, grid, right, [&](double v) { return sigma * (v - fbar) > 0.0; });
    if (eps1 > 0.0) {
        MonitorWindow w;
        w.name = "case1_" + side;
        w.kind = MonitorKind::theta3_squared;
        w.regime = regime;
        w.q_lo = right ? 1.0 - eps1 : 0.0;
        w.q_hi = right ? 1.0 : eps1;
        w.orientation = sigma;
        w.theta3_condition = MonitorWindow::Theta3Condition::nonpositive;
        out.windows.push_back(w);
    } else {
        out.not_applicable.push_back("case1_" + side);
    }

    const double beta = std::abs(D) * 18.0 / 19.0;
    double eps2 = scan_eps(f, grid, right, [&](double v) {
        const double d = sigma * (v - fbar);
        return beta < d && d < 10.0 * beta / 9.0;
    });
    // Shrink further until the breakpoint conditions hold on the whole window.
    std::size_t k = 0;
    while (static_cast<double>(k + 1) * h <= eps2) {
        const double q = right ? 1.0 - static_cast<double>(k + 1) * h : static_cast<double>(k + 1) * h;
        if (!(right ? right_q_conditions(q) : left_q_conditions(q))) {
            break;
        }
        ++k;
    }
    eps2 = std::min(eps2, static_cast<double>(k) * h);
    if (eps2 > 0.0) {
        MonitorWindow w;
        w.name = "case2_" + side;
        w.kind = right ? MonitorKind::v_right_corrected : MonitorKind::v_left;
        w.regime = regime;
        w.q_lo = right ? 1.0 - eps2 : 0.0;
        w.q_hi = right ? 1.0 : eps2;
        w.orientation = sigma;
        w.theta3_condition = MonitorWindow::Theta3Condition::positive;
        out.windows.push_back(w);
        if (right) {
            w.name = "case2_right_stated";
            w.kind = MonitorKind::v_right;
            w.informational = true;
            out.windows.push_back(w);
        }
    } else {
        out.not_applicable.push_back("case2_" + side);
    }
}

}  // namespace

MonitorWindows scan_monitor_windows(const OneNeuronProblem& problem, std::size_t grid)
{
    if (grid < 4) {
        throw std::invalid_argument("scan grid too coarse");
    }
    MonitorWindows out;
    add_side(problem, grid, true, out);
    add_side(problem, grid, false, out);
    return out;
}

// ---------------------------------------------------------------------------
// OneNeuronSystem

Theta to_theta(std::span<const double> v)
{
    if (v.size() != 3) {
        throw std::invalid_argument("one-neuron state has three components");
    }
    return {v[0], v[1], v[2]};
}

std::vector<double> OneNeuronSystem::prepare(std::span<const double> xi) const
{
    const Theta t = to_theta(xi);
    const double n = std::hypot(t[0], t[1]);
    if (n == 0.0) {
        return {t.begin(), t.end()};
    }
    return {t[0] / n, t[1] / n, t[2] * n};
}

SystemSample OneNeuronSystem::sample(std::span<const double> theta) const
{
    const Theta t = to_theta(theta);
    SystemSample s;
    s.risk = problem_.risk(t);
    const Theta raw = problem_.loss_gradient(t);
    const Theta tan = problem_.modified_gradient(t);
    s.raw.assign(raw.begin(), raw.end());
    s.tangent.assign(tan.begin(), tan.end());
    return s;
}

void OneNeuronSystem::retract(std::span<double> theta) const
{
    const double n = std::hypot(theta[0], theta[1]);
    if (n > 0.0) {
        theta[0] /= n;
        theta[1] /= n;
    }
}

double OneNeuronSystem::constraint_deviation(std::span<const double> theta) const
{
    return std::abs(g_constraint(to_theta(theta)) - 1.0);
}

double OneNeuronSystem::min_constraint_norm(std::span<const double> theta) const
{
    return std::hypot(theta[0], theta[1]);
}

std::vector<std::string> OneNeuronSystem::channel_names() const { return {"E_full", "V_right", "V_left"}; }

Annotation OneNeuronSystem::annotate(std::span<const double> theta) const
{
    const Theta t = to_theta(theta);
    const auto v = lyapunov(t);
    return {to_string(classify(t).tag),
            {v.e_full.value_or(std::numeric_limits<double>::quiet_NaN()), v.v_right, v.v_left}};
}

// ---------------------------------------------------------------------------
// Experiments

std::size_t BoundednessReport::lyapunov_violations() const
{
    std::size_t n = conservation.violations;
    for (const auto& [name, tally] : windows) {
        n += tally.violations;
    }
    return n;
}

namespace {

void tally(MonitorTally& t, double increase, double allowed)
{
    if (t.checked == 0 || increase > t.worst_increase) {
        t.worst_increase = increase;
    }
    ++t.checked;
    if (increase > allowed) {
        ++t.violations;
    }
}

}  // namespace

BoundednessReport analyze_trajectory(const OneNeuronProblem& problem, TrajectoryRecord trajectory,
                                     const BoundednessConfig& cfg)
{
    BoundednessReport rep;
    rep.trajectory = std::move(trajectory);
    const TrajectoryRecord& tr = rep.trajectory;
    const std::size_t n = tr.size();
    if (n == 0) {
        return rep;
    }
    const MonitorWindows windows = scan_monitor_windows(problem);
    rep.not_applicable = windows.not_applicable;
    for (const auto& w : windows.windows) {
        (w.informational ? rep.informational : rep.windows)[w.name] = {};
    }

    const double sqrt_risk0 = std::sqrt(std::max(tr.risk.front(), 0.0));
    const double scale = sqrt_risk0 + problem.centered_target_norm();
    const double horizon = tr.times.back();
    const double t_plateau = horizon * (1.0 - cfg.plateau_fraction);

    double running = 0.0;
    double sup_before = 0.0;
    std::map<std::string, std::size_t> counts;
    for (std::size_t i = 0; i < n; ++i) {
        const Theta th = to_theta(tr.states[i]);
        const double norm = std::sqrt(th[0] * th[0] + th[1] * th[1] + th[2] * th[2]);
        running = std::max(running, norm);
        if (tr.times[i] <= t_plateau) {
            sup_before = running;
        }
        rep.max_manifold_deviation = std::max(rep.max_manifold_deviation, std::abs(g_constraint(th) - 1.0));
        ++counts[tr.labels[i]];

        const Regime r = classify(th);
        if (r.tag == RegimeTag::right || r.tag == RegimeTag::left) {
            const double mu = activity_measure(th);
            const double bound = std::sqrt(24.0) * scale * std::pow(mu, -1.5);
            tally(rep.simple_bound, std::abs(th[2]) - bound, 1e-12 * bound);
        } else if (r.tag == RegimeTag::full && th[0] != 0.0) {
            const double bound = 4.0 * scale / std::abs(th[0]);
            tally(rep.simple_bound, std::abs(th[2]) - bound, 1e-12 * bound);
        }

        if (i + 1 == n) {
            break;
        }
        const Theta nx = to_theta(tr.states[i + 1]);
        const double dt = tr.times[i + 1] - tr.times[i];
        tally(rep.risk_monotone, tr.risk[i + 1] - tr.risk[i], 1e-8);

        const auto la = lyapunov(th);
        const auto lb = lyapunov(nx);
        if (la.conservation_applies && lb.conservation_applies && classify(nx).tag == r.tag) {
            tally(rep.conservation, std::abs(*lb.e_full - *la.e_full), cfg.conservation_rate * dt);
        }
        for (const auto& w : windows.windows) {
            if (w.contains(th) && w.contains(nx)) {
                auto& bucket = w.informational ? rep.informational : rep.windows;
                tally(bucket[w.name], w.value(nx) - w.value(th), cfg.slack);
            }
        }
    }
    rep.sup_norm = running;
    rep.plateau_increase = sup_before > 0.0 ? (running - sup_before) / sup_before : 0.0;
    for (const auto& [label, c] : counts) {
        rep.regime_occupancy[label] = static_cast<double>(c) / static_cast<double>(n);
    }
    return rep;
}

BoundednessReport boundedness_experiment(const OneNeuronProblem& problem, const Theta& init,
                                         const BoundednessConfig& cfg)
{
    const OneNeuronSystem system(problem);
    FlowConfig flow;
    flow.t_end = cfg.t_end;
    flow.step = cfg.step;
    flow.integrator = cfg.integrator;
    flow.record_every = cfg.record_every;
    flow.reproject = cfg.reproject;
    flow.gamma = cfg.gamma;
    auto tr = integrate_flow(system, init, flow);
    return analyze_trajectory(problem, std::move(tr), cfg);
}

Theta random_manifold_point(std::uint64_t root, std::uint64_t counter, double theta3_range)
{
    auto rng = derive_stream(root, counter);
    const double angle = uniform(rng, 0.0, 2.0 * std::numbers::pi);
    const double t3 = uniform(rng, -theta3_range, theta3_range);
    return {std::cos(angle), std::sin(angle), t3};
}

}  // namespace normflow
