#include <doctest.h>

#include <cmath>
#include <random>

#include "normflow/dynamics.hpp"
#include "normflow/gradients.hpp"
#include "normflow/manifold.hpp"
#include "normflow/one_neuron.hpp"
#include "normflow/realization.hpp"

using namespace normflow;

namespace {

// d theta / dt = theta: a system whose flow leaves every bounded set.
class Expanding final : public GradientSystem {
public:
    std::size_t dim() const override { return 2; }
    std::vector<double> prepare(std::span<const double> xi) const override { return {xi.begin(), xi.end()}; }
    SystemSample sample(std::span<const double> theta) const override
    {
        SystemSample s;
        s.risk = -(theta[0] * theta[0] + theta[1] * theta[1]);
        s.raw = {-theta[0], -theta[1]};
        s.tangent = s.raw;
        return s;
    }
    void retract(std::span<double>) const override {}
    double constraint_deviation(std::span<const double>) const override { return 0.0; }
    double min_constraint_norm(std::span<const double>) const override { return 1.0; }
};

ParamVector random_theta(const std::shared_ptr<const Architecture>& arch, std::mt19937_64& rng)
{
    std::normal_distribution<double> normal;
    ParamVector th(arch);
    for (auto& v : th.values()) {
        v = normal(rng);
    }
    return th;
}

bool non_increasing(const std::vector<double>& v, double slack)
{
    for (std::size_t n = 1; n < v.size(); ++n) {
        if (v[n] > v[n - 1] + slack) {
            return false;
        }
    }
    return true;
}

}  // namespace

TEST_CASE("configuration checks")
{
    FlowConfig cfg;
    cfg.step = 2.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg.step = 1e-3;
    cfg.record_every = 0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    CHECK_THROWS_AS(GammaSchedule::constant(-1.0), std::invalid_argument);
    CHECK_THROWS_AS(GammaSchedule::list({}), std::invalid_argument);
    const auto g = GammaSchedule::list({0.1, 0.2});
    CHECK(g.at(0) == 0.1);
    CHECK(g.at(5) == 0.2);
}

TEST_CASE("stationary start gives a constant trajectory")
{
    auto arch = make_architecture({1, 1, 1});
    const auto mu = InputMeasure::uniform(0.0, 1.0, 1);
    const ParamVector dead(arch, {1.0, -2.0, 1.0, 0.0});
    FlowConfig cfg;
    cfg.t_end = 1.0;
    const auto tr = integrate_flow(dead, mu, PiecewisePolynomial::constant(0.0).to_target(), cfg);
    CHECK(tr.termination == Termination::stationary);
    REQUIRE(tr.size() == 2);
    CHECK(tr.times.back() == doctest::Approx(1.0));
    CHECK(tr.states.front() == tr.states.back());
}

TEST_CASE("flow starts at the rescaled initial value")
{
    auto arch = make_architecture({1, 2, 1});
    const auto mu = InputMeasure::uniform(0.0, 1.0, 1);
    const ParamVector xi(arch, {3.0, -1.0, -1.2, 0.9, 0.5, 2.0, 0.1});
    FlowConfig cfg;
    cfg.t_end = 0.01;
    const auto tr = integrate_flow(xi, mu, PiecewisePolynomial::abs_offset(0.5).to_target(), cfg);
    const auto expected = rescale_full(xi);
    for (std::size_t k = 0; k < xi.size(); ++k) {
        CHECK(tr.states.front()[k] == expected[k]);
    }
    CHECK_FALSE(tr.degenerate_start);
    CHECK(tr.times.size() == 11);
}

TEST_CASE("constraint drift, tangency and descent along the flow")
{
    std::mt19937_64 rng(1);
    struct Case {
        std::vector<std::size_t> dims;
        InputMeasure mu;
    };
    const std::vector<Case> cases{{{1, 1, 1}, InputMeasure::uniform(0.0, 1.0, 1)},
                                  {{1, 8, 1}, InputMeasure::uniform(0.0, 1.0, 1)},
                                  {{2, 4, 4, 1}, InputMeasure::uniform(0.0, 1.0, 2, 24)}};
    for (const auto& c : cases) {
        auto arch = make_architecture(c.dims);
        const auto f = PiecewisePolynomial::abs_offset(0.3).to_target(c.dims[0]);
        const NetworkSystem sys(arch, c.mu, f);
        const auto xi = random_theta(arch, rng);
        FlowConfig cfg;
        cfg.t_end = 0.25;
        cfg.step = 1e-3;
        cfg.reproject = false;
        const auto free = integrate_flow(sys, xi.values(), cfg);
        cfg.reproject = true;
        const auto proj = integrate_flow(sys, xi.values(), cfg);
        CHECK(*std::max_element(free.psi_max_dev.begin(), free.psi_max_dev.end()) <= 1e-6);
        CHECK(*std::max_element(proj.psi_max_dev.begin(), proj.psi_max_dev.end()) <= 1e-12);
        CHECK(non_increasing(free.risk, 1e-8));
        CHECK(non_increasing(proj.risk, 1e-8));
        for (std::size_t n = 0; n < proj.size(); n += 50) {
            const ParamVector th(arch, proj.states[n]);
            const auto G = sys.sample(th.values()).tangent;
            for (const auto key : arch->hidden_keys()) {
                CHECK(std::abs(grad_psi(th, key).dot(G)) <= 1e-12);
            }
        }
    }
}

TEST_CASE("RK4 is far more accurate than Euler at the same step")
{
    const OneNeuronSystem sys(OneNeuronProblem(PiecewisePolynomial::affine(0.2, 0.5)));
    const std::vector<double> xi{0.8, 0.6, 1.2};
    FlowConfig fine;
    fine.t_end = 0.5;
    fine.step = 1e-4;
    const auto ref = integrate_flow(sys, xi, fine);
    FlowConfig coarse = fine;
    coarse.step = 1e-2;
    const auto rk = integrate_flow(sys, xi, coarse);
    coarse.integrator = Integrator::euler;
    const auto eu = integrate_flow(sys, xi, coarse);
    double err_rk = 0.0;
    double err_eu = 0.0;
    for (int k = 0; k < 3; ++k) {
        err_rk = std::max(err_rk, std::abs(rk.states.back()[k] - ref.states.back()[k]));
        err_eu = std::max(err_eu, std::abs(eu.states.back()[k] - ref.states.back()[k]));
    }
    CHECK(err_rk < 1e-3 * err_eu);
}

TEST_CASE("divergence guard")
{
    const Expanding sys;
    FlowConfig cfg;
    cfg.t_end = 40.0;
    cfg.step = 1e-2;
    cfg.record_every = 100;
    const std::vector<double> xi{1.0, 0.0};
    const auto tr = integrate_flow(sys, xi, cfg);
    CHECK(tr.termination == Termination::diverged);
    CHECK(std::abs(tr.states.back()[0]) > 1e12);
    CHECK(tr.times.back() == doctest::Approx(std::log(1e12)).epsilon(1e-2));
}

TEST_CASE("rescaled gamma")
{
    const std::vector<double> tangent{0.3, -0.4, 1.0};
    CHECK(rescaled_gamma(tangent, tangent) == 1.0);
    const std::vector<double> zero{0.0, 0.0, 0.0};
    CHECK_THROWS_AS(rescaled_gamma(std::vector<double>{1.0, 2.0, 0.0}, zero), StationaryPoint);

    // raw = tangent + normal with |tangent|^2 = cos^2(alpha) |raw|^2
    std::mt19937_64 rng(2);
    auto arch = make_architecture({1, 2, 1});
    for (const double alpha : {0.1, 0.7, 1.3}) {
        const auto th = renormalize_phi(random_theta(arch, rng));
        std::vector<double> t(arch->param_count());
        std::normal_distribution<double> normal;
        for (auto& v : t) {
            v = normal(rng);
        }
        t = project_gradient(th, t);
        double tn = 0.0;
        for (const double v : t) {
            tn += v * v;
        }
        tn = std::sqrt(tn);
        auto n = grad_psi(th, {1, 1}).to_dense(arch->param_count());
        const auto nu = rho(n);
        std::vector<double> raw(t.size());
        for (std::size_t k = 0; k < raw.size(); ++k) {
            raw[k] = std::cos(alpha) * t[k] / tn + std::sin(alpha) * nu[k];
        }
        const auto G = project_gradient(th, raw);
        CHECK(rescaled_gamma(raw, G) == doctest::Approx(1.0 / (std::cos(alpha) * std::cos(alpha))).epsilon(1e-12));
    }
}

TEST_CASE("rescaled flow dissipates at the rate of the full gradient")
{
    const OneNeuronSystem sys(OneNeuronProblem(PiecewisePolynomial::abs_offset(0.3)));
    FlowConfig cfg;
    cfg.t_end = 0.5;
    cfg.step = 1e-4;
    cfg.gamma = GammaSchedule::rescaled();
    const auto tr = integrate_flow(sys, std::vector<double>{0.9, -0.2, 1.5}, cfg);
    REQUIRE(tr.size() > 100);
    std::size_t checked = 0;
    for (std::size_t n = 1; n + 1 < tr.size(); ++n) {
        if (tr.gamma[n] >= 1e6 || tr.raw_grad_norm[n] < 1e-6) {
            continue;
        }
        const double dL = (tr.risk[n + 1] - tr.risk[n - 1]) / (tr.times[n + 1] - tr.times[n - 1]);
        const double rate = -tr.raw_grad_norm[n] * tr.raw_grad_norm[n];
        CHECK(std::abs(dL - rate) <= 0.02 * std::abs(rate));
        ++checked;
    }
    CHECK(checked > 100);
}

TEST_CASE("normalized gradient descent")
{
    auto arch = make_architecture({1, 3, 1});
    const auto mu = InputMeasure::uniform(0.0, 1.0, 1);
    const auto f = PiecewisePolynomial::abs_offset(0.4).to_target();
    std::mt19937_64 rng(3);
    const auto xi = random_theta(arch, rng);

    const auto frozen = gd_run(xi, mu, f, 20, GammaSchedule::constant(0.0));
    const auto start = rescale_full(xi);
    for (const auto& s : frozen.states) {
        for (std::size_t k = 0; k < s.size(); ++k) {
            CHECK(s[k] == doctest::Approx(start[k]).epsilon(1e-15));
        }
    }

    const auto run = gd_run(xi, mu, f, 1000, GammaSchedule::constant(1e-3));
    CHECK(run.size() == 1001);
    for (std::size_t n = 1; n < run.size(); ++n) {
        CHECK(run.psi_max_dev[n] <= 1e-15);
    }
    CHECK(run.risk.back() < run.risk.front());
    CHECK(non_increasing(run.risk, 1e-12));

    const OneNeuronSystem one(OneNeuronProblem(PiecewisePolynomial::affine(0.0, 1.0)));
    const auto r1 = gd_run(one, std::vector<double>{0.8, 0.6, -0.3}, 1000, GammaSchedule::constant(1e-3));
    CHECK(r1.risk.back() < r1.risk.front());
}
