#include <doctest.h>

#include <cmath>
#include <random>

#include "normflow/activation.hpp"
#include "normflow/measure.hpp"
#include "normflow/realization.hpp"
#include "normflow/target.hpp"

using namespace normflow;

namespace {

TargetFunction zero_target() { return PiecewisePolynomial::constant(0.0).to_target(); }

// Straightforward evaluation of a depth-L network without the mean term.
std::vector<double> naive_hidden(const ParamVector& th, std::span<const double> x, Smoothing sm)
{
    const auto& arch = th.arch();
    std::vector<double> in(x.begin(), x.end());
    for (std::size_t k = 1; k < arch.depth(); ++k) {
        std::vector<double> out(arch.width(k));
        for (std::size_t i = 1; i <= arch.width(k); ++i) {
            double z = th.bias(k, i);
            for (std::size_t j = 1; j <= arch.width(k - 1); ++j) {
                z += th.weight(k, i, j) * in[j - 1];
            }
            out[i - 1] = sm(z);
        }
        in = std::move(out);
    }
    return in;
}

}  // namespace

TEST_CASE("smoothed activation family")
{
    const auto relu = Smoothing::relu();
    CHECK(smoothed_act(relu, -2.0) == 0.0);
    CHECK(smoothed_act(relu, 2.0) == 2.0);
    CHECK(smoothed_act_deriv(relu, 0.0) == 0.0);

    const auto r2 = Smoothing::order(2.0);
    CHECK(smoothed_act(r2, 0.5) == doctest::Approx(0.5));
    CHECK(smoothed_act_deriv(r2, 0.5) == doctest::Approx(1.0));
    CHECK(smoothed_act(r2, 0.25) == doctest::Approx(3.0 / 16.0));
    CHECK(smoothed_act_deriv(r2, 0.25) == doctest::Approx(5.0 / 4.0));
    CHECK(smoothed_act(r2, 0.0) == 0.0);
    CHECK(smoothed_act_deriv(r2, 0.0) == 0.0);
    CHECK_THROWS_AS(Smoothing::order(0.5), std::invalid_argument);

    // C^1 matching at both knots and derivative against central differences.
    for (const double r : {1.0, 3.0, 100.0}) {
        const auto s = Smoothing::order(r);
        const double knot = 1.0 / r;
        CHECK(s(knot * (1 - 1e-12)) == doctest::Approx(knot).epsilon(1e-9));
        CHECK(s.derivative(knot * (1 - 1e-12)) == doctest::Approx(1.0).epsilon(1e-9));
        for (const double x : {0.1 * knot, 0.4 * knot, 0.77 * knot}) {
            const double h = 1e-7 * knot;
            const double fd = (s(x + h) - s(x - h)) / (2 * h);
            CHECK(s.derivative(x) == doctest::Approx(fd).epsilon(1e-6));
        }
    }
    // Eventually exact: for x > 0 and every r > 1/x the value equals ReLU.
    CHECK(Smoothing::order(11.0)(0.1) == 0.1);
}

TEST_CASE("measures and integration")
{
    const auto mu = InputMeasure::uniform(0.0, 1.0, 1);
    CHECK(mu.total_mass() == doctest::Approx(1.0));
    CHECK(integrate_scalar([](double) { return 1.0; }, mu) == doctest::Approx(1.0).epsilon(1e-14));

    const std::vector<double> none;
    CHECK(integrate_scalar([](double s) { return s * s; }, mu, &none) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    const std::vector<double> half{0.5};
    CHECK(integrate_scalar([](double s) { return std::max(2 * s - 1, 0.0); }, mu, &half) ==
          doctest::Approx(0.25).epsilon(1e-15));

    const auto box = InputMeasure::uniform(-1.0, 2.0, 2, 64);
    CHECK(box.total_mass() == doctest::Approx(9.0));
    const auto v = integrate([](std::span<const double> x, std::span<double> out) { out[0] = x[0] + x[1]; }, 1, box);
    CHECK(v[0] == doctest::Approx(9.0).epsilon(1e-12));

    const auto disc = InputMeasure::discrete(0.0, 1.0, {{0.25}, {0.75}}, {2.0, 1.0});
    CHECK(disc.total_mass() == doctest::Approx(3.0));
    CHECK(integrate_scalar([](double s) { return s; }, disc) == doctest::Approx(1.25));

    CHECK_THROWS_AS(InputMeasure::discrete(0.0, 1.0, {{1.5}}, {1.0}), std::invalid_argument);
    CHECK_THROWS_AS(InputMeasure::discrete(0.0, 1.0, {{0.5}}, {-1.0}), std::invalid_argument);
    CHECK_THROWS_AS(InputMeasure::uniform(0.0, 1.0, 3, 1024), std::invalid_argument);
    CHECK_THROWS_AS(integrate_scalar([](double) { return std::nan(""); }, mu), QuadratureError);
}

TEST_CASE("integration is linear and monotone")
{
    const auto mu = InputMeasure::uniform(0.0, 1.0, 1, 512);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (int n = 0; n < 20; ++n) {
        const double a = u(rng);
        const double b = u(rng);
        auto g = [](double s) { return std::sin(3 * s); };
        auto h = [](double s) { return std::abs(s - 0.3); };
        const double lhs = integrate_scalar([&](double s) { return a * g(s) + b * h(s); }, mu);
        const double rhs = a * integrate_scalar(g, mu) + b * integrate_scalar(h, mu);
        CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
        CHECK(integrate_scalar([&](double s) { return (a * g(s) + b) * (a * g(s) + b); }, mu) >= 0.0);
    }
}

TEST_CASE("piecewise polynomial targets")
{
    const auto f = PiecewisePolynomial::abs_offset(0.3);
    CHECK(f(0.0) == doctest::Approx(0.3));
    CHECK(f(1.0) == doctest::Approx(0.7));
    CHECK(f.mean() == doctest::Approx(0.29).epsilon(1e-14));
    CHECK(f.lipschitz_bound() == doctest::Approx(1.0));
    CHECK(f.breakpoints() == std::vector<double>{0.3});

    const auto pl = PiecewisePolynomial::piecewise_linear({0.0, 0.5, 1.0}, {0.0, 1.0, 0.0});
    CHECK(pl(0.25) == doctest::Approx(0.5));
    CHECK(pl.mean() == doctest::Approx(0.5));
    CHECK(pl.lipschitz_bound() == doctest::Approx(2.0));

    const auto p = PiecewisePolynomial::polynomial({1.0, 0.0, -3.0, 0.0, 0.0, 2.0});
    CHECK(p(0.5) == doctest::Approx(1.0 - 0.75 + 2.0 / 32.0));
    CHECK(p.mean() == doctest::Approx(1.0 - 1.0 + 2.0 / 6.0));
    CHECK(p.lipschitz_bound() >= 6.0 * 0.5 - 10.0 * 0.0625);
    CHECK_THROWS_AS(PiecewisePolynomial::polynomial({1, 1, 1, 1, 1, 1, 1}), std::invalid_argument);

    // integral of f(s) * s^2 over [0.1, 0.9] against a fine Riemann sum
    const std::vector<double> s2{0.0, 0.0, 1.0};
    double riemann = 0.0;
    const int n = 200000;
    for (int k = 0; k < n; ++k) {
        const double s = 0.1 + 0.8 * (k + 0.5) / n;
        riemann += f(s) * s * s * 0.8 / n;
    }
    CHECK(f.integrate_against(s2, 0.1, 0.9) == doctest::Approx(riemann).epsilon(1e-9));
}

TEST_CASE("forward pass")
{
    auto a111 = make_architecture({1, 1, 1});
    const double x = 0.5;
    auto fp = forward(ParamVector(a111, {1, 0, 1, 0}), {&x, 1});
    CHECK(fp.pre[0][0] == 0.5);
    CHECK(fp.post[0][0] == 0.5);
    fp = forward(ParamVector(a111, {1, -1, 1, 0}), {&x, 1});
    CHECK(fp.post[0][0] == 0.0);

    const double x2 = 0.25;
    fp = forward(ParamVector(make_architecture({1, 2, 1}), {1, -1, 0, 1, 0, 0, 0}), {&x2, 1});
    CHECK(fp.post[0][0] == doctest::Approx(0.25));
    CHECK(fp.post[0][1] == doctest::Approx(0.75));

    const std::vector<double> bad{0.1, 0.2};
    CHECK_THROWS_AS(forward(ParamVector(a111, {1, 0, 1, 0}), bad), std::invalid_argument);
}

TEST_CASE("hidden mean integrates against the measure")
{
    auto a111 = make_architecture({1, 1, 1});
    const auto mu = InputMeasure::uniform(0.0, 1.0, 1);
    CHECK(hidden_mean(ParamVector(a111, {1, 0, 7, 7}), mu)[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(hidden_mean(ParamVector(a111, {1, -0.5, 7, 7}), mu)[0] == doctest::Approx(0.125).epsilon(1e-15));

    const auto empty = InputMeasure::discrete(0.0, 1.0, {{0.2}, {0.4}}, {0.0, 0.0});
    CHECK(hidden_mean(ParamVector(a111, {1, 0.3, 1, 0}), empty)[0] == 0.0);

    // Mass 2 on [0, 2]: the mean is the integral, not the average.
    const auto wide = InputMeasure::uniform(0.0, 2.0, 1);
    CHECK(hidden_mean(ParamVector(a111, {1, 0, 1, 0}), wide)[0] == doctest::Approx(2.0).epsilon(1e-14));
}

TEST_CASE("realization with mean subtraction")
{
    auto a111 = make_architecture({1, 1, 1});
    const auto mu = InputMeasure::uniform(0.0, 1.0, 1);
    const double x = 0.75;
    CHECK(realize(ParamVector(a111, {1, 0, 1, 0}), {&x, 1}, mu)[0] == doctest::Approx(0.25).epsilon(1e-14));

    // All weights zero: hidden activation is the constant ReLU(b1), cancelled by the unit-mass mean.
    auto a131 = make_architecture({1, 3, 1});
    ParamVector zero_w(a131, {0, 0, 0, 0.4, -0.2, 0.9, 0, 0, 0, 0.0});
    zero_w.weight(2, 1, 1) = 1.5;
    zero_w.weight(2, 1, 3) = -2.0;
    zero_w.bias(2, 1) = 0.7;
    for (const double s : {0.0, 0.3, 1.0}) {
        CHECK(realize(zero_w, {&s, 1}, mu)[0] == doctest::Approx(0.7).epsilon(1e-14));
    }

    const ParamVector th(a111, {3, 4, 2, 5});
    const ParamVector psi(a111, {0.6, 0.8, 10, 5});
    for (const double s : {0.0, 0.5, 1.0}) {
        CHECK(realize(th, {&s, 1}, mu)[0] == doctest::Approx(realize(psi, {&s, 1}, mu)[0]).epsilon(1e-13));
    }
}

TEST_CASE("risk examples")
{
    auto a111 = make_architecture({1, 1, 1});
    const auto mu = InputMeasure::uniform(0.0, 1.0, 1);
    CHECK(risk(ParamVector(a111, {1, 0, 1, 0}), mu, zero_target()) == doctest::Approx(1.0 / 12.0).epsilon(1e-14));
    CHECK(risk(ParamVector(a111, {1, 0, 0, 0}), mu, zero_target()) == 0.0);

    // f equal to the network itself: N(s) = 2 (s - 1/2) + 1 = 2 s
    const auto f = PiecewisePolynomial::affine(0.0, 2.0).to_target();
    CHECK(risk(ParamVector(a111, {1, 0, 2, 1}), mu, f) == doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("risk against an independent deep-network oracle")
{
    auto arch = make_architecture({2, 3, 2, 1});
    std::mt19937_64 rng(11);
    std::normal_distribution<double> normal;
    ParamVector th(arch);
    for (auto& v : th.values()) {
        v = normal(rng);
    }
    const auto mu = InputMeasure::uniform(0.0, 1.0, 2, 64);
    const auto target = PiecewisePolynomial::abs_offset(0.4).to_target(2);

    // Two passes over the same midpoint grid with naive loops.
    const std::size_t n = 64;
    std::vector<double> mean(2, 0.0);
    const double w = 1.0 / double(n * n);
    for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t b = 0; b < n; ++b) {
            const double x[2] = {(a + 0.5) / n, (b + 0.5) / n};
            const auto h = naive_hidden(th, x, Smoothing::relu());
            mean[0] += w * h[0];
            mean[1] += w * h[1];
        }
    }
    double oracle = 0.0;
    for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t b = 0; b < n; ++b) {
            const double x[2] = {(a + 0.5) / n, (b + 0.5) / n};
            const auto h = naive_hidden(th, x, Smoothing::relu());
            const double out = th.weight(3, 1, 1) * (h[0] - mean[0]) + th.weight(3, 1, 2) * (h[1] - mean[1]) +
                               th.bias(3, 1);
            const double e = out - std::abs((x[0] + x[1]) / 2 - 0.4);
            oracle += w * e * e;
        }
    }
    CHECK(risk(th, mu, target) == doctest::Approx(oracle).epsilon(1e-12));
}

TEST_CASE("smoothed risk converges to the ReLU risk")
{
    auto arch = make_architecture({1, 4, 1});
    std::mt19937_64 rng(5);
    std::normal_distribution<double> normal;
    const auto mu = InputMeasure::uniform(0.0, 1.0, 1);
    const auto f = PiecewisePolynomial::affine(0.2, -1.0).to_target();
    for (int trial = 0; trial < 10; ++trial) {
        ParamVector th(arch);
        for (auto& v : th.values()) {
            v = normal(rng);
        }
        const double exact = risk(th, mu, f);
        double prev = std::abs(risk(th, mu, f, Smoothing::order(10.0)) - exact);
        for (const double r : {1e2, 1e3, 1e4}) {
            const double gap = std::abs(risk(th, mu, f, Smoothing::order(r)) - exact);
            CHECK(gap <= prev + 1e-15);
            prev = gap;
        }
        CHECK(prev <= 1e-6 * (1.0 + exact));
    }
}

TEST_CASE("risk is invariant under permuting hidden neurons")
{
    auto arch = make_architecture({1, 3, 1});
    const ParamVector th(arch, {0.5, -1.0, 2.0, 0.1, 0.3, -0.9, 1.0, -2.0, 0.5, 0.25});
    // swap neurons 1 and 3 together with their outgoing weights
    ParamVector sw = th;
    sw.set_neuron_subvector({1, 1}, std::vector<double>{th.weight(1, 3, 1), th.bias(1, 3)});
    sw.set_neuron_subvector({1, 3}, std::vector<double>{th.weight(1, 1, 1), th.bias(1, 1)});
    sw.weight(2, 1, 1) = th.weight(2, 1, 3);
    sw.weight(2, 1, 3) = th.weight(2, 1, 1);
    const auto mu = InputMeasure::uniform(0.0, 1.0, 1);
    const auto f = PiecewisePolynomial::abs_offset(0.6).to_target();
    CHECK(risk(sw, mu, f) == doctest::Approx(risk(th, mu, f)).epsilon(1e-14));
    CHECK(risk(th, mu, f) >= 0.0);
}
