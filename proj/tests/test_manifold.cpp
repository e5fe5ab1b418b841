#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "normflow/manifold.hpp"
#include "normflow/realization.hpp"

using namespace normflow;

namespace {

std::vector<double> gaussian(std::size_t n, std::mt19937_64& rng)
{
    std::normal_distribution<double> normal;
    std::vector<double> v(n);
    for (auto& x : v) {
        x = normal(rng);
    }
    return v;
}

double dot(std::span<const double> a, std::span<const double> b)
{
    double s = 0.0;
    for (std::size_t n = 0; n < a.size(); ++n) {
        s += a[n] * b[n];
    }
    return s;
}

}  // namespace

TEST_CASE("psi and its gradient")
{
    auto arch = make_architecture({1, 1, 1});
    const ParamVector th(arch, {3, 4, 2, 5});
    CHECK(psi(th, {1, 1}) == 25.0);
    const auto g = grad_psi(th, {1, 1});
    CHECK(g.indices == std::vector<std::size_t>{0, 1});
    CHECK(g.values == std::vector<double>{6, 8});

    const ParamVector z(arch, {0, 0, 2, 5});
    CHECK(psi(z, {1, 1}) == 0.0);
    CHECK(grad_psi(z, {1, 1}).values == std::vector<double>{0, 0});

    std::mt19937_64 rng(1);
    auto deep = make_architecture({2, 3, 2, 1});
    const ParamVector r(deep, gaussian(deep->param_count(), rng));
    const auto keys = deep->hidden_keys();
    for (const auto a : keys) {
        CHECK(grad_psi(r, a).indices.size() == deep->width(a.layer - 1) + 1);
        for (const auto b : keys) {
            if (!(a == b)) {
                const auto ga = grad_psi(r, a).to_dense(deep->param_count());
                CHECK(grad_psi(r, b).dot(ga) == 0.0);
            }
        }
    }
}

TEST_CASE("rho")
{
    const std::vector<double> v{3, 4};
    const auto r = rho(v);
    CHECK(r[0] == doctest::Approx(0.6));
    CHECK(r[1] == doctest::Approx(0.8));
    CHECK(rho(std::vector<double>{0, 0}) == std::vector<double>{0, 0});
    const std::vector<double> unit{0.0, 1.0, 0.0};
    CHECK(rho(unit) == unit);
}

TEST_CASE("projection examples")
{
    std::mt19937_64 rng(2);
    auto arch = make_architecture({2, 3, 1});
    const ParamVector th(arch, gaussian(arch->param_count(), rng));
    const NeuronKey key{1, 2};
    const auto normal = grad_psi(th, key).to_dense(arch->param_count());
    const auto p = project_gradient(th, normal);
    for (const auto o : arch->neuron_offsets(key)) {
        CHECK(std::abs(p[o]) < 1e-15);
    }

    std::vector<double> out_only(arch->param_count(), 0.0);
    for (const auto o : arch->neuron_offsets({2, 1})) {
        out_only[o] = 1.5;
    }
    CHECK(project_gradient(th, out_only) == out_only);
}

TEST_CASE("projection is an orthogonal projector tangent to the manifold")
{
    std::mt19937_64 rng(3);
    for (const auto& dims : {std::vector<std::size_t>{1, 8, 1}, {2, 4, 4, 1}}) {
        auto arch = make_architecture(dims);
        for (int n = 0; n < 50; ++n) {
            const auto th = renormalize_phi(ParamVector(arch, gaussian(arch->param_count(), rng)));
            const auto g = gaussian(arch->param_count(), rng);
            const auto h = gaussian(arch->param_count(), rng);
            const auto pg = project_gradient(th, g);
            const auto ph = project_gradient(th, h);
            for (const auto key : arch->hidden_keys()) {
                CHECK(std::abs(grad_psi(th, key).dot(pg)) <= 1e-12);
            }
            const auto ppg = project_gradient(th, pg);
            double idem = 0.0;
            for (std::size_t k = 0; k < pg.size(); ++k) {
                idem = std::max(idem, std::abs(ppg[k] - pg[k]));
            }
            CHECK(idem <= 1e-14);
            CHECK(dot(pg, h) == doctest::Approx(dot(g, ph)).epsilon(1e-12));
            CHECK(dot(pg, pg) <= dot(g, g) + 1e-12);
        }
    }
}

TEST_CASE("unit-normal and squared-norm projections agree off the manifold")
{
    std::mt19937_64 rng(4);
    auto arch = make_architecture({2, 4, 3, 1});
    for (int n = 0; n < 50; ++n) {
        ParamVector th(arch, gaussian(arch->param_count(), rng));
        for (auto& v : th.values()) {
            v *= 3.0;
        }
        const auto g = gaussian(arch->param_count(), rng);
        const auto a = project_gradient(th, g);
        const auto b = project_gradient_normalized(th, g);
        for (std::size_t k = 0; k < a.size(); ++k) {
            CHECK(a[k] == doctest::Approx(b[k]).epsilon(1e-12).scale(1.0));
        }
    }
    ParamVector dead(arch, gaussian(arch->param_count(), rng));
    dead.set_neuron_subvector({1, 2}, std::vector<double>{0, 0, 0});
    CHECK_THROWS_AS(project_gradient_normalized(dead, gaussian(arch->param_count(), rng)), std::domain_error);
}

TEST_CASE("renormalization")
{
    auto arch = make_architecture({1, 1, 1});
    const auto r = renormalize_phi(ParamVector(arch, {3, 4, 2, 5}));
    CHECK(r[0] == doctest::Approx(0.6));
    CHECK(r[1] == doctest::Approx(0.8));
    CHECK(r[2] == 2.0);
    CHECK(r[3] == 5.0);

    const ParamVector unit(arch, {0.6, 0.8, 2, 5});
    const auto u = renormalize_phi(unit);
    CHECK(std::equal(u.values().begin(), u.values().end(), unit.values().begin()));

    auto a2 = make_architecture({1, 2, 1});
    const auto z = renormalize_phi(ParamVector(a2, {0, 3, 0, 4, 1, 1, 1}));
    CHECK(z.neuron_subvector({1, 1}) == std::vector<double>{0, 0});
    CHECK(z.neuron_subvector({1, 2})[0] == doctest::Approx(0.6));
    CHECK(z.neuron_subvector({1, 2})[1] == doctest::Approx(0.8));

    std::mt19937_64 rng(5);
    auto deep = make_architecture({2, 4, 4, 1});
    const auto once = renormalize_phi(ParamVector(deep, gaussian(deep->param_count(), rng)));
    const auto twice = renormalize_phi(once);
    for (std::size_t k = 0; k < once.size(); ++k) {
        CHECK(twice[k] == doctest::Approx(once[k]).epsilon(1e-15));
    }
}

TEST_CASE("rescaling cascade examples")
{
    auto arch = make_architecture({1, 1, 1});
    const auto r = rescale_cascade(ParamVector(arch, {3, 4, 2, 5}), 1);
    CHECK(r[0] == doctest::Approx(0.6));
    CHECK(r[1] == doctest::Approx(0.8));
    CHECK(r[2] == doctest::Approx(10.0));
    CHECK(r[3] == 5.0);

    auto deep = make_architecture({2, 2, 2, 1});
    ParamVector unit(deep, {0.6, 0.8, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 3.0, -2.0, 0.5});
    // make V^2_1 = (0.6, 0, 0.8) and V^2_2 = (0, 0, 1) unit
    unit.set_neuron_subvector({1, 1}, std::vector<double>{0.6, 0.8, 0.0});
    unit.set_neuron_subvector({1, 2}, std::vector<double>{0.0, 0.0, 1.0});
    unit.set_neuron_subvector({2, 1}, std::vector<double>{0.6, 0.0, 0.8});
    unit.set_neuron_subvector({2, 2}, std::vector<double>{0.0, 1.0, 0.0});
    const auto same = rescale_full(unit);
    for (std::size_t k = 0; k < unit.size(); ++k) {
        CHECK(same[k] == doctest::Approx(unit[k]).epsilon(1e-15));
    }

    // zero hidden V: outgoing weights scaled by 0, realization unchanged
    auto a2 = make_architecture({1, 2, 1});
    const ParamVector z(a2, {0, 2, 0, 1, 1.5, -3, 0.5});
    const auto rz = rescale_full(z);
    CHECK(rz.neuron_subvector({1, 1}) == std::vector<double>{0, 0});
    CHECK(rz.weight(2, 1, 1) == 0.0);
    const auto mu = InputMeasure::uniform(0.0, 1.0, 1);
    for (const double s : {0.0, 0.4, 1.0}) {
        CHECK(realize(rz, {&s, 1}, mu)[0] == doctest::Approx(realize(z, {&s, 1}, mu)[0]).epsilon(1e-13));
    }
}

TEST_CASE("cascade is the composition of single-layer steps")
{
    std::mt19937_64 rng(6);
    auto deep = make_architecture({2, 3, 4, 2, 1});
    const ParamVector th(deep, gaussian(deep->param_count(), rng));
    ParamVector manual = th;
    for (std::size_t k = 1; k < deep->depth(); ++k) {
        manual = rescale_layer(manual, k);
    }
    const auto full = rescale_full(th);
    CHECK(std::equal(full.values().begin(), full.values().end(), manual.values().begin()));
    for (const auto key : deep->hidden_keys()) {
        CHECK(std::abs(full.neuron_norm(key) - 1.0) <= 1e-12);
    }
    CHECK(psi_max_deviation(full) <= 2e-12);
}

TEST_CASE("rescaling preserves the realization on a grid")
{
    std::mt19937_64 rng(7);
    auto deep = make_architecture({2, 4, 4, 1});
    const auto mu = InputMeasure::uniform(0.0, 1.0, 2, 48);
    for (int n = 0; n < 5; ++n) {
        const ParamVector th(deep, gaussian(deep->param_count(), rng));
        const auto rs = rescale_full(th);
        const auto m0 = hidden_mean(th, mu);
        const auto m1 = hidden_mean(rs, mu);
        for (int a = 0; a <= 10; ++a) {
            for (int b = 0; b <= 10; ++b) {
                const double x[2] = {a / 10.0, b / 10.0};
                const double y0 = realize_with_mean(th, x, m0)[0];
                const double y1 = realize_with_mean(rs, x, m1)[0];
                CHECK(std::abs(y0 - y1) <= 1e-10 * (1.0 + std::abs(y0)));
            }
        }
    }
}
