#include "normflow/realization.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace normflow {

namespace {

void check_input(const Architecture& arch, std::span<const double> x)
{
    if (x.size() != arch.input_dim()) {
        throw std::invalid_argument("input has dimension " + std::to_string(x.size()) + ", network expects "
                                    + std::to_string(arch.input_dim()));
    }
}

void check_measure(const Architecture& arch, const InputMeasure& measure)
{
    if (measure.dim() != arch.input_dim()) {
        throw std::invalid_argument("measure dimension does not match the network input dimension");
    }
}

void check_target(const Architecture& arch, const TargetFunction& target)
{
    if (target.input_dim != arch.input_dim() || target.output_dim != arch.output_dim() || !target.eval) {
        throw std::invalid_argument("target dimensions do not match the network");
    }
}

// Reusable buffers for repeated forward passes at quadrature nodes.
class Evaluator {
public:
    Evaluator(const ParamVector& theta, Smoothing smoothing)
        : theta_(theta.values()), arch_(theta.arch()), smoothing_(smoothing)
    {
        const std::size_t hidden = arch_.depth() - 1;
        pre_.resize(hidden);
        post_.resize(hidden);
        for (std::size_t k = 1; k <= hidden; ++k) {
            pre_[k - 1].resize(arch_.width(k));
            post_[k - 1].resize(arch_.width(k));
        }
    }

    void run(std::span<const double> x)
    {
        std::span<const double> in = x;
        for (std::size_t k = 1; k < arch_.depth(); ++k) {
            const std::size_t fan_in = arch_.width(k - 1);
            const std::size_t width = arch_.width(k);
            const double* w = theta_.data() + arch_.layer_offset(k);
            const double* b = w + width * fan_in;
            auto& z = pre_[k - 1];
            auto& a = post_[k - 1];
            for (std::size_t i = 0; i < width; ++i) {
                double s = b[i];
                for (std::size_t j = 0; j < fan_in; ++j) {
                    s += w[i * fan_in + j] * in[j];
                }
                z[i] = s;
                a[i] = smoothing_(s);
            }
            in = a;
        }
    }

    /// Output layer applied to (last hidden activations - mean).
    void output(std::span<const double> mean, std::span<double> out) const
    {
        const std::size_t L = arch_.depth();
        const std::size_t fan_in = arch_.width(L - 1);
        const double* w = theta_.data() + arch_.layer_offset(L);
        const double* b = w + arch_.width(L) * fan_in;
        const auto& a = post_.back();
        for (std::size_t i = 0; i < arch_.width(L); ++i) {
            double s = b[i];
            for (std::size_t j = 0; j < fan_in; ++j) {
                s += w[i * fan_in + j] * (a[j] - mean[j]);
            }
            out[i] = s;
        }
    }

    const std::vector<std::vector<double>>& pre() const { return pre_; }
    const std::vector<std::vector<double>>& post() const { return post_; }
    std::span<const double> theta() const { return theta_; }
    const Architecture& arch() const { return arch_; }
    Smoothing smoothing() const { return smoothing_; }

private:
    std::span<const double> theta_;
    const Architecture& arch_;
    Smoothing smoothing_;
    std::vector<std::vector<double>> pre_;
    std::vector<std::vector<double>> post_;
};

std::vector<double> mean_over(Evaluator& ev, const QuadratureRule& rule)
{
    std::vector<double> m(ev.post().back().size(), 0.0);
    for (std::size_t n = 0; n < rule.size(); ++n) {
        ev.run(rule.point(n));
        const auto& a = ev.post().back();
        for (std::size_t j = 0; j < m.size(); ++j) {
            m[j] += rule.weights[n] * a[j];
        }
    }
    for (const double v : m) {
        if (!std::isfinite(v)) {
            throw QuadratureError("hidden mean is not finite");
        }
    }
    return m;
}

}  // namespace

ForwardPass forward(const ParamVector& theta, std::span<const double> x, Smoothing smoothing)
{
    check_input(theta.arch(), x);
    Evaluator ev(theta, smoothing);
    ev.run(x);
    return {ev.pre(), ev.post()};
}

QuadratureRule network_rule(const ParamVector& theta, const InputMeasure& measure, Smoothing smoothing,
                            std::span<const double> extra_breakpoints)
{
    const Architecture& arch = theta.arch();
    check_measure(arch, measure);
    if (!(measure.supports_exact_rule() && arch.depth() == 2)) {
        return measure.composite_rule();
    }
    std::vector<double> cuts(extra_breakpoints.begin(), extra_breakpoints.end());
    for (std::size_t i = 1; i <= arch.width(1); ++i) {
        const double w = theta.weight(1, i, 1);
        const double b = theta.bias(1, i);
        if (w == 0.0) {
            continue;
        }
        cuts.push_back(-b / w);
        if (!smoothing.exact()) {
            cuts.push_back((1.0 / smoothing.r() - b) / w);
        }
    }
    return measure.rule(&cuts);
}

std::vector<double> hidden_mean(const ParamVector& theta, const InputMeasure& measure, Smoothing smoothing)
{
    const QuadratureRule rule = network_rule(theta, measure, smoothing);
    Evaluator ev(theta, smoothing);
    return mean_over(ev, rule);
}

std::vector<double> realize_with_mean(const ParamVector& theta, std::span<const double> x,
                                      std::span<const double> mean, Smoothing smoothing)
{
    const Architecture& arch = theta.arch();
    check_input(arch, x);
    if (mean.size() != arch.width(arch.depth() - 1)) {
        throw std::invalid_argument("hidden mean has the wrong dimension");
    }
    Evaluator ev(theta, smoothing);
    ev.run(x);
    std::vector<double> out(arch.output_dim());
    ev.output(mean, out);
    return out;
}

std::vector<double> realize(const ParamVector& theta, std::span<const double> x, const InputMeasure& measure,
                            Smoothing smoothing)
{
    const auto mean = hidden_mean(theta, measure, smoothing);
    return realize_with_mean(theta, x, mean, smoothing);
}

double risk(const ParamVector& theta, const InputMeasure& measure, const TargetFunction& target,
            Smoothing smoothing)
{
    const Architecture& arch = theta.arch();
    check_target(arch, target);
    const QuadratureRule rule = network_rule(theta, measure, smoothing, target.breakpoints);
    Evaluator ev(theta, smoothing);
    const auto mean = mean_over(ev, rule);
    std::vector<double> out(arch.output_dim());
    std::vector<double> fx(arch.output_dim());
    double acc = 0.0;
    for (std::size_t n = 0; n < rule.size(); ++n) {
        ev.run(rule.point(n));
        ev.output(mean, out);
        target(rule.point(n), fx);
        double sq = 0.0;
        for (std::size_t i = 0; i < out.size(); ++i) {
            const double e = out[i] - fx[i];
            sq += e * e;
        }
        acc += rule.weights[n] * sq;
    }
    if (!std::isfinite(acc)) {
        throw QuadratureError("risk is not finite");
    }
    return acc;
}

RiskAndGradient risk_and_gradient(const ParamVector& theta, const InputMeasure& measure,
                                  const TargetFunction& target, Smoothing smoothing)
{
    const Architecture& arch = theta.arch();
    check_target(arch, target);
    const std::size_t L = arch.depth();
    const std::size_t n_out = arch.output_dim();
    const std::size_t last = arch.width(L - 1);
    const QuadratureRule rule = network_rule(theta, measure, smoothing, target.breakpoints);
    Evaluator ev(theta, smoothing);
    const auto mean = mean_over(ev, rule);

    RiskAndGradient result;
    result.gradient.assign(arch.param_count(), 0.0);
    auto& grad = result.gradient;
    const std::span<const double> th = theta.values();

    // First sweep: risk, integrated residual, output-layer gradient.
    std::vector<double> out(n_out);
    std::vector<double> fx(n_out);
    std::vector<double> residual_integral(n_out, 0.0);
    const std::size_t out_w = arch.layer_offset(L);
    const std::size_t out_b = out_w + n_out * last;
    for (std::size_t n = 0; n < rule.size(); ++n) {
        const double wq = rule.weights[n];
        ev.run(rule.point(n));
        ev.output(mean, out);
        target(rule.point(n), fx);
        const auto& a = ev.post().back();
        for (std::size_t i = 0; i < n_out; ++i) {
            const double e = out[i] - fx[i];
            result.risk += wq * e * e;
            residual_integral[i] += wq * e;
            for (std::size_t j = 0; j < last; ++j) {
                grad[out_w + i * last + j] += 2.0 * wq * e * (a[j] - mean[j]);
            }
        }
    }
    for (std::size_t i = 0; i < n_out; ++i) {
        grad[out_b + i] = 2.0 * residual_integral[i];
    }

    // Second sweep: hidden layers. Differentiating the hidden mean turns the
    // upstream residual e(x) into e(x) - integral of e.
    std::vector<std::vector<double>> delta(L);
    for (std::size_t k = 1; k < L; ++k) {
        delta[k].resize(arch.width(k));
    }
    for (std::size_t n = 0; n < rule.size(); ++n) {
        const double wq = rule.weights[n];
        const auto x = rule.point(n);
        ev.run(x);
        ev.output(mean, out);
        target(x, fx);
        auto& top = delta[L - 1];
        std::fill(top.begin(), top.end(), 0.0);
        for (std::size_t i = 0; i < n_out; ++i) {
            const double c = 2.0 * (out[i] - fx[i] - residual_integral[i]);
            for (std::size_t j = 0; j < last; ++j) {
                top[j] += th[out_w + i * last + j] * c;
            }
        }
        for (std::size_t k = L - 1; k >= 1; --k) {
            const std::size_t fan_in = arch.width(k - 1);
            const std::size_t width = arch.width(k);
            const std::size_t w_off = arch.layer_offset(k);
            const std::size_t b_off = w_off + width * fan_in;
            const auto& z = ev.pre()[k - 1];
            const std::span<const double> in = k == 1 ? x : std::span<const double>(ev.post()[k - 2]);
            auto& d = delta[k];
            if (k > 1) {
                std::fill(delta[k - 1].begin(), delta[k - 1].end(), 0.0);
            }
            for (std::size_t i = 0; i < width; ++i) {
                const double g = d[i] * smoothing.derivative(z[i]);
                if (g == 0.0) {
                    continue;
                }
                for (std::size_t j = 0; j < fan_in; ++j) {
                    grad[w_off + i * fan_in + j] += wq * g * in[j];
                    if (k > 1) {
                        delta[k - 1][j] += th[w_off + i * fan_in + j] * g;
                    }
                }
                grad[b_off + i] += wq * g;
            }
        }
    }

    if (!std::isfinite(result.risk)) {
        throw QuadratureError("risk is not finite");
    }
    for (const double g : grad) {
        if (!std::isfinite(g)) {
            throw QuadratureError("gradient has non-finite components");
        }
    }
    return result;
}

}  // namespace normflow
