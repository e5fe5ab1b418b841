#pragma once

// Fixed-step integration of the projected gradient flow
//   d theta / dt = -gamma(t) G(theta),
// and the normalized gradient descent iteration
//   theta_{n+1} = phi(theta_n - gamma_n G(theta_n)).

#include <cstddef>
#include <map>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "normflow/architecture.hpp"
#include "normflow/measure.hpp"
#include "normflow/target.hpp"

namespace normflow {

struct SystemSample {
    double risk = 0.0;
    std::vector<double> raw;      ///< gradient before projection
    std::vector<double> tangent;  ///< projected gradient
};

struct Annotation {
    std::string label;
    std::vector<double> channels;  ///< same order as GradientSystem::channel_names()
};

/// A risk with a (generalized) gradient and a constraint set the flow lives on.
class GradientSystem {
public:
    virtual ~GradientSystem() = default;

    virtual std::size_t dim() const = 0;
    /// Maps an initial guess onto the constraint set without changing the model.
    virtual std::vector<double> prepare(std::span<const double> xi) const = 0;
    virtual SystemSample sample(std::span<const double> theta) const = 0;
    /// Retraction applied after a discrete step.
    virtual void retract(std::span<double> theta) const = 0;
    virtual double constraint_deviation(std::span<const double> theta) const = 0;
    virtual double min_constraint_norm(std::span<const double> theta) const = 0;

    virtual std::vector<std::string> channel_names() const { return {}; }
    virtual Annotation annotate(std::span<const double>) const { return {}; }
};

/// Mean-centred ReLU network with hidden neurons constrained to unit norm.
class NetworkSystem final : public GradientSystem {
public:
    NetworkSystem(std::shared_ptr<const Architecture> arch, InputMeasure measure, TargetFunction target);

    std::size_t dim() const override { return arch_->param_count(); }
    std::vector<double> prepare(std::span<const double> xi) const override;
    SystemSample sample(std::span<const double> theta) const override;
    void retract(std::span<double> theta) const override;
    double constraint_deviation(std::span<const double> theta) const override;
    double min_constraint_norm(std::span<const double> theta) const override;

    const Architecture& arch() const { return *arch_; }
    const std::shared_ptr<const Architecture>& arch_ptr() const { return arch_; }
    const InputMeasure& measure() const { return measure_; }
    const TargetFunction& target() const { return target_; }

private:
    ParamVector wrap(std::span<const double> theta) const;

    std::shared_ptr<const Architecture> arch_;
    InputMeasure measure_;
    TargetFunction target_;
};

enum class Integrator { euler, rk4 };

class GammaSchedule {
public:
    enum class Kind { constant, list, rescaled };

    static GammaSchedule constant(double value);
    /// Per-step values; the last value is reused once the list is exhausted.
    static GammaSchedule list(std::vector<double> values);
    /// gamma = |raw|^2 / |tangent|^2, capped.
    static GammaSchedule rescaled(double cap = 1e6);

    Kind kind() const { return kind_; }
    double cap() const { return cap_; }
    /// Step-indexed value; not meaningful for the rescaled kind.
    double at(std::size_t step) const;
    std::string describe() const;
    const std::vector<double>& values() const { return values_; }

private:
    Kind kind_ = Kind::constant;
    std::vector<double> values_{1.0};
    double cap_ = 1e6;
};

struct FlowConfig {
    double t_end = 1.0;
    double step = 1e-3;
    Integrator integrator = Integrator::rk4;
    bool reproject = true;
    GammaSchedule gamma = GammaSchedule::constant(1.0);
    std::size_t record_every = 1;
    double stationary_tol = 1e-12;
    double divergence_bound = 1e12;

    void validate() const;
};

enum class Termination { completed, stationary, diverged, non_finite };

std::string to_string(Termination t);
std::string to_string(Integrator i);

struct TrajectoryRecord {
    std::vector<double> times;
    std::vector<std::vector<double>> states;
    std::vector<double> risk;
    std::vector<double> psi_max_dev;
    std::vector<double> grad_norm;      ///< |G|
    std::vector<double> raw_grad_norm;  ///< |raw gradient|
    std::vector<double> gamma;
    std::vector<std::string> labels;
    std::vector<std::string> channel_names;
    std::vector<std::vector<double>> channels;  ///< channels[c][row]

    Termination termination = Termination::completed;
    std::size_t steps_taken = 0;
    bool degenerate_start = false;  ///< some hidden sub-vector of the initial guess is zero
    bool zero_neuron_encountered = false;

    std::size_t size() const { return times.size(); }
    double sup_norm() const;
    const std::vector<double>& channel(const std::string& name) const;
};

class StationaryPoint : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// |raw|^2 / |tangent|^2; throws StationaryPoint when the tangent part vanishes.
double rescaled_gamma(std::span<const double> raw, std::span<const double> tangent);
double rescaled_gamma(const GradientSystem& system, std::span<const double> theta);

TrajectoryRecord integrate_flow(const GradientSystem& system, std::span<const double> xi, const FlowConfig& cfg);

TrajectoryRecord integrate_flow(const ParamVector& xi, const InputMeasure& measure, const TargetFunction& target,
                                const FlowConfig& cfg);

/// Normalized gradient descent; the time column holds the iteration index.
TrajectoryRecord gd_run(const GradientSystem& system, std::span<const double> xi, std::size_t steps,
                        const GammaSchedule& gammas, std::size_t record_every = 1);

TrajectoryRecord gd_run(const ParamVector& xi, const InputMeasure& measure, const TargetFunction& target,
                        std::size_t steps, const GammaSchedule& gammas, std::size_t record_every = 1);

}  // namespace normflow
