#pragma once

// The one-neuron problem on [0, 1]: a single hidden ReLU neuron with weight
// theta_1 and bias theta_2 constrained to the unit circle, output weight
// theta_3, and the outer bias held at the mean of the target.

#include <array>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "normflow/dynamics.hpp"
#include "normflow/target.hpp"

namespace normflow {

using Theta = std::array<double, 3>;

/// Value returned by breakpoint() when theta_1 = 0.
inline constexpr double no_breakpoint = std::numeric_limits<double>::infinity();

/// -theta_2 / theta_1, or no_breakpoint.
double breakpoint(const Theta& theta);

enum class RegimeTag { empty, full, right, left };

struct Regime {
    RegimeTag tag = RegimeTag::empty;
    double q = no_breakpoint;  ///< the breakpoint; lies in (0, 1) for right and left
};

std::string to_string(RegimeTag tag);

/// Activity interval {s in [0,1] : theta_1 s + theta_2 > 0} up to its endpoints:
///   right  (q, 1]      theta_1 > 0, 0 < q < 1
///   left   [0, q)      theta_1 < 0, 0 < q < 1
///   full   contains (0, 1)
///   empty  at most one point
Regime classify(const Theta& theta);

/// Lebesgue measure of the activity interval.
double activity_measure(const Theta& theta);

/// m(theta) = integral over [0,1] of max(theta_1 s + theta_2, 0).
double mean_m(const Theta& theta);

/// g(theta) = theta_1^2 + theta_2^2; the circle manifold is g = 1.
inline double g_constraint(const Theta& theta) { return theta[0] * theta[0] + theta[1] * theta[1]; }

struct ClosedIntegrals {
    double m = 0.0;
    double centered_first_moment = 0.0;   ///< over the activity interval
    double centered_second_moment = 0.0;  ///< over [0, 1]
};

/// Closed forms in the right and left regimes; throws std::domain_error otherwise.
ClosedIntegrals closed_integrals(const Theta& theta);

/// Whether the integral of (alpha x + beta)^2 over [lo, hi] is at least alpha^2 (hi - lo)^3 / 12.
bool affine_integral_bound_check(double alpha, double beta, double lo, double hi);

/// Integral of (alpha x + beta)^2 over [lo, hi] in midpoint form.
double affine_square_integral(double alpha, double beta, double lo, double hi);

class OneNeuronProblem {
public:
    /// f must be defined on [0, 1].
    explicit OneNeuronProblem(PiecewisePolynomial f);

    const PiecewisePolynomial& target() const { return f_; }
    double fbar() const { return fbar_; }
    /// |f - fbar| in L^2([0, 1]).
    double centered_target_norm() const { return centered_norm_; }
    double lipschitz_bound() const { return f_.lipschitz_bound(); }

    double risk(const Theta& theta) const;

    /// Partial derivatives of the risk; valid wherever |theta_1| + |theta_2| > 0.
    Theta loss_gradient(const Theta& theta) const;

    /// Explicit gradient on the manifold (the form with the factors
    /// theta_2^2 s - theta_1 theta_2 and theta_1^2 - theta_1 theta_2 s).
    /// Throws std::domain_error if |g(theta) - 1| > manifold_tol.
    Theta grad_1n(const Theta& theta, double manifold_tol = 1e-9) const;

    /// loss_gradient minus its component along grad g = (2 theta_1, 2 theta_2, 0).
    /// Off the manifold this uses the exact |grad g|^{-2} normalization; at
    /// theta_1 = theta_2 = 0 the loss gradient is returned unchanged.
    Theta modified_gradient(const Theta& theta) const;

    /// First and third components from the regime closed forms (right or left
    /// regime on the manifold). The second component is not covered and is NaN.
    Theta regime_gradient(const Theta& theta, double manifold_tol = 1e-9) const;

private:
    /// Integral over the activity interval of e(s) p(s), e the residual.
    double residual_moment(const Theta& theta, std::span<const double> p) const;
    /// Integral over the activity interval of (fbar - f(s)) p(s).
    double target_moment(const Theta& theta, std::span<const double> p) const;

    PiecewisePolynomial f_;
    double fbar_ = 0.0;
    double centered_norm_ = 0.0;
};

/// Monitored quantities.
struct LyapunovValues {
    std::optional<double> e_full;  ///< theta_3^2 + ln(1 - theta_1^2); empty when |theta_1| >= 1
    double v_right = 0.0;          ///< theta_3^2 - 5/8 (theta_1 - 2^{-1/2})^2
    /// theta_3^2 - 5/4 (theta_1 - 2^{-1/2})^2. The 5/8 form is not monotone in
    /// its window (for f(s) = s it increases at rate ~ 3/8 theta_1 theta_3 (1-q)^2);
    /// the coefficient 5/4 is the one the breakpoint conditions of the window support.
    double v_right_corrected = 0.0;
    double v_left = 0.0;           ///< theta_3^2 + 5/8 theta_1^2
    bool conservation_applies = false;  ///< q outside (0, 1) and |theta_1| < 1
};

LyapunovValues lyapunov(const Theta& theta);

/// Which monotone quantity a window guarantees.
enum class MonitorKind {
    theta3_squared,  ///< theta_3^2 non-increasing
    v_right,         ///< coefficient 5/8
    v_right_corrected,
    v_left,
};

std::string to_string(MonitorKind kind);

/// A region of state space in which a quantity is non-increasing along the flow.
struct MonitorWindow {
    std::string name;
    MonitorKind kind = MonitorKind::theta3_squared;
    RegimeTag regime = RegimeTag::right;
    double q_lo = 0.0;  ///< breakpoint range [q_lo, q_hi]
    double q_hi = 1.0;
    enum class Theta3Condition { any, nonpositive, positive };
    /// The sign condition applies to orientation * theta_3; orientation is the
    /// sign of f minus its mean at the relevant endpoint.
    double orientation = 1.0;
    Theta3Condition theta3_condition = Theta3Condition::any;
    double theta3_abs_min = 0.0;  ///< |theta_3| >= this
    /// Tracked and reported, but not counted as a violation of a guaranteed property.
    bool informational = false;

    bool contains(const Theta& theta) const;
    double value(const Theta& theta) const;
};

/// Windows derived from a scan of f on a uniform grid.
struct MonitorWindows {
    std::vector<MonitorWindow> windows;
    std::vector<std::string> not_applicable;  ///< hypotheses the scan could not satisfy
};

MonitorWindows scan_monitor_windows(const OneNeuronProblem& problem, std::size_t grid = 10000);

/// Time derivative of the window's quantity along d theta/dt = -G(theta).
double monitor_derivative(const OneNeuronProblem& problem, const MonitorWindow& window, const Theta& theta);

/// The one-neuron flow as a gradient system: state (theta_1, theta_2, theta_3).
class OneNeuronSystem final : public GradientSystem {
public:
    explicit OneNeuronSystem(OneNeuronProblem problem) : problem_(std::move(problem)) {}

    std::size_t dim() const override { return 3; }
    /// Rescales (theta_1, theta_2) to unit norm and multiplies theta_3 by the old norm.
    std::vector<double> prepare(std::span<const double> xi) const override;
    SystemSample sample(std::span<const double> theta) const override;
    void retract(std::span<double> theta) const override;
    double constraint_deviation(std::span<const double> theta) const override;
    double min_constraint_norm(std::span<const double> theta) const override;
    std::vector<std::string> channel_names() const override;
    Annotation annotate(std::span<const double> theta) const override;

    const OneNeuronProblem& problem() const { return problem_; }

private:
    OneNeuronProblem problem_;
};

Theta to_theta(std::span<const double> v);

struct MonitorTally {
    std::size_t checked = 0;
    std::size_t violations = 0;
    double worst_increase = 0.0;  ///< largest observed increase (negative if none)
};

struct BoundednessConfig {
    double t_end = 100.0;
    double step = 1e-3;
    Integrator integrator = Integrator::rk4;
    bool reproject = true;
    GammaSchedule gamma = GammaSchedule::constant(1.0);
    std::size_t record_every = 1;
    double slack = 1e-6;              ///< per-step slack for monotone quantities
    double conservation_rate = 1e-6;  ///< allowed drift of E_full per unit time
    double plateau_fraction = 0.1;    ///< final fraction of the horizon used for the plateau test
};

struct BoundednessReport {
    TrajectoryRecord trajectory;
    double sup_norm = 0.0;
    /// Fraction of recorded samples in each regime.
    std::map<std::string, double> regime_occupancy;
    /// Relative increase of the running sup-norm over the final part of the horizon.
    double plateau_increase = 0.0;
    MonitorTally conservation;
    std::map<std::string, MonitorTally> windows;
    /// Windows marked informational; excluded from lyapunov_violations().
    std::map<std::string, MonitorTally> informational;
    MonitorTally simple_bound;
    MonitorTally risk_monotone;
    double max_manifold_deviation = 0.0;
    std::vector<std::string> not_applicable;

    std::size_t lyapunov_violations() const;
};

BoundednessReport boundedness_experiment(const OneNeuronProblem& problem, const Theta& init,
                                         const BoundednessConfig& cfg);

/// Evaluates the monitors on an existing one-neuron trajectory.
BoundednessReport analyze_trajectory(const OneNeuronProblem& problem, TrajectoryRecord trajectory,
                                     const BoundednessConfig& cfg);

/// Point on the manifold with a uniform angle and theta_3 uniform in [-theta3_range, theta3_range],
/// drawn from the stream (root, counter).
Theta random_manifold_point(std::uint64_t root, std::uint64_t counter, double theta3_range = 2.0);

}  // namespace normflow
