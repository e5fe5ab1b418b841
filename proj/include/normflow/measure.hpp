#pragma once

// Finite input measures on a box [a, b]^dim and the quadrature rules used to
// integrate against them.

#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace normflow {

class QuadratureError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Nodes and weights; points are stored row-major, one row of length dim per node.
struct QuadratureRule {
    std::size_t dim = 1;
    std::vector<double> points;
    std::vector<double> weights;

    std::size_t size() const { return weights.size(); }
    std::span<const double> point(std::size_t n) const { return {points.data() + n * dim, dim}; }
};

class InputMeasure {
public:
    enum class Kind { uniform, discrete };

    /// Lebesgue measure on [a, b]^dim; total mass (b - a)^dim. nodes_per_axis
    /// sets the resolution of the composite tensor grid.
    static InputMeasure uniform(double a, double b, std::size_t dim, std::size_t nodes_per_axis = 2048);

    /// sum_n weights[n] * delta_{points[n]}; points must lie in [a, b]^dim.
    static InputMeasure discrete(double a, double b, std::vector<std::vector<double>> points,
                                 std::vector<double> weights);

    Kind kind() const { return kind_; }
    double lower() const { return a_; }
    double upper() const { return b_; }
    std::size_t dim() const { return dim_; }
    std::size_t nodes_per_axis() const { return nodes_per_axis_; }
    double total_mass() const;

    /// Tensor midpoint grid (uniform) or the atoms themselves (discrete).
    QuadratureRule composite_rule() const;

    /// For uniform one-dimensional measures with declared breakpoints: Gauss-Legendre
    /// on every segment between consecutive breakpoints. Otherwise the composite rule.
    QuadratureRule rule(const std::vector<double>* breakpoints) const;

    bool supports_exact_rule() const { return kind_ == Kind::uniform && dim_ == 1; }

    const QuadratureRule& atoms() const { return atoms_; }

private:
    InputMeasure() = default;

    Kind kind_ = Kind::uniform;
    double a_ = 0.0;
    double b_ = 1.0;
    std::size_t dim_ = 1;
    std::size_t nodes_per_axis_ = 2048;
    QuadratureRule atoms_;
};

/// Number of Gauss-Legendre nodes per segment; exact for polynomials of degree <= 15.
inline constexpr std::size_t gauss_points = 8;

/// Gauss-Legendre rule on [lo, hi] split at every breakpoint strictly inside.
QuadratureRule piecewise_gauss_rule(double lo, double hi, std::span<const double> breakpoints);

using VectorIntegrand = std::function<void(std::span<const double> x, std::span<double> out)>;

/// Integral of g against the measure. Breakpoints (one-dimensional uniform case
/// only) select the piecewise-exact path. Throws QuadratureError on non-finite values.
std::vector<double> integrate(const VectorIntegrand& g, std::size_t out_dim, const InputMeasure& measure,
                              const std::vector<double>* breakpoints = nullptr);

double integrate_scalar(const std::function<double(double)>& g, const InputMeasure& measure,
                        const std::vector<double>* breakpoints = nullptr);

}  // namespace normflow
