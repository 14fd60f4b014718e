#pragma once

// One-dimensional log-domain integration over the real line.
//
// Integrands are supplied as log f(u). The engine finds the maximiser,
// truncates where log f falls `drop_nats` below its maximum, and runs
// globally adaptive Gauss-Kronrod (7/15) on exp(log f - max), so values
// thousands of nats away from zero never overflow.

#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <vector>

namespace rkl::quad {

using LogFn = std::function<double(double)>;

struct Options {
    double rel_tol = 1e-10;
    std::size_t max_intervals = 4000;
    double drop_nats = 60.0;
    /// Furthest distance from the mode searched for the truncation point.
    double max_offset = 300.0;
    /// Tolerance of the truncation-growth stability test on open tails.
    double stability_tol = 1e-8;
};

/// Region where log f is within drop_nats of its maximum.
struct Window {
    double mode = 0.0;
    double log_max = 0.0;
    double lo = 0.0;
    double hi = 0.0;
    /// Scale of the peak: distance at which log f has dropped by ~1 nat.
    double width_lo = 1.0;
    double width_hi = 1.0;
    /// Set when the drop was not reached within max_offset on that side.
    bool lo_open = false;
    bool hi_open = false;
};

/// Throws MomentDivergent if log f keeps increasing (no finite maximiser)
/// over the search range.
Window find_window(const LogFn& log_f, double start, const Options& opts,
                   double domain_lo = -std::numeric_limits<double>::infinity(),
                   double domain_hi = std::numeric_limits<double>::infinity());

/// Vector integrand f(u, out) writing dim values.
using VectorFn = std::function<void(double, std::span<double>)>;

struct AdaptiveResult {
    std::vector<double> value;
    std::vector<double> abs_error;
    std::vector<double> l1;
    std::size_t intervals = 0;
    std::size_t evaluations = 0;
    bool converged = false;
    /// Kronrod nodes and weights of the final partition.
    std::vector<double> nodes;
    std::vector<double> weights;
};

/// Globally adaptive Gauss-Kronrod over [lo, hi] with initial breakpoints.
/// Stops once abs_error[j] <= rel_tol * l1[j] for every component.
AdaptiveResult gauss_kronrod(const VectorFn& f, std::size_t dim, std::span<const double> breakpoints,
                             double rel_tol, std::size_t max_intervals);

/// Breakpoints that resolve the peak of a window geometrically out to its edges.
std::vector<double> window_breakpoints(const Window& w);

struct LogIntegral {
    /// log of the absolute value of the integral.
    double log_value = -std::numeric_limits<double>::infinity();
    int sign = 1;
    double rel_error = 0.0;
    std::size_t evaluations = 0;
    std::size_t intervals = 0;
    Window window;
};

/// Integral of exp(log_f(u)) * factor(u) over (domain_lo, domain_hi), in log
/// form. The window is set by log_f alone, so factor should be a bounded or
/// slowly varying signed function (an empty factor means 1).
/// Open tails are grown by three successive doublings; if the integral
/// keeps changing, MomentDivergent is thrown.
LogIntegral integrate_log(const LogFn& log_f, double start, const Options& opts,
                          double domain_lo = -std::numeric_limits<double>::infinity(),
                          double domain_hi = std::numeric_limits<double>::infinity(),
                          const std::function<double(double)>& factor = {});

/// Normalised rule for expectations under the density exp(log_f(u)): the
/// weights sum to one. Each tilt t_j adds a window for exp(log_f + t_j), so
/// integrands growing like exp(t_j) are resolved in their tails too.
struct Rule {
    std::vector<double> nodes;
    std::vector<double> weights;
    std::size_t evaluations = 0;
    std::size_t intervals = 0;
};

Rule normalized_rule(const LogFn& log_f, std::span<const LogFn> tilts, double start, const Options& opts);

/// Numerically stable log(sum(exp(values))).
double log_sum_exp(std::span<const double> values);
double log_add_exp(double a, double b);

} // namespace rkl::quad
