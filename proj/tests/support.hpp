#pragma once
// Test-only generators and deliberately naive numerical oracles. None of
// these share code with the library's integration or optimisation routines.

#include "rkl/model.hpp"
#include "rkl/priors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <utility>
#include <variant>
#include <vector>

namespace rkl::test {

/// xorshift64* with explicit state, so generated cases are reproducible and
/// independent of library RNG plumbing.
class Gen {
public:
    explicit Gen(std::uint64_t seed) : state_(seed * 0x9E3779B97F4A7C15ULL + 0x632BE59BD9B4E019ULL)
    {
        if (state_ == 0) {
            state_ = 1;
        }
        for (int i = 0; i < 8; ++i) {
            next();
        }
    }

    std::uint64_t next()
    {
        state_ ^= state_ >> 12;
        state_ ^= state_ << 25;
        state_ ^= state_ >> 27;
        return state_ * 0x2545F4914F6CDD1DULL;
    }

    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    std::size_t integer(std::size_t lo, std::size_t hi) { return lo + next() % (hi - lo + 1); }

    /// Box-Muller.
    double normal()
    {
        double u1 = uniform();
        while (u1 <= 0.0) {
            u1 = uniform();
        }
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    Dataset dataset(std::size_t n, std::size_t j, double sigma2, double mu_spread = 3.0)
    {
        std::vector<double> v(n * j);
        const double sd = std::sqrt(sigma2);
        for (std::size_t g = 0; g < n; ++g) {
            const double mu = uniform(-mu_spread, mu_spread);
            for (std::size_t r = 0; r < j; ++r) {
                v[g * j + r] = mu + sd * normal();
            }
        }
        return Dataset(n, j, std::move(v));
    }

    Dataset dataset(std::size_t max_groups = 20)
    {
        const std::size_t n = integer(1, max_groups);
        const std::size_t j = integer(2, 5);
        return dataset(n, j, uniform(0.3, 5.0));
    }

    /// Power prior or either hierarchical prior, valid for (n, j).
    Prior prior(std::size_t n, std::size_t j)
    {
        switch (integer(0, 2)) {
        case 0: {
            const double min_k = 2.0 - static_cast<double>(n * (j - 1));
            return PowerPrior{std::max(min_k + 0.5, 0.0) + uniform(0.0, 3.0)};
        }
        case 1:
            return GaussHierPrior{uniform(0.0, 3.0), uniform(-1.0, 1.0), uniform(0.5, 4.0), uniform(-0.8, 0.9), true};
        default:
            return GaussHierPrior{uniform(0.0, 3.0), uniform(-1.0, 1.0), uniform(0.5, 4.0), uniform(-0.8, 0.9), false};
        }
    }

private:
    std::uint64_t state_;
};

inline double rel_diff(double a, double b)
{
    return std::abs(a - b) / std::max(std::abs(b), std::numeric_limits<double>::min());
}

/// Composite trapezoid of exp(log_f) over [lo, hi], returned as a log.
/// Spectrally accurate for smooth integrands that vanish at both ends.
inline double log_trapezoid(const std::function<double(double)>& log_f, double lo, double hi, std::size_t steps)
{
    const double h = (hi - lo) / static_cast<double>(steps);
    std::vector<double> v(steps + 1);
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i <= steps; ++i) {
        v[i] = log_f(lo + h * static_cast<double>(i));
        top = std::max(top, v[i]);
    }
    double sum = 0.0;
    for (std::size_t i = 0; i <= steps; ++i) {
        const double w = (i == 0 || i == steps) ? 0.5 : 1.0;
        sum += w * std::exp(v[i] - top);
    }
    return top + std::log(sum * h);
}

/// Plain trapezoid of a signed integrand.
inline double trapezoid(const std::function<double(double)>& f, double lo, double hi, std::size_t steps)
{
    const double h = (hi - lo) / static_cast<double>(steps);
    double sum = 0.5 * (f(lo) + f(hi));
    for (std::size_t i = 1; i < steps; ++i) {
        sum += f(lo + h * static_cast<double>(i));
    }
    return sum * h;
}

/// Golden-section minimisation of a unimodal function on [lo, hi].
inline double golden_min(const std::function<double(double)>& f, double lo, double hi, double tol = 1e-12)
{
    const double g = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = lo;
    double b = hi;
    double c = b - g * (b - a);
    double d = a + g * (b - a);
    double fc = f(c);
    double fd = f(d);
    while (b - a > tol * (1.0 + std::abs(a) + std::abs(b))) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    return 0.5 * (a + b);
}

/// Minimiser of a smooth unimodal function: golden section to locate it,
/// then bisection on a central-difference derivative to resolve it well
/// below the sqrt(epsilon) floor of comparison-based search.
inline double argmin(const std::function<double(double)>& f, double lo, double hi)
{
    const double x0 = golden_min(f, lo, hi, 1e-10);
    const double h = 1e-5 * (1.0 + std::abs(x0));
    auto slope = [&](double x) { return f(x + h) - f(x - h); };
    double a = x0 - 1e-3 * (1.0 + std::abs(x0));
    double b = x0 + 1e-3 * (1.0 + std::abs(x0));
    if (!(slope(a) < 0.0 && slope(b) > 0.0)) {
        return x0;
    }
    for (int i = 0; i < 100 && b - a > 1e-15 * (1.0 + std::abs(a)); ++i) {
        const double m = 0.5 * (a + b);
        (slope(m) < 0.0 ? a : b) = m;
    }
    return 0.5 * (a + b);
}

/// Posterior expectations E[phi_i(t, mu) | x] for a single-group dataset by
/// a 2-d trapezoid over t = log sigma in [t_lo, t_hi] and mu. The integrand
/// is the raw likelihood times prior density; the mu grid at each t is only
/// positioned (centre and width) from the prior's Gaussian parameters.
inline std::vector<double> joint_expectations(const Dataset& d, const Prior& prior,
                                              const std::vector<std::function<double(double, double)>>& phis,
                                              double t_lo = -6.0, double t_hi = 12.0, std::size_t t_steps = 1500,
                                              std::size_t mu_steps = 400)
{
    const double J = static_cast<double>(d.n_reps());
    double m = 0.0;
    for (std::size_t j = 0; j < d.n_reps(); ++j) {
        m += d(0, j);
    }
    m /= J;
    auto grid = [&](double s2) {
        double prec = J / s2;
        double centre = m * J / s2;
        if (const auto* g = std::get_if<GaussHierPrior>(&prior)) {
            const double v0 = g->tau2 * (g->scale_by_sigma ? s2 : 1.0);
            prec += 1.0 / v0;
            centre += g->mu0 / v0;
        }
        centre /= prec;
        const double half = 14.0 / std::sqrt(prec);
        return std::pair{centre - half, centre + half};
    };
    auto log_joint = [&](double t, double mu) {
        const ParamPoint p(std::exp(2.0 * t), {mu});
        return log_likelihood(d, p) + log_prior_density(prior, p) + t;
    };
    double shift = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i <= t_steps; ++i) {
        const double t = t_lo + (t_hi - t_lo) * static_cast<double>(i) / static_cast<double>(t_steps);
        const auto [lo, hi] = grid(std::exp(2.0 * t));
        shift = std::max(shift, log_joint(t, 0.5 * (lo + hi)));
    }
    std::vector<double> acc(phis.size() + 1, 0.0);
    const double ht = (t_hi - t_lo) / static_cast<double>(t_steps);
    for (std::size_t i = 0; i <= t_steps; ++i) {
        const double t = t_lo + ht * static_cast<double>(i);
        const auto [lo, hi] = grid(std::exp(2.0 * t));
        const double hm = (hi - lo) / static_cast<double>(mu_steps);
        const double wt = (i == 0 || i == t_steps) ? 0.5 : 1.0;
        for (std::size_t k = 0; k <= mu_steps; ++k) {
            const double mu = lo + hm * static_cast<double>(k);
            const double wm = (k == 0 || k == mu_steps) ? 0.5 : 1.0;
            const double w = wt * wm * hm * std::exp(log_joint(t, mu) - shift);
            acc[0] += w;
            for (std::size_t p = 0; p < phis.size(); ++p) {
                acc[p + 1] += w * phis[p](t, mu);
            }
        }
    }
    std::vector<double> out(phis.size());
    for (std::size_t p = 0; p < phis.size(); ++p) {
        out[p] = acc[p + 1] / acc[0];
    }
    return out;
}

/// Pooled within-group variance by the textbook two-pass formula.
inline double two_pass_s2(const Dataset& data)
{
    double ss = 0.0;
    for (std::size_t n = 0; n < data.n_groups(); ++n) {
        double mean = 0.0;
        for (std::size_t j = 0; j < data.n_reps(); ++j) {
            mean += data(n, j);
        }
        mean /= static_cast<double>(data.n_reps());
        for (std::size_t j = 0; j < data.n_reps(); ++j) {
            ss += (data(n, j) - mean) * (data(n, j) - mean);
        }
    }
    return ss / static_cast<double>(data.size());
}

inline Dataset example_e1()
{
    return Dataset(2, 2, {1.0, 3.0, -1.0, 1.0});
}

} // namespace rkl::test
