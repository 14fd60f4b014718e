#include "rkl/reparam.hpp"

#include "rkl/error.hpp"
#include "rkl/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/tools/minima.hpp>

namespace rkl {

namespace {

// Integration coordinate u: u = eta for the log transform (eta ranges over
// R), u = log eta otherwise.
bool log_coordinate(Transform t)
{
    return t != Transform::log;
}

double eta_of_u(Transform t, double u)
{
    return log_coordinate(t) ? std::exp(u) : u;
}

double u_of_eta(Transform t, double eta)
{
    return log_coordinate(t) ? std::log(eta) : eta;
}

} // namespace

TransformedEstimate rkl_transformed(const SigmaMarginal& post, Transform t, const EstimateOptions& opts)
{
    check_moment_finite(post, Functional::inv_sigma2());
    const double NJ = static_cast<double>(post.n_groups() * post.n_reps());

    // log density of u: p_sigma -> p_{sigma^2} -> p_eta -> p_u
    auto log_pu = [&post, t](double u) {
        const double eta = eta_of_u(t, u);
        const double v = transform_inverse(t, eta);
        const double ls = 0.5 * std::log(v);
        double lp = post.log_density(ls) - std::log(2.0) - ls;
        lp += transform_log_jacobian(t, v);
        if (log_coordinate(t)) {
            lp += u;
        }
        return lp;
    };
    const std::vector<quad::LogFn> tilts{[t](double u) { return -std::log(transform_inverse(t, eta_of_u(t, u))); }};
    quad::Options q;
    q.rel_tol = opts.tolerance;
    q.max_intervals = opts.max_intervals;
    const double start = u_of_eta(t, transform_forward(t, std::exp(2.0 * post.log_sigma_guess())));
    const quad::Rule rule = quad::normalized_rule(log_pu, tilts, start, q);

    std::vector<double> eta(rule.nodes.size());
    std::vector<double> v(rule.nodes.size());
    for (std::size_t i = 0; i < eta.size(); ++i) {
        eta[i] = eta_of_u(t, rule.nodes[i]);
        v[i] = transform_inverse(t, eta[i]);
    }
    auto risk = [&](double eta_prime) {
        const double vp = transform_inverse(t, eta_prime);
        double acc = 0.0;
        for (std::size_t i = 0; i < eta.size(); ++i) {
            const double r = vp / v[i];
            acc += rule.weights[i] * (r - 1.0 - std::log(r));
        }
        return 0.5 * NJ * acc;
    };
    // Search between the 1e-12 and 1 - 1e-12 posterior quantiles of eta.
    std::vector<std::size_t> order(eta.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        order[i] = i;
    }
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return eta[a] < eta[b]; });
    double cum = 0.0;
    double lo = eta[order.front()];
    double hi = eta[order.back()];
    bool lo_set = false;
    for (std::size_t i : order) {
        cum += rule.weights[i];
        if (!lo_set && cum > 1e-12) {
            lo = eta[i];
            lo_set = true;
        }
        if (cum < 1.0 - 1e-12) {
            hi = eta[i];
        }
    }
    const int bits = std::clamp(static_cast<int>(std::ceil(1.0 - std::log2(opts.optimizer_tol))), 8,
                                std::numeric_limits<double>::digits / 2 + 1);
    boost::uintmax_t iters = 500;
    const auto best = boost::math::tools::brent_find_minima(risk, lo, hi, bits, iters);
    auto near = [](double x, double e) { return std::abs(x - e) <= 1e-9 * (std::abs(x) + std::abs(e)); };
    if (near(best.first, lo) || near(best.first, hi)) {
        throw OptimizerFailed("transformed risk minimiser reached the edge of the posterior support");
    }
    return {best.first, best.second, rule.evaluations};
}

double postex_transformed(const SigmaMarginal& post, Transform t, const EstimateOptions& opts)
{
    switch (t) {
    case Transform::identity:
        return expectation(post, opts.request(Functional::sigma2())).value;
    case Transform::sqrt:
        return expectation(post, opts.request(Functional::sigma())).value;
    case Transform::log:
        return expectation(post, opts.request(Functional::log_sigma2())).value;
    case Transform::reciprocal:
        return expectation(post, opts.request(Functional::inv_sigma2())).value;
    }
    return 0.0;
}

} // namespace rkl
