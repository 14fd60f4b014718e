#include "rkl/reference.hpp"

#include "rkl/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/tools/minima.hpp>

namespace rkl {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

void check_shape(const ReferenceDistribution& ref, const Dataset& y)
{
    if (y.n_groups() != ref.n_groups || y.n_reps() != ref.n_reps) {
        throw InvalidArgument("point has shape " + std::to_string(y.n_groups()) + "x" +
                              std::to_string(y.n_reps()) + ", reference expects " +
                              std::to_string(ref.n_groups) + "x" + std::to_string(ref.n_reps));
    }
}

template <class F>
std::pair<double, double> brent(F f, double a, double b, double tol)
{
    const int bits = std::clamp(static_cast<int>(std::ceil(1.0 - std::log2(tol))), 8,
                                std::numeric_limits<double>::digits / 2 + 1);
    boost::uintmax_t iters = 500;
    const auto r = boost::math::tools::brent_find_minima(f, a, b, bits, iters);
    const double edge = 1e-6 * (b - a);
    if (r.first - a < edge || b - r.first < edge) {
        throw OptimizerFailed("reference KL minimiser reached the search bracket");
    }
    return r;
}

} // namespace

double ReferenceDistribution::log_g(const Dataset& y) const
{
    check_shape(*this, y);
    const double NJ = static_cast<double>(n_groups * n_reps);
    double acc = 0.0;
    for (std::size_t n = 0; n < n_groups; ++n) {
        for (double v : y.row(n)) {
            acc += precision * v * v - 2.0 * v * e_mu_over_sigma2[n] + e_mu_sq_over_sigma2[n];
        }
    }
    return -0.5 * NJ * (kLog2Pi + e_log_sigma2) - 0.5 * acc;
}

double ReferenceDistribution::log_density(const Dataset& y) const
{
    return log_g(y) - log_normalizer;
}

ReferenceDistribution fit_reference(const Dataset& data, const Prior& prior, const EstimateOptions& opts)
{
    const SigmaMarginal post(data, prior);
    ReferenceDistribution ref;
    ref.n_groups = data.n_groups();
    ref.n_reps = data.n_reps();
    ref.precision = expectation(post, opts.request(Functional::inv_sigma2())).value;
    ref.e_log_sigma2 = expectation(post, opts.request(Functional::log_sigma2())).value;
    const FunctionalRequest req = opts.request(Functional::mu(0));
    ref.e_mu_over_sigma2 = group_expectations(post, FunctionalKind::mu_over_sigma2, req);
    ref.e_mu_sq_over_sigma2 = group_expectations(post, FunctionalKind::mu_sq_over_sigma2, req);

    const double N = static_cast<double>(ref.n_groups);
    const double J = static_cast<double>(ref.n_reps);
    const double P = ref.precision;
    ref.means.resize(ref.n_groups);
    double resid = 0.0;
    for (std::size_t n = 0; n < ref.n_groups; ++n) {
        const double b = ref.e_mu_over_sigma2[n];
        ref.means[n] = b / P;
        resid += ref.e_mu_sq_over_sigma2[n] - b * b / P;
    }
    // Completing the square in every coordinate.
    ref.log_normalizer = -0.5 * N * J * (kLog2Pi + ref.e_log_sigma2) - 0.5 * J * resid +
                         0.5 * N * J * (kLog2Pi - std::log(P));
    return ref;
}

double log_g_x(const Dataset& y, const Dataset& data, const Prior& prior, const EstimateOptions& opts)
{
    return fit_reference(data, prior, opts).log_g(y);
}

double kl_to_reference(const ParamPoint& theta, const ReferenceDistribution& ref)
{
    if (theta.mu.size() != ref.n_groups) {
        throw InvalidArgument("parameter point has the wrong number of means");
    }
    // Per coordinate: KL(N(m1, v1) || N(m2, v2)) = (log(v2 / v1) + (v1 + (m1 - m2)^2) / v2 - 1) / 2
    const double v2 = 1.0 / ref.precision;
    const double v1 = theta.sigma2;
    double total = 0.0;
    for (std::size_t n = 0; n < ref.n_groups; ++n) {
        const double d = theta.mu[n] - ref.means[n];
        total += 0.5 * (std::log(v2 / v1) + (v1 + d * d) / v2 - 1.0);
    }
    return static_cast<double>(ref.n_reps) * total;
}

Estimate rkl_via_reference(const ReferenceDistribution& ref, double optimizer_tol)
{
    const std::size_t N = ref.n_groups;
    std::vector<double> mu(ref.means);
    // Variance first: the mean term does not depend on sigma'^2.
    const auto s = brent([&](double y) { return kl_to_reference(ParamPoint(std::exp(y), mu), ref); }, -60.0,
                         60.0, optimizer_tol);
    const double v = std::exp(s.first);
    const double sd = 1.0 / std::sqrt(ref.precision);
    const auto [lo_it, hi_it] = std::minmax_element(ref.means.begin(), ref.means.end());
    const double lo = *lo_it - 20.0 * sd - 1.0;
    const double hi = *hi_it + 20.0 * sd + 1.0;
    const double J = static_cast<double>(ref.n_reps);
    for (std::size_t n = 0; n < N; ++n) {
        auto one = [&](double m) {
            const double d = m - ref.means[n];
            return 0.5 * J * d * d * ref.precision;
        };
        mu[n] = brent(one, lo, hi, optimizer_tol * 1e-3).first;
    }
    Estimate est;
    est.estimator_name = "rkl_reference";
    est.sigma2_hat = v;
    est.mu_hat = std::move(mu);
    est.method = "numeric";
    est.tolerance = optimizer_tol;
    est.risk = kl_to_reference(ParamPoint(est.sigma2_hat, est.mu_hat), ref);
    return est;
}

Estimate rkl_via_reference(const Dataset& data, const Prior& prior, const EstimateOptions& opts)
{
    Estimate est = rkl_via_reference(fit_reference(data, prior, opts), opts.optimizer_tol);
    est.method = to_string(opts.method == Method::automatic
                               ? (SigmaMarginal(data, prior).conjugate() ? Method::closed_form : Method::quadrature)
                               : opts.method);
    return est;
}

} // namespace rkl
