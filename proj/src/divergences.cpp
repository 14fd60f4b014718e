#include "rkl/divergences.hpp"

#include "rkl/error.hpp"
#include "rkl/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/special_functions/gamma.hpp>

namespace rkl {

namespace {

void check_dims(const ParamPoint& a, const ParamPoint& b, std::size_t n_groups)
{
    if (a.mu.size() != n_groups || b.mu.size() != n_groups) {
        throw InvalidArgument("parameter points have " + std::to_string(a.mu.size()) + " and " +
                              std::to_string(b.mu.size()) + " means, expected " + std::to_string(n_groups));
    }
}

double sigma_part(double num, double den)
{
    // r - 1 - log r for r = num / den, accurate near r = 1
    const double ratio = num / den;
    const double d = ratio - 1.0;
    return std::abs(d) < 0.5 ? d - std::log1p(d) : d - (std::log(num) - std::log(den));
}

double norm_cdf(double x)
{
    return 0.5 * std::erfc(-x / std::sqrt(2.0));
}

// P(Z in region) for Z ~ N(mean, sd^2), region = (r1, r2) or its complement.
double interval_prob(double mean, double sd, double r1, double r2, bool inside)
{
    const double p = norm_cdf((r2 - mean) / sd) - norm_cdf((r1 - mean) / sd);
    return inside ? p : 1.0 - p;
}

} // namespace

double kl_single(const ParamPoint& a, const ParamPoint& b, std::size_t group)
{
    if (group >= a.mu.size() || group >= b.mu.size()) {
        throw InvalidArgument("group index " + std::to_string(group) + " out of range");
    }
    const double dm = a.mu[group] - b.mu[group];
    return 0.5 * sigma_part(a.sigma2, b.sigma2) + dm * dm / (2.0 * b.sigma2);
}

double kl_products(const ParamPoint& a, const ParamPoint& b, std::size_t n_groups, std::size_t n_reps)
{
    check_dims(a, b, n_groups);
    const double J = static_cast<double>(n_reps);
    const double NJ = static_cast<double>(n_groups) * J;
    double sq = 0.0;
    for (std::size_t n = 0; n < n_groups; ++n) {
        const double d = a.mu[n] - b.mu[n];
        sq += d * d;
    }
    return 0.5 * NJ * sigma_part(a.sigma2, b.sigma2) + J * sq / (2.0 * b.sigma2);
}

TvResult tv_distance_detailed(const ParamPoint& a, const ParamPoint& b, std::size_t n_groups,
                              std::size_t n_reps, double tolerance)
{
    check_dims(a, b, n_groups);
    if (!(tolerance > 0.0)) {
        throw InvalidArgument("tolerance must be positive");
    }
    const double J = static_cast<double>(n_reps);
    const double dim = static_cast<double>(n_groups) * J;
    double sq = 0.0;
    for (std::size_t n = 0; n < n_groups; ++n) {
        const double d = a.mu[n] - b.mu[n];
        sq += d * d;
    }
    const double delta = std::sqrt(J * sq);
    const double va = a.sigma2;
    const double vb = b.sigma2;
    const double sa = std::sqrt(va);
    const double sb = std::sqrt(vb);

    if (std::abs(va - vb) <= 1e-14 * std::max(va, vb)) {
        const double s = std::sqrt(0.5 * (va + vb));
        return {std::erf(delta / (2.0 * s) / std::sqrt(2.0)), 1e-15};
    }

    // Coordinates: u along the mean difference (a at 0, b at delta), r^2 the
    // squared norm of the remaining dim - 1 coordinates.
    // f_a > f_b  <=>  c r^2 > h(u).
    const double c = 0.5 / vb - 0.5 / va;
    auto h = [&](double u) {
        return dim * std::log(sa / sb) + u * u / (2.0 * va) - (u - delta) * (u - delta) / (2.0 * vb);
    };

    if (n_groups * n_reps == 1) {
        // One coordinate: the region f_a > f_b is bounded by two roots.
        const double qa = 1.0 / (2.0 * vb) - 1.0 / (2.0 * va);
        const double qb = -delta / vb;
        const double qc = std::log(sb / sa) + delta * delta / (2.0 * vb);
        const double disc = qb * qb - 4.0 * qa * qc;
        if (disc <= 0.0) {
            return {0.0, 1e-15};
        }
        const double root = std::sqrt(disc);
        const double r1 = std::min((-qb - root) / (2.0 * qa), (-qb + root) / (2.0 * qa));
        const double r2 = std::max((-qb - root) / (2.0 * qa), (-qb + root) / (2.0 * qa));
        // log f_a - log f_b = qa u^2 + qb u + qc is positive outside the roots when qa > 0.
        const bool inside = qa < 0.0;
        const double tv = interval_prob(0.0, sa, r1, r2, inside) - interval_prob(delta, sb, r1, r2, inside);
        return {std::clamp(tv, 0.0, 1.0), 1e-15};
    }

    const double half_dof = 0.5 * (dim - 1.0);
    auto prob_given_u = [&](double u, double v) {
        const double thr = h(u) / c;
        if (c > 0.0) {
            return thr <= 0.0 ? 1.0 : boost::math::gamma_q(half_dof, thr / (2.0 * v));
        }
        return thr <= 0.0 ? 0.0 : boost::math::gamma_p(half_dof, thr / (2.0 * v));
    };
    const boost::math::normal_distribution<double> na(0.0, sa);
    const boost::math::normal_distribution<double> nb(delta, sb);
    auto integrand = [&](double u, std::span<double> out) {
        out[0] = boost::math::pdf(na, u) * prob_given_u(u, va) - boost::math::pdf(nb, u) * prob_given_u(u, vb);
    };
    const double span = 40.0;
    std::vector<double> pts{-span * sa, delta - span * sb, 0.0, delta, span * sa, delta + span * sb};
    for (double k : {-4.0, -2.0, -1.0, 1.0, 2.0, 4.0}) {
        pts.push_back(k * sa);
        pts.push_back(delta + k * sb);
    }
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    const auto r = quad::gauss_kronrod(integrand, 1, pts, std::min(tolerance, 1e-8), 4000);
    const double err = r.abs_error[0] + 1e-14;
    if (err > tolerance) {
        throw Error("total variation did not reach tolerance " + std::to_string(tolerance));
    }
    return {std::clamp(r.value[0], 0.0, 1.0), err};
}

double tv_distance(const ParamPoint& a, const ParamPoint& b, std::size_t n_groups, std::size_t n_reps,
                   double tolerance)
{
    return tv_distance_detailed(a, b, n_groups, n_reps, tolerance).value;
}

} // namespace rkl
