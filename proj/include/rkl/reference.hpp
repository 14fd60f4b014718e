#pragma once

// Reference distribution g_x(y) = exp(E[log f(y | theta) | x]) and its
// normalised form. For the Gaussian model log g_x is a quadratic in y, so
// the normalised form is a product of N(mean_n, 1 / precision) densities.

#include "rkl/estimators.hpp"
#include "rkl/model.hpp"
#include "rkl/priors.hpp"

#include <vector>

namespace rkl {

struct ReferenceDistribution {
    std::size_t n_groups = 0;
    std::size_t n_reps = 0;
    /// E[1/sigma^2 | x], shared by every coordinate.
    double precision = 0.0;
    /// Maximisers of log g_x per group.
    std::vector<double> means;
    /// log of the integral of g_x over R^(N x J).
    double log_normalizer = 0.0;
    /// E[log sigma^2 | x]
    double e_log_sigma2 = 0.0;
    /// E[mu_n / sigma^2 | x] and E[mu_n^2 / sigma^2 | x]
    std::vector<double> e_mu_over_sigma2;
    std::vector<double> e_mu_sq_over_sigma2;

    /// log g_x(y), unnormalised.
    double log_g(const Dataset& y) const;
    /// log of the normalised density at y.
    double log_density(const Dataset& y) const;
};

ReferenceDistribution fit_reference(const Dataset& data, const Prior& prior, const EstimateOptions& opts = {});

/// E[log f(y | theta) | x].
double log_g_x(const Dataset& y, const Dataset& data, const Prior& prior, const EstimateOptions& opts = {});

/// D_KL(f_theta || normalised g_x).
double kl_to_reference(const ParamPoint& theta, const ReferenceDistribution& ref);

/// argmin over theta' of D_KL(f_theta' || normalised g_x), by 1-d Brent
/// searches on log sigma^2 and on each mean.
Estimate rkl_via_reference(const ReferenceDistribution& ref, double optimizer_tol = 1e-8);
Estimate rkl_via_reference(const Dataset& data, const Prior& prior, const EstimateOptions& opts = {});

} // namespace rkl
