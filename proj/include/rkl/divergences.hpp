#pragma once

// Divergences between Neyman-Scott likelihoods f_theta on R^(N x J).
//
// Argument convention: kl_*(a, b) = D_KL(f_a || f_b), the expectation taken
// under the first argument.

#include "rkl/model.hpp"

#include <cstddef>

namespace rkl {

/// KL between the single-observation densities of group n.
double kl_single(const ParamPoint& a, const ParamPoint& b, std::size_t group);

/// (NJ/2)[r - 1 - log r] + J |mu_a - mu_b|^2 / (2 sigma_b^2), r = sigma_a^2 / sigma_b^2.
double kl_products(const ParamPoint& a, const ParamPoint& b, std::size_t n_groups, std::size_t n_reps);

struct TvResult {
    double value = 0.0;
    /// Bound on the absolute numerical error of value.
    double abs_error = 0.0;
};

/// Total variation between the NJ-dimensional product Gaussians. Reduced
/// exactly to one dimension along the mean difference; the orthogonal
/// complement enters through a chi-square distribution function.
TvResult tv_distance_detailed(const ParamPoint& a, const ParamPoint& b, std::size_t n_groups,
                              std::size_t n_reps, double tolerance = 1e-8);
double tv_distance(const ParamPoint& a, const ParamPoint& b, std::size_t n_groups, std::size_t n_reps,
                   double tolerance = 1e-8);

} // namespace rkl
